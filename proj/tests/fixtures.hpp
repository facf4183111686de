#pragma once

#include <cmath>
#include <memory>

#include "floodgnn/multimesh.hpp"
#include "floodgnn/surrogate.hpp"
#include "floodgnn/swe.hpp"
#include "support.hpp"

namespace floodgnn::testing {

// ---------------------------------------------------------------------------
// Solver oracles

inline HydraulicState lake(const TriMesh& m, double surface) {
    auto s = HydraulicState::dry(m.node_count());
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        const double h = surface - m.z[i];
        s.h[i] = h >= 1e-3 ? h : 0.0;
    }
    return s;
}

inline double ritter_depth(double x, double x0, double h0, double t, double g) {
    const double c0 = std::sqrt(g * h0);
    const double xi = (x - x0) / t;
    if (xi <= -c0) return h0;
    if (xi >= 2.0 * c0) return 0.0;
    return (2.0 * c0 - xi) * (2.0 * c0 - xi) / (9.0 * g);
}

// Relative L1 error against Ritter over nodes wet in either solution.
inline double dam_break_error(double spacing) {
    const double length = 400.0;
    const int nx = static_cast<int>(std::lround(length / spacing)) + 1;
    TriMesh m = grid_mesh(nx, 3, spacing, spacing);
    const double x0 = 200.0 + 0.5 * spacing, h0 = 1.0;
    SolverConfig cfg;
    cfg.friction = false;
    SweSolver solver(m, cfg);
    auto s = HydraulicState::dry(m.node_count());
    for (std::size_t i = 0; i < m.node_count(); ++i) s.h[i] = m.x[i] < x0 ? h0 : 0.0;
    solver.advance_to(s, BoundaryForcing{}, 20.0);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        const double exact = ritter_depth(m.x[i], x0, h0, 20.0, cfg.gravity);
        if (exact <= 0.0 && s.h[i] <= 0.0) continue;
        num += std::abs(s.h[i] - exact);
        den += exact;
    }
    return num / den;
}

// ---------------------------------------------------------------------------
// Surrogate fixture

struct Fixture {
    TriMesh mesh;
    std::shared_ptr<SimGraph> graph;
    Normalizer norm;
    HydraulicState now, next;
};

inline Normalizer random_normalizer(Rng& rng) {
    Normalizer n;
    auto fill = [&](ChannelStats& s, std::size_t c, bool zero_mean) {
        for (std::size_t k = 0; k < c; ++k) {
            s.mean.push_back(zero_mean ? 0.0 : rng.uniform(-1.0, 1.0));
            s.std.push_back(rng.uniform(0.5, 2.0));
        }
    };
    fill(n.dynamic, 3, false);
    // Discharge in m3/s, so its scale matches the values fed to the fixtures.
    n.dynamic.mean.push_back(rng.uniform(500.0, 1500.0));
    n.dynamic.std.push_back(rng.uniform(200.0, 600.0));
    fill(n.statics, 2, false);
    fill(n.edge, 3, false);
    fill(n.increment, 3, true);
    return n;
}

inline HydraulicState random_state(Rng& rng, std::size_t n) {
    auto s = HydraulicState::dry(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.h[i] = rng.uniform(0.0, 3.0);
        s.u[i] = rng.uniform(-1.0, 1.0);
        s.v[i] = rng.uniform(-1.0, 1.0);
    }
    return s;
}

// 4 x 3 lattice: 12 nodes, one INFLOW and one STAGE node.
inline Fixture make_fixture(std::uint64_t seed) {
    Rng rng(seed);
    Fixture f;
    f.mesh = grid_mesh(4, 3, 10.0, 12.0, &rng, 0.0);
    for (auto& z : f.mesh.z) z = rng.uniform(0.0, 2.0);
    f.mesh.labels[4] = BoundaryLabel::Inflow;
    f.mesh.labels[7] = BoundaryLabel::Stage;
    f.graph = std::make_shared<SimGraph>(make_sim_graph(f.mesh, standard_graph(f.mesh)));
    f.norm = random_normalizer(rng);
    f.now = random_state(rng, f.mesh.node_count());
    f.next = random_state(rng, f.mesh.node_count());
    return f;
}

inline ModelConfig small_config(bool use_q, bool zero_init = false) {
    ModelConfig c;
    c.latent = 8;
    c.blocks = 2;
    c.hidden_layers = 2;
    c.seed = 17;
    c.zero_init_output = zero_init;
    c.schema.use_discharge = use_q;
    return c;
}

}  // namespace floodgnn::testing
