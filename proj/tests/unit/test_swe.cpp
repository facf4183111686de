#include <algorithm>
#include <cmath>

#include "../fixtures.hpp"
#include "doctest.h"
#include "floodgnn/mesh_gen.hpp"
#include "floodgnn/swe.hpp"

using namespace floodgnn;
using namespace floodgnn::testing;

namespace {

TriMesh small_valley() {
    DensitySpec spec;
    spec.relaxation = 8;
    ValleyGeometry geo;
    return build_synthetic_valley_mesh(spec, geo, 7);
}

}  // namespace

TEST_CASE("lake at rest over random bathymetry stays at rest") {
    Rng rng(11);
    TriMesh m = grid_mesh(14, 11, 10.0, 8.0, &rng, 0.25);
    for (auto& z : m.z) z = rng.uniform(0.0, 1.0);
    for (double surface : {1.5, 0.6}) {
        SweSolver solver(m, SolverConfig{});
        const auto init = lake(m, surface);
        auto s = init;
        for (int k = 0; k < 200; ++k) solver.step(s, BoundaryForcing{});
        double worst = 0.0;
        for (std::size_t i = 0; i < m.node_count(); ++i) {
            worst = std::max({worst, std::abs(s.h[i] - init.h[i]), std::abs(s.u[i]), std::abs(s.v[i])});
        }
        CHECK(worst <= 1e-8);
    }
}

TEST_CASE("closed basin conserves volume") {
    Rng rng(5);
    TriMesh m = grid_mesh(12, 9, 7.0, 9.0, &rng, 0.2);
    for (auto& z : m.z) z = rng.uniform(0.0, 0.3);
    auto s = HydraulicState::dry(m.node_count());
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        s.h[i] = rng.uniform(0.5, 2.0);
        s.u[i] = rng.uniform(-0.5, 0.5);
        s.v[i] = rng.uniform(-0.5, 0.5);
    }
    SweSolver solver(m, SolverConfig{});
    const double v0 = solver.volume(s);
    double worst_step = 0.0;
    for (int k = 0; k < 500; ++k) {
        const double before = solver.volume(s);
        solver.step(s, BoundaryForcing{});
        worst_step = std::max(worst_step, std::abs(solver.volume(s) - before) / before);
        for (double h : s.h) REQUIRE(h >= 0.0);
    }
    CHECK(worst_step <= 1e-10);
    CHECK(std::abs(solver.volume(s) - v0) / v0 <= 1e-8);
}

TEST_CASE("dam break matches Ritter and converges with refinement") {
    const double coarse = dam_break_error(10.0);
    const double fine = dam_break_error(5.0);
    MESSAGE("Ritter relative L1: 10 m " << coarse << ", 5 m " << fine);
    CHECK(fine <= 0.05);
    CHECK(fine < coarse);
}

TEST_CASE("boundary conditions") {
    TriMesh m = grid_mesh(5, 4, 10.0, 10.0);
    // Left column inflow, right column stage.
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        if (m.x[i] == 0.0 && m.y[i] > 0.0 && m.y[i] < 30.0) m.labels[i] = BoundaryLabel::Inflow;
        if (m.x[i] == 40.0) m.labels[i] = BoundaryLabel::Stage;
        m.z[i] = m.x[i] == 40.0 && m.y[i] == 0.0 ? 2.0 : 0.5;
    }
    SweSolver solver(m, SolverConfig{});
    auto s = HydraulicState::dry(m.node_count());
    for (auto& h : s.h) h = 1.0;
    for (auto& u : s.u) u = 0.3;
    for (auto& v : s.v) v = 0.2;

    SUBCASE("zero discharge gives zero inflow velocity") {
        solver.apply_boundaries(s, BoundaryForcing::constant(0.0, 1.5), 0.0);
        for (std::size_t i = 0; i < m.node_count(); ++i)
            if (m.labels[i] == BoundaryLabel::Inflow) CHECK((s.u[i] == 0.0 && s.v[i] == 0.0));
    }
    SUBCASE("stage sets depth from the free surface, clamped at the bed") {
        solver.apply_boundaries(s, BoundaryForcing::constant(0.0, 1.5), 0.0);
        for (std::size_t i = 0; i < m.node_count(); ++i) {
            if (m.labels[i] != BoundaryLabel::Stage) continue;
            CHECK(s.h[i] == (m.z[i] == 2.0 ? 0.0 : 1.0));
        }
    }
    SUBCASE("inflow velocity carries the discharge through the wetted section") {
        solver.apply_boundaries(s, BoundaryForcing::constant(20.0, 1.5), 0.0);
        const double area = solver.inflow_wet_area(s);
        CHECK(area == doctest::Approx(10.0));  // one 10 m face between the two inflow nodes, 1 m deep
        for (std::size_t i = 0; i < m.node_count(); ++i) {
            if (m.labels[i] != BoundaryLabel::Inflow) continue;
            CHECK(s.u[i] == doctest::Approx(20.0 / area));
            CHECK(s.v[i] == doctest::Approx(0.0));
        }
    }
    SUBCASE("walls lose their normal velocity") {
        solver.apply_boundaries(s, BoundaryForcing::constant(0.0, 1.5), 0.0);
        for (std::size_t i = 0; i < m.node_count(); ++i) {
            if (m.labels[i] != BoundaryLabel::Wall) continue;
            if (m.x[i] == 0.0 || m.x[i] == 40.0) CHECK((s.u[i] == 0.0 && s.v[i] == 0.0));  // corners
            else CHECK(s.v[i] == 0.0);
        }
    }
    SUBCASE("a dry inflow section under positive discharge is an error") {
        for (auto& h : s.h) h = 0.0;
        CHECK_THROWS_AS(solver.apply_boundaries(s, BoundaryForcing::constant(10.0, 0.0), 0.0), NumericalFailure);
    }
}

TEST_CASE("non-finite states are reported") {
    TriMesh m = grid_mesh(4, 4, 10.0, 10.0);
    SweSolver solver(m, SolverConfig{});
    auto s = HydraulicState::dry(m.node_count());
    for (auto& h : s.h) h = 1.0;
    s.u[5] = std::nan("");
    CHECK_THROWS_AS(solver.step(s, BoundaryForcing{}, 0.1), NumericalFailure);
}

TEST_CASE("spin-up reaches a balanced steady state and events record every stride") {
    const TriMesh m = small_valley();
    SolverConfig cfg;
    const auto init = initialize_domain(m, cfg);
    CHECK(init.t == 0.0);
    for (double h : init.h) CHECK(h >= 0.0);

    SweSolver solver(m, cfg);
    auto s = init;
    const auto forcing = BoundaryForcing::constant(cfg.spinup_discharge, cfg.spinup_stage);
    solver.apply_boundaries(s, forcing, 0.0);
    // Average the boundary fluxes over a stride to smooth out step noise.
    double in = 0.0, out = 0.0, elapsed = 0.0;
    while (s.t < cfg.output_stride) {
        const auto rep = solver.step(s, forcing, cfg.output_stride - s.t);
        in += rep.inflow_rate * rep.dt;
        out += rep.outflow_rate * rep.dt;
        elapsed += rep.dt;
    }
    MESSAGE("mean inflow " << in / elapsed << " outflow " << out / elapsed);
    CHECK(std::abs(in - out) / in <= 0.02);

    Hydrograph constant{kOutputStride, std::vector<double>(13, cfg.spinup_discharge), {}, {}};
    const auto seq = run_event(m, init, constant, [&](double) { return cfg.spinup_stage; }, cfg, 6 * 3600.0);
    REQUIRE(seq.size() == 13);
    for (std::size_t k = 0; k < seq.size(); ++k) {
        CHECK(seq.snapshots[k].t == static_cast<double>(k) * kOutputStride);
        CHECK(seq.discharge[k] == cfg.spinup_discharge);
        CHECK(seq.stage[k] == cfg.spinup_stage);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < m.node_count(); ++i) {
            num += std::abs(seq.snapshots[k].h[i] - init.h[i]);
            den += init.h[i];
        }
        CHECK(num / den < 0.01);
    }

    const auto again = run_event(m, init, constant, [&](double) { return cfg.spinup_stage; }, cfg, 6 * 3600.0);
    CHECK(serialize_fgb(again) == serialize_fgb(seq));
    CHECK(serialize_fgb(parse_fgb(serialize_fgb(seq))) == serialize_fgb(seq));
}

TEST_CASE("40 h horizon gives 81 snapshots") {
    TriMesh m = grid_mesh(3, 3, 10.0, 10.0);
    Hydrograph none{kOutputStride, {0.0, 0.0}, {}, {}};
    const auto seq = run_event(m, HydraulicState::dry(m.node_count()), none, [](double) { return 0.0; }, SolverConfig{},
                               40 * 3600.0);
    CHECK(seq.size() == 81);
}
