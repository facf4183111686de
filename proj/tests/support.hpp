#pragma once

#include <cmath>
#include <cstdint>

#include "floodgnn/common.hpp"
#include "floodgnn/mesh.hpp"

namespace floodgnn::testing {

/// nx x ny lattice on [0, (nx-1) dx] x [0, (ny-1) dy], split into CCW triangles
/// along a randomly chosen diagonal per quad when rng is given. Interior nodes
/// move by up to `jitter` of the spacing. Boundary nodes are WALL.
inline TriMesh grid_mesh(int nx, int ny, double dx, double dy, Rng* rng = nullptr, double jitter = 0.0) {
    TriMesh m;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            double px = i * dx, py = j * dy;
            const bool boundary = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
            if (rng && !boundary && jitter > 0.0) {
                px += rng->uniform(-jitter, jitter) * dx;
                py += rng->uniform(-jitter, jitter) * dy;
            }
            m.x.push_back(px);
            m.y.push_back(py);
            m.z.push_back(0.0);
            m.strickler.push_back(30.0);
            m.labels.push_back(boundary ? BoundaryLabel::Wall : BoundaryLabel::Interior);
        }
    }
    auto id = [nx](int i, int j) { return static_cast<std::uint32_t>(j * nx + i); };
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            const auto a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if (rng && rng->below(2) == 1) {
                m.triangles.push_back({a, b, d});
                m.triangles.push_back({b, c, d});
            } else {
                m.triangles.push_back({a, b, c});
                m.triangles.push_back({a, c, d});
            }
        }
    }
    return m;
}

/// Random jittered lattice with at most max_nodes nodes.
inline TriMesh random_mesh(Rng& rng, int max_nodes) {
    const int nx = 2 + static_cast<int>(rng.below(40));
    const int ny_max = std::max(2, max_nodes / nx);
    const int ny = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(ny_max - 1)));
    const double dx = rng.uniform(0.5, 50.0), dy = rng.uniform(0.5, 50.0);
    TriMesh m = grid_mesh(nx, ny, dx, dy, &rng, rng.uniform(0.0, 0.3));
    for (auto& z : m.z) z = rng.uniform(-5.0, 5.0);
    return m;
}

}  // namespace floodgnn::testing
