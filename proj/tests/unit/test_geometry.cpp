#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "../support.hpp"
#include "doctest.h"
#include "floodgnn/graph.hpp"
#include "floodgnn/kdtree.hpp"
#include "floodgnn/locate.hpp"
#include "floodgnn/mesh.hpp"
#include "floodgnn/mesh_gen.hpp"

using namespace floodgnn;
using floodgnn::testing::grid_mesh;
using floodgnn::testing::random_mesh;

namespace {

TriMesh triangle_mesh(std::vector<double> x, std::vector<double> y, std::vector<Triangle> tris) {
    TriMesh m;
    m.x = std::move(x);
    m.y = std::move(y);
    m.z.assign(m.x.size(), 0.0);
    m.strickler.assign(m.x.size(), 25.0);
    m.labels.assign(m.x.size(), BoundaryLabel::Interior);
    m.triangles = std::move(tris);
    return m;
}

// Ordered pairs of every triangle side, both ways.
std::set<std::pair<std::uint32_t, std::uint32_t>> brute_pairs(const TriMesh& m) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> s;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            s.insert({t[k], t[(k + 1) % 3]});
            s.insert({t[(k + 1) % 3], t[k]});
        }
    return s;
}

DensitySpec uniform_spec(double spacing, int factor) {
    DensitySpec s;
    s.channel_spacing = s.urban_spacing = s.floodplain_spacing = spacing;
    s.relaxation = factor;
    return s;
}

ValleyGeometry rectangle(double length, double width) {
    ValleyGeometry g;
    g.length = length;
    g.width = width;
    return g;
}

}  // namespace

TEST_CASE("directed edges of small meshes") {
    const TriMesh one = triangle_mesh({0.0, 3.0, 0.0}, {0.0, 4.0, 4.0}, {{0, 1, 2}});
    const auto e1 = extract_directed_edges(one);
    CHECK(e1.size() == 6);
    for (std::size_t k = 0; k < e1.size(); ++k) {
        if (e1.receiver[k] == 0 && e1.sender[k] == 1) {
            CHECK(e1.dx[k] == 3.0);
            CHECK(e1.dy[k] == 4.0);
            CHECK(e1.dist[k] == 5.0);
        }
        if (e1.receiver[k] == 1 && e1.sender[k] == 0) {
            CHECK(e1.dx[k] == -3.0);
            CHECK(e1.dy[k] == -4.0);
            CHECK(e1.dist[k] == 5.0);
        }
    }
    const TriMesh two = triangle_mesh({0.0, 1.0, 1.0, 0.0}, {0.0, 0.0, 1.0, 1.0}, {{0, 1, 2}, {0, 2, 3}});
    CHECK(extract_directed_edges(two).size() == 10);
}

TEST_CASE("directed edges match brute force, antisymmetry and Euler counts") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const TriMesh m = random_mesh(rng, 400);
        const auto e = extract_directed_edges(m);
        const auto expect = brute_pairs(m);
        REQUIRE(e.size() == expect.size());
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> at;
        for (std::size_t k = 0; k < e.size(); ++k) {
            CHECK(e.receiver[k] != e.sender[k]);
            CHECK(at.emplace(std::make_pair(e.receiver[k], e.sender[k]), k).second);
            if (k > 0)
                CHECK(std::make_pair(e.receiver[k - 1], e.sender[k - 1]) < std::make_pair(e.receiver[k], e.sender[k]));
        }
        for (const auto& p : expect) CHECK(at.count(p) == 1);
        for (std::size_t k = 0; k < e.size(); ++k) {
            const std::size_t r = at.at({e.sender[k], e.receiver[k]});
            CHECK(e.dx[r] == -e.dx[k]);
            CHECK(e.dy[r] == -e.dy[k]);
            CHECK(e.dist[r] == e.dist[k]);
            const long double ref = std::hypot(static_cast<long double>(e.dx[k]), static_cast<long double>(e.dy[k]));
            CHECK(std::abs(static_cast<long double>(e.dist[k]) - ref) <= 1e-12L * ref);
        }
        const auto und = undirected_edges(m);
        std::size_t boundary = 0;
        for (const auto& u : und) boundary += u.triangle_count == 1;
        CHECK(2 * und.size() == 3 * m.triangles.size() + boundary);
        CHECK(e.size() == 2 * und.size());
    }
}

TEST_CASE("hop radius statistics") {
    // Path 0 - 1 - 2 with lengths 2 and 4: r10 = 20, 30, 40.
    const std::vector<double> x = {0.0, 2.0, 6.0}, y = {0.0, 0.0, 0.0};
    DirectedEdgeSet e;
    e.push(0, 1, x, y);
    e.push(1, 0, x, y);
    e.push(1, 2, x, y);
    e.push(2, 1, x, y);
    const auto s = hop_radius_stats(e, 3);
    CHECK(s.r10 == std::vector<double>{20.0, 30.0, 40.0});
    CHECK(s.r10_median == 30.0);
    CHECK(s.r10_mean == 30.0);
    CHECK(s.r10_max == 40.0);
    CHECK(s.mean_edge_length == 3.0);
    CHECK(s.directed_edge_count == 4);

    // Outgoing lengths {1, 2, 3} at node 0.
    const std::vector<double> sx = {0.0, 1.0, 0.0, -3.0}, sy = {0.0, 0.0, 2.0, 0.0};
    DirectedEdgeSet star;
    for (std::uint32_t k = 1; k <= 3; ++k) {
        star.push(0, k, sx, sy);
        star.push(k, 0, sx, sy);
    }
    CHECK(hop_radius_stats(star, 4).r10[0] == doctest::Approx(20.0));

    const TriMesh uni = grid_mesh(2, 2, 7.0, 7.0);
    DirectedEdgeSet sq;  // the square's four sides only
    for (auto [a, b] : std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}, {1, 3}, {3, 2}, {2, 0}}) {
        sq.push(a, b, uni.x, uni.y);
        sq.push(b, a, uni.x, uni.y);
    }
    const auto u = hop_radius_stats(sq, 4);
    CHECK(u.r10_median == 70.0);
    CHECK(u.r10_mean == 70.0);
    CHECK(u.r10_max == 70.0);

    CHECK(lower_median({4.0, 1.0, 3.0, 2.0}) == 2.0);
    CHECK(lower_median({5.0, 1.0, 3.0}) == 3.0);

    DirectedEdgeSet isolated;
    isolated.push(0, 1, x, y);
    isolated.push(1, 0, x, y);
    try {
        hop_radius_stats(isolated, 3);
        FAIL("expected an error");
    } catch (const InvalidInput& err) {
        CHECK(std::string(err.what()).find('2') != std::string::npos);
    }
}

TEST_CASE("hop radius statistics match a brute-force loop") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const TriMesh m = random_mesh(rng, 1000);
        const auto e = extract_directed_edges(m);
        const auto s = hop_radius_stats(e, m.node_count());
        std::vector<double> r10(m.node_count());
        double total = 0.0;
        for (std::size_t i = 0; i < m.node_count(); ++i) {
            double sum = 0.0;
            int count = 0;
            for (std::size_t k = 0; k < e.size(); ++k)
                if (e.receiver[k] == i) {
                    sum += std::hypot(m.x[e.sender[k]] - m.x[i], m.y[e.sender[k]] - m.y[i]);
                    ++count;
                }
            r10[i] = 10.0 * sum / count;
            CHECK(s.r10[i] == doctest::Approx(r10[i]).epsilon(1e-12));
        }
        for (double d : e.dist) total += d;
        CHECK(s.mean_edge_length == doctest::Approx(total / static_cast<double>(e.size())).epsilon(1e-12));
        std::vector<double> sorted = r10;
        std::sort(sorted.begin(), sorted.end());
        CHECK(s.r10_median == doctest::Approx(sorted[(sorted.size() - 1) / 2]).epsilon(1e-12));
        CHECK(s.r10_max == doctest::Approx(sorted.back()).epsilon(1e-12));
        CHECK(s.r10_median <= s.r10_max);
    }
}

TEST_CASE("k-d tree nearest equals linear scan, ties to the lowest index") {
    Rng rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.below(1000));
        std::vector<double> x(n), y(n);
        const bool lattice = trial % 2 == 0;  // integer points: duplicates and exact ties
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = lattice ? static_cast<double>(rng.below(12)) : rng.uniform(-100.0, 100.0);
            y[i] = lattice ? static_cast<double>(rng.below(12)) : rng.uniform(-100.0, 100.0);
        }
        const KdTree tree(x, y);
        for (int q = 0; q < 1000; ++q) {
            const double px = lattice ? 0.5 * static_cast<double>(rng.below(26)) - 0.5 : rng.uniform(-120.0, 120.0);
            const double py = lattice ? 0.5 * static_cast<double>(rng.below(26)) - 0.5 : rng.uniform(-120.0, 120.0);
            REQUIRE(tree.nearest(px, py) == nearest_linear(x, y, px, py));
        }
    }
    const std::vector<double> x = {1.0, -1.0, 0.0}, y = {0.0, 0.0, 5.0};
    CHECK(KdTree(x, y).nearest(0.0, 0.0) == 0);
    CHECK(KdTree(x, y).nearest(-1.0, 0.0) == 1);
}

TEST_CASE("point location") {
    const TriMesh one = triangle_mesh({0.0, 3.0, 0.0}, {0.0, 0.0, 3.0}, {{0, 1, 2}});
    const std::vector<double> px = {1.0, 3.0, 5.0, 0.0}, py = {1.0, 0.0, 5.0, 0.0};
    const auto loc = locate_points(one, px, py);
    REQUIRE(loc[0]);
    for (double w : loc[0]->weights) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    REQUIRE(loc[1]);
    CHECK(loc[1]->weights[1] == 1.0);
    CHECK(loc[1]->weights[0] == 0.0);
    CHECK(loc[1]->weights[2] == 0.0);
    CHECK_FALSE(loc[2]);
    REQUIRE(loc[3]);

    // Shared edge: lowest triangle index wins.
    const TriMesh two = triangle_mesh({0.0, 1.0, 1.0, 0.0}, {0.0, 0.0, 1.0, 1.0}, {{0, 1, 2}, {0, 2, 3}});
    const std::vector<double> mx = {0.5}, my = {0.5};
    CHECK(locate_points(two, mx, my)[0]->triangle == 0);

    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const TriMesh m = random_mesh(rng, 600);
        std::vector<double> qx(300), qy(300);
        double xmax = *std::max_element(m.x.begin(), m.x.end()), ymax = *std::max_element(m.y.begin(), m.y.end());
        for (std::size_t k = 0; k < qx.size(); ++k) {
            qx[k] = rng.uniform(-0.1 * xmax, 1.1 * xmax);
            qy[k] = rng.uniform(-0.1 * ymax, 1.1 * ymax);
        }
        const auto found = locate_points(m, qx, qy);
        for (std::size_t k = 0; k < qx.size(); ++k) {
            const bool in_box = qx[k] >= 0.0 && qx[k] <= xmax && qy[k] >= 0.0 && qy[k] <= ymax;
            CHECK(static_cast<bool>(found[k]) == in_box);  // lattice boundary nodes are not jittered
            if (!found[k]) continue;
            const auto& t = m.triangles[found[k]->triangle];
            const auto& w = found[k]->weights;
            double sx = 0.0, sy = 0.0;
            for (int v = 0; v < 3; ++v) {
                CHECK(w[v] >= -kInsideTolerance);
                sx += w[v] * m.x[t[v]];
                sy += w[v] * m.y[t[v]];
            }
            CHECK(std::abs(w[0] + w[1] + w[2] - 1.0) <= 1e-10);
            CHECK(std::abs(sx - qx[k]) <= 1e-8);
            CHECK(std::abs(sy - qy[k]) <= 1e-8);
            for (std::size_t other = 0; other < found[k]->triangle; ++other) {
                const auto b = barycentric(m, other, qx[k], qy[k]);
                CHECK_FALSE((b[0] >= -kInsideTolerance && b[1] >= -kInsideTolerance && b[2] >= -kInsideTolerance));
            }
        }
    }
}

TEST_CASE("mesh validation rejects broken meshes") {
    const TriMesh ok = triangle_mesh({0.0, 1.0, 1.0, 0.0}, {0.0, 0.0, 1.0, 1.0}, {{0, 1, 2}, {0, 2, 3}});
    CHECK_NOTHROW(validate_mesh(ok));
    TriMesh bad = ok;
    bad.triangles[1] = {0, 2, 7};
    CHECK_THROWS_AS(validate_mesh(bad), InvalidInput);
    bad = ok;
    bad.triangles[1] = {0, 3, 2};  // clockwise
    CHECK_THROWS_AS(validate_mesh(bad), InvalidInput);
    bad = ok;
    bad.strickler[2] = 0.0;
    CHECK_THROWS_AS(validate_mesh(bad), InvalidInput);
    // Three triangles on edge (0, 2).
    bad = triangle_mesh({0.0, 1.0, 1.0, 0.0, 2.0}, {0.0, 0.0, 1.0, 1.0, 0.0}, {{0, 1, 2}, {0, 2, 3}, {0, 4, 2}});
    CHECK_THROWS_AS(validate_mesh(bad), InvalidInput);
    // Interior node carrying a boundary label.
    TriMesh fan = grid_mesh(3, 3, 1.0, 1.0);
    fan.labels[4] = BoundaryLabel::Inflow;
    CHECK_THROWS_AS(validate_mesh(fan), InvalidInput);
}

TEST_CASE("synthetic valley meshes") {
    const TriMesh m = build_synthetic_valley_mesh(uniform_spec(50.0, 1), rectangle(1000.0, 400.0), 4);
    CHECK_NOTHROW(validate_mesh(m));
    CHECK(m.node_count() >= 160);
    CHECK(m.node_count() <= 220);
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        CHECK(m.x[i] >= 0.0);
        CHECK(m.x[i] <= 1000.0);
        CHECK(m.y[i] >= 0.0);
        CHECK(m.y[i] <= 400.0);
    }
    for (std::size_t t = 0; t < m.triangles.size(); ++t) CHECK(m.signed_area(t) > 0.0);
    const TriMesh coarse = build_synthetic_valley_mesh(uniform_spec(50.0, 8), rectangle(1000.0, 400.0), 4);
    CHECK(coarse.node_count() < m.node_count());

    CHECK_THROWS_AS(build_synthetic_valley_mesh(uniform_spec(50.0, 1), rectangle(0.0, 400.0), 4), InvalidInput);
    CHECK_THROWS_AS(build_synthetic_valley_mesh(uniform_spec(50.0, 16), rectangle(1000.0, 400.0), 4), InvalidInput);
    CHECK_THROWS_AS(build_synthetic_valley_mesh(uniform_spec(50.0, 3), rectangle(1000.0, 400.0), 4), InvalidInput);

    // Desk valley: labels, terrain and local edge lengths.
    const DensitySpec desk;
    const ValleyGeometry g;
    const TriMesh v = build_synthetic_valley_mesh(desk, g, 7);
    CHECK_NOTHROW(validate_mesh(v));
    std::size_t inflow = 0, stage = 0, wall = 0;
    for (std::size_t i = 0; i < v.node_count(); ++i) {
        switch (v.labels[i]) {
            case BoundaryLabel::Inflow:
                ++inflow;
                CHECK(v.x[i] == g.x0);
                CHECK(std::abs(v.y[i] - g.axis_y()) <= desk.channel_half_width);
                break;
            case BoundaryLabel::Stage:
                ++stage;
                CHECK(v.x[i] == g.x0 + g.length);
                break;
            case BoundaryLabel::Wall: ++wall; break;
            default: break;
        }
    }
    CHECK(inflow > 0);
    CHECK(stage > 0);
    CHECK(wall > 0);
    CHECK(g.bed_elevation(0.0, g.axis_y()) > g.bed_elevation(g.length, g.axis_y()));
    CHECK(g.bed_elevation(1500.0, g.axis_y()) < g.bed_elevation(1500.0, g.axis_y() + 300.0));
    const auto e = extract_directed_edges(v);
    const auto r = hop_radius_stats(e, v.node_count());
    for (std::size_t i = 0; i < v.node_count(); ++i) {
        const double target = desk.target_length(std::abs(v.y[i] - g.axis_y()));
        const double mean = r.r10[i] / 10.0;
        CHECK(mean >= 0.5 * target);
        CHECK(mean <= 2.0 * target);
    }

    const TriMesh again = build_synthetic_valley_mesh(desk, g, 7);
    CHECK(serialize_fgm(again) == serialize_fgm(v));
    CHECK(serialize_fgm(build_synthetic_valley_mesh(desk, g, 8)) != serialize_fgm(v));
}

TEST_CASE("mesh files round trip exactly") {
    Rng rng(37);
    TriMesh m = random_mesh(rng, 300);
    m.labels[0] = BoundaryLabel::Inflow;
    m.labels[1] = BoundaryLabel::Stage;
    m.meta = {{"seed", 37}};
    const auto path = (std::filesystem::temp_directory_path() / "floodgnn_mesh_test.fgm").string();
    save_mesh(m, path);
    const TriMesh back = load_mesh(path);
    CHECK(back.x == m.x);
    CHECK(back.y == m.y);
    CHECK(back.z == m.z);
    CHECK(back.strickler == m.strickler);
    CHECK(back.triangles == m.triangles);
    CHECK(back.labels == m.labels);
    CHECK(mesh_hash(back) == mesh_hash(m));
    CHECK(serialize_fgm(back) == serialize_fgm(m));
    std::filesystem::remove(path);

    CHECK_THROWS_AS(parse_fgm("{\"format\": \"nope\"}"), InvalidInput);
    CHECK_THROWS_AS(parse_fgm("not json"), InvalidInput);
}
