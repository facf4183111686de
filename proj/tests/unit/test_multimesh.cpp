#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "../support.hpp"
#include "doctest.h"
#include "floodgnn/kdtree.hpp"
#include "floodgnn/multimesh.hpp"
#include "floodgnn/projection.hpp"

using namespace floodgnn;
using floodgnn::testing::grid_mesh;
using floodgnn::testing::random_mesh;

namespace {

using Pair = std::pair<std::uint32_t, std::uint32_t>;

void check_edge_set(const DirectedEdgeSet& e, const TriMesh& m) {
    std::map<Pair, std::size_t> at;
    for (std::size_t k = 0; k < e.size(); ++k) {
        CHECK(e.receiver[k] != e.sender[k]);
        CHECK(at.emplace(Pair{e.receiver[k], e.sender[k]}, k).second);
        CHECK(e.dx[k] == m.x[e.sender[k]] - m.x[e.receiver[k]]);
        CHECK(e.dy[k] == m.y[e.sender[k]] - m.y[e.receiver[k]]);
    }
    for (std::size_t k = 0; k < e.size(); ++k) CHECK(at.count(Pair{e.sender[k], e.receiver[k]}) == 1);
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double d : v) s += d;
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("node matching") {
    const TriMesh fine = grid_mesh(3, 3, 10.0, 10.0);
    TriMesh coarse = grid_mesh(2, 2, 20.0, 20.0);
    CHECK(match_nodes(coarse, fine) == std::vector<std::uint32_t>{0, 2, 6, 8});
    coarse.x[0] = 5.0;  // halfway between fine nodes 0 and 1
    CHECK(match_nodes(coarse, fine)[0] == 0);

    Rng rng(47);
    TriMesh cloud = grid_mesh(40, 25, 1.0, 1.0, &rng, 0.45);
    TriMesh probes = grid_mesh(10, 10, 4.0, 2.5, &rng, 0.45);
    const auto m = match_nodes(probes, cloud);
    for (std::size_t i = 0; i < probes.node_count(); ++i)
        CHECK(m[i] == nearest_linear(cloud.x, cloud.y, probes.x[i], probes.y[i]));
}

TEST_CASE("shortcut rules: self-loops dropped, base edges not duplicated") {
    const TriMesh base = grid_mesh(3, 3, 10.0, 10.0);
    // Coarse triangle whose corners match fine nodes 0, 2 and 1: edges (0,1) and
    // (1,2) exist in the base graph, (0,2) is new.
    TriMesh coarse;
    coarse.x = {0.0, 20.0, 10.0};
    coarse.y = {0.0, 0.0, 1.0};
    coarse.z.assign(3, 0.0);
    coarse.strickler.assign(3, 30.0);
    coarse.labels.assign(3, BoundaryLabel::Interior);
    coarse.triangles = {{0, 1, 2}};
    const auto g = build_multimesh(base, {&coarse}, {16});
    CHECK(g.shortcut.size() == 2);
    CHECK(g.merged.size() == g.base.size() + 2);
    CHECK(g.shortcut_level == std::vector<int>{16, 16});

    // All three corners collapse onto one fine node: no edge at all.
    TriMesh tiny = coarse;
    tiny.x = {0.0, 1.0, 0.0};
    tiny.y = {0.0, 0.0, 1.0};
    const auto none = build_multimesh(base, {&tiny});
    CHECK(none.shortcut.size() == 0);
    CHECK(none.merged.size() == none.base.size());
    const auto r = multimesh_report(none, base.node_count());
    CHECK(r.base.r10 == r.merged.r10);
    CHECK(r.base.mean_edge_length == r.merged.mean_edge_length);

    // A later level never repeats an earlier shortcut.
    const auto twice = build_multimesh(base, {&coarse, &coarse}, {16, 32});
    CHECK(twice.shortcut.size() == 2);
}

TEST_CASE("merged graphs on random meshes") {
    Rng rng(53);
    for (int trial = 0; trial < 30; ++trial) {
        const TriMesh base = random_mesh(rng, 500);
        const double xmax = *std::max_element(base.x.begin(), base.x.end());
        const double ymax = *std::max_element(base.y.begin(), base.y.end());
        const TriMesh c1 = grid_mesh(4, 4, xmax / 3.0, ymax / 3.0, &rng, 0.2);
        const TriMesh c2 = grid_mesh(3, 2, xmax / 2.0, ymax, &rng, 0.2);
        const auto g = build_multimesh(base, {&c1, &c2}, {16, 32});
        check_edge_set(g.merged, base);
        check_edge_set(g.shortcut, base);
        CHECK(g.merged.size() == g.base.size() + g.shortcut.size());
        CHECK(g.merged.size() >= g.base.size());
        CHECK(g.origin.size() == g.merged.size());
        std::size_t shortcuts = 0;
        for (auto o : g.origin) shortcuts += o == EdgeOrigin::Shortcut;
        CHECK(shortcuts == g.shortcut.size());

        const auto again = build_multimesh(base, {&c1, &c2}, {16, 32});
        CHECK(again.merged.receiver == g.merged.receiver);
        CHECK(again.merged.sender == g.merged.sender);
        CHECK(again.origin == g.origin);

        const auto r = multimesh_report(g, base.node_count());
        CHECK(r.merged.r10_max >= r.base.r10_max);
        for (double d : g.shortcut.dist) CHECK(d >= 0.0);
    }
}

TEST_CASE("desk family: shortcuts lengthen edges and widen hop radii") {
    const MeshFamily f = build_mesh_family(DensitySpec{}, ValleyGeometry{}, 7);
    const auto& base = f.mesh(8);
    const auto g = build_multimesh(base, {&f.mesh(16), &f.mesh(32)}, {16, 32});
    const auto r = multimesh_report(g, base.node_count());
    CHECK(r.merged.mean_edge_length > r.base.mean_edge_length);
    CHECK(r.merged.r10_max > r.base.r10_max);
    CHECK(mean(g.merged.dist) >= mean(g.base.dist));
    CHECK(r.shortcut_max_length > r.base_max_length);
    // The shortcut histogram has mass beyond the longest base edge.
    std::size_t tail = 0;
    for (std::size_t b = 0; b < r.shortcut_histogram.counts.size(); ++b)
        if (r.shortcut_histogram.edges[b] >= r.base_max_length) tail += r.shortcut_histogram.counts[b];
    CHECK(tail > 0);

    const auto path = (std::filesystem::temp_directory_path() / "floodgnn_graph_test.fgg").string();
    save_graph(g, base, path);
    const auto back = load_graph(path, base);
    CHECK(back.merged.receiver == g.merged.receiver);
    CHECK(back.merged.sender == g.merged.sender);
    CHECK(back.merged.dist == g.merged.dist);
    CHECK(back.origin == g.origin);
    CHECK(back.shortcut_level == g.shortcut_level);
    CHECK_THROWS_AS(load_graph(path, f.mesh(16)), InvalidInput);
    std::filesystem::remove(path);
}

TEST_CASE("length histogram") {
    const auto h = length_histogram({0.0, 1.0, 2.5, 9.99, 10.0}, 10.0, 4);
    CHECK(h.edges == std::vector<double>{0.0, 2.5, 5.0, 7.5, 10.0});
    CHECK(h.counts == std::vector<std::size_t>{2, 1, 0, 2});
}
