#include "floodgnn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "floodgnn/common.hpp"

namespace floodgnn {

void DirectedEdgeSet::push(std::uint32_t r, std::uint32_t s, std::span<const double> x, std::span<const double> y) {
    receiver.push_back(r);
    sender.push_back(s);
    const double ex = x[s] - x[r], ey = y[s] - y[r];
    dx.push_back(ex);
    dy.push_back(ey);
    dist.push_back(std::hypot(ex, ey));
}

DirectedEdgeSet extract_directed_edges(const TriMesh& mesh) {
    const auto und = undirected_edges(mesh);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    pairs.reserve(und.size() * 2);
    for (const auto& e : und) {
        pairs.emplace_back(e.a, e.b);
        pairs.emplace_back(e.b, e.a);
    }
    std::sort(pairs.begin(), pairs.end());
    DirectedEdgeSet out;
    for (auto [r, s] : pairs) out.push(r, s, mesh.x, mesh.y);
    return out;
}

double lower_median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t k = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

HopRadiusStats hop_radius_stats(const DirectedEdgeSet& edges, std::size_t node_count) {
    std::vector<double> sum(node_count, 0.0);
    std::vector<std::size_t> count(node_count, 0);
    double total = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        sum[edges.receiver[e]] += edges.dist[e];
        ++count[edges.receiver[e]];
        total += edges.dist[e];
    }
    HopRadiusStats s;
    s.node_count = node_count;
    s.directed_edge_count = edges.size();
    s.mean_edge_length = edges.size() ? total / static_cast<double>(edges.size()) : 0.0;
    s.r10.resize(node_count);
    double acc = 0.0;
    for (std::size_t i = 0; i < node_count; ++i) {
        if (count[i] == 0) throw InvalidInput("node " + std::to_string(i) + " has no outgoing edge");
        s.r10[i] = 10.0 * sum[i] / static_cast<double>(count[i]);
        acc += s.r10[i];
        s.r10_max = std::max(s.r10_max, s.r10[i]);
    }
    s.r10_mean = node_count ? acc / static_cast<double>(node_count) : 0.0;
    s.r10_median = lower_median(s.r10);
    return s;
}

}  // namespace floodgnn
