#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "floodgnn/mesh.hpp"

namespace floodgnn {

/// Directed edges (receiver, sender) with relative geometry of the sender seen
/// from the receiver: dx = x_sender - x_receiver, dy likewise, dist = |(dx, dy)|.
/// Messages along an edge are summed at its receiver.
struct DirectedEdgeSet {
    std::vector<std::uint32_t> receiver;
    std::vector<std::uint32_t> sender;
    std::vector<double> dx, dy, dist;

    std::size_t size() const { return receiver.size(); }
    void push(std::uint32_t r, std::uint32_t s, std::span<const double> x, std::span<const double> y);
};

/// Both orientations of every unique mesh edge, ordered by (receiver, sender).
DirectedEdgeSet extract_directed_edges(const TriMesh& mesh);

struct HopRadiusStats {
    std::vector<double> r10;  // per node: 10 x mean outgoing edge length
    std::size_t node_count = 0;
    std::size_t directed_edge_count = 0;
    double mean_edge_length = 0.0;
    double r10_median = 0.0;  // lower midpoint on even counts
    double r10_mean = 0.0;
    double r10_max = 0.0;
};

/// Outgoing edges of node i are those with receiver == i. Throws InvalidInput
/// naming the first node without any edge.
HopRadiusStats hop_radius_stats(const DirectedEdgeSet& edges, std::size_t node_count);

/// Median with the lower-midpoint convention on even counts.
double lower_median(std::vector<double> values);

}  // namespace floodgnn
