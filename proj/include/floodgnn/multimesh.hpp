#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floodgnn/graph.hpp"
#include "floodgnn/mesh.hpp"

namespace floodgnn {

enum class EdgeOrigin : std::uint8_t { Base = 0, Shortcut = 1 };

/// Base mesh edges plus long-range shortcuts borrowed from coarser meshes.
/// `merged` holds every edge once, ordered by (receiver, sender), with its
/// origin in `origin`.
struct MultimeshGraph {
    std::string node_hash;  // hash of the base node coordinates
    DirectedEdgeSet base;
    DirectedEdgeSet shortcut;
    std::vector<int> shortcut_level;  // relaxation factor that contributed each shortcut
    DirectedEdgeSet merged;
    std::vector<EdgeOrigin> origin;
};

/// Nearest base node (Euclidean, lowest index on ties) for every coarse node.
std::vector<std::uint32_t> match_nodes(const TriMesh& coarse, const TriMesh& fine);

/// Shortcuts from each coarse mesh in order; a later level never repeats an
/// edge already present. levels[k] labels coarser[k] in shortcut_level.
MultimeshGraph build_multimesh(const TriMesh& base, const std::vector<const TriMesh*>& coarser,
                               const std::vector<int>& levels = {});

/// The base graph alone, in the same structure.
MultimeshGraph standard_graph(const TriMesh& base);

/// Hash of the node coordinates a graph was built on.
std::string node_coordinate_hash(const TriMesh& mesh);

struct LengthHistogram {
    std::vector<double> edges;  // bin boundaries, size = counts + 1
    std::vector<std::size_t> counts;
};

/// Equal-width bins over [0, max_length].
LengthHistogram length_histogram(const std::vector<double>& lengths, double max_length, int bins);

struct MultimeshReport {
    HopRadiusStats base, merged;
    std::size_t shortcut_count = 0;  // directed
    double base_max_length = 0.0;
    double shortcut_max_length = 0.0;
    LengthHistogram base_histogram, shortcut_histogram;  // shared bins
};

MultimeshReport multimesh_report(const MultimeshGraph& g, std::size_t node_count, int bins = 20);
nlohmann::json to_json(const MultimeshReport& r);

// FGG container.
std::string serialize_fgg(const MultimeshGraph& g, const TriMesh& base);
MultimeshGraph parse_fgg(const std::string& bytes, const TriMesh& base);
void save_graph(const MultimeshGraph& g, const TriMesh& base, const std::string& path);
MultimeshGraph load_graph(const std::string& path, const TriMesh& base);

}  // namespace floodgnn
