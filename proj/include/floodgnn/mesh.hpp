#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace floodgnn {

enum class BoundaryLabel : std::uint8_t { Interior = 0, Inflow = 1, Stage = 2, Wall = 3 };

std::string_view to_string(BoundaryLabel label);
BoundaryLabel boundary_label_from_string(std::string_view s);

using Triangle = std::array<std::uint32_t, 3>;

/// Unstructured triangular mesh with per-node terrain and boundary labels.
/// Triangles are counterclockwise.
struct TriMesh {
    std::vector<double> x, y;
    std::vector<double> z;          // bed elevation (m)
    std::vector<double> strickler;  // friction coefficient (m^1/3/s)
    std::vector<Triangle> triangles;
    std::vector<BoundaryLabel> labels;
    nlohmann::json meta = nlohmann::json::object();

    std::size_t node_count() const { return x.size(); }
    double signed_area(std::size_t tri) const;
};

/// Undirected edge with the number of adjacent triangles (1 = boundary).
struct MeshEdge {
    std::uint32_t a, b;  // a < b
    int triangle_count;
};

/// Unique undirected edges sorted by (a, b).
std::vector<MeshEdge> undirected_edges(const TriMesh& mesh);

/// Throws InvalidInput describing the first violated invariant.
void validate_mesh(const TriMesh& mesh);

// FGM: JSON mesh file. Floats are written with 17 significant digits.
std::string serialize_fgm(const TriMesh& mesh);
TriMesh parse_fgm(const std::string& text);
void save_mesh(const TriMesh& mesh, const std::string& path);
TriMesh load_mesh(const std::string& path);

/// Content hash of the canonical FGM serialization.
std::string mesh_hash(const TriMesh& mesh);

}  // namespace floodgnn
