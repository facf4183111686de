#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "floodgnn/mesh.hpp"
#include "floodgnn/mesh_gen.hpp"
#include "floodgnn/swe.hpp"

namespace floodgnn {

/// How one target node reads a source field: a weighted sum over three source
/// nodes. Nodes outside the source triangulation copy their nearest source
/// node (weights {1, 0, 0}, triangle = -1).
struct ProjectionEntry {
    std::int64_t triangle = -1;
    std::array<std::uint32_t, 3> nodes{};
    std::array<double, 3> weights{};

    bool nearest() const { return triangle < 0; }
};

struct ProjectionMap {
    std::string source_hash, target_hash;
    int factor = 1;
    std::vector<ProjectionEntry> entries;  // one per target node

    std::size_t nearest_count() const;
};

/// Map onto arbitrary points; target_hash is left empty.
ProjectionMap build_point_map(const TriMesh& source, std::span<const double> px, std::span<const double> py);

ProjectionMap build_projection_map(const TriMesh& source, const TriMesh& target, int factor = 1);

/// Identity map of a mesh onto itself.
ProjectionMap identity_projection(const TriMesh& mesh);

std::vector<double> project_field(const ProjectionMap& map, std::span<const double> field);

/// Per-snapshot interpolation of h, u, v with h clamped at 0; forcing copied.
/// Throws InvalidInput when the sequence was not produced on the map's source mesh.
StateSequence project_states(const StateSequence& seq, const ProjectionMap& map);

/// Meshes of one valley at several relaxation factors, the first being the
/// fine reference. Coarse meshes carry bed elevation and friction projected
/// from the fine mesh, so every level sees the same terrain.
struct MeshFamily {
    std::vector<int> factors;
    std::vector<TriMesh> meshes;
    std::vector<ProjectionMap> maps;  // fine -> meshes[k]

    std::size_t index_of(int factor) const;
    const TriMesh& mesh(int factor) const { return meshes[index_of(factor)]; }
    const ProjectionMap& map(int factor) const { return maps[index_of(factor)]; }
};

MeshFamily build_mesh_family(const DensitySpec& spec, const ValleyGeometry& geometry, std::uint64_t seed,
                             const std::vector<int>& factors = {1, 2, 4, 8, 16, 32});

}  // namespace floodgnn
