#include "floodgnn/projection.hpp"

#include <algorithm>
#include <iostream>

#include "floodgnn/common.hpp"
#include "floodgnn/kdtree.hpp"
#include "floodgnn/locate.hpp"

namespace floodgnn {

std::size_t ProjectionMap::nearest_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.nearest(); }));
}

ProjectionMap build_point_map(const TriMesh& source, std::span<const double> px, std::span<const double> py) {
    ProjectionMap map;
    map.source_hash = mesh_hash(source);
    const auto hits = locate_points(source, px, py);
    std::optional<KdTree> tree;
    map.entries.resize(px.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        auto& e = map.entries[i];
        if (hits[i]) {
            e.triangle = hits[i]->triangle;
            e.nodes = source.triangles[hits[i]->triangle];
            e.weights = hits[i]->weights;
            continue;
        }
        if (!tree) tree.emplace(source.x, source.y);
        const auto k = tree->nearest(px[i], py[i]);
        e.nodes = {k, k, k};
        e.weights = {1.0, 0.0, 0.0};
    }
    return map;
}

ProjectionMap build_projection_map(const TriMesh& source, const TriMesh& target, int factor) {
    ProjectionMap map = build_point_map(source, target.x, target.y);
    map.target_hash = mesh_hash(target);
    map.factor = factor;
    return map;
}

ProjectionMap identity_projection(const TriMesh& mesh) {
    ProjectionMap map;
    map.source_hash = map.target_hash = mesh_hash(mesh);
    map.entries.resize(mesh.node_count());
    for (std::uint32_t i = 0; i < mesh.node_count(); ++i) {
        auto& e = map.entries[i];
        e.nodes = {i, i, i};
        e.weights = {1.0, 0.0, 0.0};
    }
    return map;
}

std::vector<double> project_field(const ProjectionMap& map, std::span<const double> field) {
    std::vector<double> out(map.entries.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& e = map.entries[i];
        if (e.nearest()) {
            out[i] = field[e.nodes[0]];
            continue;
        }
        out[i] = e.weights[0] * field[e.nodes[0]] + e.weights[1] * field[e.nodes[1]] + e.weights[2] * field[e.nodes[2]];
    }
    return out;
}

StateSequence project_states(const StateSequence& seq, const ProjectionMap& map) {
    if (seq.mesh_hash != map.source_hash)
        throw InvalidInput("sequence mesh " + seq.mesh_hash + " does not match projection source " + map.source_hash);
    StateSequence out;
    out.mesh_hash = map.target_hash;
    out.stride = seq.stride;
    out.discharge = seq.discharge;
    out.stage = seq.stage;
    out.meta = seq.meta;
    out.meta["source_mesh_hash"] = map.source_hash;
    out.meta["target_mesh_hash"] = map.target_hash;
    out.meta["factor"] = map.factor;
    for (const auto& s : seq.snapshots) {
        HydraulicState p;
        p.t = s.t;
        p.h = project_field(map, s.h);
        p.u = project_field(map, s.u);
        p.v = project_field(map, s.v);
        for (auto& h : p.h) h = std::max(h, 0.0);
        out.snapshots.push_back(std::move(p));
    }
    return out;
}

std::size_t MeshFamily::index_of(int factor) const {
    const auto it = std::find(factors.begin(), factors.end(), factor);
    if (it == factors.end()) throw InvalidInput("mesh family has no factor " + std::to_string(factor));
    return static_cast<std::size_t>(it - factors.begin());
}

MeshFamily build_mesh_family(const DensitySpec& spec, const ValleyGeometry& geometry, std::uint64_t seed,
                             const std::vector<int>& factors) {
    if (factors.empty()) throw InvalidInput("mesh family needs at least one factor");
    if (!std::is_sorted(factors.begin(), factors.end()) ||
        std::adjacent_find(factors.begin(), factors.end()) != factors.end())
        throw InvalidInput("relaxation factors must be strictly increasing");
    MeshFamily fam;
    fam.factors = factors;
    for (int f : factors) {
        DensitySpec s = spec;
        s.relaxation = f;
        fam.meshes.push_back(build_synthetic_valley_mesh(s, geometry, seed));
    }
    const TriMesh& fine = fam.meshes.front();
    for (std::size_t k = 0; k < factors.size(); ++k) {
        TriMesh& m = fam.meshes[k];
        if (k > 0) {
            if (m.node_count() >= fam.meshes[k - 1].node_count())
                throw InvalidInput("node count does not decrease from factor " + std::to_string(factors[k - 1]) +
                                   " to factor " + std::to_string(factors[k]));
            const auto pre = build_projection_map(fine, m, factors[k]);
            m.z = project_field(pre, fine.z);
            m.strickler = project_field(pre, fine.strickler);
            if (pre.nearest_count() > 0)
                std::clog << "projection to factor " << factors[k] << ": " << pre.nearest_count()
                          << " nodes outside the fine mesh use the nearest fine node\n";
        }
        // Built after the terrain update so the target hash is final.
        fam.maps.push_back(k == 0 ? identity_projection(m) : build_projection_map(fine, m, factors[k]));
    }
    return fam;
}

}  // namespace floodgnn
