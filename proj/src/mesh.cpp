#include "floodgnn/mesh.hpp"

#include <algorithm>
#include <sstream>

#include "floodgnn/common.hpp"
#include "floodgnn/json_util.hpp"

namespace floodgnn {

namespace {
constexpr int kFgmVersion = 1;
}

std::string_view to_string(BoundaryLabel label) {
    switch (label) {
        case BoundaryLabel::Interior: return "INTERIOR";
        case BoundaryLabel::Inflow: return "INFLOW";
        case BoundaryLabel::Stage: return "STAGE";
        case BoundaryLabel::Wall: return "WALL";
    }
    return "INTERIOR";
}

BoundaryLabel boundary_label_from_string(std::string_view s) {
    if (s == "INTERIOR") return BoundaryLabel::Interior;
    if (s == "INFLOW") return BoundaryLabel::Inflow;
    if (s == "STAGE") return BoundaryLabel::Stage;
    if (s == "WALL") return BoundaryLabel::Wall;
    throw InvalidInput("unknown boundary label '" + std::string(s) + "'");
}

double TriMesh::signed_area(std::size_t tri) const {
    const auto& t = triangles[tri];
    return 0.5 * ((x[t[1]] - x[t[0]]) * (y[t[2]] - y[t[0]]) - (x[t[2]] - x[t[0]]) * (y[t[1]] - y[t[0]]));
}

std::vector<MeshEdge> undirected_edges(const TriMesh& mesh) {
    std::vector<std::uint64_t> keys;
    keys.reserve(mesh.triangles.size() * 3);
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            std::uint32_t a = t[k], b = t[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            keys.push_back((static_cast<std::uint64_t>(a) << 32) | b);
        }
    }
    std::sort(keys.begin(), keys.end());
    std::vector<MeshEdge> edges;
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        edges.push_back({static_cast<std::uint32_t>(keys[i] >> 32), static_cast<std::uint32_t>(keys[i] & 0xffffffffu),
                         static_cast<int>(j - i)});
        i = j;
    }
    return edges;
}

void validate_mesh(const TriMesh& mesh) {
    const std::size_t n = mesh.node_count();
    if (n == 0) throw InvalidInput("mesh has no nodes");
    if (mesh.y.size() != n || mesh.z.size() != n || mesh.strickler.size() != n || mesh.labels.size() != n)
        throw InvalidInput("mesh node arrays have inconsistent lengths");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(mesh.strickler[i] > 0.0))
            throw InvalidInput("node " + std::to_string(i) + ": strickler coefficient must be positive");
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        for (auto v : mesh.triangles[t])
            if (v >= n) throw InvalidInput("triangle " + std::to_string(t) + " references node out of range");
        if (!(mesh.signed_area(t) > 0.0))
            throw InvalidInput("triangle " + std::to_string(t) + " has non-positive signed area");
    }
    std::vector<char> on_boundary(n, 0);
    for (const auto& e : undirected_edges(mesh)) {
        if (e.triangle_count > 2)
            throw InvalidInput("non-conforming edge (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                               ") shared by " + std::to_string(e.triangle_count) + " triangles");
        if (e.triangle_count == 1) on_boundary[e.a] = on_boundary[e.b] = 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (mesh.labels[i] != BoundaryLabel::Interior && !on_boundary[i])
            throw InvalidInput("node " + std::to_string(i) + " labelled " + std::string(to_string(mesh.labels[i])) +
                               " is not on a boundary edge");
    }
}

namespace {

void write_array(std::ostringstream& os, const std::vector<double>& v) {
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        os << format_double(v[i]);
    }
    os << ']';
}

std::vector<double> read_array(const nlohmann::json& j, const char* key, std::size_t expected) {
    auto v = j.at(key).get<std::vector<double>>();
    if (expected != 0 && v.size() != expected) throw InvalidInput(std::string("FGM: array '") + key + "' has wrong length");
    return v;
}

}  // namespace

std::string serialize_fgm(const TriMesh& mesh) {
    std::ostringstream os;
    os << "{\"format\":\"FGM\",\"version\":" << kFgmVersion << ",\"nodes\":{\"x\":";
    write_array(os, mesh.x);
    os << ",\"y\":";
    write_array(os, mesh.y);
    os << ",\"z\":";
    write_array(os, mesh.z);
    os << ",\"strickler\":";
    write_array(os, mesh.strickler);
    os << "},\"triangles\":[";
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        if (t) os << ',';
        os << '[' << mesh.triangles[t][0] << ',' << mesh.triangles[t][1] << ',' << mesh.triangles[t][2] << ']';
    }
    os << "],\"boundary_labels\":[";
    for (std::size_t i = 0; i < mesh.labels.size(); ++i) {
        if (i) os << ',';
        os << '"' << to_string(mesh.labels[i]) << '"';
    }
    os << "],\"meta\":" << dump_json(mesh.meta) << "}\n";
    return os.str();
}

TriMesh parse_fgm(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(std::string("FGM: ") + e.what());
    }
    if (j.value("format", "") != "FGM") throw InvalidInput("FGM: missing format tag");
    if (j.value("version", -1) != kFgmVersion) throw InvalidInput("FGM: unsupported version");
    TriMesh m;
    const auto& nodes = j.at("nodes");
    m.x = read_array(nodes, "x", 0);
    m.y = read_array(nodes, "y", m.x.size());
    m.z = read_array(nodes, "z", m.x.size());
    m.strickler = read_array(nodes, "strickler", m.x.size());
    for (const auto& t : j.at("triangles")) m.triangles.push_back(t.get<Triangle>());
    for (const auto& s : j.at("boundary_labels")) m.labels.push_back(boundary_label_from_string(s.get<std::string>()));
    m.meta = j.value("meta", nlohmann::json::object());
    validate_mesh(m);
    return m;
}

void save_mesh(const TriMesh& mesh, const std::string& path) { write_file(path, serialize_fgm(mesh)); }

TriMesh load_mesh(const std::string& path) { return parse_fgm(read_file(path)); }

std::string mesh_hash(const TriMesh& mesh) { return hash_hex(fnv1a64(serialize_fgm(mesh))); }

}  // namespace floodgnn
