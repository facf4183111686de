#include "floodgnn/multimesh.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "floodgnn/common.hpp"
#include "floodgnn/json_util.hpp"
#include "floodgnn/kdtree.hpp"

namespace floodgnn {

namespace {

constexpr std::uint32_t kFggVersion = 1;

using Pair = std::pair<std::uint32_t, std::uint32_t>;  // (receiver, sender)

void merge(MultimeshGraph& g, const TriMesh& base) {
    std::vector<std::pair<Pair, EdgeOrigin>> all;
    all.reserve(g.base.size() + g.shortcut.size());
    for (std::size_t k = 0; k < g.base.size(); ++k) all.push_back({{g.base.receiver[k], g.base.sender[k]}, EdgeOrigin::Base});
    for (std::size_t k = 0; k < g.shortcut.size(); ++k)
        all.push_back({{g.shortcut.receiver[k], g.shortcut.sender[k]}, EdgeOrigin::Shortcut});
    std::sort(all.begin(), all.end());
    g.merged = {};
    g.origin.clear();
    for (const auto& [p, o] : all) {
        g.merged.push(p.first, p.second, base.x, base.y);
        g.origin.push_back(o);
    }
}

}  // namespace

std::vector<std::uint32_t> match_nodes(const TriMesh& coarse, const TriMesh& fine) {
    const KdTree tree(fine.x, fine.y);
    std::vector<std::uint32_t> out(coarse.node_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = tree.nearest(coarse.x[i], coarse.y[i]);
    return out;
}

std::string node_coordinate_hash(const TriMesh& mesh) {
    ByteWriter w;
    w.f64_array(mesh.x);
    w.f64_array(mesh.y);
    return hash_hex(fnv1a64(w.bytes()));
}

MultimeshGraph standard_graph(const TriMesh& base) { return build_multimesh(base, {}); }

MultimeshGraph build_multimesh(const TriMesh& base, const std::vector<const TriMesh*>& coarser,
                               const std::vector<int>& levels) {
    if (!levels.empty() && levels.size() != coarser.size()) throw InvalidInput("one level label per coarse mesh expected");
    MultimeshGraph g;
    g.node_hash = node_coordinate_hash(base);
    g.base = extract_directed_edges(base);
    std::set<Pair> seen;
    for (std::size_t k = 0; k < g.base.size(); ++k) seen.insert({g.base.receiver[k], g.base.sender[k]});

    for (std::size_t level = 0; level < coarser.size(); ++level) {
        const TriMesh& coarse = *coarser[level];
        const auto match = match_nodes(coarse, base);
        std::vector<Pair> added;
        for (const auto& e : undirected_edges(coarse)) {
            const auto a = match[e.a], b = match[e.b];
            if (a == b) continue;
            for (const Pair& p : {Pair{a, b}, Pair{b, a}})
                if (seen.insert(p).second) added.push_back(p);
        }
        std::sort(added.begin(), added.end());
        for (const auto& [r, s] : added) {
            g.shortcut.push(r, s, base.x, base.y);
            g.shortcut_level.push_back(levels.empty() ? static_cast<int>(level) : levels[level]);
        }
    }
    merge(g, base);
    return g;
}

LengthHistogram length_histogram(const std::vector<double>& lengths, double max_length, int bins) {
    if (bins < 1) throw InvalidInput("histogram needs at least one bin");
    LengthHistogram h;
    const double width = max_length > 0.0 ? max_length / bins : 1.0;
    for (int b = 0; b <= bins; ++b) h.edges.push_back(width * b);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double l : lengths) {
        auto b = static_cast<std::size_t>(l / width);
        h.counts[std::min(b, h.counts.size() - 1)]++;
    }
    return h;
}

MultimeshReport multimesh_report(const MultimeshGraph& g, std::size_t node_count, int bins) {
    MultimeshReport r;
    r.base = hop_radius_stats(g.base, node_count);
    r.merged = hop_radius_stats(g.merged, node_count);
    r.shortcut_count = g.shortcut.size();
    if (!g.base.dist.empty()) r.base_max_length = *std::max_element(g.base.dist.begin(), g.base.dist.end());
    if (!g.shortcut.dist.empty()) r.shortcut_max_length = *std::max_element(g.shortcut.dist.begin(), g.shortcut.dist.end());
    const double top = std::max(r.base_max_length, r.shortcut_max_length);
    r.base_histogram = length_histogram(g.base.dist, top, bins);
    r.shortcut_histogram = length_histogram(g.shortcut.dist, top, bins);
    return r;
}

namespace {

nlohmann::json stats_json(const HopRadiusStats& s) {
    return {{"nodes", s.node_count},
            {"directed_edges", s.directed_edge_count},
            {"mean_edge_length", s.mean_edge_length},
            {"r10_median", s.r10_median},
            {"r10_mean", s.r10_mean},
            {"r10_max", s.r10_max}};
}

}  // namespace

nlohmann::json to_json(const MultimeshReport& r) {
    return {{"base", stats_json(r.base)},
            {"merged", stats_json(r.merged)},
            {"shortcut_count", r.shortcut_count},
            {"base_max_length", r.base_max_length},
            {"shortcut_max_length", r.shortcut_max_length},
            {"histogram",
             {{"bin_edges", r.base_histogram.edges},
              {"base_counts", r.base_histogram.counts},
              {"shortcut_counts", r.shortcut_histogram.counts}}}};
}

std::string serialize_fgg(const MultimeshGraph& g, const TriMesh& base) {
    nlohmann::json meta = {{"format", "FGG"},
                           {"node_hash", node_coordinate_hash(base)},
                           {"node_count", base.node_count()},
                           {"base_edges", g.base.size()},
                           {"shortcut_edges", g.shortcut.size()}};
    ByteWriter w;
    write_container_header(w, "FGG1", kFggVersion, dump_json(meta));
    for (std::size_t k = 0; k < g.base.size(); ++k) {
        w.u32(g.base.receiver[k]);
        w.u32(g.base.sender[k]);
    }
    for (std::size_t k = 0; k < g.shortcut.size(); ++k) {
        w.u32(g.shortcut.receiver[k]);
        w.u32(g.shortcut.sender[k]);
        w.u32(static_cast<std::uint32_t>(g.shortcut_level[k]));
        w.u8(static_cast<std::uint8_t>(EdgeOrigin::Shortcut));
    }
    return w.bytes();
}

MultimeshGraph parse_fgg(const std::string& bytes, const TriMesh& base) {
    ByteReader r(bytes);
    const auto meta = nlohmann::json::parse(read_container_header(r, "FGG1", kFggVersion));
    MultimeshGraph g;
    g.node_hash = meta.at("node_hash").get<std::string>();
    if (g.node_hash != node_coordinate_hash(base)) throw InvalidInput("FGG: graph was built on different node coordinates");
    const auto nb = meta.at("base_edges").get<std::size_t>();
    const auto ns = meta.at("shortcut_edges").get<std::size_t>();
    const auto n = base.node_count();
    auto node = [&](std::uint32_t v) {
        if (v >= n) throw InvalidInput("FGG: node index out of range");
        return v;
    };
    for (std::size_t k = 0; k < nb; ++k) {
        const auto rcv = node(r.u32());
        const auto snd = node(r.u32());
        g.base.push(rcv, snd, base.x, base.y);
    }
    for (std::size_t k = 0; k < ns; ++k) {
        const auto rcv = node(r.u32());
        const auto snd = node(r.u32());
        g.shortcut.push(rcv, snd, base.x, base.y);
        g.shortcut_level.push_back(static_cast<int>(r.u32()));
        if (r.u8() != static_cast<std::uint8_t>(EdgeOrigin::Shortcut)) throw InvalidInput("FGG: bad origin tag");
    }
    if (!r.at_end()) throw InvalidInput("FGG: trailing bytes");
    merge(g, base);
    return g;
}

void save_graph(const MultimeshGraph& g, const TriMesh& base, const std::string& path) {
    write_file(path, serialize_fgg(g, base));
}

MultimeshGraph load_graph(const std::string& path, const TriMesh& base) { return parse_fgg(read_file(path), base); }

}  // namespace floodgnn
