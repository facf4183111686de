#include "floodgnn/mesh_gen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "floodgnn/common.hpp"

namespace floodgnn {

double DensitySpec::target_length(double d) const {
    d = std::abs(d);
    double base = d <= channel_half_width ? channel_spacing
                  : d <= channel_half_width + urban_width ? urban_spacing
                                                          : floodplain_spacing;
    return base * relaxation;
}

double ValleyGeometry::bed_elevation(double x, double y) const {
    const auto& t = terrain;
    const double d = std::abs(y - axis_y());
    const double bank = t.outlet_bank_elevation + t.slope * (x0 + length - x);
    const double outer = t.carved_half_width + t.bank_width;
    double incision = 0.0;
    if (d <= t.carved_half_width) {
        incision = 1.0;
    } else if (d < outer && t.bank_width > 0.0) {
        incision = (outer - d) / t.bank_width;
    }
    return bank + t.lateral_slope * std::max(0.0, d - outer) - t.channel_depth * incision;
}

double ValleyGeometry::strickler(double y, const DensitySpec& spec) const {
    const double d = std::abs(y - axis_y());
    if (d <= spec.channel_half_width) return terrain.strickler_channel;
    if (d <= spec.channel_half_width + spec.urban_width) return terrain.strickler_urban;
    return terrain.strickler_floodplain;
}

void validate(const DensitySpec& spec, const ValleyGeometry& g) {
    if (!(g.length > 0.0) || !(g.width > 0.0)) throw InvalidInput("valley domain must have positive extents");
    const int r = spec.relaxation;
    if (r != 1 && r != 2 && r != 4 && r != 8 && r != 16 && r != 32)
        throw InvalidInput("relaxation factor must be one of 1, 2, 4, 8, 16, 32");
    if (!(spec.channel_spacing > 0.0) || !(spec.urban_spacing > 0.0) || !(spec.floodplain_spacing > 0.0))
        throw InvalidInput("target edge lengths must be positive");
    if (spec.channel_half_width < 0.0 || spec.urban_width < 0.0) throw InvalidInput("band widths must be non-negative");
    if (spec.jitter < 0.0 || spec.jitter > 0.25) throw InvalidInput("jitter must lie in [0, 0.25]");
    const double max_target =
        std::max({spec.channel_spacing, spec.urban_spacing, spec.floodplain_spacing}) * spec.relaxation;
    if (max_target > std::min(g.length, g.width))
        throw InvalidInput("target edge length " + format_double(max_target) + " m exceeds the domain extent");
}

namespace {

struct Row {
    double y;
    double spacing;
};

// Row positions marching across the valley, band by band, so band edges are rows.
std::vector<Row> lattice_rows(const DensitySpec& spec, const ValleyGeometry& g) {
    const double yc = g.axis_y();
    const double hw = spec.channel_half_width, uw = spec.urban_width;
    const double y_lo = g.y0, y_hi = g.y0 + g.width;
    std::vector<double> cuts = {y_lo, yc - hw - uw, yc - hw, yc + hw, yc + hw + uw, y_hi};
    for (auto& c : cuts) c = std::clamp(c, y_lo, y_hi);
    std::vector<Row> rows;
    for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
        const double a = cuts[b], c = cuts[b + 1];
        if (c - a <= 1e-9) continue;
        const double spacing = spec.target_length(0.5 * (a + c) - yc);
        const int n = std::max(1, static_cast<int>(std::lround((c - a) / spacing)));
        for (int k = 0; k <= n; ++k) {
            const double y = k == n ? c : a + (c - a) * k / n;
            if (!rows.empty() && std::abs(rows.back().y - y) < 1e-9) {
                rows.back().spacing = std::min(rows.back().spacing, spacing);
                continue;
            }
            rows.push_back({y, spacing});
        }
    }
    return rows;
}

double orient(const TriMesh& m, std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    return (m.x[b] - m.x[a]) * (m.y[c] - m.y[a]) - (m.x[c] - m.x[a]) * (m.y[b] - m.y[a]);
}

// > 0 when d lies strictly inside the circumcircle of the CCW triangle (a, b, c).
double incircle(const TriMesh& m, std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
    const double adx = m.x[a] - m.x[d], ady = m.y[a] - m.y[d];
    const double bdx = m.x[b] - m.x[d], bdy = m.y[b] - m.y[d];
    const double cdx = m.x[c] - m.x[d], cdy = m.y[c] - m.y[d];
    const double ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Lawson flips until every interior edge is locally Delaunay.
void delaunay_flip(TriMesh& m) {
    auto& tris = m.triangles;
    std::unordered_map<std::uint64_t, std::array<int, 2>> adj;
    adj.reserve(tris.size() * 2);
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        for (int k = 0; k < 3; ++k) {
            auto [it, inserted] = adj.try_emplace(edge_key(tris[t][k], tris[t][(k + 1) % 3]), std::array<int, 2>{t, -1});
            if (!inserted) it->second[1] = t;
        }
    }
    std::deque<std::uint64_t> queue;
    for (const auto& [key, ts] : adj)
        if (ts[1] >= 0) queue.push_back(key);
    // Deterministic processing order regardless of hash layout.
    std::sort(queue.begin(), queue.end());

    auto replace = [&](std::uint64_t key, int from, int to) {
        auto& ts = adj.at(key);
        if (ts[0] == from) ts[0] = to;
        else if (ts[1] == from) ts[1] = to;
    };

    std::size_t guard = 0;
    const std::size_t guard_limit = 50 * tris.size() + 1000;
    while (!queue.empty()) {
        if (++guard > guard_limit) throw NumericalFailure("Delaunay flipping did not terminate");
        const std::uint64_t key = queue.front();
        queue.pop_front();
        const auto found = adj.find(key);
        if (found == adj.end() || found->second[1] < 0) continue;  // flipped away or on the boundary
        const auto ts = found->second;
        const int t1 = ts[0], t2 = ts[1];
        const std::uint32_t e0 = static_cast<std::uint32_t>(key >> 32), e1 = static_cast<std::uint32_t>(key);
        // Orient so that t1 = (a, b, c) traverses a -> b.
        int k1 = 0;
        while (!((tris[t1][k1] == e0 && tris[t1][(k1 + 1) % 3] == e1) || (tris[t1][k1] == e1 && tris[t1][(k1 + 1) % 3] == e0))) ++k1;
        const std::uint32_t a = tris[t1][k1], b = tris[t1][(k1 + 1) % 3], c = tris[t1][(k1 + 2) % 3];
        std::uint32_t d = 0;
        for (auto v : tris[t2])
            if (v != a && v != b) d = v;
        const double la = std::hypot(m.x[a] - m.x[b], m.y[a] - m.y[b]);
        const double scale = la * la * la * la;
        if (!(incircle(m, a, b, c, d) > 1e-10 * scale)) continue;
        if (!(orient(m, a, d, c) > 1e-12 * la * la) || !(orient(m, d, b, c) > 1e-12 * la * la)) continue;
        if (adj.contains(edge_key(c, d))) continue;  // the other diagonal already exists elsewhere
        tris[t1] = {a, d, c};
        tris[t2] = {d, b, c};
        adj.erase(key);
        adj[edge_key(c, d)] = {t1, t2};
        replace(edge_key(b, c), t1, t2);
        replace(edge_key(a, d), t2, t1);
        for (auto k : {edge_key(a, d), edge_key(d, b), edge_key(b, c), edge_key(c, a)}) queue.push_back(k);
    }
}

}  // namespace

TriMesh build_synthetic_valley_mesh(const DensitySpec& spec, const ValleyGeometry& g, std::uint64_t seed) {
    validate(spec, g);
    Rng rng(seed);
    const auto rows = lattice_rows(spec, g);
    const double x_hi = g.x0 + g.length, y_hi = g.y0 + g.width;

    TriMesh m;
    std::vector<std::vector<std::uint32_t>> row_nodes(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int ncols = std::max(1, static_cast<int>(std::lround(g.length / rows[r].spacing)));
        const bool edge_row = r == 0 || r + 1 == rows.size();
        const double gap = std::min(r > 0 ? rows[r].y - rows[r - 1].y : 1e300,
                                    r + 1 < rows.size() ? rows[r + 1].y - rows[r].y : 1e300);
        const double dx_col = g.length / ncols;
        for (int c = 0; c <= ncols; ++c) {
            double x = c == ncols ? x_hi : g.x0 + dx_col * c;
            double y = rows[r].y;
            const bool edge_col = c == 0 || c == ncols;
            if (!edge_row && !edge_col && spec.jitter > 0.0) {
                x += rng.uniform(-1.0, 1.0) * spec.jitter * dx_col;
                y += rng.uniform(-1.0, 1.0) * spec.jitter * std::min(gap, dx_col);
            }
            row_nodes[r].push_back(static_cast<std::uint32_t>(m.x.size()));
            m.x.push_back(x);
            m.y.push_back(y);
        }
    }

    // Zip consecutive rows into a strip of triangles, preferring the shorter diagonal.
    for (std::size_t r = 0; r + 1 < rows.size(); ++r) {
        const auto& A = row_nodes[r];
        const auto& B = row_nodes[r + 1];
        std::size_t i = 0, j = 0;
        while (i + 1 < A.size() || j + 1 < B.size()) {
            bool advance_a;
            if (i + 1 >= A.size()) {
                advance_a = false;
            } else if (j + 1 >= B.size()) {
                advance_a = true;
            } else {
                const double da = std::hypot(m.x[A[i + 1]] - m.x[B[j]], m.y[A[i + 1]] - m.y[B[j]]);
                const double db = std::hypot(m.x[A[i]] - m.x[B[j + 1]], m.y[A[i]] - m.y[B[j + 1]]);
                advance_a = da <= db;
                const bool ok_a = orient(m, A[i], A[i + 1], B[j]) > 0.0;
                const bool ok_b = orient(m, A[i], B[j + 1], B[j]) > 0.0;
                if (advance_a && !ok_a) advance_a = false;
                else if (!advance_a && !ok_b) advance_a = true;
            }
            if (advance_a) {
                m.triangles.push_back({A[i], A[i + 1], B[j]});
                ++i;
            } else {
                m.triangles.push_back({A[i], B[j + 1], B[j]});
                ++j;
            }
            if (!(m.signed_area(m.triangles.size() - 1) > 0.0))
                throw NumericalFailure("lattice zipper produced an inverted triangle");
        }
    }
    delaunay_flip(m);

    const std::size_t n = m.x.size();
    const double yc = g.axis_y();
    m.z.resize(n);
    m.strickler.resize(n);
    m.labels.assign(n, BoundaryLabel::Interior);
    for (std::size_t i = 0; i < n; ++i) {
        m.z[i] = g.bed_elevation(m.x[i], m.y[i]);
        m.strickler[i] = g.strickler(m.y[i], spec);
        const bool left = m.x[i] == g.x0, right = m.x[i] == x_hi;
        const bool bottom = m.y[i] == g.y0, top = m.y[i] == y_hi;
        if (right) m.labels[i] = BoundaryLabel::Stage;
        else if (left && std::abs(m.y[i] - yc) <= spec.channel_half_width + 1e-9) m.labels[i] = BoundaryLabel::Inflow;
        else if (left || bottom || top) m.labels[i] = BoundaryLabel::Wall;
    }

    m.meta = {{"generator", "synthetic-valley"},
              {"seed", seed},
              {"density", to_json(spec)},
              {"geometry", to_json(g)}};
    validate_mesh(m);
    return m;
}

nlohmann::json to_json(const DensitySpec& s) {
    return {{"channel_half_width", s.channel_half_width}, {"urban_width", s.urban_width},
            {"channel_spacing", s.channel_spacing},       {"urban_spacing", s.urban_spacing},
            {"floodplain_spacing", s.floodplain_spacing}, {"relaxation", s.relaxation},
            {"jitter", s.jitter}};
}

nlohmann::json to_json(const ValleyGeometry& g) {
    const auto& t = g.terrain;
    return {{"x0", g.x0},
            {"y0", g.y0},
            {"length", g.length},
            {"width", g.width},
            {"terrain",
             {{"outlet_bank_elevation", t.outlet_bank_elevation},
              {"slope", t.slope},
              {"lateral_slope", t.lateral_slope},
              {"channel_depth", t.channel_depth},
              {"carved_half_width", t.carved_half_width},
              {"bank_width", t.bank_width},
              {"strickler_channel", t.strickler_channel},
              {"strickler_urban", t.strickler_urban},
              {"strickler_floodplain", t.strickler_floodplain}}}};
}

DensitySpec density_spec_from_json(const nlohmann::json& j) {
    DensitySpec s;
    s.channel_half_width = j.value("channel_half_width", s.channel_half_width);
    s.urban_width = j.value("urban_width", s.urban_width);
    s.channel_spacing = j.value("channel_spacing", s.channel_spacing);
    s.urban_spacing = j.value("urban_spacing", s.urban_spacing);
    s.floodplain_spacing = j.value("floodplain_spacing", s.floodplain_spacing);
    s.relaxation = j.value("relaxation", s.relaxation);
    s.jitter = j.value("jitter", s.jitter);
    return s;
}

ValleyGeometry valley_geometry_from_json(const nlohmann::json& j) {
    ValleyGeometry g;
    g.x0 = j.value("x0", g.x0);
    g.y0 = j.value("y0", g.y0);
    g.length = j.value("length", g.length);
    g.width = j.value("width", g.width);
    if (j.contains("terrain")) {
        const auto& tj = j.at("terrain");
        auto& t = g.terrain;
        t.outlet_bank_elevation = tj.value("outlet_bank_elevation", t.outlet_bank_elevation);
        t.slope = tj.value("slope", t.slope);
        t.lateral_slope = tj.value("lateral_slope", t.lateral_slope);
        t.channel_depth = tj.value("channel_depth", t.channel_depth);
        t.carved_half_width = tj.value("carved_half_width", t.carved_half_width);
        t.bank_width = tj.value("bank_width", t.bank_width);
        t.strickler_channel = tj.value("strickler_channel", t.strickler_channel);
        t.strickler_urban = tj.value("strickler_urban", t.strickler_urban);
        t.strickler_floodplain = tj.value("strickler_floodplain", t.strickler_floodplain);
    }
    return g;
}

}  // namespace floodgnn
