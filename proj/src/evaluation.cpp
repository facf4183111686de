#include "floodgnn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "floodgnn/common.hpp"
#include "floodgnn/json_util.hpp"
#include "floodgnn/locate.hpp"

namespace floodgnn {

namespace {

std::string grid_hash(const RegularGrid& g) { return hash_hex(fnv1a64(dump_json(g.spec()))); }

std::string ppm_header(const RegularGrid& g) {
    return "P3\n" + std::to_string(g.nx) + " " + std::to_string(g.ny) + "\n255\n";
}

/// Emits one pixel per grid point, top row first; `colour` maps a domain slot to RGB.
template <class F>
std::string render(const RegularGrid& g, F colour) {
    std::vector<std::int64_t> slot(g.size(), -1);
    for (std::size_t k = 0; k < g.domain.size(); ++k) slot[g.domain[k]] = static_cast<std::int64_t>(k);
    std::ostringstream out;
    out << ppm_header(g);
    for (std::size_t row = 0; row < g.ny; ++row) {
        const std::size_t j = g.ny - 1 - row;
        for (std::size_t i = 0; i < g.nx; ++i) {
            const auto s = slot[j * g.nx + i];
            const std::array<int, 3> c = s < 0 ? std::array<int, 3>{128, 128, 128} : colour(static_cast<std::size_t>(s));
            out << c[0] << ' ' << c[1] << ' ' << c[2] << (i + 1 == g.nx ? '\n' : ' ');
        }
    }
    return out.str();
}

std::string short_number(double v) {
    std::ostringstream o;
    o << v;
    return o.str();
}

void check_map(const InundationMap& m, const RegularGrid& g) {
    if (m.flooded.size() != g.domain_size()) throw InvalidInput("inundation map does not match the grid");
}

}  // namespace

nlohmann::json RegularGrid::spec() const {
    return {{"x0", x0}, {"y0", y0}, {"spacing", spacing}, {"nx", nx}, {"ny", ny},
            {"in_domain", domain.size()}, {"mesh_hash", mesh_hash}};
}

RegularGrid build_grid(const TriMesh& fine, double spacing) {
    if (!(spacing > 0.0)) throw InvalidInput("grid spacing must be positive");
    if (fine.node_count() == 0) throw InvalidInput("cannot grid an empty mesh");
    const auto [xmin, xmax] = std::minmax_element(fine.x.begin(), fine.x.end());
    const auto [ymin, ymax] = std::minmax_element(fine.y.begin(), fine.y.end());
    RegularGrid g;
    g.x0 = *xmin;
    g.y0 = *ymin;
    g.spacing = spacing;
    g.nx = static_cast<std::size_t>(std::floor((*xmax - *xmin) / spacing)) + 1;
    g.ny = static_cast<std::size_t>(std::floor((*ymax - *ymin) / spacing)) + 1;
    g.mesh_hash = mesh_hash(fine);
    std::vector<double> px(g.size()), py(g.size());
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) {
            px[j * g.nx + i] = g.x(i);
            py[j * g.nx + i] = g.y(j);
        }
    const auto hits = locate_points(fine, px, py);
    g.inside.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        g.inside[k] = hits[k] ? 1 : 0;
        if (hits[k]) g.domain.push_back(static_cast<std::uint32_t>(k));
    }
    return g;
}

GridSampler make_grid_sampler(const TriMesh& mesh, const RegularGrid& grid) {
    std::vector<double> px(grid.domain_size()), py(grid.domain_size());
    for (std::size_t k = 0; k < grid.domain_size(); ++k) {
        px[k] = grid.x(grid.domain[k] % grid.nx);
        py[k] = grid.y(grid.domain[k] / grid.nx);
    }
    GridSampler s;
    s.mesh_hash = mesh_hash(mesh);
    s.grid_hash = grid_hash(grid);
    s.node_count = mesh.node_count();
    s.map = build_point_map(mesh, px, py);
    return s;
}

std::vector<double> grid_depth(std::span<const double> h, const GridSampler& sampler) {
    if (h.size() != sampler.node_count)
        throw InvalidInput("field has " + std::to_string(h.size()) + " values, sampler mesh has " +
                           std::to_string(sampler.node_count) + " nodes");
    auto out = project_field(sampler.map, h);
    for (auto& v : out) v = std::max(v, 0.0);
    return out;
}

InundationMap inundation_map(std::span<const double> grid_h, double threshold, double lead_minutes,
                             const std::string& grid_hash) {
    InundationMap m;
    m.threshold = threshold;
    m.lead_minutes = lead_minutes;
    m.grid_hash = grid_hash;
    m.flooded.resize(grid_h.size());
    for (std::size_t k = 0; k < grid_h.size(); ++k) m.flooded[k] = grid_h[k] > threshold ? 1 : 0;
    return m;
}

Confusion confusion(const InundationMap& pred, const InundationMap& ref) {
    if (pred.flooded.size() != ref.flooded.size() || pred.grid_hash != ref.grid_hash)
        throw InvalidInput("inundation maps live on different grids");
    if (pred.threshold != ref.threshold) throw InvalidInput("inundation maps use different thresholds");
    Confusion c;
    for (std::size_t k = 0; k < pred.flooded.size(); ++k) {
        const bool p = pred.flooded[k] != 0, r = ref.flooded[k] != 0;
        if (p && r) ++c.tp;
        else if (p) ++c.fp;
        else if (r) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double csi(const InundationMap& pred, const InundationMap& ref) {
    const auto c = confusion(pred, ref);
    const std::size_t denom = c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

// ---------------------------------------------------------------------------

CurveStats curve_stats(const std::vector<std::vector<double>>& per_event) {
    CurveStats s;
    if (per_event.empty()) return s;
    const std::size_t len = per_event.front().size();
    s.mean.assign(len, 0.0);
    s.std.assign(len, 0.0);
    const auto n = static_cast<double>(per_event.size());
    for (std::size_t k = 0; k < len; ++k) {
        double mean = 0.0;
        for (const auto& row : per_event) mean += row[k];
        mean /= n;
        double var = 0.0;
        for (const auto& row : per_event) var += (row[k] - mean) * (row[k] - mean);
        s.mean[k] = mean;
        s.std[k] = std::sqrt(var / n);
    }
    return s;
}

MetricsReport l1_rollout_curves(const std::vector<StateSequence>& pred, const std::vector<StateSequence>& target,
                                const std::vector<double>* node_weights) {
    if (pred.size() != target.size()) throw InvalidInput("prediction and target event counts differ");
    if (pred.empty()) throw InvalidInput("no events to score");
    MetricsReport r;
    r.events = pred.size();
    const std::size_t len = pred.front().size();
    for (std::size_t e = 0; e < pred.size(); ++e) {
        if (pred[e].size() != len || target[e].size() != len)
            throw InvalidInput("event " + std::to_string(e) + ": sequence lengths differ");
        const std::size_t n = pred[e].node_count();
        if (target[e].node_count() != n) throw InvalidInput("event " + std::to_string(e) + ": node counts differ");
        if (node_weights && node_weights->size() != n) throw InvalidInput("node weights do not match the mesh");
        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) wsum += node_weights ? (*node_weights)[i] : 1.0;
        for (auto& v : r.l1_per_event) v.emplace_back(len, 0.0);
        for (std::size_t k = 0; k < len; ++k) {
            const auto& p = pred[e].snapshots[k];
            const auto& t = target[e].snapshots[k];
            double acc[3] = {0.0, 0.0, 0.0};
            for (std::size_t i = 0; i < n; ++i) {
                const double w = node_weights ? (*node_weights)[i] : 1.0;
                acc[0] += w * std::abs(p.h[i] - t.h[i]);
                acc[1] += w * std::abs(p.u[i] - t.u[i]);
                acc[2] += w * std::abs(p.v[i] - t.v[i]);
            }
            for (int c = 0; c < 3; ++c) r.l1_per_event[c].back()[k] = acc[c] / wsum;
        }
    }
    for (std::size_t k = 0; k < len; ++k) r.lead_minutes.push_back(static_cast<double>(k) * pred.front().stride / 60.0);
    for (int c = 0; c < 3; ++c) r.l1[c] = curve_stats(r.l1_per_event[c]);
    return r;
}

double mean_rollout_l1_h(const MetricsReport& r) {
    const auto& m = r.l1[0].mean;
    if (m.size() < 2) throw InvalidInput("rollout has no lead times beyond the initial state");
    double s = 0.0;
    for (std::size_t k = 1; k < m.size(); ++k) s += m[k];
    return s / static_cast<double>(m.size() - 1);
}

// ---------------------------------------------------------------------------

EvaluationResult evaluate_experiment(const EvaluationInputs& in) {
    if (!in.checkpoint || !in.checkpoint->model) throw InvalidInput("evaluation needs a checkpoint");
    if (!in.graph || !in.surrogate_mesh || !in.fine_mesh) throw InvalidInput("evaluation needs both meshes and a graph");
    if (in.targets.size() != in.references.size()) throw InvalidInput("targets and references list different events");
    if (in.targets.empty()) throw InvalidInput("no held-out events to evaluate");
    if (in.horizon_steps < 1) throw InvalidInput("horizon must be at least one step");
    const auto steps = static_cast<std::size_t>(in.horizon_steps);
    const std::string surrogate_hash = mesh_hash(*in.surrogate_mesh), fine_hash = mesh_hash(*in.fine_mesh);
    for (std::size_t e = 0; e < in.targets.size(); ++e) {
        if (in.targets[e]->mesh_hash != surrogate_hash || in.references[e]->mesh_hash != fine_hash)
            throw InvalidInput("event " + std::to_string(e) + " sequences are on the wrong meshes");
        if (in.targets[e]->size() <= steps || in.references[e]->size() <= steps)
            throw InvalidInput("event " + std::to_string(e) + " is shorter than the horizon");
    }

    EvaluationResult out;
    out.grid = build_grid(*in.fine_mesh, in.grid_spacing);
    const std::string ghash = grid_hash(out.grid);
    const GridSampler fine_sampler = make_grid_sampler(*in.fine_mesh, out.grid);
    const GridSampler surrogate_sampler = make_grid_sampler(*in.surrogate_mesh, out.grid);

    const std::size_t events = in.targets.size();
    out.rollouts.resize(events);
    std::vector<StateSequence> truncated(events);
    // [event][threshold][lead]
    std::vector<std::vector<std::vector<double>>> scores(events);
    std::vector<std::vector<MapExport>> maps(events);
    const Checkpoint& ck = *in.checkpoint;
    parallel_for(events, in.jobs, [&](std::size_t e) {
        const StateSequence& target = *in.targets[e];
        out.rollouts[e] = rollout(*ck.model, in.graph, ck.normalizer, target.snapshots[0], target, in.horizon_steps);
        StateSequence t = target;
        t.snapshots.resize(steps + 1);
        t.discharge.resize(steps + 1);
        t.stage.resize(steps + 1);
        truncated[e] = std::move(t);
        scores[e].assign(in.thresholds.size(), std::vector<double>(steps + 1, 0.0));
        for (std::size_t k = 0; k <= steps; ++k) {
            const auto ref_h = grid_depth(in.references[e]->snapshots[k].h, fine_sampler);
            const auto pred_h = grid_depth(out.rollouts[e].snapshots[k].h, surrogate_sampler);
            const double lead = static_cast<double>(k) * target.stride / 60.0;
            for (std::size_t th = 0; th < in.thresholds.size(); ++th) {
                const auto ref = inundation_map(ref_h, in.thresholds[th], lead, ghash);
                const auto pred = inundation_map(pred_h, in.thresholds[th], lead, ghash);
                scores[e][th][k] = csi(pred, ref);
                if (std::find(in.map_steps.begin(), in.map_steps.end(), static_cast<int>(k)) != in.map_steps.end())
                    maps[e].push_back({e, static_cast<int>(k), in.thresholds[th], pred, ref, scores[e][th][k]});
            }
        }
    });

    out.report = l1_rollout_curves(out.rollouts, truncated);
    for (std::size_t th = 0; th < in.thresholds.size(); ++th) {
        std::vector<std::vector<double>> rows;
        for (std::size_t e = 0; e < events; ++e) rows.push_back(scores[e][th]);
        out.report.csi[in.thresholds[th]] = curve_stats(rows);
    }
    for (auto& m : maps) out.maps.insert(out.maps.end(), m.begin(), m.end());
    return out;
}

std::string report_csv(const std::vector<MetricsReport>& reports) {
    std::ostringstream out;
    out << "experiment,quantity,lead_time_minutes,mean,std,n_events\n";
    static const char* names[3] = {"l1_h", "l1_u", "l1_v"};
    for (const auto& r : reports) {
        for (int c = 0; c < 3; ++c)
            for (std::size_t k = 0; k < r.lead_minutes.size(); ++k)
                out << r.experiment << ',' << names[c] << ',' << format_double(r.lead_minutes[k]) << ','
                    << format_double(r.l1[c].mean[k]) << ',' << format_double(r.l1[c].std[k]) << ',' << r.events << '\n';
        for (const auto& [th, st] : r.csi)
            for (std::size_t k = 0; k < r.lead_minutes.size(); ++k)
                out << r.experiment << ",csi@" << short_number(th) << ',' << format_double(r.lead_minutes[k]) << ','
                    << format_double(st.mean[k]) << ',' << format_double(st.std[k]) << ',' << r.events << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------

std::string render_inundation(const InundationMap& map, const RegularGrid& grid) {
    check_map(map, grid);
    return render(grid, [&](std::size_t s) {
        return map.flooded[s] ? std::array<int, 3>{0, 0, 255} : std::array<int, 3>{255, 255, 255};
    });
}

std::string render_comparison(const InundationMap& pred, const InundationMap& ref, const RegularGrid& grid) {
    check_map(pred, grid);
    check_map(ref, grid);
    return render(grid, [&](std::size_t s) {
        const bool p = pred.flooded[s] != 0, r = ref.flooded[s] != 0;
        if (p && r) return std::array<int, 3>{0, 0, 255};
        if (p) return std::array<int, 3>{255, 0, 0};
        if (r) return std::array<int, 3>{255, 165, 0};
        return std::array<int, 3>{255, 255, 255};
    });
}

std::string render_depth(std::span<const double> grid_h, const RegularGrid& grid, double max_depth) {
    if (grid_h.size() != grid.domain_size()) throw InvalidInput("depth field does not match the grid");
    if (!(max_depth > 0.0)) throw InvalidInput("max_depth must be positive");
    return render(grid, [&](std::size_t s) {
        const double a = std::clamp(grid_h[s] / max_depth, 0.0, 1.0);
        const int rg = static_cast<int>(std::lround(255.0 * (1.0 - a)));
        const int b = static_cast<int>(std::lround(255.0 - 127.0 * a));
        return std::array<int, 3>{rg, rg, b};
    });
}

}  // namespace floodgnn
