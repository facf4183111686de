#include "floodgnn/swe.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "floodgnn/common.hpp"
#include "floodgnn/json_util.hpp"

namespace floodgnn {

namespace {
constexpr std::uint32_t kFgbVersion = 1;
}

void validate(const SolverConfig& c) {
    if (!(c.cfl > 0.0 && c.cfl <= 0.9)) throw InvalidInput("CFL number must lie in (0, 0.9]");
    if (!(c.dry_threshold > 0.0)) throw InvalidInput("dry threshold must be positive");
    if (!(c.gravity > 0.0)) throw InvalidInput("gravity must be positive");
    if (!(c.max_dt > 0.0)) throw InvalidInput("max_dt must be positive");
    if (!(c.output_stride > 0.0)) throw InvalidInput("output stride must be positive");
    if (!(c.min_inflow_area > 0.0)) throw InvalidInput("minimum inflow area must be positive");
    if (c.spinup_discharge < 0.0) throw InvalidInput("spin-up discharge must be non-negative");
}

nlohmann::json to_json(const SolverConfig& c) {
    return {{"gravity", c.gravity},
            {"cfl", c.cfl},
            {"dry_threshold", c.dry_threshold},
            {"max_dt", c.max_dt},
            {"output_stride", c.output_stride},
            {"min_inflow_area", c.min_inflow_area},
            {"friction", c.friction},
            {"spinup_discharge", c.spinup_discharge},
            {"spinup_stage", c.spinup_stage},
            {"stage_ramp_seconds", c.stage_ramp_seconds},
            {"spinup_fill_depth", c.spinup_fill_depth},
            {"spinup_tolerance", c.spinup_tolerance},
            {"spinup_max_seconds", c.spinup_max_seconds},
            {"event_stage", c.event_stage}};
}

SolverConfig solver_config_from_json(const nlohmann::json& j) {
    SolverConfig c;
    c.gravity = j.value("gravity", c.gravity);
    c.cfl = j.value("cfl", c.cfl);
    c.dry_threshold = j.value("dry_threshold", c.dry_threshold);
    c.max_dt = j.value("max_dt", c.max_dt);
    c.output_stride = j.value("output_stride", c.output_stride);
    c.min_inflow_area = j.value("min_inflow_area", c.min_inflow_area);
    c.friction = j.value("friction", c.friction);
    c.spinup_discharge = j.value("spinup_discharge", c.spinup_discharge);
    c.spinup_stage = j.value("spinup_stage", c.spinup_stage);
    c.stage_ramp_seconds = j.value("stage_ramp_seconds", c.stage_ramp_seconds);
    c.spinup_fill_depth = j.value("spinup_fill_depth", c.spinup_fill_depth);
    c.spinup_tolerance = j.value("spinup_tolerance", c.spinup_tolerance);
    c.spinup_max_seconds = j.value("spinup_max_seconds", c.spinup_max_seconds);
    c.event_stage = j.value("event_stage", c.event_stage);
    validate(c);
    return c;
}

SweSolver::SweSolver(const TriMesh& mesh, SolverConfig config) : mesh_(mesh), cfg_(config) {
    validate(cfg_);
    validate_mesh(mesh_);
    const std::size_t n = mesh.node_count();
    area_.assign(n, 0.0);

    std::map<std::uint64_t, std::size_t> face_of;
    auto key = [](std::uint32_t a, std::uint32_t b) { return (static_cast<std::uint64_t>(a) << 32) | b; };
    for (const auto& e : undirected_edges(mesh)) {
        face_of[key(e.a, e.b)] = faces_.size();
        faces_.push_back({e.a, e.b, 0.0, 0.0, 0.0, 0.0, 0.0});
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double a3 = mesh.signed_area(t) / 3.0;
        const double gx = (mesh.x[tri[0]] + mesh.x[tri[1]] + mesh.x[tri[2]]) / 3.0;
        const double gy = (mesh.y[tri[0]] + mesh.y[tri[1]] + mesh.y[tri[2]]) / 3.0;
        for (int k = 0; k < 3; ++k) {
            area_[tri[k]] += a3;
            const std::uint32_t p = tri[k], q = tri[(k + 1) % 3];
            const double mx = 0.5 * (mesh.x[p] + mesh.x[q]), my = 0.5 * (mesh.y[p] + mesh.y[q]);
            // Segment midpoint -> centroid, rotated to point from p towards q.
            const double nx = gy - my, ny = -(gx - mx);
            auto& f = faces_[face_of.at(key(std::min(p, q), std::max(p, q)))];
            const double sign = p < q ? 1.0 : -1.0;
            f.nx += sign * nx;
            f.ny += sign * ny;
        }
    }

    std::vector<double> perimeter(n, 0.0);
    for (auto& f : faces_) {
        f.len = std::hypot(f.nx, f.ny);
        f.ex = f.nx / f.len;
        f.ey = f.ny / f.len;
        perimeter[f.i] += f.len;
        perimeter[f.j] += f.len;
    }

    // Boundary half-edges, oriented by the triangle that owns them.
    std::map<std::uint64_t, int> tri_count;
    for (const auto& e : undirected_edges(mesh)) tri_count[key(e.a, e.b)] = e.triangle_count;
    wall_normals_.resize(n);
    inflow_dir_x_.assign(n, 0.0);
    inflow_dir_y_.assign(n, 0.0);
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const std::uint32_t p = tri[k], q = tri[(k + 1) % 3];
            if (tri_count.at(key(std::min(p, q), std::max(p, q))) != 1) continue;
            const double ex = mesh.x[q] - mesh.x[p], ey = mesh.y[q] - mesh.y[p];
            const double nx = 0.5 * ey, ny = -0.5 * ex;  // outward, half length
            const auto lp = mesh.labels[p], lq = mesh.labels[q];
            FaceKind kind = FaceKind::Wall;
            if (lp == BoundaryLabel::Inflow && lq == BoundaryLabel::Inflow) kind = FaceKind::Inflow;
            else if (lp == BoundaryLabel::Stage && lq == BoundaryLabel::Stage) kind = FaceKind::Stage;
            for (std::uint32_t node : {p, q}) {
                if (kind == FaceKind::Inflow) inflow_faces_.push_back(static_cast<std::uint32_t>(boundary_.size()));
                boundary_.push_back({node, nx, ny, kind});
                perimeter[node] += std::hypot(nx, ny);
                const double len = std::hypot(nx, ny);
                if (mesh.labels[node] == BoundaryLabel::Wall) wall_normals_[node].push_back({nx / len, ny / len});
                if (mesh.labels[node] == BoundaryLabel::Inflow) {
                    inflow_dir_x_[node] -= nx;
                    inflow_dir_y_[node] -= ny;
                }
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double len = std::hypot(inflow_dir_x_[i], inflow_dir_y_[i]);
        if (len > 0.0) {
            inflow_dir_x_[i] /= len;
            inflow_dir_y_[i] /= len;
        }
        const auto id = static_cast<std::uint32_t>(i);
        if (mesh.labels[i] == BoundaryLabel::Stage) stage_nodes_.push_back(id);
        if (mesh.labels[i] == BoundaryLabel::Inflow) inflow_nodes_.push_back(id);
        if (!wall_normals_[i].empty()) wall_nodes_.push_back(id);
    }
    radius_.resize(n);
    for (std::size_t i = 0; i < n; ++i) radius_[i] = area_[i] / perimeter[i];
}

double SweSolver::stable_dt(const HydraulicState& s) const {
    double dt = cfg_.max_dt;
    const double g = cfg_.gravity;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.h[i] <= 0.0) continue;
        const double lambda = std::sqrt(s.u[i] * s.u[i] + s.v[i] * s.v[i]) + std::sqrt(g * s.h[i]);
        if (lambda > 0.0) dt = std::min(dt, cfg_.cfl * radius_[i] / lambda);
    }
    return dt;
}

double SweSolver::volume(const HydraulicState& s) const {
    double v = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) v += area_[i] * s.h[i];
    return v;
}

double SweSolver::inflow_wet_area(const HydraulicState& s) const {
    double a = 0.0;
    for (auto k : inflow_faces_) {
        const auto& b = boundary_[k];
        a += s.h[b.node] * std::hypot(b.nx, b.ny);
    }
    return a;
}

void SweSolver::apply_boundaries(HydraulicState& s, const BoundaryForcing& f, double t) const {
    const double dry = cfg_.dry_threshold;
    if (!inflow_faces_.empty()) {
        const double q = f.discharge ? f.discharge(t) : 0.0;
        if (q < 0.0) throw InvalidInput("negative inflow discharge");
        double speed = 0.0;
        if (q > 0.0) {
            const double area = inflow_wet_area(s);
            if (area < cfg_.min_inflow_area)
                throw NumericalFailure("inflow section dried out under Q = " + format_double(q) + " m3/s at t = " +
                                       format_double(t) + " s (wetted area " + format_double(area) + " m2)");
            speed = q / area;
        }
        for (const auto i : inflow_nodes_) {
            const bool wet = s.h[i] > dry;
            s.u[i] = wet ? speed * inflow_dir_x_[i] : 0.0;
            s.v[i] = wet ? speed * inflow_dir_y_[i] : 0.0;
        }
    }
    if (!stage_nodes_.empty() && f.stage) {
        const double zs = f.stage(t);
        for (const auto i : stage_nodes_) {
            s.h[i] = std::max(zs - mesh_.z[i], 0.0);
            if (s.h[i] < dry) s.u[i] = s.v[i] = 0.0;
        }
    }
    for (const auto i : wall_nodes_) {
        const auto& normals = wall_normals_[i];
        bool parallel = true;
        for (const auto& nrm : normals)
            parallel = parallel && (nrm[0] * normals[0][0] + nrm[1] * normals[0][1]) > 0.99;
        if (!parallel) {
            s.u[i] = s.v[i] = 0.0;
            continue;
        }
        const double un = s.u[i] * normals[0][0] + s.v[i] * normals[0][1];
        s.u[i] -= un * normals[0][0];
        s.v[i] -= un * normals[0][1];
    }
}

StepReport SweSolver::step(HydraulicState& s, const BoundaryForcing& f, double dt_limit) const {
    const std::size_t n = s.size();
    const double g = cfg_.gravity, half_g = 0.5 * cfg_.gravity;
    const double dry = cfg_.dry_threshold;
    StepReport rep;
    rep.dt = std::min(stable_dt(s), dt_limit);
    const double dt = rep.dt;
    const auto& z = mesh_.z;

    rh_.assign(n, 0.0);
    rhu_.assign(n, 0.0);
    rhv_.assign(n, 0.0);
    auto& rh = rh_;
    auto& rhu = rhu_;
    auto& rhv = rhv_;
    for (const auto& fc : faces_) {
        const std::uint32_t i = fc.i, j = fc.j;
        const double len = fc.len, ex = fc.ex, ey = fc.ey;
        const double hi = s.h[i], hj = s.h[j];
        if (hi <= 0.0 && hj <= 0.0) continue;
        const double zstar = std::max(z[i], z[j]);
        const double his = std::max(0.0, hi + z[i] - zstar);
        const double hjs = std::max(0.0, hj + z[j] - zstar);
        const double ui = s.u[i], vi = s.v[i], uj = s.u[j], vj = s.v[j];
        const double uni = ui * ex + vi * ey, unj = uj * ex + vj * ey;
        const double pis = half_g * his * his, pjs = half_g * hjs * hjs;
        const double a = std::max(std::abs(uni) + std::sqrt(g * his), std::abs(unj) + std::sqrt(g * hjs));
        const double f0 = 0.5 * (his * uni + hjs * unj) - 0.5 * a * (hjs - his);
        const double f1 = 0.5 * (his * ui * uni + pis * ex + hjs * uj * unj + pjs * ex) - 0.5 * a * (hjs * uj - his * ui);
        const double f2 = 0.5 * (his * vi * uni + pis * ey + hjs * vj * unj + pjs * ey) - 0.5 * a * (hjs * vj - his * vi);
        // Well-balancing corrections: the full hydrostatic pressure of each side.
        const double ci = half_g * hi * hi - pis, cj = half_g * hj * hj - pjs;
        rh[i] -= len * f0;
        rhu[i] -= len * f1 + ci * fc.nx;
        rhv[i] -= len * f2 + ci * fc.ny;
        rh[j] += len * f0;
        rhu[j] += len * f1 + cj * fc.nx;
        rhv[j] += len * f2 + cj * fc.ny;
    }
    for (const auto& b : boundary_) {
        const std::uint32_t i = b.node;
        const double hi = s.h[i];
        if (hi <= 0.0) continue;
        const double p = half_g * hi * hi;
        if (b.kind == FaceKind::Wall) {
            rhu[i] -= p * b.nx;
            rhv[i] -= p * b.ny;
            continue;
        }
        const double un = s.u[i] * b.nx + s.v[i] * b.ny;  // integrated normal velocity (m3/s per m depth)
        const double mass = hi * un;
        rh[i] -= mass;
        rhu[i] -= mass * s.u[i] + p * b.nx;
        rhv[i] -= mass * s.v[i] + p * b.ny;
        if (b.kind == FaceKind::Inflow) rep.inflow_rate -= mass;
        else rep.outflow_rate += mass;
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double k = dt / area_[i];
        double h = s.h[i] + k * rh[i];
        double hu = s.h[i] * s.u[i] + k * rhu[i];
        double hv = s.h[i] * s.v[i] + k * rhv[i];
        if (!std::isfinite(h) || !std::isfinite(hu) || !std::isfinite(hv))
            throw NumericalFailure("non-finite state at node " + std::to_string(i) + ", t = " + format_double(s.t + dt) + " s");
        if (h < dry) {
            s.h[i] = 0.0;
            s.u[i] = s.v[i] = 0.0;
            continue;
        }
        if (cfg_.friction) {
            const double speed = std::sqrt(hu * hu + hv * hv) / h;
            const double kst = mesh_.strickler[i];
            const double factor = 1.0 + dt * g * speed / (kst * kst * h * std::cbrt(h));
            hu /= factor;
            hv /= factor;
        }
        s.h[i] = h;
        s.u[i] = hu / h;
        s.v[i] = hv / h;
    }
    s.t += dt;
    double stage_volume = 0.0;
    for (const auto i : stage_nodes_) stage_volume -= area_[i] * s.h[i];
    apply_boundaries(s, f, s.t);
    for (const auto i : stage_nodes_) stage_volume += area_[i] * s.h[i];
    rep.outflow_rate -= stage_volume / dt;
    return rep;
}

StepReport SweSolver::advance_to(HydraulicState& s, const BoundaryForcing& f, double t_end) const {
    StepReport last;
    while (s.t < t_end) {
        const double remaining = t_end - s.t;
        last = step(s, f, remaining);
        // Land exactly on the target time despite rounding in the sum.
        if (last.dt == remaining) s.t = t_end;
    }
    return last;
}

HydraulicState channel_fill_state(const TriMesh& mesh, double depth) {
    const auto edges = undirected_edges(mesh);
    double mean_len = 0.0;
    for (const auto& e : edges) mean_len += std::hypot(mesh.x[e.a] - mesh.x[e.b], mesh.y[e.a] - mesh.y[e.b]);
    mean_len /= static_cast<double>(std::max<std::size_t>(edges.size(), 1));
    const double bin = 2.0 * mean_len;
    const double xmin = *std::min_element(mesh.x.begin(), mesh.x.end());
    std::map<long, double> thalweg;
    auto bin_of = [&](std::size_t i) { return static_cast<long>(std::floor((mesh.x[i] - xmin) / bin)); };
    for (std::size_t i = 0; i < mesh.node_count(); ++i) {
        auto [it, inserted] = thalweg.try_emplace(bin_of(i), mesh.z[i]);
        if (!inserted) it->second = std::min(it->second, mesh.z[i]);
    }
    auto s = HydraulicState::dry(mesh.node_count());
    for (std::size_t i = 0; i < mesh.node_count(); ++i) s.h[i] = std::max(0.0, thalweg.at(bin_of(i)) + depth - mesh.z[i]);
    return s;
}

HydraulicState initialize_domain(const TriMesh& mesh, const SolverConfig& config, const HydraulicState* start) {
    SweSolver solver(mesh, config);
    HydraulicState s = start ? *start : channel_fill_state(mesh, config.spinup_fill_depth);
    if (s.size() != mesh.node_count()) throw InvalidInput("initial state does not match the mesh");
    s.t = 0.0;

    double zs0 = std::numeric_limits<double>::infinity();
    double wet_surface = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mesh.node_count(); ++i) {
        if (mesh.labels[i] != BoundaryLabel::Stage) continue;
        zs0 = std::min(zs0, mesh.z[i]);
        if (s.h[i] > config.dry_threshold) wet_surface = std::max(wet_surface, mesh.z[i] + s.h[i]);
    }
    if (std::isfinite(wet_surface)) zs0 = wet_surface;
    const double target = config.spinup_stage, ramp = config.stage_ramp_seconds;
    BoundaryForcing f;
    f.discharge = [q = config.spinup_discharge](double) { return q; };
    f.stage = [zs0, target, ramp](double t) { return ramp > 0.0 ? zs0 + (target - zs0) * std::min(1.0, t / ramp) : target; };
    solver.apply_boundaries(s, f, 0.0);

    const double ramp_end = solver.has_stage() ? ramp : 0.0;
    double prev = solver.volume(s);
    double residual = std::numeric_limits<double>::infinity();
    while (true) {
        if (s.t >= config.spinup_max_seconds)
            throw NumericalFailure("spin-up did not converge within " + format_double(config.spinup_max_seconds) +
                                   " s (relative volume change per stride " + format_double(residual) + ")");
        solver.advance_to(s, f, s.t + config.output_stride);
        const double vol = solver.volume(s);
        residual = std::abs(vol - prev) / std::max(vol, 1e-12);
        prev = vol;
        if (s.t >= ramp_end && residual < config.spinup_tolerance) break;
    }
    s.t = 0.0;
    return s;
}

StateSequence run_event(const TriMesh& mesh, const HydraulicState& init, const Hydrograph& hydrograph,
                        const std::function<double(double)>& stage, const SolverConfig& config,
                        double horizon_seconds) {
    SweSolver solver(mesh, config);
    BoundaryForcing f;
    f.discharge = [&hydrograph](double t) { return hydrograph.at(t); };
    f.stage = stage;
    HydraulicState s = init;
    s.t = 0.0;
    solver.apply_boundaries(s, f, 0.0);

    StateSequence seq;
    seq.mesh_hash = mesh_hash(mesh);
    seq.stride = config.output_stride;
    const auto count = static_cast<std::size_t>(std::floor(horizon_seconds / config.output_stride + 1e-9));
    for (std::size_t k = 0; k <= count; ++k) {
        const double t = static_cast<double>(k) * config.output_stride;
        if (k > 0) solver.advance_to(s, f, t);
        seq.snapshots.push_back(s);
        seq.discharge.push_back(f.discharge(t));
        seq.stage.push_back(f.stage(t));
    }
    return seq;
}

std::string serialize_fgb(const StateSequence& seq) {
    nlohmann::json meta = {{"format", "FGB"},
                           {"mesh_hash", seq.mesh_hash},
                           {"dt", seq.stride},
                           {"stride", seq.stride},
                           {"variables", {"h", "u", "v"}},
                           {"node_count", seq.node_count()},
                           {"snapshot_count", seq.size()},
                           {"forcing", {{"discharge", seq.discharge}, {"stage", seq.stage}}},
                           {"meta", seq.meta}};
    ByteWriter w;
    write_container_header(w, "FGB1", kFgbVersion, dump_json(meta));
    for (const auto& s : seq.snapshots) {
        w.f64(s.t);
        for (std::size_t i = 0; i < s.size(); ++i) {
            w.f64(s.h[i]);
            w.f64(s.u[i]);
            w.f64(s.v[i]);
        }
    }
    return w.bytes();
}

StateSequence parse_fgb(const std::string& bytes) {
    ByteReader r(bytes);
    const auto meta = nlohmann::json::parse(read_container_header(r, "FGB1", kFgbVersion));
    StateSequence seq;
    seq.mesh_hash = meta.at("mesh_hash").get<std::string>();
    seq.stride = meta.at("stride").get<double>();
    seq.discharge = meta.at("forcing").at("discharge").get<std::vector<double>>();
    seq.stage = meta.at("forcing").at("stage").get<std::vector<double>>();
    seq.meta = meta.value("meta", nlohmann::json::object());
    const auto n = meta.at("node_count").get<std::size_t>();
    const auto count = meta.at("snapshot_count").get<std::size_t>();
    for (std::size_t k = 0; k < count; ++k) {
        auto s = HydraulicState::dry(n);
        s.t = r.f64();
        for (std::size_t i = 0; i < n; ++i) {
            s.h[i] = r.f64();
            s.u[i] = r.f64();
            s.v[i] = r.f64();
        }
        seq.snapshots.push_back(std::move(s));
    }
    if (!r.at_end()) throw InvalidInput("FGB: trailing bytes");
    return seq;
}

void save_sequence(const StateSequence& seq, const std::string& path) { write_file(path, serialize_fgb(seq)); }

StateSequence load_sequence(const std::string& path) { return parse_fgb(read_file(path)); }

}  // namespace floodgnn
