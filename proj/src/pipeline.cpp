#include "floodgnn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "floodgnn/graph.hpp"
#include "floodgnn/json_util.hpp"
#include "floodgnn/multimesh.hpp"
#include "floodgnn/projection.hpp"

namespace floodgnn {

namespace {

namespace fs = std::filesystem;

bool is_allowed_factor(int f) { return f == 1 || f == 2 || f == 4 || f == 8 || f == 16 || f == 32; }

std::string two_digits(std::size_t v) {
    std::ostringstream o;
    o << std::setw(2) << std::setfill('0') << v;
    return o.str();
}

std::string short_number(double v) {
    std::ostringstream o;
    o << v;
    return o.str();
}

std::string join_path(const std::vector<std::string>& path) {
    std::string s;
    for (const auto& p : path) s += (s.empty() ? "" : ".") + p;
    return s;
}

// Kinds that may replace each other: integers only accept integers, floats any number.
bool same_kind(const nlohmann::json& def, const nlohmann::json& v) {
    if (def.is_number_integer()) return v.is_number_integer();
    if (def.is_number_float()) return v.is_number();
    return def.type() == v.type();
}

void check_against(const nlohmann::json& user, const nlohmann::json& def, std::vector<std::string>& path) {
    if (!same_kind(def, user))
        throw InvalidInput(join_path(path) + ": expected " + std::string(def.type_name()) + ", got " +
                           std::string(user.type_name()));
    if (user.is_object()) {
        for (const auto& [k, v] : user.items()) {
            path.push_back(k);
            if (!def.contains(k)) throw InvalidInput(join_path(path) + ": unknown key");
            check_against(v, def.at(k), path);
            path.pop_back();
        }
    } else if (user.is_array() && !def.empty()) {
        for (std::size_t i = 0; i < user.size(); ++i) {
            path.push_back(std::to_string(i));
            check_against(user[i], def.front(), path);
            path.pop_back();
        }
    }
}

// Line of the key path in the config text: each component is searched after
// the previous one. Returns 0 when it cannot be found.
std::size_t line_of(const std::string& text, const std::string& dotted) {
    std::size_t pos = 0;
    std::istringstream parts(dotted);
    std::string part;
    bool any = false;
    while (std::getline(parts, part, '.')) {
        if (!part.empty() && std::all_of(part.begin(), part.end(), [](unsigned char c) { return std::isdigit(c); }))
            break;  // array element: report the array's key
        const auto found = text.find('"' + part + '"', pos);
        if (found == std::string::npos) return 0;
        pos = found;
        any = true;
    }
    if (!any) return 0;
    return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n')) + 1;
}

nlohmann::json catalogue_json(const CatalogueParams& c) {
    return {{"families", c.families}, {"peak_min", c.peak_min}, {"peak_max", c.peak_max}, {"intervals", c.intervals}};
}

nlohmann::json evaluation_json(const EvaluationParams& e) {
    return {{"thresholds", e.thresholds},
            {"horizon_steps", e.horizon_steps},
            {"grid_spacing", e.grid_spacing},
            {"map_steps", e.map_steps}};
}

std::string hash_of(const nlohmann::json& j) { return hash_hex(fnv1a64(dump_json(j))); }

std::string sequence_hash(const StateSequence& s) { return hash_hex(fnv1a64(serialize_fgb(s))); }

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void validate(const PipelineConfig& c) {
    if (c.out.empty()) throw InvalidInput("out: must not be empty");
    try {
        validate(c.density, c.geometry);
    } catch (const InvalidInput& e) {
        throw InvalidInput(std::string("density: ") + e.what());
    }
    if (c.density.relaxation != 1) throw InvalidInput("density.relaxation: the base spec must use factor 1");
    if (c.factors.empty() || c.factors.front() != 1) throw InvalidInput("factors: must start with 1");
    for (std::size_t k = 0; k < c.factors.size(); ++k) {
        if (!is_allowed_factor(c.factors[k])) throw InvalidInput("factors: each must be one of 1, 2, 4, 8, 16, 32");
        if (k > 0 && c.factors[k] <= c.factors[k - 1]) throw InvalidInput("factors: must be strictly increasing");
    }
    const auto has_factor = [&](int f) { return std::find(c.factors.begin(), c.factors.end(), f) != c.factors.end(); };
    if (!has_factor(c.training_factor)) throw InvalidInput("training_factor: must be one of factors");
    for (std::size_t k = 0; k < c.multimesh_levels.size(); ++k) {
        const int l = c.multimesh_levels[k];
        if (!has_factor(l) || l <= c.training_factor)
            throw InvalidInput("multimesh_levels: each must be a configured factor above training_factor");
        if (k > 0 && l <= c.multimesh_levels[k - 1]) throw InvalidInput("multimesh_levels: must be strictly increasing");
    }
    if (c.historical.count < c.catalogue.families)
        throw InvalidInput("historical.count: needs at least one flood per family");
    if (!(c.historical.duration_hours > 0.0)) throw InvalidInput("historical.duration_hours: must be positive");
    if (c.catalogue.families < 1) throw InvalidInput("catalogue.families: must be positive");
    if (c.catalogue.intervals < 2) throw InvalidInput("catalogue.intervals: must be at least 2");
    if (!(c.catalogue.peak_min > kBaseDischarge && c.catalogue.peak_max > c.catalogue.peak_min))
        throw InvalidInput("catalogue.peak_max: peaks must satisfy base discharge < peak_min < peak_max");
    try {
        validate(c.solver);
    } catch (const InvalidInput& e) {
        throw InvalidInput(std::string("solver: ") + e.what());
    }
    if (!(c.event_hours > 0.0)) throw InvalidInput("event_hours: must be positive");
    const double snapshots = std::floor(c.event_hours * 3600.0 / c.solver.output_stride + 1e-9);
    if (snapshots < 1.0) throw InvalidInput("event_hours: shorter than one output stride");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw InvalidInput("train_fraction: must lie in (0, 1)");
    if (c.experiments.empty()) throw InvalidInput("experiments: must not be empty");
    std::set<std::string> seen;
    for (const auto& e : c.experiments) {
        try {
            experiment(e);
        } catch (const InvalidInput& err) {
            throw InvalidInput(std::string("experiments: ") + err.what());
        }
        if (!seen.insert(e).second) throw InvalidInput("experiments: " + e + " listed twice");
    }
    try {
        validate(c.schedule);
    } catch (const InvalidInput& e) {
        throw InvalidInput(std::string("schedule: ") + e.what());
    }
    if (c.model.latent < 1 || c.model.blocks < 0 || c.model.hidden_layers < 0)
        throw InvalidInput("model: latent must be positive, blocks and hidden_layers non-negative");
    const auto& ev = c.evaluation;
    if (ev.thresholds.empty()) throw InvalidInput("evaluation.thresholds: must not be empty");
    for (std::size_t k = 0; k < ev.thresholds.size(); ++k) {
        if (!(ev.thresholds[k] >= 0.0)) throw InvalidInput("evaluation.thresholds: must be non-negative");
        if (k > 0 && ev.thresholds[k] <= ev.thresholds[k - 1])
            throw InvalidInput("evaluation.thresholds: must be strictly increasing");
    }
    if (ev.horizon_steps < 1 || static_cast<double>(ev.horizon_steps) > snapshots)
        throw InvalidInput("evaluation.horizon_steps: must lie in [1, event strides]");
    if (!(ev.grid_spacing > 0.0)) throw InvalidInput("evaluation.grid_spacing: must be positive");
    for (int s : ev.map_steps)
        if (s < 0 || s > ev.horizon_steps) throw InvalidInput("evaluation.map_steps: must lie in [0, horizon_steps]");
    if (c.jobs < 1) throw InvalidInput("jobs: must be at least 1");
}

nlohmann::json to_json(const PipelineConfig& c) {
    nlohmann::json schedule = to_json(c.schedule);
    schedule.erase("seed");  // the run seed drives training
    nlohmann::json model = to_json(c.model);
    model.erase("seed");
    model.erase("schema");  // chosen per experiment, except the shortcut flag
    model["origin_flag"] = c.model.schema.origin_flag;
    return {{"seed", c.seed},
            {"out", c.out},
            {"geometry", to_json(c.geometry)},
            {"density", to_json(c.density)},
            {"historical", to_json(c.historical)},
            {"catalogue", catalogue_json(c.catalogue)},
            {"solver", to_json(c.solver)},
            {"event_hours", c.event_hours},
            {"factors", c.factors},
            {"training_factor", c.training_factor},
            {"multimesh_levels", c.multimesh_levels},
            {"train_fraction", c.train_fraction},
            {"experiments", c.experiments},
            {"schedule", schedule},
            {"model", model},
            {"evaluation", evaluation_json(c.evaluation)},
            {"jobs", c.jobs}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    const nlohmann::json def = to_json(PipelineConfig{});
    if (!j.is_object()) throw InvalidInput("configuration must be a JSON object");
    std::vector<std::string> path;
    check_against(j, def, path);
    nlohmann::json m = def;
    m.merge_patch(j);

    PipelineConfig c;
    c.seed = m.at("seed").get<std::uint64_t>();
    c.out = m.at("out").get<std::string>();
    c.geometry = valley_geometry_from_json(m.at("geometry"));
    c.density = density_spec_from_json(m.at("density"));
    c.historical = historical_spec_from_json(m.at("historical"));
    const auto& cat = m.at("catalogue");
    c.catalogue = {cat.at("families").get<int>(), cat.at("peak_min").get<double>(), cat.at("peak_max").get<double>(),
                   cat.at("intervals").get<int>()};
    try {
        c.solver = solver_config_from_json(m.at("solver"));
    } catch (const InvalidInput& e) {
        throw InvalidInput(std::string("solver: ") + e.what());
    }
    c.event_hours = m.at("event_hours").get<double>();
    c.factors = m.at("factors").get<std::vector<int>>();
    c.training_factor = m.at("training_factor").get<int>();
    c.multimesh_levels = m.at("multimesh_levels").get<std::vector<int>>();
    c.train_fraction = m.at("train_fraction").get<double>();
    c.experiments = m.at("experiments").get<std::vector<std::string>>();
    try {
        c.schedule = train_schedule_from_json(m.at("schedule"));
    } catch (const InvalidInput& e) {
        throw InvalidInput(std::string("schedule: ") + e.what());
    }
    c.schedule.seed = c.seed;
    try {
        nlohmann::json mj = m.at("model");
        const bool flag = mj.at("origin_flag").get<bool>();
        mj.erase("origin_flag");
        c.model = model_config_from_json(mj);
        c.model.schema.origin_flag = flag;
    } catch (const InvalidInput& e) {
        throw InvalidInput(std::string("model: ") + e.what());
    }
    c.model.seed = c.seed;
    const auto& ev = m.at("evaluation");
    c.evaluation.thresholds = ev.at("thresholds").get<std::vector<double>>();
    c.evaluation.horizon_steps = ev.at("horizon_steps").get<int>();
    c.evaluation.grid_spacing = ev.at("grid_spacing").get<double>();
    c.evaluation.map_steps = ev.at("map_steps").get<std::vector<int>>();
    c.jobs = m.at("jobs").get<int>();
    validate(c);
    return c;
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidInput("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    nlohmann::json* node = &j;
    std::istringstream parts(key);
    std::string part;
    std::vector<std::string> names;
    while (std::getline(parts, part, '.')) {
        if (part.empty()) throw InvalidInput("override '" + assignment + "' has an empty key component");
        names.push_back(part);
    }
    for (std::size_t k = 0; k + 1 < names.size(); ++k) {
        if (!node->is_object()) throw InvalidInput("override '" + assignment + "': " + names[k] + " is not an object");
        node = &(*node)[names[k]];
        if (node->is_null()) *node = nlohmann::json::object();
    }
    if (!node->is_object()) throw InvalidInput("override '" + assignment + "' does not address an object member");
    (*node)[names.back()] = std::move(value);
}

PipelineConfig parse_pipeline_config(const std::string& text, const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::object();
    bool blank = std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); });
    if (!blank) {
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw InvalidInput(std::string("config: ") + e.what());
        }
    }
    for (const auto& o : overrides) apply_override(j, o);
    try {
        return pipeline_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    } catch (const InvalidInput& e) {
        const std::string msg = e.what();
        const auto colon = msg.find(':');
        if (colon != std::string::npos && !blank) {
            if (const auto line = line_of(text, msg.substr(0, colon)); line > 0)
                throw InvalidInput("config line " + std::to_string(line) + ": " + msg);
        }
        throw;
    }
}

std::vector<std::size_t> select_events(const HydrographCatalogue& catalogue, const std::string& selector) {
    std::optional<int> family;
    std::optional<double> peak;
    std::optional<std::size_t> index;
    if (!selector.empty() && selector != "all") {
        std::istringstream parts(selector);
        std::string item;
        while (std::getline(parts, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw InvalidInput("event selector item '" + item + "' is not key=value");
            const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
            try {
                std::size_t used = 0;
                if (key == "family") {
                    family = std::stoi(value, &used);
                } else if (key == "peak") {
                    peak = std::stod(value, &used);
                } else if (key == "event") {
                    index = std::stoul(value, &used);
                } else {
                    throw InvalidInput("event selector key '" + key + "' (expected family, peak or event)");
                }
                if (used != value.size()) throw std::invalid_argument(value);
            } catch (const InvalidInput&) {
                throw;
            } catch (const std::exception&) {
                throw InvalidInput("event selector value '" + value + "' for " + key + " is not a number");
            }
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < catalogue.events.size(); ++e) {
        const auto& ev = catalogue.events[e];
        if (index && *index != e) continue;
        if (family && (!ev.family_id || *ev.family_id != *family)) continue;
        if (peak && (!ev.peak_target || std::abs(*ev.peak_target - *peak) > 1e-6 * std::max(1.0, std::abs(*peak))))
            continue;
        out.push_back(e);
    }
    if (out.empty()) throw InvalidInput("event selector '" + selector + "' matches no catalogue event");
    return out;
}

// ---------------------------------------------------------------------------
// Artifact layout

std::string ArtifactPaths::mesh(int factor) const { return root + "/meshes/mesh_f" + std::to_string(factor) + ".fgm"; }
std::string ArtifactPaths::catalogue() const { return root + "/catalogue.fgh"; }
std::string ArtifactPaths::initial_state() const { return root + "/sim/initial_state.fgb"; }
std::string ArtifactPaths::event(std::size_t i) const { return root + "/sim/event_" + two_digits(i) + ".fgb"; }
std::string ArtifactPaths::projected(std::size_t i, int factor) const {
    return root + "/projected/event_" + two_digits(i) + "_f" + std::to_string(factor) + ".fgb";
}
std::string ArtifactPaths::graph(Connectivity c, int factor) const {
    return root + "/graphs/" + to_string(c) + "_f" + std::to_string(factor) + ".fgg";
}
std::string ArtifactPaths::graph_report(int factor) const {
    return root + "/graphs/multimesh_report_f" + std::to_string(factor) + ".json";
}
std::string ArtifactPaths::models() const { return root + "/models"; }
std::string ArtifactPaths::checkpoint(const std::string& e) const { return models() + "/" + e + ".fgp"; }
std::string ArtifactPaths::rollout(const std::string& e, std::size_t i) const {
    return root + "/rollouts/" + e + "_event_" + two_digits(i) + ".fgb";
}
std::string ArtifactPaths::metrics() const { return root + "/eval/metrics.csv"; }
std::string ArtifactPaths::summary() const { return root + "/eval/summary.json"; }
std::string ArtifactPaths::graph_stats() const { return root + "/stats/graph_stats.csv"; }
std::string ArtifactPaths::map(const std::string& e, std::size_t i, int step, const std::string& kind) const {
    return root + "/maps/" + e + "_event_" + two_digits(i) + "_step_" + two_digits(static_cast<std::size_t>(step)) +
           "_" + kind + ".ppm";
}

// ---------------------------------------------------------------------------
// Commands

Pipeline::Pipeline(PipelineConfig config, std::ostream* log) : cfg_(std::move(config)), log_(log) {
    validate(cfg_);
    cfg_.schedule.seed = cfg_.seed;
    cfg_.model.seed = cfg_.seed;
    paths_.root = cfg_.out;
}

void Pipeline::note(const std::string& line) const {
    static std::mutex mu;
    if (!log_) return;
    std::lock_guard<std::mutex> lock(mu);
    *log_ << line << '\n';
    log_->flush();
}

namespace {

void ensure_parent(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void require_file(const std::string& path, const std::string& producer) {
    if (!fs::exists(path)) throw InvalidInput("missing " + path + " (run `" + producer + "` first)");
}

}  // namespace

TriMesh Pipeline::load_mesh_artifact(int factor) const {
    require_file(paths_.mesh(factor), "synth");
    return load_mesh(paths_.mesh(factor));
}

HydrographCatalogue Pipeline::load_catalogue_artifact() const {
    require_file(paths_.catalogue(), "synth");
    return load_catalogue(paths_.catalogue());
}

StateSequence Pipeline::load_sequence_artifact(const std::string& path) const {
    require_file(path, path.find("/projected/") != std::string::npos ? "project" : "simulate");
    return load_sequence(path);
}

std::vector<std::string> Pipeline::resolve(const std::vector<std::string>& experiments) const {
    const auto& names = experiments.empty() ? cfg_.experiments : experiments;
    for (const auto& n : names) experiment(n);
    return names;
}

EventSplit Pipeline::split() const {
    return split_events(load_catalogue_artifact(), cfg_.train_fraction, cfg_.seed);
}

std::vector<std::string> Pipeline::synth() {
    std::vector<std::string> written;
    const MeshFamily family = build_mesh_family(cfg_.density, cfg_.geometry, cfg_.seed, cfg_.factors);
    for (std::size_t k = 0; k < family.factors.size(); ++k) {
        const auto path = paths_.mesh(family.factors[k]);
        ensure_parent(path);
        save_mesh(family.meshes[k], path);
        note("mesh factor " + std::to_string(family.factors[k]) + ": " +
             std::to_string(family.meshes[k].node_count()) + " nodes");
        written.push_back(path);
    }
    const auto historical = synthetic_historical(cfg_.historical, cfg_.seed);
    const auto catalogue = catalogue_from_historical(historical, cfg_.catalogue.families, cfg_.catalogue.peak_min,
                                                     cfg_.catalogue.peak_max, cfg_.catalogue.intervals);
    ensure_parent(paths_.catalogue());
    save_catalogue(catalogue, paths_.catalogue());
    note("catalogue: " + std::to_string(catalogue.events.size()) + " events");
    written.push_back(paths_.catalogue());
    return written;
}

std::vector<std::string> Pipeline::simulate(const std::string& selector, bool resume) {
    const TriMesh fine = load_mesh_artifact(1);
    const auto catalogue = load_catalogue_artifact();
    const auto chosen = select_events(catalogue, selector);
    const std::string fine_hash = mesh_hash(fine);
    std::vector<std::string> written;

    // Spin-up is shared by every event; it is recomputed only when its inputs change.
    const std::string init_hash = hash_of({{"mesh", fine_hash}, {"solver", to_json(cfg_.solver)}});
    HydraulicState init;
    const auto init_path = paths_.initial_state();
    bool cached = false;
    if (fs::exists(init_path)) {
        StateSequence s = load_sequence(init_path);
        if (s.meta.value("input_hash", std::string()) == init_hash && s.size() == 1) {
            init = s.snapshots.front();
            cached = true;
        }
    }
    if (!cached) {
        note("spin-up on " + std::to_string(fine.node_count()) + " nodes");
        init = initialize_domain(fine, cfg_.solver);
        StateSequence s;
        s.mesh_hash = fine_hash;
        s.stride = cfg_.solver.output_stride;
        s.snapshots = {init};
        s.discharge = {cfg_.solver.spinup_discharge};
        s.stage = {cfg_.solver.spinup_stage};
        s.meta = {{"input_hash", init_hash}, {"kind", "initial_state"}};
        ensure_parent(init_path);
        save_sequence(s, init_path);
    }
    written.push_back(init_path);

    const double horizon = cfg_.event_hours * 3600.0;
    const double stage = cfg_.solver.event_stage;
    std::vector<std::string> outputs(chosen.size());
    parallel_for(chosen.size(), cfg_.jobs, [&](std::size_t k) {
        const std::size_t e = chosen[k];
        const Hydrograph& h = catalogue.events[e];
        const std::string input_hash = hash_of({{"initial_state", init_hash},
                                                {"solver", to_json(cfg_.solver)},
                                                {"dt", h.dt},
                                                {"q", h.q},
                                                {"horizon", horizon}});
        const auto path = paths_.event(e);
        outputs[k] = path;
        if (resume && fs::exists(path)) {
            try {
                if (load_sequence(path).meta.value("input_hash", std::string()) == input_hash) {
                    note("event " + std::to_string(e) + ": up to date");
                    return;
                }
            } catch (const InvalidInput&) {
                // unreadable: simulate again
            }
        }
        StateSequence seq = run_event(fine, init, h, [stage](double) { return stage; }, cfg_.solver, horizon);
        seq.meta = {{"input_hash", input_hash},
                    {"event", e},
                    {"family", h.family_id ? nlohmann::json(*h.family_id) : nlohmann::json()},
                    {"peak", h.peak_target ? nlohmann::json(*h.peak_target) : nlohmann::json()}};
        ensure_parent(path);
        save_sequence(seq, path);
        note("event " + std::to_string(e) + ": " + std::to_string(seq.size()) + " snapshots");
    });
    written.insert(written.end(), outputs.begin(), outputs.end());
    return written;
}

std::vector<std::string> Pipeline::project() {
    const TriMesh fine = load_mesh_artifact(1);
    const TriMesh coarse = load_mesh_artifact(cfg_.training_factor);
    const auto catalogue = load_catalogue_artifact();
    const ProjectionMap map = build_projection_map(fine, coarse, cfg_.training_factor);
    std::vector<std::string> written;
    for (std::size_t e = 0; e < catalogue.events.size(); ++e) {
        const auto src = paths_.event(e);
        if (!fs::exists(src)) continue;
        StateSequence p = project_states(load_sequence(src), map);
        const auto path = paths_.projected(e, cfg_.training_factor);
        ensure_parent(path);
        save_sequence(p, path);
        written.push_back(path);
    }
    if (written.empty()) throw InvalidInput("no simulated events under " + paths_.root + "/sim (run `simulate` first)");
    note("projected " + std::to_string(written.size()) + " events onto factor " +
         std::to_string(cfg_.training_factor) + " (" + std::to_string(map.nearest_count()) + " nearest-node fallbacks)");
    return written;
}

std::vector<std::string> Pipeline::multimesh() {
    const TriMesh base = load_mesh_artifact(cfg_.training_factor);
    std::vector<TriMesh> coarser;
    for (int l : cfg_.multimesh_levels) coarser.push_back(load_mesh_artifact(l));
    std::vector<const TriMesh*> ptrs;
    for (const auto& m : coarser) ptrs.push_back(&m);

    std::vector<std::string> written;
    const MultimeshGraph standard = standard_graph(base);
    const MultimeshGraph multi = build_multimesh(base, ptrs, cfg_.multimesh_levels);
    const auto sp = paths_.graph(Connectivity::Standard, cfg_.training_factor);
    const auto mp = paths_.graph(Connectivity::Multimesh, cfg_.training_factor);
    ensure_parent(sp);
    save_graph(standard, base, sp);
    save_graph(multi, base, mp);
    const auto rp = paths_.graph_report(cfg_.training_factor);
    write_file(rp, dump_json(to_json(multimesh_report(multi, base.node_count()))) + "\n");
    note("graphs: " + std::to_string(standard.merged.size()) + " standard, " + std::to_string(multi.merged.size()) +
         " multimesh directed edges");
    written = {sp, mp, rp};
    return written;
}

std::shared_ptr<const SimGraph> Pipeline::sim_graph(Connectivity c, const TriMesh& mesh) const {
    const auto path = paths_.graph(c, cfg_.training_factor);
    require_file(path, "multimesh");
    return std::make_shared<const SimGraph>(make_sim_graph(mesh, load_graph(path, mesh)));
}

std::unique_ptr<TrainingSet> Pipeline::training_set(bool standard, bool multimesh) const {
    const int f = cfg_.training_factor;
    auto set = std::make_unique<TrainingSet>();
    set->mesh = load_mesh_artifact(f);
    if (standard) set->data.standard = sim_graph(Connectivity::Standard, set->mesh);
    if (multimesh) set->data.multimesh = sim_graph(Connectivity::Multimesh, set->mesh);
    const EventSplit sp = split();
    nlohmann::json identity = {{"mesh", mesh_hash(set->mesh)}, {"events", nlohmann::json::array()}};
    set->sequences.reserve(sp.train.size());
    for (std::size_t e : sp.train) {
        set->sequences.push_back(load_sequence_artifact(paths_.projected(e, f)));
        identity["events"].push_back({{"event", e}, {"hash", sequence_hash(set->sequences.back())}});
    }
    for (const auto& s : set->sequences) set->data.train.push_back(&s);
    set->data.identity = hash_of(identity);
    return set;
}

std::unique_ptr<HeldOutSet> Pipeline::held_out_set(bool with_references) const {
    const int f = cfg_.training_factor;
    auto set = std::make_unique<HeldOutSet>();
    set->mesh = load_mesh_artifact(f);
    if (with_references) set->fine = load_mesh_artifact(1);
    set->events = split().test;
    for (std::size_t e : set->events) {
        set->targets.push_back(load_sequence_artifact(paths_.projected(e, f)));
        if (with_references) set->references.push_back(load_sequence_artifact(paths_.event(e)));
    }
    return set;
}

std::vector<std::string> Pipeline::train(const std::vector<std::string>& experiments) {
    const auto names = resolve(experiments);
    bool need_standard = false, need_multi = false;
    for (const auto& n : names)
        (experiment(n).connectivity == Connectivity::Standard ? need_standard : need_multi) = true;
    const auto set = training_set(need_standard, need_multi);

    std::vector<std::string> written(names.size());
    parallel_for(names.size(), cfg_.jobs, [&](std::size_t k) {
        note("training " + names[k]);
        const TrainResult r =
            run_experiment(experiment(names[k]), cfg_.schedule, cfg_.model, set->data, paths_.models());
        note(names[k] + ": final loss " + format_double(r.log.back().loss));
        written[k] = paths_.checkpoint(names[k]);
    });
    return written;
}

std::vector<std::string> Pipeline::rollout(const std::vector<std::string>& experiments) {
    const auto names = resolve(experiments);
    const auto set = held_out_set(false);
    const auto& targets = set->targets;

    std::vector<std::string> written;
    for (const auto& n : names) {
        const ExperimentConfig ex = experiment(n);
        require_file(paths_.checkpoint(n), "train --experiment " + n);
        const Checkpoint ck = load_checkpoint(paths_.checkpoint(n));
        const auto graph = sim_graph(ex.connectivity, set->mesh);
        std::vector<StateSequence> out(targets.size());
        parallel_for(targets.size(), cfg_.jobs, [&](std::size_t k) {
            out[k] = floodgnn::rollout(*ck.model, graph, ck.normalizer, targets[k].snapshots.front(), targets[k],
                                       cfg_.evaluation.horizon_steps);
            out[k].meta["experiment"] = n;
            out[k].meta["event"] = set->events[k];
            out[k].meta["training_hash"] = ck.training_hash;
        });
        for (std::size_t k = 0; k < out.size(); ++k) {
            const auto path = paths_.rollout(n, set->events[k]);
            ensure_parent(path);
            save_sequence(out[k], path);
            written.push_back(path);
        }
    }
    return written;
}

std::vector<EvaluationResult> Pipeline::run_evaluation(const std::vector<std::string>& names,
                                                       const std::vector<double>& thresholds,
                                                       const std::vector<int>& map_steps) const {
    const auto set = held_out_set(true);
    std::vector<EvaluationResult> results;
    for (const auto& n : names) {
        const ExperimentConfig ex = experiment(n);
        require_file(paths_.checkpoint(n), "train --experiment " + n);
        const Checkpoint ck = load_checkpoint(paths_.checkpoint(n));
        EvaluationInputs in;
        in.checkpoint = &ck;
        in.graph = sim_graph(ex.connectivity, set->mesh);
        in.surrogate_mesh = &set->mesh;
        in.fine_mesh = &set->fine;
        for (std::size_t k = 0; k < set->targets.size(); ++k) {
            in.targets.push_back(&set->targets[k]);
            in.references.push_back(&set->references[k]);
        }
        in.thresholds = thresholds;
        in.horizon_steps = cfg_.evaluation.horizon_steps;
        in.grid_spacing = cfg_.evaluation.grid_spacing;
        in.map_steps = map_steps;
        in.jobs = cfg_.jobs;
        EvaluationResult r = evaluate_experiment(in);
        r.report.experiment = n;
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<std::string> Pipeline::evaluate(const std::vector<std::string>& experiments,
                                            const std::vector<double>& thresholds) {
    const auto names = resolve(experiments);
    auto th = thresholds.empty() ? cfg_.evaluation.thresholds : thresholds;
    for (std::size_t k = 0; k < th.size(); ++k)
        if (!(th[k] >= 0.0) || (k > 0 && th[k] <= th[k - 1]))
            throw InvalidInput("thresholds must be non-negative and strictly increasing");
    const auto results = run_evaluation(names, th, {});

    std::vector<MetricsReport> reports;
    nlohmann::json summary = nlohmann::json::object();
    for (const auto& r : results) {
        reports.push_back(r.report);
        nlohmann::json csi_final = nlohmann::json::object();
        for (const auto& [t, st] : r.report.csi) csi_final[short_number(t)] = st.mean.back();
        summary[r.report.experiment] = {{"mean_rollout_l1_h", mean_rollout_l1_h(r.report)},
                                        {"final_l1_h", r.report.l1[0].mean.back()},
                                        {"final_csi", csi_final},
                                        {"events", r.report.events}};
        note(r.report.experiment + ": mean rollout L1(h) " + format_double(mean_rollout_l1_h(r.report)));
    }
    ensure_parent(paths_.metrics());
    write_file(paths_.metrics(), report_csv(reports));
    write_file(paths_.summary(), dump_json(summary) + "\n");
    return {paths_.metrics(), paths_.summary()};
}

std::vector<std::string> Pipeline::render(const std::vector<std::string>& experiments) {
    const auto names = resolve(experiments);
    if (cfg_.evaluation.map_steps.empty()) throw InvalidInput("evaluation.map_steps: nothing to render");
    const auto results = run_evaluation(names, cfg_.evaluation.thresholds, cfg_.evaluation.map_steps);
    const EventSplit sp = split();
    const TriMesh mesh = load_mesh_artifact(cfg_.training_factor);
    const TriMesh fine = load_mesh_artifact(1);

    std::vector<std::string> written;
    for (std::size_t x = 0; x < results.size(); ++x) {
        const auto& r = results[x];
        const auto& n = names[x];
        const GridSampler ps = make_grid_sampler(mesh, r.grid);
        const GridSampler fs_ = make_grid_sampler(fine, r.grid);
        for (const auto& m : r.maps) {
            const std::size_t event = sp.test[m.event];
            const auto path = paths_.map(n, event, m.lead_step, "csi" + short_number(m.threshold));
            ensure_parent(path);
            write_file(path, render_comparison(m.pred, m.ref, r.grid));
            written.push_back(path);
        }
        for (std::size_t k = 0; k < r.rollouts.size(); ++k) {
            const auto ref = load_sequence_artifact(paths_.event(sp.test[k]));
            for (int step : cfg_.evaluation.map_steps) {
                const auto s = static_cast<std::size_t>(step);
                const auto pred_h = grid_depth(r.rollouts[k].snapshots[s].h, ps);
                const auto ref_h = grid_depth(ref.snapshots[s].h, fs_);
                double top = 0.0;
                for (double v : pred_h) top = std::max(top, v);
                for (double v : ref_h) top = std::max(top, v);
                top = std::max(top, 1e-6);
                const auto pp = paths_.map(n, sp.test[k], step, "depth_pred");
                const auto rp = paths_.map(n, sp.test[k], step, "depth_ref");
                write_file(pp, render_depth(pred_h, r.grid, top));
                write_file(rp, render_depth(ref_h, r.grid, top));
                written.push_back(pp);
                written.push_back(rp);
            }
        }
    }
    return written;
}

std::string Pipeline::stats_graph() {
    std::ostringstream csv, text;
    csv << "graph,factor,nodes,directed_edges,mean_edge_m,r10_median_m,r10_mean_m,r10_max_m\n";
    text << std::left << std::setw(10) << "graph" << std::right << std::setw(7) << "factor" << std::setw(8)
         << "nodes" << std::setw(10) << "edges" << std::setw(12) << "mean edge" << std::setw(12) << "r10 median"
         << std::setw(12) << "r10 mean" << std::setw(12) << "r10 max" << '\n';
    auto row = [&](const std::string& name, int factor, const HopRadiusStats& s) {
        csv << name << ',' << factor << ',' << s.node_count << ',' << s.directed_edge_count << ','
            << format_double(s.mean_edge_length) << ',' << format_double(s.r10_median) << ','
            << format_double(s.r10_mean) << ',' << format_double(s.r10_max) << '\n';
        text << std::left << std::setw(10) << name << std::right << std::setw(7) << factor << std::setw(8)
             << s.node_count << std::setw(10) << s.directed_edge_count << std::fixed << std::setprecision(1)
             << std::setw(12) << s.mean_edge_length << std::setw(12) << s.r10_median << std::setw(12) << s.r10_mean
             << std::setw(12) << s.r10_max << '\n';
        text.unsetf(std::ios::fixed);
    };
    for (int f : cfg_.factors) {
        const TriMesh m = load_mesh_artifact(f);
        row("standard", f, hop_radius_stats(extract_directed_edges(m), m.node_count()));
    }
    const TriMesh base = load_mesh_artifact(cfg_.training_factor);
    const auto mp = paths_.graph(Connectivity::Multimesh, cfg_.training_factor);
    require_file(mp, "multimesh");
    const MultimeshGraph g = load_graph(mp, base);
    row("multimesh", cfg_.training_factor, hop_radius_stats(g.merged, base.node_count()));
    ensure_parent(paths_.graph_stats());
    write_file(paths_.graph_stats(), csv.str());
    return text.str();
}

}  // namespace floodgnn
