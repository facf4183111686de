#include "floodgnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "floodgnn/common.hpp"
#include "floodgnn/json_util.hpp"

namespace floodgnn {

std::string to_string(Connectivity c) { return c == Connectivity::Standard ? "standard" : "multimesh"; }

Connectivity connectivity_from_string(const std::string& s) {
    if (s == "standard") return Connectivity::Standard;
    if (s == "multimesh") return Connectivity::Multimesh;
    throw InvalidInput("unknown connectivity '" + s + "'");
}

const std::vector<ExperimentConfig>& experiment_matrix() {
    static const std::vector<ExperimentConfig> rows = {
        {"E1", Connectivity::Standard, false, false},  {"E2", Connectivity::Standard, true, false},
        {"E3", Connectivity::Standard, true, true},    {"E4", Connectivity::Multimesh, false, false},
        {"E5", Connectivity::Multimesh, true, false},  {"E6", Connectivity::Multimesh, true, true},
    };
    return rows;
}

ExperimentConfig experiment(const std::string& name) {
    for (const auto& e : experiment_matrix())
        if (e.name == name) return e;
    throw InvalidInput("unknown experiment '" + name + "' (expected E1..E6)");
}

void validate(const ExperimentConfig& c) {
    if (experiment(c.name) != c) throw InvalidInput("experiment " + c.name + " does not match its matrix row");
}

nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"name", c.name},
            {"connectivity", to_string(c.connectivity)},
            {"use_discharge", c.use_discharge},
            {"use_pushforward", c.use_pushforward}};
}

// ---------------------------------------------------------------------------

double TrainSchedule::lr(std::int64_t step) const { return lr0 * std::pow(decay, static_cast<double>(step)); }

void validate(const TrainSchedule& s) {
    if (s.total_epochs < 1) throw InvalidInput("total_epochs must be positive");
    if (s.pf_epochs < 0 || s.pf_epochs > s.total_epochs) throw InvalidInput("pf_epochs must lie in [0, total_epochs]");
    if (s.pf_warmup < 0 || s.pf_warmup > s.pf_epochs) throw InvalidInput("pf_warmup must lie in [0, pf_epochs]");
    if (!(s.lr0 > 0.0)) throw InvalidInput("lr0 must be positive");
    if (!(s.decay > 0.0 && s.decay <= 1.0)) throw InvalidInput("decay must lie in (0, 1]");
}

nlohmann::json to_json(const TrainSchedule& s) {
    return {{"total_epochs", s.total_epochs}, {"pf_epochs", s.pf_epochs}, {"pf_warmup", s.pf_warmup},
            {"lr0", s.lr0},                   {"decay", s.decay},         {"seed", s.seed}};
}

TrainSchedule train_schedule_from_json(const nlohmann::json& j) {
    TrainSchedule s;
    s.total_epochs = j.value("total_epochs", s.total_epochs);
    s.pf_epochs = j.value("pf_epochs", s.pf_epochs);
    s.pf_warmup = j.value("pf_warmup", s.pf_warmup);
    s.lr0 = j.value("lr0", s.lr0);
    s.decay = j.value("decay", s.decay);
    s.seed = j.value("seed", s.seed);
    validate(s);
    return s;
}

// ---------------------------------------------------------------------------

EventSplit split_events(const HydrographCatalogue& catalogue, double train_fraction, std::uint64_t seed) {
    const std::size_t n = catalogue.events.size();
    if (n == 0) throw InvalidInput("cannot split an empty catalogue");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidInput("train_fraction must lie in (0, 1)");
    const auto total = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction + 0.5));

    std::map<int, std::vector<std::size_t>> families;
    for (std::size_t e = 0; e < n; ++e) families[catalogue.events[e].family_id.value_or(0)].push_back(e);

    struct Quota {
        std::size_t take, lo, hi, size;
        double want;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (const auto& [id, members] : families) {
        const std::size_t m = members.size();
        const double want = static_cast<double>(m) * static_cast<double>(total) / static_cast<double>(n);
        const std::size_t lo = m >= 2 ? 1 : 0, hi = m >= 2 ? m - 1 : m;
        const std::size_t take = std::clamp(static_cast<std::size_t>(std::floor(want)), lo, hi);
        quotas.push_back({take, lo, hi, m, want});
        assigned += take;
    }
    // Largest remainder first when adding, smallest first when removing; the
    // family bounds are dropped only if they make the total unreachable.
    for (bool strict : {true, false}) {
        while (assigned < total) {
            std::size_t best = quotas.size();
            for (std::size_t f = 0; f < quotas.size(); ++f) {
                const auto& q = quotas[f];
                if (q.take >= (strict ? q.hi : q.size)) continue;
                if (best == quotas.size() ||
                    q.want - static_cast<double>(q.take) > quotas[best].want - static_cast<double>(quotas[best].take))
                    best = f;
            }
            if (best == quotas.size()) break;
            ++quotas[best].take;
            ++assigned;
        }
        while (assigned > total) {
            std::size_t best = quotas.size();
            for (std::size_t f = 0; f < quotas.size(); ++f) {
                const auto& q = quotas[f];
                if (q.take == 0 || (strict && q.take <= q.lo)) continue;
                if (best == quotas.size() ||
                    q.want - static_cast<double>(q.take) < quotas[best].want - static_cast<double>(quotas[best].take))
                    best = f;
            }
            if (best == quotas.size()) break;
            --quotas[best].take;
            --assigned;
        }
    }

    Rng rng(seed);
    EventSplit split;
    std::size_t f = 0;
    for (auto& [id, members] : families) {
        rng.shuffle(members);
        const std::size_t take = quotas[f++].take;
        split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

double pushforward_probability(int epoch, const TrainSchedule& s) {
    const int start = s.pf_start();
    if (s.pf_epochs == 0 || epoch < start) return 1.0;
    if (epoch >= start + s.pf_warmup) return 0.0;
    return 1.0 - static_cast<double>(epoch - start) / static_cast<double>(s.pf_warmup);
}

void adam_update(Model& model, std::int64_t step, const TrainSchedule& s, const AdamParams& p) {
    for (const auto& b : model.param_blocks())
        for (std::size_t k = b.offset; k < b.offset + b.size; ++k)
            if (!std::isfinite(model.grads[k])) throw NumericalFailure("non-finite gradient in " + b.name);
    const double lr = s.lr(step);
    const double t = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(p.beta1, t), c2 = 1.0 - std::pow(p.beta2, t);
    for (std::size_t k = 0; k < model.params.size(); ++k) {
        const double g = model.grads[k];
        double& m = model.moment1[k];
        double& v = model.moment2[k];
        m = p.beta1 * m + (1.0 - p.beta1) * g;
        v = p.beta2 * v + (1.0 - p.beta2) * g * g;
        model.params[k] -= lr * (m / c1) / (std::sqrt(v / c2) + p.eps);
    }
}

// ---------------------------------------------------------------------------

std::vector<TrainingSample> make_samples(const std::vector<const StateSequence*>& train,
                                         std::shared_ptr<const SimGraph> graph, const FeatureSchema& schema,
                                         const Normalizer& norm) {
    std::vector<TrainingSample> out;
    for (const auto* seq : train) {
        if (seq->node_count() != graph->node_count) throw InvalidInput("training sequence does not match the graph");
        for (std::size_t k = 0; k + 1 < seq->size(); ++k) {
            TrainingSample s;
            s.sequence = seq;
            s.k = k;
            s.previous = k == 0 ? -1 : static_cast<std::ptrdiff_t>(out.size()) - 1;
            s.batch = assemble_features(seq->snapshots[k], graph, seq->discharge[k], seq->discharge[k + 1],
                                        seq->snapshots[k + 1], schema, norm);
            increment_targets(seq->snapshots[k], seq->snapshots[k + 1], *graph, norm, s.target, s.mask);
            out.push_back(std::move(s));
        }
    }
    return out;
}

HydraulicState predicted_state(const Model& model, const TrainingSample& sample, const Normalizer& norm) {
    const auto& drivers = sample.sequence->snapshots[sample.k + 1];
    HydraulicState next = sample.sequence->snapshots[sample.k];
    apply_prediction(model.forward(sample.batch), norm, *sample.batch.graph, next);
    inject_boundaries(next, *sample.batch.graph, drivers);
    next.t = drivers.t;
    return next;
}

double pushforward_step(Model& model, const TrainingSample* first, const TrainingSample& second,
                        bool teacher_forcing, const Normalizer& norm) {
    if (teacher_forcing || first == nullptr) return model.loss_and_gradients(second.batch, second.target, second.mask);
    if (first->sequence != second.sequence || first->k + 1 != second.k)
        throw InvalidInput("pushforward needs two consecutive transitions of one event");
    const auto& seq = *second.sequence;
    const HydraulicState input = predicted_state(model, *first, norm);
    const GraphBatch batch = assemble_features(input, second.batch.graph, seq.discharge[second.k],
                                               seq.discharge[second.k + 1], seq.snapshots[second.k + 1],
                                               model.config().schema, norm);
    Matrix target, mask;
    increment_targets(input, seq.snapshots[second.k + 1], *second.batch.graph, norm, target, mask);
    return model.loss_and_gradients(batch, target, mask);
}

double pushforward_step(Model& model, const TrainingSample* first, const TrainingSample& second, double p_tf,
                        Rng& rng, const Normalizer& norm) {
    const bool teacher_forcing = rng.uniform() < p_tf;
    return pushforward_step(model, first, second, teacher_forcing, norm);
}

// ---------------------------------------------------------------------------

ModelConfig experiment_model_config(const ExperimentConfig& experiment, const TrainSchedule& schedule,
                                   const ModelConfig& model_base) {
    ModelConfig mc = model_base;
    mc.schema.use_discharge = experiment.use_discharge;
    mc.schema.origin_flag = model_base.schema.origin_flag && experiment.connectivity == Connectivity::Multimesh;
    mc.seed = schedule.seed;
    return mc;
}

std::string training_hash(const ExperimentConfig& experiment, const TrainSchedule& schedule,
                          const ModelConfig& model_base, const TrainingData& data) {
    return hash_hex(fnv1a64(dump_json({{"experiment", to_json(experiment)},
                                       {"schedule", to_json(schedule)},
                                       {"model", to_json(experiment_model_config(experiment, schedule, model_base))},
                                       {"data", data.identity}})));
}

TrainResult train_experiment(const ExperimentConfig& experiment, const TrainSchedule& schedule,
                             const ModelConfig& model_base, const TrainingData& data,
                             const std::function<void(const EpochRecord&)>& on_epoch) {
    validate(experiment);
    validate(schedule);
    const auto graph = experiment.connectivity == Connectivity::Standard ? data.standard : data.multimesh;
    if (!graph) throw InvalidInput("experiment " + experiment.name + " needs a " + to_string(experiment.connectivity) + " graph");

    const ModelConfig mc = experiment_model_config(experiment, schedule, model_base);

    TrainResult result;
    result.training_hash = training_hash(experiment, schedule, model_base, data);
    result.normalizer = fit_normalizer(*graph, data.train);
    result.model = std::make_unique<Model>(mc);
    Model& model = *result.model;
    const auto samples = make_samples(data.train, graph, mc.schema, result.normalizer);
    if (samples.empty()) throw InvalidInput("training sequences hold no transitions");

    Rng rng(schedule.seed ^ 0x7261696EULL);
    std::vector<std::size_t> order(samples.size());
    std::int64_t step = 0;
    for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
        const double p_tf = experiment.use_pushforward ? pushforward_probability(epoch, schedule) : 1.0;
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        rng.shuffle(order);
        double sum = 0.0;
        for (std::size_t idx : order) {
            const auto& s = samples[idx];
            const TrainingSample* first = s.previous >= 0 ? &samples[static_cast<std::size_t>(s.previous)] : nullptr;
            const double loss = pushforward_step(model, first, s, p_tf, rng, result.normalizer);
            if (!std::isfinite(loss))
                throw NumericalFailure(experiment.name + ": non-finite loss at epoch " + std::to_string(epoch));
            sum += loss;
            adam_update(model, step, schedule);
            ++step;
        }
        EpochRecord rec{epoch, step, schedule.lr(step - 1), p_tf, sum / static_cast<double>(samples.size())};
        result.log.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

std::string training_log_csv(const std::vector<EpochRecord>& log) {
    std::ostringstream out;
    out << "# learning-rate decay applied per optimizer step\n";
    out << "epoch,step,lr,p_tf,loss\n";
    for (const auto& r : log)
        out << r.epoch << ',' << r.step << ',' << format_double(r.lr) << ',' << format_double(r.p_tf) << ','
            << format_double(r.loss) << '\n';
    return out.str();
}

TrainResult run_experiment(const ExperimentConfig& experiment, const TrainSchedule& schedule,
                           const ModelConfig& model_base, const TrainingData& data, const std::string& out_dir) {
    TrainResult r = train_experiment(experiment, schedule, model_base, data);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    save_checkpoint(*r.model, r.normalizer, r.training_hash, (dir / (experiment.name + ".fgp")).string());
    write_file((dir / (experiment.name + "_log.csv")).string(), training_log_csv(r.log));
    const nlohmann::json sidecar = {{"experiment", to_json(experiment)},
                                    {"schedule", to_json(schedule)},
                                    {"model", to_json(r.model->config())},
                                    {"training_hash", r.training_hash},
                                    {"data", data.identity},
                                    {"final_loss", r.log.back().loss}};
    write_file((dir / (experiment.name + ".json")).string(), dump_json(sidecar) + "\n");
    return r;
}

}  // namespace floodgnn
