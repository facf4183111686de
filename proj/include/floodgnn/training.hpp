#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "floodgnn/common.hpp"
#include "floodgnn/hydrograph.hpp"
#include "floodgnn/surrogate.hpp"

namespace floodgnn {

enum class Connectivity : std::uint8_t { Standard, Multimesh };

std::string to_string(Connectivity c);
Connectivity connectivity_from_string(const std::string& s);

/// One row of the ablation matrix.
struct ExperimentConfig {
    std::string name;
    Connectivity connectivity = Connectivity::Standard;
    bool use_discharge = false;
    bool use_pushforward = false;

    bool operator==(const ExperimentConfig&) const = default;
};

/// E1..E6 in order.
const std::vector<ExperimentConfig>& experiment_matrix();
/// Looks a row up by name; throws InvalidInput for unknown names.
ExperimentConfig experiment(const std::string& name);
/// Throws unless the config is exactly one row of the matrix.
void validate(const ExperimentConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);

/// The decay factor is applied per optimizer step: lr(step) = lr0 * decay^step.
struct TrainSchedule {
    int total_epochs = 900;
    int pf_epochs = 300;  // final epochs with pushforward enabled
    int pf_warmup = 150;  // teacher-forcing probability ramps 1 -> 0 over these
    double lr0 = 5e-4;
    double decay = 0.999995;
    std::uint64_t seed = 0;

    int pf_start() const { return total_epochs - pf_epochs; }
    double lr(std::int64_t step) const;
};

void validate(const TrainSchedule& s);
nlohmann::json to_json(const TrainSchedule& s);
TrainSchedule train_schedule_from_json(const nlohmann::json& j);

struct EventSplit {
    std::vector<std::size_t> train, test;  // ascending event indices
};

/// Seeded partition of the catalogue events, stratified by family so each
/// family with at least two events lands in both sides. The train count is
/// round(n * fraction) with ties rounded up.
EventSplit split_events(const HydrographCatalogue& catalogue, double train_fraction, std::uint64_t seed);

/// Teacher-forcing probability: 1 before the pushforward phase, then linear
/// down to 0 over the warmup, 0 afterwards.
double pushforward_probability(int epoch, const TrainSchedule& s);

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam step using model.grads; `step` counts previous updates
/// (0 for the first). Throws NumericalFailure naming the block on a
/// non-finite gradient, before touching any parameter.
void adam_update(Model& model, std::int64_t step, const TrainSchedule& s, const AdamParams& p = {});

/// One teacher-forced training transition, precomputed.
struct TrainingSample {
    const StateSequence* sequence;
    std::size_t k;  // transition k -> k + 1
    std::ptrdiff_t previous = -1;  // sample of transition k - 1 in the same sequence
    GraphBatch batch;
    Matrix target, mask;
};

std::vector<TrainingSample> make_samples(const std::vector<const StateSequence*>& train,
                                         std::shared_ptr<const SimGraph> graph, const FeatureSchema& schema,
                                         const Normalizer& norm);

/// The model's detached one-step prediction for a sample: clamped, drivers
/// injected.
HydraulicState predicted_state(const Model& model, const TrainingSample& sample, const Normalizer& norm);

/// Loss of the transition `second` with the pushforward choice already drawn.
/// With teacher forcing (or no `first`) this is plain one-step training.
/// Otherwise the input is predicted_state(first), detached, and the target is
/// the increment from it to the ground truth after `second`. Gradients are
/// written into model.grads.
double pushforward_step(Model& model, const TrainingSample* first, const TrainingSample& second,
                        bool teacher_forcing, const Normalizer& norm);

/// Draws the teacher-forcing choice (one uniform, always) and calls the overload above.
double pushforward_step(Model& model, const TrainingSample* first, const TrainingSample& second, double p_tf,
                        Rng& rng, const Normalizer& norm);

/// Graphs and training sequences shared by all experiments.
struct TrainingData {
    std::shared_ptr<const SimGraph> standard, multimesh;
    std::vector<const StateSequence*> train;
    std::string identity;  // content hash of the inputs, folded into the training hash
};

struct EpochRecord {
    int epoch = 0;
    std::int64_t step = 0;  // optimizer steps taken by the end of the epoch
    double lr = 0.0;        // learning rate of the last step
    double p_tf = 1.0;
    double loss = 0.0;      // mean sample loss over the epoch
};

struct TrainResult {
    std::unique_ptr<Model> model;
    Normalizer normalizer;
    std::string training_hash;
    std::vector<EpochRecord> log;
};

/// The model configuration an experiment trains: `model_base` supplies widths
/// and depth; the seed comes from the schedule, the discharge channel from the
/// experiment, and the edge origin flag is kept only on multimesh graphs.
ModelConfig experiment_model_config(const ExperimentConfig& experiment, const TrainSchedule& schedule,
                                   const ModelConfig& model_base);

/// Content hash of everything a training run depends on.
std::string training_hash(const ExperimentConfig& experiment, const TrainSchedule& schedule,
                          const ModelConfig& model_base, const TrainingData& data);

/// Trains one experiment to completion (final weights, no selection).
/// The model is built from experiment_model_config.
TrainResult train_experiment(const ExperimentConfig& experiment, const TrainSchedule& schedule,
                             const ModelConfig& model_base, const TrainingData& data,
                             const std::function<void(const EpochRecord&)>& on_epoch = {});

std::string training_log_csv(const std::vector<EpochRecord>& log);

/// train_experiment plus artifacts in out_dir: <name>.fgp, <name>_log.csv and
/// <name>.json (experiment, schedule, model config, hash).
TrainResult run_experiment(const ExperimentConfig& experiment, const TrainSchedule& schedule,
                           const ModelConfig& model_base, const TrainingData& data, const std::string& out_dir);

}  // namespace floodgnn
