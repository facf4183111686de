#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "floodgnn/evaluation.hpp"
#include "floodgnn/hydrograph.hpp"
#include "floodgnn/mesh_gen.hpp"
#include "floodgnn/swe.hpp"
#include "floodgnn/surrogate.hpp"
#include "floodgnn/training.hpp"

namespace floodgnn {

struct CatalogueParams {
    int families = 4;
    double peak_min = 1000.0;
    double peak_max = 3600.0;
    int intervals = 3;
};

struct EvaluationParams {
    std::vector<double> thresholds = {0.05, 0.30};
    int horizon_steps = 12;
    double grid_spacing = 25.0;
    std::vector<int> map_steps = {6, 12};
};

/// Everything a run depends on. `seed` drives the mesh jitter, the synthetic
/// flood record, the event split and the training (model init and shuffling).
struct PipelineConfig {
    std::uint64_t seed = 7;
    std::string out = "run";
    ValleyGeometry geometry;
    DensitySpec density;
    HistoricalSpec historical;
    CatalogueParams catalogue;
    SolverConfig solver;
    double event_hours = 6.0;
    std::vector<int> factors = {1, 2, 4, 8, 16, 32};
    int training_factor = 8;
    std::vector<int> multimesh_levels = {16, 32};
    double train_fraction = 8.0 / 12.0;
    std::vector<std::string> experiments = {"E1", "E2", "E3", "E4", "E5", "E6"};
    TrainSchedule schedule{.total_epochs = 300, .pf_epochs = 100, .pf_warmup = 50};
    ModelConfig model{.latent = 16, .blocks = 4, .hidden_layers = 1, .zero_init_output = true, .seed = 0, .schema = {.use_discharge = true, .origin_flag = true}};
    EvaluationParams evaluation;
    int jobs = 1;
};

/// Throws InvalidInput on the first inconsistency.
void validate(const PipelineConfig& c);
nlohmann::json to_json(const PipelineConfig& c);

/// Strict conversion: every key must exist in the default configuration with
/// a value of the same kind. Errors name the offending key path.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Parses a configuration file text (empty text means defaults), applies the
/// overrides in order and validates. Errors carry the line number of the
/// offending key when it comes from the text.
PipelineConfig parse_pipeline_config(const std::string& text, const std::vector<std::string>& overrides = {});

/// Events chosen by a selector such as "family=1,peak=1000" or "event=3";
/// "all" or empty selects every event. Throws when nothing matches.
std::vector<std::size_t> select_events(const HydrographCatalogue& catalogue, const std::string& selector);

/// Artifact layout under the output directory.
struct ArtifactPaths {
    std::string root;

    std::string mesh(int factor) const;
    std::string catalogue() const;
    std::string initial_state() const;
    std::string event(std::size_t index) const;
    std::string projected(std::size_t index, int factor) const;
    std::string graph(Connectivity c, int factor) const;
    std::string graph_report(int factor) const;
    std::string models() const;
    std::string checkpoint(const std::string& experiment) const;
    std::string rollout(const std::string& experiment, std::size_t index) const;
    std::string metrics() const;
    std::string summary() const;
    std::string graph_stats() const;
    std::string map(const std::string& experiment, std::size_t index, int step, const std::string& kind) const;
};

/// Training-split sequences on the training mesh, ready for train_experiment.
struct TrainingSet {
    TriMesh mesh;
    std::vector<StateSequence> sequences;
    TrainingData data;  // points into `sequences`
};

/// Held-out events: targets projected on the training mesh and, optionally,
/// the fine-mesh references.
struct HeldOutSet {
    TriMesh mesh, fine;
    std::vector<std::size_t> events;
    std::vector<StateSequence> targets, references;
};

/// The command implementations. Every command reads its inputs from the
/// output directory, writes deterministic artifacts and returns their paths.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig config, std::ostream* log = nullptr);

    const PipelineConfig& config() const { return cfg_; }
    const ArtifactPaths& paths() const { return paths_; }

    std::vector<std::string> synth();
    /// Spin-up (cached) plus the selected events on the fine mesh. With
    /// `resume`, outputs whose recorded input hash matches are kept.
    std::vector<std::string> simulate(const std::string& selector = "all", bool resume = false);
    std::vector<std::string> project();
    std::vector<std::string> multimesh();
    /// Empty list means the configured experiments.
    std::vector<std::string> train(const std::vector<std::string>& experiments = {});
    std::vector<std::string> rollout(const std::vector<std::string>& experiments = {});
    /// Empty thresholds means the configured ones.
    std::vector<std::string> evaluate(const std::vector<std::string>& experiments = {},
                                      const std::vector<double>& thresholds = {});
    std::vector<std::string> render(const std::vector<std::string>& experiments = {});
    /// Node, edge and hop-radius statistics of every mesh of the family and of
    /// the multimesh graph at the training factor. Returns the report text.
    std::string stats_graph();

    EventSplit split() const;
    std::unique_ptr<TrainingSet> training_set(bool standard = true, bool multimesh = true) const;
    std::unique_ptr<HeldOutSet> held_out_set(bool with_references = true) const;
    std::shared_ptr<const SimGraph> sim_graph(Connectivity c, const TriMesh& mesh) const;

private:
    void note(const std::string& line) const;
    std::vector<std::string> resolve(const std::vector<std::string>& experiments) const;
    TriMesh load_mesh_artifact(int factor) const;
    HydrographCatalogue load_catalogue_artifact() const;
    StateSequence load_sequence_artifact(const std::string& path) const;
    std::vector<EvaluationResult> run_evaluation(const std::vector<std::string>& names,
                                                 const std::vector<double>& thresholds,
                                                 const std::vector<int>& map_steps) const;

    PipelineConfig cfg_;
    ArtifactPaths paths_;
    std::ostream* log_;
};

}  // namespace floodgnn
