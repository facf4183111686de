#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "floodgnn/mesh.hpp"
#include "floodgnn/multimesh.hpp"
#include "floodgnn/swe.hpp"

namespace floodgnn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Vectorized reductions peel differently depending on the start address, so
/// parameter storage is aligned like Eigen's own to keep results bitwise
/// reproducible.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Input channel layout.
///   node: [h, u, v, (Q)] [z, strickler] [onehot INTERIOR, INFLOW, STAGE, WALL]
///   edge: [dx, dy, dist] (origin flag)
/// The first block of each is normalized; one-hot and flag channels are not.
struct FeatureSchema {
    static constexpr int kVersion = 1;
    bool use_discharge = true;
    bool origin_flag = false;

    int dynamic_channels() const { return use_discharge ? 4 : 3; }
    int node_channels() const { return dynamic_channels() + 6; }
    int edge_channels() const { return origin_flag ? 4 : 3; }
};

nlohmann::json to_json(const FeatureSchema& s);
FeatureSchema feature_schema_from_json(const nlohmann::json& j);

struct ChannelStats {
    std::vector<double> mean, std;

    double normalize(std::size_t c, double v) const { return (v - mean[c]) / std[c]; }
    double denormalize(std::size_t c, double v) const { return v * std[c] + mean[c]; }
};

/// Training-split statistics. Increments are only scaled (their mean is kept
/// at zero) so that a zero network output means "no change".
struct Normalizer {
    static constexpr double kStdFloor = 1e-8;
    ChannelStats dynamic;    // h, u, v, Q
    ChannelStats statics;    // z, strickler
    ChannelStats edge;       // dx, dy, dist
    ChannelStats increment;  // dh, du, dv; mean fixed at 0
};

nlohmann::json to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::json& j);

/// Which channels a node's label imposes from the forcing instead of predicting.
/// INFLOW: h, u, v. STAGE: h. Others: none.
std::array<bool, 3> imposed_channels(BoundaryLabel label);

/// Per-mesh graph data that does not change between time steps.
struct SimGraph {
    std::size_t node_count = 0;
    std::vector<std::uint32_t> receiver, sender;
    std::vector<BoundaryLabel> labels;
    std::vector<double> z, strickler;
    std::vector<double> dx, dy, dist;
    std::vector<EdgeOrigin> origin;

    std::size_t edge_count() const { return receiver.size(); }
};

SimGraph make_sim_graph(const TriMesh& mesh, const MultimeshGraph& graph);

/// Statistics over the training sequences (all snapshots, all nodes) and the
/// one-step increments on predicted channels.
Normalizer fit_normalizer(const SimGraph& graph, const std::vector<const StateSequence*>& train);

struct GraphBatch {
    Matrix node_features;  // N x node_channels
    Matrix edge_features;  // E x edge_channels
    std::shared_ptr<const SimGraph> graph;
    HydraulicState next_drivers;  // only the imposed channels are meaningful
    double q_now = 0.0, q_next = 0.0;
};

/// Builds the model input for the step t -> t + dt. Driver nodes carry their
/// imposed next-step values in the dynamic channels.
GraphBatch assemble_features(const HydraulicState& state, std::shared_ptr<const SimGraph> graph, double q_now,
                             double q_next, const HydraulicState& next_drivers, const FeatureSchema& schema,
                             const Normalizer& norm);

struct ModelConfig {
    int latent = 64;
    int blocks = 10;         // message-passing blocks L
    int hidden_layers = 2;   // per MLP
    bool zero_init_output = false;
    std::uint64_t seed = 0;
    FeatureSchema schema;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Encoder-processor-decoder network with SiLU activations. All weights live
/// in one flat array; gradients and the two optimizer moments mirror it.
class Model {
public:
    struct Linear {
        std::size_t w, b;  // offsets into the parameter array
        int in, out;
    };
    struct Mlp {
        std::vector<Linear> layers;
        int in() const { return layers.front().in; }
        int out() const { return layers.back().out; }
    };
    struct Block {
        Mlp edge, node;
    };
    struct ParamBlock {
        std::string name;
        std::size_t offset, size;
    };

    explicit Model(ModelConfig config);

    const ModelConfig& config() const { return cfg_; }
    std::size_t parameter_count() const { return params.size(); }
    const std::vector<ParamBlock>& param_blocks() const { return blocks_info_; }

    /// Normalized increments, N x 3.
    Matrix forward(const GraphBatch& batch) const;

    /// Masked mean squared error between the normalized prediction and target;
    /// gradients are written (not accumulated) into `grads`.
    double loss_and_gradients(const GraphBatch& batch, const Matrix& target, const Matrix& mask);

    /// Loss only.
    double loss(const GraphBatch& batch, const Matrix& target, const Matrix& mask) const;

    ParamVector params, grads, moment1, moment2;

private:
    struct MlpCache {
        Matrix input;                 // empty when the first layer was computed by the caller
        std::vector<Matrix> pre, sig, act;  // per layer; sig is empty on the linear last layer
    };
    struct Tape;

    Mlp make_mlp(int in, int out, const std::string& name);
    void init_params();

    Matrix mlp_forward(const Mlp& m, const Matrix& x, MlpCache* cache) const;
    Matrix mlp_forward_pre(const Mlp& m, Matrix first_pre, MlpCache* cache) const;
    /// Backpropagates dY, accumulating weight gradients except those of the
    /// first layer. Returns the gradient w.r.t. the first pre-activation.
    Matrix mlp_backward_to_pre(const Mlp& m, const MlpCache& cache, const Matrix& dy);
    /// Full backward including the first layer; returns the input gradient.
    Matrix mlp_backward(const Mlp& m, const MlpCache& cache, const Matrix& dy);

    Matrix run(const GraphBatch& batch, Tape* tape) const;

    ModelConfig cfg_;
    Mlp node_encoder_, edge_encoder_, decoder_;
    std::vector<Block> processor_;
    std::vector<ParamBlock> blocks_info_;
};

/// Denormalized increments applied to the state, h clamped at 0, drivers injected.
/// Returns the number of nodes whose depth had to be clamped.
std::size_t apply_prediction(const Matrix& normalized_increment, const Normalizer& norm, const SimGraph& graph,
                             HydraulicState& state);

/// Overwrites the imposed channels of driver nodes with the forcing values.
void inject_boundaries(HydraulicState& next, const SimGraph& graph, const HydraulicState& drivers);

/// Normalized increment targets and the matching loss mask (1 on predicted channels).
void increment_targets(const HydraulicState& now, const HydraulicState& next, const SimGraph& graph,
                       const Normalizer& norm, Matrix& target, Matrix& mask);

/// Autoregressive rollout. `forcing` supplies the discharge per snapshot and the
/// driver-node values (other nodes are ignored); it needs steps + 1 snapshots.
StateSequence rollout(const Model& model, std::shared_ptr<const SimGraph> graph, const Normalizer& norm,
                      const HydraulicState& initial, const StateSequence& forcing, int steps);

// FGP checkpoint.
std::string serialize_fgp(const Model& model, const Normalizer& norm, const std::string& training_hash);
struct Checkpoint {
    std::unique_ptr<Model> model;
    Normalizer normalizer;
    std::string training_hash;
};
Checkpoint parse_fgp(const std::string& bytes);
void save_checkpoint(const Model& model, const Normalizer& norm, const std::string& training_hash,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace floodgnn
