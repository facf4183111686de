#include "floodgnn/surrogate.hpp"

#include <cmath>

#include "floodgnn/common.hpp"
#include "floodgnn/json_util.hpp"

namespace floodgnn {

namespace {

constexpr std::uint32_t kFgpVersion = 1;

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using ConstRow = Eigen::Map<const Eigen::RowVectorXd>;
using MutRow = Eigen::Map<Eigen::RowVectorXd>;

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

void stats_of(const std::vector<std::vector<double>>& samples, ChannelStats& out, bool centred = true) {
    out.mean.assign(samples.size(), 0.0);
    out.std.assign(samples.size(), 1.0);
    for (std::size_t c = 0; c < samples.size(); ++c) {
        const auto& s = samples[c];
        if (s.empty()) continue;
        double mean = 0.0;
        if (centred) {
            for (double v : s) mean += v;
            mean /= static_cast<double>(s.size());
        }
        double var = 0.0;
        for (double v : s) var += (v - mean) * (v - mean);
        var /= static_cast<double>(s.size());
        out.mean[c] = mean;
        out.std[c] = std::max(std::sqrt(var), Normalizer::kStdFloor);
    }
}

nlohmann::json stats_json(const ChannelStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

ChannelStats stats_from_json(const nlohmann::json& j) {
    return {j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
}

bool finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

nlohmann::json to_json(const FeatureSchema& s) {
    return {{"version", FeatureSchema::kVersion}, {"use_discharge", s.use_discharge}, {"origin_flag", s.origin_flag}};
}

FeatureSchema feature_schema_from_json(const nlohmann::json& j) {
    if (j.value("version", FeatureSchema::kVersion) != FeatureSchema::kVersion)
        throw InvalidInput("unsupported feature schema version");
    FeatureSchema s;
    s.use_discharge = j.value("use_discharge", s.use_discharge);
    s.origin_flag = j.value("origin_flag", s.origin_flag);
    return s;
}

nlohmann::json to_json(const Normalizer& n) {
    return {{"dynamic", stats_json(n.dynamic)},
            {"statics", stats_json(n.statics)},
            {"edge", stats_json(n.edge)},
            {"increment", stats_json(n.increment)}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
    Normalizer n;
    n.dynamic = stats_from_json(j.at("dynamic"));
    n.statics = stats_from_json(j.at("statics"));
    n.edge = stats_from_json(j.at("edge"));
    n.increment = stats_from_json(j.at("increment"));
    return n;
}

std::array<bool, 3> imposed_channels(BoundaryLabel label) {
    switch (label) {
        case BoundaryLabel::Inflow: return {true, true, true};
        case BoundaryLabel::Stage: return {true, false, false};
        default: return {false, false, false};
    }
}

SimGraph make_sim_graph(const TriMesh& mesh, const MultimeshGraph& graph) {
    if (graph.node_hash != node_coordinate_hash(mesh)) throw InvalidInput("graph does not belong to this mesh");
    SimGraph g;
    g.node_count = mesh.node_count();
    g.labels = mesh.labels;
    g.z = mesh.z;
    g.strickler = mesh.strickler;
    g.receiver = graph.merged.receiver;
    g.sender = graph.merged.sender;
    g.dx = graph.merged.dx;
    g.dy = graph.merged.dy;
    g.dist = graph.merged.dist;
    g.origin = graph.origin;
    return g;
}

Normalizer fit_normalizer(const SimGraph& graph, const std::vector<const StateSequence*>& train) {
    if (train.empty()) throw InvalidInput("normalizer needs at least one training sequence");
    const std::size_t n = graph.node_count;
    std::vector<std::vector<double>> dyn(4), inc(3);
    for (const auto* seq : train) {
        if (seq->node_count() != n) throw InvalidInput("training sequence does not match the graph");
        for (std::size_t k = 0; k < seq->size(); ++k) {
            const auto& s = seq->snapshots[k];
            dyn[0].insert(dyn[0].end(), s.h.begin(), s.h.end());
            dyn[1].insert(dyn[1].end(), s.u.begin(), s.u.end());
            dyn[2].insert(dyn[2].end(), s.v.begin(), s.v.end());
            dyn[3].push_back(seq->discharge[k]);
            if (k + 1 == seq->size()) continue;
            const auto& nx = seq->snapshots[k + 1];
            for (std::size_t i = 0; i < n; ++i) {
                const auto imposed = imposed_channels(graph.labels[i]);
                if (!imposed[0]) inc[0].push_back(nx.h[i] - s.h[i]);
                if (!imposed[1]) inc[1].push_back(nx.u[i] - s.u[i]);
                if (!imposed[2]) inc[2].push_back(nx.v[i] - s.v[i]);
            }
        }
    }
    Normalizer norm;
    stats_of(dyn, norm.dynamic);
    stats_of({graph.z, graph.strickler}, norm.statics);
    stats_of({graph.dx, graph.dy, graph.dist}, norm.edge);
    stats_of(inc, norm.increment, false);
    return norm;
}

GraphBatch assemble_features(const HydraulicState& state, std::shared_ptr<const SimGraph> graph, double q_now,
                             double q_next, const HydraulicState& next_drivers, const FeatureSchema& schema,
                             const Normalizer& norm) {
    const SimGraph& g = *graph;
    const std::size_t n = g.node_count;
    if (state.size() != n || next_drivers.size() != n) throw InvalidInput("state size does not match the graph");
    if (!std::isfinite(q_now)) throw InvalidInput("non-finite discharge");
    GraphBatch b;
    b.graph = graph;
    b.next_drivers = next_drivers;
    b.q_now = q_now;
    b.q_next = q_next;
    const int dyn = schema.dynamic_channels();
    b.node_features.resize(static_cast<Eigen::Index>(n), schema.node_channels());
    for (std::size_t i = 0; i < n; ++i) {
        const auto imposed = imposed_channels(g.labels[i]);
        const double vals[3] = {imposed[0] ? next_drivers.h[i] : state.h[i], imposed[1] ? next_drivers.u[i] : state.u[i],
                                imposed[2] ? next_drivers.v[i] : state.v[i]};
        const auto r = static_cast<Eigen::Index>(i);
        for (int c = 0; c < 3; ++c) {
            if (!std::isfinite(vals[c])) throw InvalidInput("non-finite input at node " + std::to_string(i));
            b.node_features(r, c) = norm.dynamic.normalize(static_cast<std::size_t>(c), vals[c]);
        }
        if (schema.use_discharge) b.node_features(r, 3) = norm.dynamic.normalize(3, q_now);
        b.node_features(r, dyn) = norm.statics.normalize(0, g.z[i]);
        b.node_features(r, dyn + 1) = norm.statics.normalize(1, g.strickler[i]);
        for (int c = 0; c < 4; ++c) b.node_features(r, dyn + 2 + c) = static_cast<int>(g.labels[i]) == c ? 1.0 : 0.0;
    }
    const std::size_t e = g.edge_count();
    b.edge_features.resize(static_cast<Eigen::Index>(e), schema.edge_channels());
    for (std::size_t k = 0; k < e; ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        b.edge_features(r, 0) = norm.edge.normalize(0, g.dx[k]);
        b.edge_features(r, 1) = norm.edge.normalize(1, g.dy[k]);
        b.edge_features(r, 2) = norm.edge.normalize(2, g.dist[k]);
        if (schema.origin_flag) b.edge_features(r, 3) = g.origin[k] == EdgeOrigin::Shortcut ? 1.0 : 0.0;
    }
    return b;
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"latent", c.latent},
            {"blocks", c.blocks},
            {"hidden_layers", c.hidden_layers},
            {"zero_init_output", c.zero_init_output},
            {"seed", c.seed},
            {"schema", to_json(c.schema)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.latent = j.value("latent", c.latent);
    c.blocks = j.value("blocks", c.blocks);
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
    c.zero_init_output = j.value("zero_init_output", c.zero_init_output);
    c.seed = j.value("seed", c.seed);
    if (j.contains("schema")) c.schema = feature_schema_from_json(j.at("schema"));
    if (c.latent < 1 || c.blocks < 0 || c.hidden_layers < 0) throw InvalidInput("invalid model hyperparameters");
    return c;
}

// ---------------------------------------------------------------------------

struct Model::Tape {
    MlpCache node_enc, edge_enc, decoder;
    std::vector<Matrix> v, e, agg;  // v[b], e[b] are the inputs of block b; v[L], e[L] the final latents
    std::vector<MlpCache> edge, node;
};

Model::Model(ModelConfig config) : cfg_(std::move(config)) {
    if (cfg_.latent < 1 || cfg_.blocks < 0 || cfg_.hidden_layers < 0) throw InvalidInput("invalid model hyperparameters");
    const int d = cfg_.latent;
    node_encoder_ = make_mlp(cfg_.schema.node_channels(), d, "node_encoder");
    edge_encoder_ = make_mlp(cfg_.schema.edge_channels(), d, "edge_encoder");
    for (int b = 0; b < cfg_.blocks; ++b) {
        Block blk;
        blk.edge = make_mlp(3 * d, d, "block" + std::to_string(b) + ".edge");
        blk.node = make_mlp(2 * d, d, "block" + std::to_string(b) + ".node");
        processor_.push_back(std::move(blk));
    }
    decoder_ = make_mlp(d, 3, "decoder");
    grads.assign(params.size(), 0.0);
    moment1.assign(params.size(), 0.0);
    moment2.assign(params.size(), 0.0);
    init_params();
}

Model::Mlp Model::make_mlp(int in, int out, const std::string& name) {
    Mlp m;
    const int width = cfg_.latent;
    for (int k = 0; k <= cfg_.hidden_layers; ++k) {
        const int a = k == 0 ? in : width;
        const int b = k == cfg_.hidden_layers ? out : width;
        Linear l{params.size(), 0, a, b};
        const std::string base = name + "." + std::to_string(k);
        blocks_info_.push_back({base + ".weight", l.w, static_cast<std::size_t>(a) * b});
        params.resize(params.size() + static_cast<std::size_t>(a) * b);
        l.b = params.size();
        blocks_info_.push_back({base + ".bias", l.b, static_cast<std::size_t>(b)});
        params.resize(params.size() + static_cast<std::size_t>(b));
        m.layers.push_back(l);
    }
    return m;
}

void Model::init_params() {
    Rng rng(cfg_.seed);
    auto init_mlp = [&](const Mlp& m, bool zero_last) {
        for (std::size_t k = 0; k < m.layers.size(); ++k) {
            const auto& l = m.layers[k];
            const bool zero = zero_last && k + 1 == m.layers.size();
            // Unit-variance (LeCun) uniform weights; biases start at 0.
            const double bound = std::sqrt(3.0 / static_cast<double>(l.in));
            for (std::size_t i = 0; i < static_cast<std::size_t>(l.in) * l.out; ++i)
                params[l.w + i] = zero ? 0.0 : rng.uniform(-bound, bound);
            for (int i = 0; i < l.out; ++i) params[l.b + static_cast<std::size_t>(i)] = 0.0;
        }
    };
    init_mlp(node_encoder_, false);
    init_mlp(edge_encoder_, false);
    for (const auto& blk : processor_) {
        init_mlp(blk.edge, cfg_.zero_init_output);
        init_mlp(blk.node, cfg_.zero_init_output);
    }
    init_mlp(decoder_, cfg_.zero_init_output);
}

Matrix Model::mlp_forward(const Mlp& m, const Matrix& x, MlpCache* cache) const {
    const auto& l = m.layers.front();
    Matrix pre = x * ConstMap(params.data() + l.w, l.in, l.out);
    pre.rowwise() += ConstRow(params.data() + l.b, l.out);
    if (cache) cache->input = x;
    return mlp_forward_pre(m, std::move(pre), cache);
}

Matrix Model::mlp_forward_pre(const Mlp& m, Matrix first_pre, MlpCache* cache) const {
    if (cache) {
        cache->pre.clear();
        cache->sig.clear();
        cache->act.clear();
    }
    Matrix pre = std::move(first_pre);
    for (std::size_t k = 0;; ++k) {
        const bool last = k + 1 == m.layers.size();
        Matrix sig = last ? Matrix() : sigmoid(pre);
        Matrix act = last ? pre : Matrix(pre.cwiseProduct(sig));
        if (cache) {
            cache->pre.push_back(pre);
            cache->sig.push_back(std::move(sig));
            cache->act.push_back(act);
        }
        if (last) return act;
        const auto& l = m.layers[k + 1];
        pre.noalias() = act * ConstMap(params.data() + l.w, l.in, l.out);
        pre.rowwise() += ConstRow(params.data() + l.b, l.out);
    }
}

Matrix Model::mlp_backward_to_pre(const Mlp& m, const MlpCache& cache, const Matrix& dy) {
    Matrix dpre = dy;  // the last layer is linear
    for (std::size_t k = m.layers.size() - 1; k > 0; --k) {
        const auto& l = m.layers[k];
        MutMap(grads.data() + l.w, l.in, l.out).noalias() += cache.act[k - 1].transpose() * dpre;
        MutRow(grads.data() + l.b, l.out) += dpre.colwise().sum();
        Matrix dact = dpre * ConstMap(params.data() + l.w, l.in, l.out).transpose();
        // d silu(z) / dz = s (1 + z (1 - s)) with s = sigmoid(z).
        const auto& z = cache.pre[k - 1].array();
        const auto& sg = cache.sig[k - 1].array();
        dpre = (dact.array() * sg * (1.0 + z * (1.0 - sg))).matrix();
    }
    return dpre;
}

Matrix Model::mlp_backward(const Mlp& m, const MlpCache& cache, const Matrix& dy) {
    const Matrix dpre = mlp_backward_to_pre(m, cache, dy);
    const auto& l = m.layers.front();
    MutMap(grads.data() + l.w, l.in, l.out).noalias() += cache.input.transpose() * dpre;
    MutRow(grads.data() + l.b, l.out) += dpre.colwise().sum();
    return dpre * ConstMap(params.data() + l.w, l.in, l.out).transpose();
}

Matrix Model::run(const GraphBatch& batch, Tape* tape) const {
    const SimGraph& g = *batch.graph;
    const auto n = static_cast<Eigen::Index>(g.node_count);
    const int d = cfg_.latent;
    if (batch.node_features.cols() != cfg_.schema.node_channels() || batch.edge_features.cols() != cfg_.schema.edge_channels())
        throw InvalidInput("feature widths do not match the model schema");

    Matrix v = mlp_forward(node_encoder_, batch.node_features, tape ? &tape->node_enc : nullptr);
    Matrix e = mlp_forward(edge_encoder_, batch.edge_features, tape ? &tape->edge_enc : nullptr);
    if (tape) {
        tape->v.assign(1, v);
        tape->e.assign(1, e);
        tape->agg.clear();
        tape->edge.assign(processor_.size(), {});
        tape->node.assign(processor_.size(), {});
    }
    const std::size_t ne = g.edge_count();
    for (std::size_t b = 0; b < processor_.size(); ++b) {
        const auto& blk = processor_[b];
        const auto& l0 = blk.edge.layers.front();
        const ConstMap w(params.data() + l0.w, l0.in, l0.out);
        // First edge layer on [e, v_receiver, v_sender], with the node terms computed once per node.
        const Matrix from_recv = v * w.middleRows(d, d);
        const Matrix from_send = v * w.middleRows(2 * d, d);
        Matrix pre = e * w.topRows(d);
        pre.rowwise() += ConstRow(params.data() + l0.b, l0.out);
        for (std::size_t k = 0; k < ne; ++k) {
            const auto r = static_cast<Eigen::Index>(k);
            pre.row(r) += from_recv.row(g.receiver[k]) + from_send.row(g.sender[k]);
        }
        e += mlp_forward_pre(blk.edge, std::move(pre), tape ? &tape->edge[b] : nullptr);

        Matrix agg = Matrix::Zero(n, d);
        for (std::size_t k = 0; k < ne; ++k) agg.row(g.receiver[k]) += e.row(static_cast<Eigen::Index>(k));

        const auto& n0 = blk.node.layers.front();
        const ConstMap wn(params.data() + n0.w, n0.in, n0.out);
        Matrix npre = v * wn.topRows(d);
        npre.noalias() += agg * wn.bottomRows(d);
        npre.rowwise() += ConstRow(params.data() + n0.b, n0.out);
        v += mlp_forward_pre(blk.node, std::move(npre), tape ? &tape->node[b] : nullptr);
        if (!finite(v) || !finite(e)) throw NumericalFailure("non-finite latents after processor block " + std::to_string(b));
        if (tape) {
            tape->agg.push_back(std::move(agg));
            tape->v.push_back(v);
            tape->e.push_back(e);
        }
    }
    Matrix out = mlp_forward(decoder_, v, tape ? &tape->decoder : nullptr);
    if (!finite(out)) throw NumericalFailure("non-finite decoder output");
    return out;
}

Matrix Model::forward(const GraphBatch& batch) const { return run(batch, nullptr); }

double Model::loss(const GraphBatch& batch, const Matrix& target, const Matrix& mask) const {
    const Matrix y = run(batch, nullptr);
    const double count = mask.sum();
    if (count <= 0.0) return 0.0;
    return (y - target).cwiseProduct(mask).squaredNorm() / count;
}

double Model::loss_and_gradients(const GraphBatch& batch, const Matrix& target, const Matrix& mask) {
    std::fill(grads.begin(), grads.end(), 0.0);
    Tape tape;
    const Matrix y = run(batch, &tape);
    const double count = mask.sum();
    if (count <= 0.0) return 0.0;
    const Matrix diff = (y - target).cwiseProduct(mask);
    const double loss = diff.squaredNorm() / count;

    const SimGraph& g = *batch.graph;
    const int d = cfg_.latent;
    const auto n = static_cast<Eigen::Index>(g.node_count);
    const std::size_t ne = g.edge_count();
    Matrix dv = mlp_backward(decoder_, tape.decoder, (2.0 / count) * diff);
    Matrix de = Matrix::Zero(static_cast<Eigen::Index>(ne), d);

    for (std::size_t b = processor_.size(); b-- > 0;) {
        const auto& blk = processor_[b];
        const Matrix& v_in = tape.v[b];
        const Matrix& e_in = tape.e[b];

        // Node update: v' = v + phi_v([v, agg]).
        const Matrix dnpre = mlp_backward_to_pre(blk.node, tape.node[b], dv);
        const auto& n0 = blk.node.layers.front();
        const ConstMap wn(params.data() + n0.w, n0.in, n0.out);
        MutMap gn(grads.data() + n0.w, n0.in, n0.out);
        gn.topRows(d).noalias() += v_in.transpose() * dnpre;
        gn.bottomRows(d).noalias() += tape.agg[b].transpose() * dnpre;
        MutRow(grads.data() + n0.b, n0.out) += dnpre.colwise().sum();
        Matrix dv_in = dv;
        dv_in.noalias() += dnpre * wn.topRows(d).transpose();
        const Matrix dagg = dnpre * wn.bottomRows(d).transpose();

        // Aggregation: every edge's new latent feeds its receiver's sum.
        for (std::size_t k = 0; k < ne; ++k) de.row(static_cast<Eigen::Index>(k)) += dagg.row(g.receiver[k]);

        // Edge update: e' = e + phi_e([e, v_receiver, v_sender]).
        const Matrix dpre = mlp_backward_to_pre(blk.edge, tape.edge[b], de);
        const auto& l0 = blk.edge.layers.front();
        const ConstMap w(params.data() + l0.w, l0.in, l0.out);
        MutMap gw(grads.data() + l0.w, l0.in, l0.out);
        Matrix sum_recv = Matrix::Zero(n, l0.out), sum_send = Matrix::Zero(n, l0.out);
        for (std::size_t k = 0; k < ne; ++k) {
            const auto r = static_cast<Eigen::Index>(k);
            sum_recv.row(g.receiver[k]) += dpre.row(r);
            sum_send.row(g.sender[k]) += dpre.row(r);
        }
        gw.topRows(d).noalias() += e_in.transpose() * dpre;
        gw.middleRows(d, d).noalias() += v_in.transpose() * sum_recv;
        gw.middleRows(2 * d, d).noalias() += v_in.transpose() * sum_send;
        MutRow(grads.data() + l0.b, l0.out) += dpre.colwise().sum();
        dv_in.noalias() += sum_recv * w.middleRows(d, d).transpose();
        dv_in.noalias() += sum_send * w.middleRows(2 * d, d).transpose();
        de.noalias() += dpre * w.topRows(d).transpose();
        dv = std::move(dv_in);
    }
    mlp_backward(edge_encoder_, tape.edge_enc, de);
    mlp_backward(node_encoder_, tape.node_enc, dv);
    return loss;
}

// ---------------------------------------------------------------------------

void inject_boundaries(HydraulicState& next, const SimGraph& graph, const HydraulicState& drivers) {
    for (std::size_t i = 0; i < graph.node_count; ++i) {
        const auto imposed = imposed_channels(graph.labels[i]);
        if (imposed[0]) next.h[i] = drivers.h[i];
        if (imposed[1]) next.u[i] = drivers.u[i];
        if (imposed[2]) next.v[i] = drivers.v[i];
    }
}

std::size_t apply_prediction(const Matrix& y, const Normalizer& norm, const SimGraph& graph, HydraulicState& state) {
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < graph.node_count; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        state.h[i] += y(r, 0) * norm.increment.std[0];
        state.u[i] += y(r, 1) * norm.increment.std[1];
        state.v[i] += y(r, 2) * norm.increment.std[2];
        if (state.h[i] < 0.0) {
            state.h[i] = 0.0;
            ++clamped;
        }
    }
    return clamped;
}

void increment_targets(const HydraulicState& now, const HydraulicState& next, const SimGraph& graph,
                       const Normalizer& norm, Matrix& target, Matrix& mask) {
    const auto n = static_cast<Eigen::Index>(graph.node_count);
    target.resize(n, 3);
    mask.resize(n, 3);
    for (std::size_t i = 0; i < graph.node_count; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const auto imposed = imposed_channels(graph.labels[i]);
        target(r, 0) = (next.h[i] - now.h[i]) / norm.increment.std[0];
        target(r, 1) = (next.u[i] - now.u[i]) / norm.increment.std[1];
        target(r, 2) = (next.v[i] - now.v[i]) / norm.increment.std[2];
        for (int c = 0; c < 3; ++c) mask(r, c) = imposed[static_cast<std::size_t>(c)] ? 0.0 : 1.0;
    }
}

StateSequence rollout(const Model& model, std::shared_ptr<const SimGraph> graph, const Normalizer& norm,
                      const HydraulicState& initial, const StateSequence& forcing, int steps) {
    if (steps < 0) throw InvalidInput("rollout steps must be non-negative");
    if (forcing.size() < static_cast<std::size_t>(steps) + 1)
        throw InvalidInput("forcing covers " + std::to_string(forcing.size()) + " snapshots, rollout needs " +
                           std::to_string(steps + 1));
    StateSequence out;
    out.mesh_hash = forcing.mesh_hash;
    out.stride = forcing.stride;
    out.snapshots.push_back(initial);
    out.discharge.push_back(forcing.discharge[0]);
    out.stage.push_back(forcing.stage[0]);
    std::size_t clamped = 0;
    HydraulicState cur = initial;
    for (int k = 0; k < steps; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const auto& drivers = forcing.snapshots[ku + 1];
        const GraphBatch batch = assemble_features(cur, graph, forcing.discharge[ku], forcing.discharge[ku + 1], drivers,
                                                   model.config().schema, norm);
        const Matrix y = model.forward(batch);
        HydraulicState next = cur;
        clamped += apply_prediction(y, norm, *graph, next);
        inject_boundaries(next, *graph, drivers);
        next.t = cur.t + forcing.stride;
        for (std::size_t i = 0; i < next.size(); ++i)
            if (!std::isfinite(next.h[i]) || !std::isfinite(next.u[i]) || !std::isfinite(next.v[i]))
                throw NumericalFailure("non-finite rollout state at step " + std::to_string(k + 1) + ", node " +
                                       std::to_string(i));
        out.snapshots.push_back(next);
        out.discharge.push_back(forcing.discharge[ku + 1]);
        out.stage.push_back(forcing.stage[ku + 1]);
        cur = std::move(next);
    }
    out.meta["clamped_depths"] = clamped;
    return out;
}

// ---------------------------------------------------------------------------

std::string serialize_fgp(const Model& model, const Normalizer& norm, const std::string& training_hash) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : model.param_blocks()) blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
    nlohmann::json meta = {{"format", "FGP"},
                           {"schema_version", FeatureSchema::kVersion},
                           {"model", to_json(model.config())},
                           {"normalizer", to_json(norm)},
                           {"parameter_count", model.parameter_count()},
                           {"parameter_blocks", blocks},
                           {"training_hash", training_hash}};
    ByteWriter w;
    write_container_header(w, "FGP1", kFgpVersion, dump_json(meta));
    w.f64_array(model.params);
    return w.bytes();
}

Checkpoint parse_fgp(const std::string& bytes) {
    ByteReader r(bytes);
    const auto meta = nlohmann::json::parse(read_container_header(r, "FGP1", kFgpVersion));
    if (meta.value("schema_version", -1) != FeatureSchema::kVersion) throw InvalidInput("FGP: unsupported feature schema");
    Checkpoint c;
    c.model = std::make_unique<Model>(model_config_from_json(meta.at("model")));
    if (meta.at("parameter_count").get<std::size_t>() != c.model->parameter_count())
        throw InvalidInput("FGP: parameter count does not match the hyperparameters");
    for (auto& p : c.model->params) p = r.f64();
    if (!r.at_end()) throw InvalidInput("FGP: trailing bytes");
    c.normalizer = normalizer_from_json(meta.at("normalizer"));
    c.training_hash = meta.value("training_hash", "");
    return c;
}

void save_checkpoint(const Model& model, const Normalizer& norm, const std::string& training_hash,
                     const std::string& path) {
    write_file(path, serialize_fgp(model, norm, training_hash));
}

Checkpoint load_checkpoint(const std::string& path) { return parse_fgp(read_file(path)); }

}  // namespace floodgnn
