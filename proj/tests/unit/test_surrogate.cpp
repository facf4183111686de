#include <algorithm>
#include <cmath>
#include <numeric>

#include "../reference_model.hpp"
#include "../fixtures.hpp"
#include "doctest.h"
#include "floodgnn/surrogate.hpp"

using namespace floodgnn;
using namespace floodgnn::testing;

TEST_CASE("normalization round trip and feature layout") {
    ChannelStats s{{5.0}, {2.0}};
    CHECK(s.normalize(0, 9.0) == 2.0);
    Rng rng(3);
    for (int k = 0; k < 1000; ++k) {
        const double v = rng.uniform(-1e3, 1e3);
        CHECK(std::abs(s.denormalize(0, s.normalize(0, v)) - v) <= 1e-12 * std::max(1.0, std::abs(v)));
    }

    auto f = make_fixture(1);
    FeatureSchema schema;
    const auto b = assemble_features(f.now, f.graph, 1000.0, 1100.0, f.next, schema, f.norm);
    REQUIRE(b.node_features.cols() == 10);
    const double q = f.norm.dynamic.normalize(3, 1000.0);
    for (Eigen::Index i = 0; i < b.node_features.rows(); ++i) {
        CHECK(b.node_features(i, 3) == q);
        double onehot = 0.0;
        for (int c = 6; c < 10; ++c) onehot += b.node_features(i, c);
        CHECK(onehot == 1.0);
    }
    // Node 0 is a corner: WALL.
    CHECK(b.node_features(0, 9) == 1.0);
    // The inflow node sees its imposed next-step values, the stage node its next-step depth.
    CHECK(b.node_features(4, 0) == f.norm.dynamic.normalize(0, f.next.h[4]));
    CHECK(b.node_features(4, 1) == f.norm.dynamic.normalize(1, f.next.u[4]));
    CHECK(b.node_features(7, 0) == f.norm.dynamic.normalize(0, f.next.h[7]));
    CHECK(b.node_features(7, 1) == f.norm.dynamic.normalize(1, f.now.u[7]));
    CHECK(b.node_features(5, 0) == f.norm.dynamic.normalize(0, f.now.h[5]));

    auto bad = f.now;
    bad.h[6] = std::nan("");
    CHECK_THROWS_WITH_AS(assemble_features(bad, f.graph, 1.0, 1.0, f.next, schema, f.norm), "non-finite input at node 6",
                         InvalidInput);
}

TEST_CASE("output shapes") {
    // 5 nodes, 12 directed edges.
    TriMesh m;
    m.x = {0, 1, 2, 0, 1};
    m.y = {0, 0, 0, 1, 1};
    m.z.assign(5, 0.0);
    m.strickler.assign(5, 30.0);
    m.labels.assign(5, BoundaryLabel::Wall);
    m.triangles = {{0, 1, 4}, {0, 4, 3}, {1, 2, 4}};
    auto g = std::make_shared<SimGraph>(make_sim_graph(m, standard_graph(m)));
    REQUIRE(g->edge_count() == 14);
    g->receiver.resize(12);
    g->sender.resize(12);
    g->dx.resize(12);
    g->dy.resize(12);
    g->dist.resize(12);
    g->origin.resize(12);
    Rng rng(2);
    ModelConfig c;
    c.latent = 64;
    c.blocks = 10;
    c.schema.use_discharge = false;
    Model model(c);
    const auto s = random_state(rng, 5);
    const auto b = assemble_features(s, g, 0.0, 0.0, s, c.schema, random_normalizer(rng));
    const Matrix y = model.forward(b);
    CHECK(y.rows() == 5);
    CHECK(y.cols() == 3);
}

TEST_CASE("reference forward pass agrees with the batched implementation") {
    auto f = make_fixture(12);
    Model model(small_config(true));
    const auto b = assemble_features(f.now, f.graph, 800.0, 900.0, f.next, model.config().schema, f.norm);
    const Matrix y = model.forward(b);
    const auto ref = testing::ReferenceModel<double>(model).forward(b);
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (int c = 0; c < 3; ++c) CHECK(std::abs(y(i, c) - ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]) <= 1e-12);
}

TEST_CASE("analytic gradients match central finite differences") {
    for (bool use_q : {false, true}) {
        auto f = make_fixture(use_q ? 9 : 8);
        Model model(small_config(use_q));
        const auto b = assemble_features(f.now, f.graph, 800.0, 900.0, f.next, model.config().schema, f.norm);
        Matrix target, mask;
        increment_targets(f.now, f.next, *f.graph, f.norm, target, mask);
        model.loss_and_gradients(b, target, mask);
        const double worst = testing::worst_gradient_error(model, b, target, mask, 1e-6, 1e-5);
        MESSAGE("parameters " << model.parameter_count() << ", worst relative gradient error " << worst);
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("perfect prediction gives zero loss and zero gradients") {
    auto f = make_fixture(4);
    Model model(small_config(true));
    const auto b = assemble_features(f.now, f.graph, 1.0, 1.0, f.next, model.config().schema, f.norm);
    const Matrix target = model.forward(b);
    Matrix mask = Matrix::Ones(target.rows(), 3);
    CHECK(model.loss_and_gradients(b, target, mask) == 0.0);
    CHECK(std::all_of(model.grads.begin(), model.grads.end(), [](double g) { return g == 0.0; }));
}

TEST_CASE("zero-initialized output layers persist the state and drivers follow forcing") {
    auto f = make_fixture(5);
    Model model(small_config(true, true));
    StateSequence forcing;
    forcing.mesh_hash = "m";
    Rng rng(6);
    for (int k = 0; k <= 12; ++k) {
        auto s = random_state(rng, f.mesh.node_count());
        s.t = k * kOutputStride;
        forcing.snapshots.push_back(s);
        forcing.discharge.push_back(100.0 + 50.0 * k);
        forcing.stage.push_back(1.5);
    }
    const auto seq = rollout(model, f.graph, f.norm, forcing.snapshots[0], forcing, 12);
    REQUIRE(seq.size() == 13);
    for (std::size_t k = 0; k < seq.size(); ++k) {
        const auto& s = seq.snapshots[k];
        CHECK(s.t == k * kOutputStride);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto imposed = imposed_channels(f.mesh.labels[i]);
            const auto& src = imposed[0] ? forcing.snapshots[k] : forcing.snapshots[0];
            CHECK(s.h[i] == src.h[i]);
            CHECK(s.u[i] == (imposed[1] ? forcing.snapshots[k] : forcing.snapshots[0]).u[i]);
            CHECK(s.v[i] == (imposed[2] ? forcing.snapshots[k] : forcing.snapshots[0]).v[i]);
        }
    }
    CHECK(rollout(model, f.graph, f.norm, forcing.snapshots[0], forcing, 0).size() == 1);
}

TEST_CASE("boundary injection") {
    auto f = make_fixture(6);
    HydraulicState next = f.now, drivers = f.now;
    drivers.h[4] = 2.0;
    drivers.u[4] = 1.0;
    drivers.v[4] = 0.0;
    drivers.h[7] = 1.2;
    next.h[7] = 0.9;
    next.u[7] = 0.3;
    next.v[7] = -0.1;
    const auto interior = std::make_tuple(next.h[5], next.u[5], next.v[5]);
    inject_boundaries(next, *f.graph, drivers);
    CHECK((next.h[4] == 2.0 && next.u[4] == 1.0 && next.v[4] == 0.0));
    CHECK((next.h[7] == 1.2 && next.u[7] == 0.3 && next.v[7] == -0.1));
    CHECK(std::make_tuple(next.h[5], next.u[5], next.v[5]) == interior);
}

TEST_CASE("forward pass is equivariant under node relabelling") {
    Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        TriMesh m = testing::random_mesh(rng, 60);
        m.labels[0] = BoundaryLabel::Inflow;
        const std::size_t n = m.node_count();
        std::vector<std::uint32_t> perm(n);  // new index of old node i
        std::iota(perm.begin(), perm.end(), 0u);
        rng.shuffle(perm);
        TriMesh p = m;
        for (std::size_t i = 0; i < n; ++i) {
            p.x[perm[i]] = m.x[i];
            p.y[perm[i]] = m.y[i];
            p.z[perm[i]] = m.z[i];
            p.strickler[perm[i]] = m.strickler[i];
            p.labels[perm[i]] = m.labels[i];
        }
        for (auto& t : p.triangles)
            for (auto& v : t) v = perm[v];
        const auto norm = random_normalizer(rng);
        const auto s = random_state(rng, n);
        auto ps = s;
        for (std::size_t i = 0; i < n; ++i) {
            ps.h[perm[i]] = s.h[i];
            ps.u[perm[i]] = s.u[i];
            ps.v[perm[i]] = s.v[i];
        }
        auto cfg = small_config(true);
        cfg.latent = 16;
        cfg.blocks = 3;
        Model model(cfg);
        const auto g = std::make_shared<SimGraph>(make_sim_graph(m, standard_graph(m)));
        const auto pg = std::make_shared<SimGraph>(make_sim_graph(p, standard_graph(p)));
        const Matrix y = model.forward(assemble_features(s, g, 500.0, 500.0, s, cfg.schema, norm));
        const Matrix py = model.forward(assemble_features(ps, pg, 500.0, 500.0, ps, cfg.schema, norm));
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c)
                worst = std::max(worst, std::abs(y(static_cast<Eigen::Index>(i), c) - py(perm[i], c)));
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("checkpoint round trip") {
    auto f = make_fixture(7);
    Model model(small_config(true));
    const auto bytes = serialize_fgp(model, f.norm, "abc");
    const auto ck = parse_fgp(bytes);
    CHECK(ck.model->params == model.params);
    CHECK(ck.training_hash == "abc");
    CHECK(serialize_fgp(*ck.model, ck.normalizer, ck.training_hash) == bytes);
}
