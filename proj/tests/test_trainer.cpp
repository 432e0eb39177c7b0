#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pdfd/trainer.hpp"

using namespace pdfd;

namespace {

struct Fixture {
    SynthResult synth;
    ZeroShotSplit split;
    ModelConfig model_cfg;
    SemanticTable table;
};

// small planted dataset: 4 seen + 2 unseen classes, random class embeddings
Fixture make_fixture(std::uint64_t seed = 5) {
    Fixture f;
    SynthConfig scfg;
    scfg.n_classes = 6;
    scfg.per_class = 6;
    scfg.d_vis = 12;
    scfg.latent_dim = 4;
    scfg.seed = seed;
    f.synth = generate_synthetic(scfg);
    f.split = make_split(f.synth.data.class_names, 0.67, seed);

    f.model_cfg.d_vis = scfg.d_vis;
    f.model_cfg.d_sem = 5;
    f.model_cfg.d_ret = 4;
    f.model_cfg.hidden = 8;
    f.model_cfg.n_seen_classes = static_cast<int>(f.split.seen.size());

    Rng rng(seed + 1000);
    for (const auto& name : f.split.seen) {
        const int cat = f.synth.data.category_of(name);
        Tensor s({f.model_cfg.d_sem});
        for (int i = 0; i < s.size(); ++i) s[i] = rng.gaussian();
        f.table[cat] = s;
    }
    return f;
}

std::vector<SamplePair> pairs_of_category(const Dataset& data, int category, int count) {
    std::vector<const Sample*> ske, img;
    for (const auto& s : data.samples) {
        if (s.category != category) continue;
        (s.modality == Modality::sketch ? ske : img).push_back(&s);
    }
    std::vector<SamplePair> out;
    for (int i = 0; i < count; ++i)
        out.push_back(SamplePair{ske[static_cast<std::size_t>(i) % ske.size()],
                                 img[static_cast<std::size_t>(i) % img.size()]});
    return out;
}

bool params_equal(const PdfdParams& a, const PdfdParams& b) {
    auto na = a.named();
    auto nb = b.named();
    if (na.size() != nb.size()) return false;
    for (std::size_t i = 0; i < na.size(); ++i)
        if (!(*na[i].second == *nb[i].second)) return false;
    return true;
}

} // namespace

TEST_CASE("adam with zero gradients leaves parameters unchanged", "[trainer]") {
    Tensor p({3}, {1.0, -2.0, 0.5});
    Tensor before = p;
    std::vector<std::pair<std::string, Tensor*>> params{{"p", &p}};
    AdamState state;
    TrainConfig cfg;
    NamedTensors grads{{"p", Tensor({3})}};
    for (int i = 0; i < 5; ++i) adam_step(params, grads, state, cfg);
    CHECK(p == before);
    CHECK(state.step == 5);
}

TEST_CASE("adam single scalar step matches the hand computation", "[trainer]") {
    // g=1, lr=1e-4, beta1=0.5, beta2=0.99: m_hat=1, v_hat=1,
    // update = -1e-4 / (1 + 1e-8)
    Tensor p({1}, {0.0});
    std::vector<std::pair<std::string, Tensor*>> params{{"p", &p}};
    AdamState state;
    TrainConfig cfg; // defaults are exactly these hyperparameters
    NamedTensors grads{{"p", Tensor({1}, {1.0})}};
    adam_step(params, grads, state, cfg);
    CHECK(p[0] == Catch::Approx(-1e-4 / (1.0 + 1e-8)).margin(1e-18));
}

TEST_CASE("constant gradients move a parameter monotonically", "[trainer]") {
    Tensor p({1}, {0.3});
    std::vector<std::pair<std::string, Tensor*>> params{{"p", &p}};
    AdamState state;
    TrainConfig cfg;
    NamedTensors grads{{"p", Tensor({1}, {2.5})}};
    double prev = p[0];
    for (int i = 0; i < 2; ++i) {
        adam_step(params, grads, state, cfg);
        CHECK(p[0] < prev);
        prev = p[0];
    }
}

TEST_CASE("adam rejects mismatched gradient shapes", "[trainer]") {
    Tensor p({2});
    std::vector<std::pair<std::string, Tensor*>> params{{"p", &p}};
    AdamState state;
    TrainConfig cfg;
    NamedTensors grads{{"p", Tensor({3})}};
    CHECK_THROWS_AS(adam_step(params, grads, state, cfg), ShapeError);
}

TEST_CASE("global norm clipping", "[trainer]") {
    NamedTensors grads{{"a", Tensor({2}, {3.0, 4.0})}, {"b", Tensor({1}, {12.0})}};
    clip_global_norm(grads, {"a", "b"}, 6.5); // norm is 13
    CHECK(grads.at("a")[0] == Catch::Approx(1.5));
    CHECK(grads.at("a")[1] == Catch::Approx(2.0));
    CHECK(grads.at("b")[0] == Catch::Approx(6.0));

    NamedTensors small{{"a", Tensor({1}, {0.5})}};
    clip_global_norm(small, {"a"}, 6.5);
    CHECK(small.at("a")[0] == 0.5); // untouched below the threshold
}

TEST_CASE("unseen-class samples in a batch are a hard contract error", "[trainer]") {
    Fixture f = make_fixture();
    std::vector<int> seen = seen_category_ids(f.synth.data, f.split);
    Trainer trainer(PdfdModel::init(f.model_cfg, 3), TrainConfig{}, f.table, seen);

    const int unseen_cat = f.synth.data.category_of(f.split.unseen.front());
    auto batch = pairs_of_category(f.synth.data, unseen_cat, 2);
    CHECK_THROWS_AS(trainer.train_step(batch), ContractViolation);
}

TEST_CASE("train_step runs and reports consistent losses", "[trainer]") {
    Fixture f = make_fixture();
    std::vector<int> seen = seen_category_ids(f.synth.data, f.split);
    Trainer trainer(PdfdModel::init(f.model_cfg, 3), TrainConfig{}, f.table, seen);

    auto batch = pairs_of_category(f.synth.data, seen[0], 3);
    LossReport r = trainer.train_step(batch);
    CHECK(r.mcls == r.dmcls + r.rmcls);
    CHECK(r.rec == r.rec_ske + r.rec_img);
    CHECK(r.adv <= 0.0);
    CHECK(r.rec >= 0.0);
    CHECK(std::isfinite(r.total));
}

TEST_CASE("loss decreases over 200 steps on a fixed two-class batch", "[trainer]") {
    Fixture f = make_fixture(11);
    std::vector<int> seen = seen_category_ids(f.synth.data, f.split);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3; // speed up the tiny fixture
    Trainer trainer(PdfdModel::init(f.model_cfg, 9), cfg, f.table, seen);

    auto batch = pairs_of_category(f.synth.data, seen[0], 2);
    auto more = pairs_of_category(f.synth.data, seen[1], 2);
    batch.insert(batch.end(), more.begin(), more.end());

    double first = 0.0, last = 0.0;
    for (int step = 0; step < 200; ++step) {
        LossReport r = trainer.train_step(batch);
        if (step == 0) first = r.total;
        last = r.total;
    }
    CHECK(last < first);
}

TEST_CASE("training is bit-deterministic for a fixed seed", "[trainer]") {
    Fixture f = make_fixture(21);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.seed = 77;
    auto a = train(f.synth.data, f.split, cfg, f.model_cfg, f.table);
    auto b = train(f.synth.data, f.split, cfg, f.model_cfg, f.table);
    CHECK(params_equal(a.model.params, b.model.params));
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(std::memcmp(&a.history[i].total, &b.history[i].total, sizeof(double)) == 0);
        CHECK(std::memcmp(&a.history[i].adv, &b.history[i].adv, sizeof(double)) == 0);
    }
}

TEST_CASE("zero epochs returns the initialized parameters untouched", "[trainer]") {
    Fixture f = make_fixture(31);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 5;
    auto r = train(f.synth.data, f.split, cfg, f.model_cfg, f.table);
    CHECK(r.history.empty());
    CHECK(params_equal(r.model.params, PdfdModel::init(f.model_cfg, cfg.seed).params));
}

TEST_CASE("history length is epochs times ceil(pairs / batch)", "[trainer]") {
    Fixture f = make_fixture(41);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 5;
    cfg.seed = 2;
    auto r = train(f.synth.data, f.split, cfg, f.model_cfg, f.table);
    // 4 seen classes x 6 pairs each = 24 pairs; ceil(24/5) = 5 steps per epoch
    CHECK(r.history.size() == 3u * 5u);
}

TEST_CASE("one discriminator step does not decrease the adversarial objective",
          "[trainer]") {
    // generator held fixed, tiny learning rate
    Fixture f = make_fixture(51);
    std::vector<int> seen = seen_category_ids(f.synth.data, f.split);
    auto model = PdfdModel::init(f.model_cfg, 13);

    auto batch = pairs_of_category(f.synth.data, seen[0], 4);
    const int n = static_cast<int>(batch.size());
    Tensor x_ske({n, f.model_cfg.d_vis}), x_img({n, f.model_cfg.d_vis});
    Tensor s_real({n, f.model_cfg.d_sem});
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < f.model_cfg.d_vis; ++j) {
            x_ske.at(i, j) = batch[static_cast<std::size_t>(i)].sketch->feature[j];
            x_img.at(i, j) = batch[static_cast<std::size_t>(i)].image->feature[j];
        }
        const Tensor& s = f.table.at(batch[static_cast<std::size_t>(i)].sketch->category);
        for (int j = 0; j < f.model_cfg.d_sem; ++j) s_real.at(i, j) = s[j];
    }

    TrainGraph tg = build_train_graph(f.model_cfg, LossWeights(), n, labels);
    auto in = bind_train_inputs(model.params, f.model_cfg, x_ske, x_img, s_real);
    const double before = forward_eval(tg.graph, in).value(tg.loss_adv)[0];

    TrainConfig cfg;
    cfg.learning_rate = 1e-6;
    AdamState state;
    NamedTensors grads = backward(tg.graph, forward_eval(tg.graph, in), tg.loss_adv);
    std::vector<std::pair<std::string, Tensor*>> disc_params;
    for (auto& [name, t] : model.params.named())
        if (name.rfind("disc.", 0) == 0) {
            Tensor& g = grads.at(name);
            for (int i = 0; i < g.size(); ++i) g[i] = -g[i]; // ascent
            disc_params.emplace_back(name, t);
        }
    adam_step(disc_params, grads, state, cfg);

    auto in2 = bind_train_inputs(model.params, f.model_cfg, x_ske, x_img, s_real);
    const double after = forward_eval(tg.graph, in2).value(tg.loss_adv)[0];
    CHECK(after >= before - 1e-12);
}
