#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdfd/autodiff.hpp"
#include "pdfd/objectives.hpp"
#include "pdfd/rng.hpp"
#include "pdfd/tensor.hpp"
#include "pdfd/types.hpp"

namespace pdfd {

struct ModelConfig {
    int d_vis = 0;          // visual feature dim
    int d_sem = 0;          // semantic embedding dim (text + taxonomy nodes)
    int d_ret = 64;         // retrieval dim; 64 or 512 for paper-parity runs
    int hidden = 256;       // hidden width of every MLP
    int n_seen_classes = 0; // category classifier output size
    bool progressive = true; // false: retrieval features are the encoder output

    void validate() const {
        if (d_vis <= 0 || d_sem <= 0 || d_ret <= 0 || hidden <= 0 || n_seen_classes <= 0)
            throw ConfigError("model config: all dimensions must be positive");
        if (!progressive && d_sem != d_ret)
            throw ConfigError("model config: non-progressive mode requires d_sem == d_ret");
    }
};

/// One-hidden-layer MLP with ReLU, linear output.
struct MlpParams {
    Tensor w1, b1, w2, b2;

    static MlpParams glorot(int d_in, int d_hidden, int d_out, Rng& rng) {
        MlpParams p;
        p.w1 = Tensor({d_in, d_hidden});
        p.b1 = Tensor({d_hidden});
        p.w2 = Tensor({d_hidden, d_out});
        p.b2 = Tensor({d_out});
        const double l1 = std::sqrt(6.0 / (d_in + d_hidden));
        for (int i = 0; i < p.w1.size(); ++i) p.w1[i] = rng.uniform(-l1, l1);
        const double l2 = std::sqrt(6.0 / (d_hidden + d_out));
        for (int i = 0; i < p.w2.size(); ++i) p.w2[i] = rng.uniform(-l2, l2);
        return p;
    }

    Tensor forward(const Tensor& x) const {
        return ops::affine(ops::relu(ops::affine(x, w1, b1)), w2, b2);
    }
};

/// All PDFD networks. The sketch and image branches share every one of
/// these by construction: there is a single storage for each tensor.
struct PdfdParams {
    MlpParams e_sem;    // visual -> semantic features
    MlpParams e_dom;    // visual -> domain features
    MlpParams dec_ret;  // semantic -> retrieval features (progressive only)
    MlpParams rec_ske;  // retrieval + domain -> sketch visual
    MlpParams rec_img;  // retrieval + domain -> image visual
    MlpParams disc;     // semantic -> real/fake logit
    MlpParams mod_head; // retrieval-dim -> 3 modality logits
    MlpParams cat_head; // retrieval-dim -> seen-class logits

    static PdfdParams init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        Rng rng(seed);
        PdfdParams p;
        p.e_sem = MlpParams::glorot(cfg.d_vis, cfg.hidden, cfg.d_sem, rng);
        p.e_dom = MlpParams::glorot(cfg.d_vis, cfg.hidden, cfg.d_ret, rng);
        p.dec_ret = MlpParams::glorot(cfg.d_sem, cfg.hidden, cfg.d_ret, rng);
        p.rec_ske = MlpParams::glorot(cfg.d_ret, cfg.hidden, cfg.d_vis, rng);
        p.rec_img = MlpParams::glorot(cfg.d_ret, cfg.hidden, cfg.d_vis, rng);
        p.disc = MlpParams::glorot(cfg.d_sem, cfg.hidden, 1, rng);
        p.mod_head = MlpParams::glorot(cfg.d_ret, cfg.hidden, 3, rng);
        p.cat_head = MlpParams::glorot(cfg.d_ret, cfg.hidden, cfg.n_seen_classes, rng);
        return p;
    }

    /// Stable name -> tensor map; the order fixes optimizer and checkpoint
    /// layouts. Networks unused in a configuration are simply not listed.
    std::vector<std::pair<std::string, Tensor*>> named(bool progressive = true) {
        std::vector<std::pair<std::string, Tensor*>> out;
        auto push = [&](const std::string& prefix, MlpParams& m) {
            out.emplace_back(prefix + ".w1", &m.w1);
            out.emplace_back(prefix + ".b1", &m.b1);
            out.emplace_back(prefix + ".w2", &m.w2);
            out.emplace_back(prefix + ".b2", &m.b2);
        };
        push("e_sem", e_sem);
        push("e_dom", e_dom);
        if (progressive) push("dec_ret", dec_ret);
        push("rec_ske", rec_ske);
        push("rec_img", rec_img);
        push("disc", disc);
        push("mod_head", mod_head);
        push("cat_head", cat_head);
        return out;
    }

    std::vector<std::pair<std::string, const Tensor*>> named(bool progressive = true) const {
        auto mut = const_cast<PdfdParams*>(this)->named(progressive);
        std::vector<std::pair<std::string, const Tensor*>> out;
        out.reserve(mut.size());
        for (auto& [name, t] : mut) out.emplace_back(name, t);
        return out;
    }
};

/// Decomposition of one visual feature into its semantic and domain parts.
struct DecomposedFeatures {
    Tensor semantic; // [d_sem] (or [n, d_sem])
    Tensor domain;   // [d_ret]
    Modality modality = Modality::sketch;
};

struct PdfdModel {
    ModelConfig config;
    PdfdParams params;

    static PdfdModel init(const ModelConfig& cfg, std::uint64_t seed) {
        return PdfdModel{cfg, PdfdParams::init(cfg, seed)};
    }

    /// x -> (E_sem(x), E_dom(x)). Both encoders are shared across branches,
    /// so the modality tag only annotates the result.
    DecomposedFeatures decompose(const Tensor& x, Modality mod = Modality::sketch) const {
        check_dim(x, config.d_vis, "decompose input");
        return DecomposedFeatures{params.e_sem.forward(x), params.e_dom.forward(x), mod};
    }

    Tensor to_retrieval(const Tensor& x_sem) const {
        check_dim(x_sem, config.d_sem, "to_retrieval input");
        if (!config.progressive) return x_sem;
        return params.dec_ret.forward(x_sem);
    }

    /// Feed x_ret + x_dom (elementwise, dims must both be d_ret) through the
    /// reconstructor of the target branch. All four cross pairings are valid.
    Tensor reconstruct(const Tensor& x_ret, const Tensor& x_dom,
                       Modality target_branch) const {
        check_dim(x_ret, config.d_ret, "reconstruct retrieval input");
        check_dim(x_dom, config.d_ret, "reconstruct domain input");
        if (target_branch == Modality::semantic)
            throw DataError("reconstruct: target branch must be sketch or image");
        const Tensor sum = ops::axpby(1.0, x_ret, 1.0, x_dom);
        const MlpParams& net = target_branch == Modality::sketch ? params.rec_ske
                                                                 : params.rec_img;
        return net.forward(sum);
    }

    /// Probability that the input is a real semantic embedding, in (0,1).
    Tensor discriminate(const Tensor& v) const {
        check_dim(v, config.d_sem, "discriminator input");
        return ops::sigmoid(params.disc.forward(v));
    }

    /// 3-way {sketch, image, semantic} distribution per row.
    Tensor classify_modality(const Tensor& v) const {
        check_dim(v, config.d_ret, "modality classifier input");
        return ops::softmax_rows(params.mod_head.forward(v));
    }

    /// Seen-class distribution per row.
    Tensor classify_category(const Tensor& v) const {
        check_dim(v, config.d_ret, "category classifier input");
        return ops::softmax_rows(params.cat_head.forward(v));
    }

private:
    static void check_dim(const Tensor& t, int want, const char* what) {
        if (t.cols() != want || t.rank() > 2)
            throw ShapeError(std::string(what) + ": expected dim " + std::to_string(want) +
                             ", got " + t.shape_str());
    }
};

// ---------------------------------------------------------------------------
// Training graph: the whole forward pass and every loss term as one record.
// ---------------------------------------------------------------------------

struct TrainGraph {
    Graph graph;
    NodeId loss_adv = -1;
    NodeId loss_dmcls = -1;
    NodeId loss_rmcls = -1;
    NodeId loss_mcls = -1;
    NodeId loss_ccls = -1;
    NodeId loss_rec_ske = -1;
    NodeId loss_rec_img = -1;
    NodeId loss_rec = -1;
    NodeId loss_total = -1;     // the full objective
    NodeId gen_objective = -1;  // what non-discriminator parameters descend
};

namespace detail {

struct GraphMlp {
    NodeId w1, b1, w2, b2;
};

inline GraphMlp declare_mlp(Graph& g, const std::string& prefix, int d_in, int hidden,
                            int d_out) {
    return GraphMlp{
        g.input(prefix + ".w1", {d_in, hidden}, true),
        g.input(prefix + ".b1", {hidden}, true),
        g.input(prefix + ".w2", {hidden, d_out}, true),
        g.input(prefix + ".b2", {d_out}, true),
    };
}

inline NodeId apply_mlp(Graph& g, const GraphMlp& m, NodeId x) {
    return g.affine(g.relu(g.affine(x, m.w1, m.b1)), m.w2, m.b2);
}

inline NodeId one_minus(Graph& g, NodeId x) {
    Tensor ones(g.at(x).shape);
    for (int i = 0; i < ones.size(); ++i) ones[i] = 1.0;
    return g.add(g.constant(std::move(ones)), x, 1.0, -1.0);
}

} // namespace detail

/// Build the record computing every loss of the objective for a batch of n
/// category-matched sketch/image pairs. Data inputs: "x_ske", "x_img"
/// [n, d_vis] and "s_real" [n, d_sem]; parameters use the PdfdParams names.
inline TrainGraph build_train_graph(const ModelConfig& cfg, const LossWeights& w, int n,
                                    const std::vector<int>& labels,
                                    bool non_saturating = false) {
    cfg.validate();
    if (n <= 0) throw DataError("train graph: empty batch");
    if (static_cast<int>(labels.size()) != n)
        throw ShapeError("train graph: one label per pair required");

    TrainGraph tg;
    Graph& g = tg.graph;
    const double inv_n = 1.0 / n;

    NodeId x_ske = g.input("x_ske", {n, cfg.d_vis}, false);
    NodeId x_img = g.input("x_img", {n, cfg.d_vis}, false);
    NodeId s_real = g.input("s_real", {n, cfg.d_sem}, false);

    auto e_sem = detail::declare_mlp(g, "e_sem", cfg.d_vis, cfg.hidden, cfg.d_sem);
    auto e_dom = detail::declare_mlp(g, "e_dom", cfg.d_vis, cfg.hidden, cfg.d_ret);
    detail::GraphMlp dec_ret{};
    if (cfg.progressive)
        dec_ret = detail::declare_mlp(g, "dec_ret", cfg.d_sem, cfg.hidden, cfg.d_ret);
    auto rec_ske = detail::declare_mlp(g, "rec_ske", cfg.d_ret, cfg.hidden, cfg.d_vis);
    auto rec_img = detail::declare_mlp(g, "rec_img", cfg.d_ret, cfg.hidden, cfg.d_vis);
    auto disc = detail::declare_mlp(g, "disc", cfg.d_sem, cfg.hidden, 1);
    auto mod_head = detail::declare_mlp(g, "mod_head", cfg.d_ret, cfg.hidden, 3);
    auto cat_head = detail::declare_mlp(g, "cat_head", cfg.d_ret, cfg.hidden,
                                        cfg.n_seen_classes);

    // decomposition and projection
    NodeId sem_ske = detail::apply_mlp(g, e_sem, x_ske);
    NodeId sem_img = detail::apply_mlp(g, e_sem, x_img);
    NodeId dom_ske = detail::apply_mlp(g, e_dom, x_ske);
    NodeId dom_img = detail::apply_mlp(g, e_dom, x_img);
    NodeId ret_ske = cfg.progressive ? detail::apply_mlp(g, dec_ret, sem_ske) : sem_ske;
    NodeId ret_img = cfg.progressive ? detail::apply_mlp(g, dec_ret, sem_img) : sem_img;
    g.tag(ret_ske, "ret_ske");
    g.tag(ret_img, "ret_img");

    // adversarial loss: discriminator ascends, encoder descends
    NodeId d_real = g.sigmoid(detail::apply_mlp(g, disc, s_real));
    NodeId d_fake_ske = g.sigmoid(detail::apply_mlp(g, disc, sem_ske));
    NodeId d_fake_img = g.sigmoid(detail::apply_mlp(g, disc, sem_img));
    tg.loss_adv = g.weighted_sum(
        {g.log(d_real), g.log(detail::one_minus(g, d_fake_ske)),
         g.log(detail::one_minus(g, d_fake_img))},
        {2.0 * inv_n, inv_n, inv_n});
    g.tag(tg.loss_adv, "loss.adv");

    // modality classification on domain features (labels: own branch)
    NodeId dmcls_ske = g.softmax_xent(detail::apply_mlp(g, mod_head, dom_ske),
                                      std::vector<int>(n, modality_code(Modality::sketch)));
    NodeId dmcls_img = g.softmax_xent(detail::apply_mlp(g, mod_head, dom_img),
                                      std::vector<int>(n, modality_code(Modality::image)));
    tg.loss_dmcls = g.weighted_sum({dmcls_ske, dmcls_img}, {1.0, 1.0});
    g.tag(tg.loss_dmcls, "loss.dmcls");

    // modality classification on retrieval features (label: semantic)
    const std::vector<int> sem_labels(static_cast<std::size_t>(n),
                                      modality_code(Modality::semantic));
    NodeId rmcls_ske = g.softmax_xent(detail::apply_mlp(g, mod_head, ret_ske), sem_labels);
    NodeId rmcls_img = g.softmax_xent(detail::apply_mlp(g, mod_head, ret_img), sem_labels);
    tg.loss_rmcls = g.weighted_sum({rmcls_ske, rmcls_img}, {1.0, 1.0});
    g.tag(tg.loss_rmcls, "loss.rmcls");

    tg.loss_mcls = g.weighted_sum({tg.loss_dmcls, tg.loss_rmcls}, {1.0, 1.0});
    g.tag(tg.loss_mcls, "loss.mcls");

    // category classification on retrieval features
    NodeId ccls_ske = g.softmax_xent(detail::apply_mlp(g, cat_head, ret_ske), labels);
    NodeId ccls_img = g.softmax_xent(detail::apply_mlp(g, cat_head, ret_img), labels);
    tg.loss_ccls = g.weighted_sum({ccls_ske, ccls_img}, {1.0, 1.0});
    g.tag(tg.loss_ccls, "loss.ccls");

    // cross reconstruction: all four retrieval/domain pairings
    NodeId rec_s1 = detail::apply_mlp(g, rec_ske, g.add(ret_ske, dom_ske));
    NodeId rec_s2 = detail::apply_mlp(g, rec_ske, g.add(ret_img, dom_ske));
    NodeId rec_i1 = detail::apply_mlp(g, rec_img, g.add(ret_ske, dom_img));
    NodeId rec_i2 = detail::apply_mlp(g, rec_img, g.add(ret_img, dom_img));
    tg.loss_rec_ske = g.weighted_sum({g.sqnorm(g.add(rec_s1, x_ske, 1.0, -1.0)),
                                      g.sqnorm(g.add(rec_s2, x_ske, 1.0, -1.0))},
                                     {inv_n, inv_n});
    tg.loss_rec_img = g.weighted_sum({g.sqnorm(g.add(rec_i1, x_img, 1.0, -1.0)),
                                      g.sqnorm(g.add(rec_i2, x_img, 1.0, -1.0))},
                                     {inv_n, inv_n});
    g.tag(tg.loss_rec_ske, "loss.rec_ske");
    g.tag(tg.loss_rec_img, "loss.rec_img");
    tg.loss_rec = g.weighted_sum({tg.loss_rec_ske, tg.loss_rec_img}, {1.0, 1.0});
    g.tag(tg.loss_rec, "loss.rec");

    tg.loss_total = g.weighted_sum(
        {tg.loss_adv, tg.loss_ccls, tg.loss_rec, tg.loss_mcls},
        {w.lambda_adv, w.lambda_ccls, w.lambda_rec, w.lambda_mcls});
    g.tag(tg.loss_total, "loss.total");

    if (non_saturating) {
        // generator maximizes log D(fake) instead of minimizing log(1 - D)
        NodeId adv_ns = g.weighted_sum({g.log(d_fake_ske), g.log(d_fake_img)},
                                       {-inv_n, -inv_n});
        tg.gen_objective = g.weighted_sum(
            {adv_ns, tg.loss_ccls, tg.loss_rec, tg.loss_mcls},
            {w.lambda_adv, w.lambda_ccls, w.lambda_rec, w.lambda_mcls});
        g.tag(tg.gen_objective, "loss.gen_objective");
    } else {
        tg.gen_objective = tg.loss_total;
    }
    return tg;
}

/// Bind a parameter set (plus batch data) for evaluating a train graph.
inline NamedTensors bind_train_inputs(PdfdParams& params, const ModelConfig& cfg,
                                      const Tensor& x_ske, const Tensor& x_img,
                                      const Tensor& s_real) {
    NamedTensors in;
    for (auto& [name, t] : params.named(cfg.progressive)) in[name] = *t;
    in["x_ske"] = x_ske;
    in["x_img"] = x_img;
    in["s_real"] = s_real;
    return in;
}

} // namespace pdfd
