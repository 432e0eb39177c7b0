#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pdfd/datahub.hpp"
#include "pdfd/model.hpp"
#include "pdfd/objectives.hpp"

namespace pdfd {

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.99;
    double epsilon = 1e-8;
    int batch_size = 32;
    int epochs = 10;
    std::uint64_t seed = 1;
    LossWeights weights;
    int disc_steps_per_gen_step = 1;
    double clip_norm = 5.0; // global-norm gradient clip per update group
    bool non_saturating = false;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw ConfigError("train: betas must lie in [0, 1)");
        if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be > 0");
        if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
        if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
        if (disc_steps_per_gen_step < 1)
            throw ConfigError("train: discriminator steps must be >= 1");
        if (!(clip_norm > 0.0)) throw ConfigError("train: clip norm must be > 0");
        weights.validate();
    }
};

/// Adam first/second moments plus the shared step counter. One state per
/// update group (discriminator and generator step at their own cadence).
struct AdamState {
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    long step = 0;
};

/// One bias-corrected Adam update over the given parameters. Gradients
/// missing from `grads` are treated as absent (no update for that tensor).
inline void adam_step(const std::vector<std::pair<std::string, Tensor*>>& params,
                      const NamedTensors& grads, AdamState& state,
                      const TrainConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (const auto& [name, param] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        if (!g.same_shape(*param))
            throw ShapeError("adam: gradient for '" + name + "' has shape " +
                             g.shape_str() + ", parameter is " + param->shape_str());
        Tensor& m = state.m.try_emplace(name, Tensor::zeros_like(*param)).first->second;
        Tensor& v = state.v.try_emplace(name, Tensor::zeros_like(*param)).first->second;
        for (int i = 0; i < g.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            (*param)[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

/// Scale the selected gradients so their joint L2 norm is at most max_norm.
inline void clip_global_norm(NamedTensors& grads, const std::vector<std::string>& keys,
                             double max_norm) {
    double sq = 0.0;
    for (const auto& k : keys) {
        auto it = grads.find(k);
        if (it == grads.end()) continue;
        sq += ops::sqnorm(it->second);
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (const auto& k : keys) {
        auto it = grads.find(k);
        if (it == grads.end()) continue;
        Tensor& g = it->second;
        for (int i = 0; i < g.size(); ++i) g[i] *= scale;
    }
}

/// One category-matched sketch/image pair from the seen set.
struct SamplePair {
    const Sample* sketch = nullptr;
    const Sample* image = nullptr;
};

/// Semantic embedding per dataset category id (seen categories only).
using SemanticTable = std::map<int, Tensor>;

namespace detail {
inline bool is_disc_param(const std::string& name) {
    return name.rfind("disc.", 0) == 0;
}
} // namespace detail

/// Alternating min-max trainer: the discriminator ascends the adversarial
/// objective, everything else descends the full objective.
class Trainer {
public:
    Trainer(PdfdModel model, TrainConfig cfg, SemanticTable semantic_table,
            std::vector<int> seen_categories)
        : model_(std::move(model)), cfg_(std::move(cfg)),
          semantic_(std::move(semantic_table)), seen_(std::move(seen_categories)) {
        cfg_.validate();
        if (seen_.empty()) throw ContractViolation("trainer: empty seen-class set");
        if (static_cast<int>(seen_.size()) != model_.config.n_seen_classes)
            throw ConfigError("trainer: seen-class count disagrees with model config");
        for (std::size_t i = 0; i < seen_.size(); ++i) {
            seen_index_[seen_[i]] = static_cast<int>(i);
            auto it = semantic_.find(seen_[i]);
            if (it == semantic_.end())
                throw DataError("trainer: no semantic embedding for seen category " +
                                std::to_string(seen_[i]));
            if (it->second.size() != model_.config.d_sem)
                throw ShapeError("trainer: semantic embedding dim " +
                                 std::to_string(it->second.size()) + " != d_sem " +
                                 std::to_string(model_.config.d_sem));
        }
    }

    const PdfdModel& model() const { return model_; }
    PdfdModel& model() { return model_; }

    /// One alternating update on a batch of pairs. Every pair must come from
    /// a seen class; anything else breaks the zero-shot contract hard.
    LossReport train_step(const std::vector<SamplePair>& batch) {
        const int n = static_cast<int>(batch.size());
        if (n == 0) throw DataError("train_step: empty batch");

        std::vector<int> labels;
        labels.reserve(batch.size());
        Tensor x_ske({n, model_.config.d_vis});
        Tensor x_img({n, model_.config.d_vis});
        Tensor s_real({n, model_.config.d_sem});
        for (int i = 0; i < n; ++i) {
            const SamplePair& p = batch[static_cast<std::size_t>(i)];
            if (p.sketch == nullptr || p.image == nullptr)
                throw DataError("train_step: null sample in batch");
            if (p.sketch->category != p.image->category)
                throw DataError("train_step: pair categories disagree");
            auto it = seen_index_.find(p.sketch->category);
            if (it == seen_index_.end())
                throw ContractViolation("train_step: category " +
                                        std::to_string(p.sketch->category) +
                                        " is not a seen class (zero-shot breach)");
            labels.push_back(it->second);
            const Tensor& s = semantic_.at(p.sketch->category);
            for (int j = 0; j < model_.config.d_vis; ++j) {
                x_ske.at(i, j) = p.sketch->feature[j];
                x_img.at(i, j) = p.image->feature[j];
            }
            for (int j = 0; j < model_.config.d_sem; ++j) s_real.at(i, j) = s[j];
        }

        TrainGraph tg = build_train_graph(model_.config, cfg_.weights, n, labels,
                                          cfg_.non_saturating);
        auto named = model_.params.named(model_.config.progressive);
        std::vector<std::string> disc_keys, gen_keys;
        std::vector<std::pair<std::string, Tensor*>> disc_params, gen_params;
        for (auto& [name, t] : named) {
            if (detail::is_disc_param(name)) {
                disc_keys.push_back(name);
                disc_params.emplace_back(name, t);
            } else {
                gen_keys.push_back(name);
                gen_params.emplace_back(name, t);
            }
        }

        // (a) discriminator ascent on the adversarial objective
        for (int k = 0; k < cfg_.disc_steps_per_gen_step; ++k) {
            NamedTensors in = bind_train_inputs(model_.params, model_.config, x_ske,
                                                x_img, s_real);
            Workspace ws = forward_eval(tg.graph, in);
            NamedTensors grads = backward(tg.graph, ws, tg.loss_adv);
            for (const auto& k2 : disc_keys) {
                Tensor& g = grads.at(k2);
                for (int i = 0; i < g.size(); ++i) g[i] = -g[i]; // ascend
            }
            clip_global_norm(grads, disc_keys, cfg_.clip_norm);
            adam_step(disc_params, grads, disc_state_, cfg_);
        }

        // (b) everything else descends the full objective
        {
            NamedTensors in = bind_train_inputs(model_.params, model_.config, x_ske,
                                                x_img, s_real);
            Workspace ws = forward_eval(tg.graph, in);
            NamedTensors grads = backward(tg.graph, ws, tg.gen_objective);
            clip_global_norm(grads, gen_keys, cfg_.clip_norm);
            adam_step(gen_params, grads, gen_state_, cfg_);
        }

        // post-update losses
        NamedTensors in = bind_train_inputs(model_.params, model_.config, x_ske, x_img,
                                            s_real);
        Workspace ws = forward_eval(tg.graph, in);
        return LossReport::from_parts(ws.value(tg.loss_adv)[0], ws.value(tg.loss_dmcls)[0],
                                      ws.value(tg.loss_rmcls)[0], ws.value(tg.loss_ccls)[0],
                                      ws.value(tg.loss_rec_ske)[0],
                                      ws.value(tg.loss_rec_img)[0], cfg_.weights);
    }

private:
    PdfdModel model_;
    TrainConfig cfg_;
    SemanticTable semantic_;
    std::vector<int> seen_; // dataset category ids; position = classifier label
    std::map<int, int> seen_index_;
    AdamState disc_state_;
    AdamState gen_state_;
};

struct TrainResult {
    PdfdModel model;
    std::vector<LossReport> history; // one report per step
    std::vector<int> epochs;         // epoch index per step
};

/// Category ids of the split's seen classes, sorted; the position in this
/// list is the category-classifier label.
inline std::vector<int> seen_category_ids(const Dataset& data, const ZeroShotSplit& split) {
    std::vector<int> ids;
    for (const auto& name : split.seen) ids.push_back(data.category_of(name));
    std::sort(ids.begin(), ids.end());
    return ids;
}

/// Full training driver: shuffled category-matched pairs per epoch, one
/// alternating update per batch. Deterministic for a fixed seed.
inline TrainResult train(const Dataset& data, const ZeroShotSplit& split,
                         const TrainConfig& cfg, const ModelConfig& model_cfg,
                         const SemanticTable& semantic_table,
                         const std::function<void(int, const PdfdModel&)>& on_epoch = {},
                         long max_steps = 0) {
    cfg.validate();
    split.validate();
    const std::vector<int> seen = seen_category_ids(data, split);
    if (seen.empty()) throw ContractViolation("train: empty seen set");

    std::map<int, std::vector<const Sample*>> sketches, images;
    for (const auto& s : data.samples) {
        if (std::find(seen.begin(), seen.end(), s.category) == seen.end()) continue;
        (s.modality == Modality::sketch ? sketches : images)[s.category].push_back(&s);
    }

    Trainer trainer(PdfdModel::init(model_cfg, cfg.seed), cfg, semantic_table, seen);
    TrainResult out{trainer.model(), {}, {}};

    Rng rng(cfg.seed);
    long steps_done = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // category-level pairing: align shuffled per-class sample lists
        std::vector<SamplePair> pairs;
        for (int c : seen) {
            auto ske_it = sketches.find(c);
            auto img_it = images.find(c);
            if (ske_it == sketches.end() || img_it == images.end()) continue;
            auto ske = ske_it->second;
            auto img = img_it->second;
            rng.shuffle(ske.begin(), ske.end());
            rng.shuffle(img.begin(), img.end());
            const std::size_t k = std::min(ske.size(), img.size());
            for (std::size_t i = 0; i < k; ++i) pairs.push_back(SamplePair{ske[i], img[i]});
        }
        if (pairs.empty()) throw DataError("train: no sketch/image pairs in seen classes");
        rng.shuffle(pairs.begin(), pairs.end());

        for (std::size_t start = 0; start < pairs.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(pairs.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<SamplePair> batch(pairs.begin() + static_cast<long>(start),
                                          pairs.begin() + static_cast<long>(stop));
            out.history.push_back(trainer.train_step(batch));
            out.epochs.push_back(epoch);
            ++steps_done;
            if (max_steps > 0 && steps_done >= max_steps) break;
        }
        if (on_epoch) on_epoch(epoch, trainer.model());
        if (max_steps > 0 && steps_done >= max_steps) break;
    }
    out.model = trainer.model();
    return out;
}

} // namespace pdfd
