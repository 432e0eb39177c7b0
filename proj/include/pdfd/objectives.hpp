#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdfd/errors.hpp"
#include "pdfd/tensor.hpp"
#include "pdfd/types.hpp"

namespace pdfd {

/// Coefficients of the full objective. Defaults are the Sketchy settings;
/// TU-Berlin uses (1.0, 0.4, 0.5, 0.4).
struct LossWeights {
    double lambda_adv = 1.0;
    double lambda_ccls = 0.01;
    double lambda_rec = 1.0;
    double lambda_mcls = 1.0;

    static LossWeights sketchy() { return LossWeights{1.0, 0.01, 1.0, 1.0}; }
    static LossWeights tu_berlin() { return LossWeights{1.0, 0.4, 0.5, 0.4}; }

    void validate() const {
        for (double v : {lambda_adv, lambda_ccls, lambda_rec, lambda_mcls})
            if (!(v >= 0.0) || !std::isfinite(v))
                throw ConfigError("loss weights must be finite and non-negative");
    }
};

namespace detail {
inline double clamp_prob(double p) {
    return std::min(std::max(p, 1e-12), 1.0 - 1e-12);
}

inline double mean_log(const std::vector<double>& probs) {
    if (probs.empty()) throw DataError("loss: empty batch");
    double s = 0.0;
    for (double p : probs) s += std::log(clamp_prob(p));
    return s / static_cast<double>(probs.size());
}

inline double mean_log_one_minus(const std::vector<double>& probs) {
    if (probs.empty()) throw DataError("loss: empty batch");
    double s = 0.0;
    for (double p : probs) s += std::log(clamp_prob(1.0 - p));
    return s / static_cast<double>(probs.size());
}

/// -mean over rows of log P(column | row).
inline double nll_of_column(const Tensor& dist, int column) {
    const int n = dist.rows();
    if (n == 0 || dist.size() == 0) throw DataError("loss: empty batch");
    if (column < 0 || column >= dist.cols())
        throw DataError("loss: class column out of range");
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::log(clamp_prob(dist.at(i, column)));
    return -s / n;
}
} // namespace detail

/// The adversarial objective of the semantic encoder and discriminator:
/// 2 E[log D(s)] + E[log(1 - D(E(x_ske)))] + E[log(1 - D(E(x_img)))].
/// The discriminator ascends this value; the encoders descend it.
inline double adversarial_loss(const std::vector<double>& d_real,
                               const std::vector<double>& d_fake_ske,
                               const std::vector<double>& d_fake_img) {
    return 2.0 * detail::mean_log(d_real) + detail::mean_log_one_minus(d_fake_ske) +
           detail::mean_log_one_minus(d_fake_img);
}

/// -E[log P(sketch | x_dom_ske)] - E[log P(image | x_dom_img)].
inline double modality_loss_domain(const Tensor& pred_ske, const Tensor& pred_img) {
    return detail::nll_of_column(pred_ske, modality_code(Modality::sketch)) +
           detail::nll_of_column(pred_img, modality_code(Modality::image));
}

/// -E[log P(semantic | x_ret_ske)] - E[log P(semantic | x_ret_img)].
inline double modality_loss_retrieval(const Tensor& pred_ret_ske,
                                      const Tensor& pred_ret_img) {
    return detail::nll_of_column(pred_ret_ske, modality_code(Modality::semantic)) +
           detail::nll_of_column(pred_ret_img, modality_code(Modality::semantic));
}

/// -E[log P(y | x_ret_ske)] - E[log P(y | x_ret_img)] over true labels y.
inline double category_loss(const Tensor& pred_ske, const Tensor& pred_img,
                            const std::vector<int>& labels) {
    const int n = pred_ske.rows();
    if (n == 0) throw DataError("loss: empty batch");
    if (static_cast<int>(labels.size()) != n || pred_img.rows() != n)
        throw ShapeError("category_loss: batch sizes disagree");
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= pred_ske.cols())
            throw DataError("category_loss: label " + std::to_string(y) +
                            " outside seen-class range");
        s += std::log(detail::clamp_prob(pred_ske.at(i, y))) +
             std::log(detail::clamp_prob(pred_img.at(i, y)));
    }
    return -s / n;
}

struct ReconstructionLoss {
    double rec_ske = 0.0;
    double rec_img = 0.0;
    double rec = 0.0;
};

/// Squared-L2 cross-reconstruction losses, summed over coordinates and
/// averaged over the batch.
inline ReconstructionLoss reconstruction_loss(const Tensor& x_ske, const Tensor& x_img,
                                              const Tensor& recon_ske1,
                                              const Tensor& recon_ske2,
                                              const Tensor& recon_img1,
                                              const Tensor& recon_img2) {
    auto check = [&](const Tensor& t, const Tensor& ref, const char* what) {
        if (!t.same_shape(ref))
            throw ShapeError(std::string("reconstruction_loss: ") + what + " has shape " +
                             t.shape_str() + ", expected " + ref.shape_str());
    };
    check(recon_ske1, x_ske, "sketch reconstruction 1");
    check(recon_ske2, x_ske, "sketch reconstruction 2");
    check(recon_img1, x_img, "image reconstruction 1");
    check(recon_img2, x_img, "image reconstruction 2");
    const int n = x_ske.rows();
    if (n == 0) throw DataError("loss: empty batch");

    auto sq_diff = [](const Tensor& a, const Tensor& b) {
        double s = 0.0;
        for (int i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            s += d * d;
        }
        return s;
    };
    ReconstructionLoss out;
    out.rec_ske = (sq_diff(recon_ske1, x_ske) + sq_diff(recon_ske2, x_ske)) / n;
    out.rec_img = (sq_diff(recon_img1, x_img) + sq_diff(recon_img2, x_img)) / n;
    out.rec = out.rec_ske + out.rec_img;
    return out;
}

/// lambda_adv*adv + lambda_ccls*ccls + lambda_rec*rec + lambda_mcls*mcls.
inline double total_loss(double adv, double ccls, double rec, double mcls,
                         const LossWeights& w) {
    for (double v : {adv, ccls, rec, mcls})
        if (!std::isfinite(v)) throw DataError("total_loss: non-finite component");
    return w.lambda_adv * adv + w.lambda_ccls * ccls + w.lambda_rec * rec +
           w.lambda_mcls * mcls;
}

/// Every loss term of one step. mcls and rec are the exact sums of their
/// parts; total is the weighted sum of the four components.
struct LossReport {
    double adv = 0.0;
    double dmcls = 0.0;
    double rmcls = 0.0;
    double mcls = 0.0;
    double ccls = 0.0;
    double rec_ske = 0.0;
    double rec_img = 0.0;
    double rec = 0.0;
    double total = 0.0;

    static LossReport from_parts(double adv, double dmcls, double rmcls, double ccls,
                                 double rec_ske, double rec_img, const LossWeights& w) {
        LossReport r;
        r.adv = adv;
        r.dmcls = dmcls;
        r.rmcls = rmcls;
        r.mcls = dmcls + rmcls;
        r.ccls = ccls;
        r.rec_ske = rec_ske;
        r.rec_img = rec_img;
        r.rec = rec_ske + rec_img;
        r.total = total_loss(r.adv, r.ccls, r.rec, r.mcls, w);
        return r;
    }

    nlohmann::ordered_json to_json(long step) const {
        nlohmann::ordered_json j;
        j["step"] = step;
        j["adv"] = adv;
        j["dmcls"] = dmcls;
        j["rmcls"] = rmcls;
        j["mcls"] = mcls;
        j["ccls"] = ccls;
        j["rec_ske"] = rec_ske;
        j["rec_img"] = rec_img;
        j["rec"] = rec;
        j["total"] = total;
        return j;
    }
};

} // namespace pdfd
