#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pdfd/errors.hpp"
#include "pdfd/ops.hpp"
#include "pdfd/rng.hpp"
#include "pdfd/tensor.hpp"
#include "pdfd/types.hpp"

namespace pdfd {

/// A common-space vector used for nearest-neighbor matching.
struct RetrievalFeature {
    Tensor vector; // [d_ret]
    Modality source = Modality::sketch;
    int category = -1;
    std::int64_t id = 0;
};

enum class Metric { cosine, euclidean, hamming };

inline Metric parse_metric(const std::string& s) {
    if (s == "cosine") return Metric::cosine;
    if (s == "euclidean") return Metric::euclidean;
    if (s == "hamming") return Metric::hamming;
    throw ConfigError("unknown metric '" + s + "'");
}

inline const char* metric_name(Metric m) {
    switch (m) {
    case Metric::cosine: return "cosine";
    case Metric::euclidean: return "euclidean";
    case Metric::hamming: return "hamming";
    }
    return "?";
}

/// Gallery ordering for one query, best match first, with per-position
/// category-relevance flags.
struct RankedResult {
    std::int64_t query_id = 0;
    std::vector<int> order;      // permutation of gallery indices
    std::vector<char> relevant;  // aligned with `order`
};

/// Fixed-width binary code, packed little-endian into 64-bit words.
struct BinaryCode {
    int bits = 0;
    std::vector<std::uint64_t> words;

    bool get(int i) const { return (words[static_cast<std::size_t>(i / 64)] >> (i % 64)) & 1u; }
    void set(int i, bool v) {
        auto& w = words[static_cast<std::size_t>(i / 64)];
        const std::uint64_t mask = 1ull << (i % 64);
        w = v ? (w | mask) : (w & ~mask);
    }
    static BinaryCode zeros(int bits) {
        return BinaryCode{bits, std::vector<std::uint64_t>(
                                    static_cast<std::size_t>((bits + 63) / 64), 0ull)};
    }
};

inline int hamming_distance(const BinaryCode& a, const BinaryCode& b) {
    if (a.bits != b.bits)
        throw ShapeError("hamming: code widths differ (" + std::to_string(a.bits) +
                         " vs " + std::to_string(b.bits) + ")");
    int d = 0;
    for (std::size_t i = 0; i < a.words.size(); ++i)
        d += std::popcount(a.words[i] ^ b.words[i]);
    return d;
}

namespace detail {

/// Ascending distance with ties broken by ascending gallery index.
inline RankedResult rank_by_distance(std::int64_t query_id, int query_category,
                                     const std::vector<double>& dist,
                                     const std::vector<int>& categories) {
    RankedResult r;
    r.query_id = query_id;
    r.order.resize(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) r.order[i] = static_cast<int>(i);
    std::sort(r.order.begin(), r.order.end(), [&](int a, int b) {
        if (dist[static_cast<std::size_t>(a)] != dist[static_cast<std::size_t>(b)])
            return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
        return a < b;
    });
    r.relevant.reserve(dist.size());
    for (int idx : r.order)
        r.relevant.push_back(categories[static_cast<std::size_t>(idx)] == query_category);
    return r;
}

inline Tensor l2_normalized(const Tensor& v, const char* what) {
    const double n = ops::l2_norm(v);
    if (!(n > 0.0))
        throw DataError(std::string("cosine ranking: zero-norm ") + what + " vector");
    Tensor out = v;
    for (int i = 0; i < out.size(); ++i) out[i] /= n;
    return out;
}

} // namespace detail

/// Rank real-valued gallery features for one query. Cosine L2-normalizes
/// both sides first; ties resolve to the lower gallery index.
inline RankedResult rank_gallery(const RetrievalFeature& query,
                                 const std::vector<RetrievalFeature>& gallery,
                                 Metric metric) {
    if (gallery.empty()) throw DataError("rank_gallery: empty gallery");
    if (metric == Metric::hamming)
        throw ConfigError("rank_gallery: hamming requires binary codes");

    std::vector<double> dist(gallery.size());
    std::vector<int> cats(gallery.size());
    if (metric == Metric::cosine) {
        const Tensor q = detail::l2_normalized(query.vector, "query");
        for (std::size_t i = 0; i < gallery.size(); ++i) {
            const Tensor g = detail::l2_normalized(gallery[i].vector, "gallery");
            dist[i] = 1.0 - ops::dot(q, g);
            cats[i] = gallery[i].category;
        }
    } else {
        for (std::size_t i = 0; i < gallery.size(); ++i) {
            if (!query.vector.same_shape(gallery[i].vector))
                throw ShapeError("rank_gallery: dimension mismatch at gallery item " +
                                 std::to_string(i));
            double s = 0.0;
            for (int j = 0; j < query.vector.size(); ++j) {
                const double d = query.vector[j] - gallery[i].vector[j];
                s += d * d;
            }
            dist[i] = std::sqrt(s);
            cats[i] = gallery[i].category;
        }
    }
    return detail::rank_by_distance(query.id, query.category, dist, cats);
}

/// Hamming-distance ranking over binary codes.
inline RankedResult rank_gallery(const BinaryCode& query, std::int64_t query_id,
                                 int query_category,
                                 const std::vector<BinaryCode>& gallery,
                                 const std::vector<int>& gallery_categories) {
    if (gallery.empty()) throw DataError("rank_gallery: empty gallery");
    if (gallery.size() != gallery_categories.size())
        throw ShapeError("rank_gallery: one category per gallery code required");
    std::vector<double> dist(gallery.size());
    for (std::size_t i = 0; i < gallery.size(); ++i)
        dist[i] = hamming_distance(query, gallery[i]);
    return detail::rank_by_distance(query_id, query_category, dist, gallery_categories);
}

/// AP over the full ranked list: mean over relevant ranks k of
/// (relevant within top k) / k, divided by the total relevant count.
/// Zero relevant items define AP = 0.
inline double average_precision(const std::vector<char>& relevance_in_rank_order) {
    int relevant_total = 0;
    for (char r : relevance_in_rank_order) relevant_total += r ? 1 : 0;
    if (relevant_total == 0) return 0.0;
    double sum = 0.0;
    int hits = 0;
    for (std::size_t k = 0; k < relevance_in_rank_order.size(); ++k) {
        if (!relevance_in_rank_order[k]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    return sum / relevant_total;
}

/// Relevant fraction of the top min(k, gallery) positions.
inline double prec_at_k(const RankedResult& ranked, int k) {
    if (k < 1) throw ConfigError("prec_at_k: k must be >= 1");
    const int denom = std::min<int>(k, static_cast<int>(ranked.relevant.size()));
    if (denom == 0) throw DataError("prec_at_k: empty ranking");
    int hits = 0;
    for (int i = 0; i < denom; ++i) hits += ranked.relevant[static_cast<std::size_t>(i)] ? 1 : 0;
    return static_cast<double>(hits) / denom;
}

/// Mean AP over queries, each ranked against the full gallery.
inline double map_at_all(const std::vector<RetrievalFeature>& queries,
                         const std::vector<RetrievalFeature>& gallery, Metric metric,
                         std::vector<RankedResult>* rankings = nullptr) {
    if (queries.empty()) throw DataError("map_at_all: empty query set");
    double sum = 0.0;
    for (const auto& q : queries) {
        RankedResult r = rank_gallery(q, gallery, metric);
        sum += average_precision(r.relevant);
        if (rankings) rankings->push_back(std::move(r));
    }
    return sum / static_cast<double>(queries.size());
}

inline double map_at_all(const std::vector<BinaryCode>& query_codes,
                         const std::vector<int>& query_categories,
                         const std::vector<BinaryCode>& gallery_codes,
                         const std::vector<int>& gallery_categories,
                         std::vector<RankedResult>* rankings = nullptr) {
    if (query_codes.empty()) throw DataError("map_at_all: empty query set");
    if (query_codes.size() != query_categories.size())
        throw ShapeError("map_at_all: one category per query code required");
    double sum = 0.0;
    for (std::size_t i = 0; i < query_codes.size(); ++i) {
        RankedResult r = rank_gallery(query_codes[i], static_cast<std::int64_t>(i),
                                      query_categories[i], gallery_codes,
                                      gallery_categories);
        sum += average_precision(r.relevant);
        if (rankings) rankings->push_back(std::move(r));
    }
    return sum / static_cast<double>(query_codes.size());
}

// ---------------------------------------------------------------------------
// Iterative quantization: PCA to b dims, then an orthogonal rotation learned
// by alternating sign quantization with the Procrustes solution.
// ---------------------------------------------------------------------------

struct ItqModel {
    Tensor mean;       // [d]
    Tensor projection; // [d, b], top-b PCA directions as columns
    Tensor rotation;   // [b, b], orthogonal
    int bits = 0;
    std::vector<double> quant_errors; // ||B - V R||^2 after each iteration
    std::vector<double> ortho_errors; // max |R^T R - I| after each iteration
};

namespace detail {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline EMatrix to_eigen(const Tensor& t) {
    return Eigen::Map<const EMatrix>(t.data(), t.rows(), t.cols());
}

inline Tensor from_eigen(const EMatrix& m) {
    Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    Eigen::Map<EMatrix>(t.data(), m.rows(), m.cols()) = m;
    return t;
}

inline double max_abs_off_identity(const EMatrix& m) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            worst = std::max(worst, std::abs(m(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

/// Deterministic random orthogonal matrix: QR of a Gaussian draw with the
/// column signs fixed by the R diagonal.
inline EMatrix random_rotation(int b, std::uint64_t seed) {
    Rng rng(seed);
    EMatrix g(b, b);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) g(i, j) = rng.gaussian();
    Eigen::HouseholderQR<EMatrix> qr(g);
    EMatrix q = qr.householderQ();
    EMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < b; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

} // namespace detail

/// Fit ITQ on n x d features. Requires n > b and a covariance of rank >= b.
inline ItqModel itq_fit(const Tensor& features, int b, int iters,
                        std::uint64_t seed = 0x17ff) {
    if (features.rank() != 2) throw ShapeError("itq_fit: features must be n x d");
    const int n = features.rows(), d = features.cols();
    if (b < 1 || b > d) throw ConfigError("itq_fit: need 1 <= bits <= feature dim");
    if (n <= b) throw DataError("itq_fit: need more samples than bits");
    if (iters < 1) throw ConfigError("itq_fit: need at least one iteration");

    detail::EMatrix x = detail::to_eigen(features);
    Eigen::RowVectorXd mean = x.colwise().mean();
    detail::EMatrix xc = x.rowwise() - mean;

    // top-b principal directions
    detail::EMatrix cov = (xc.transpose() * xc) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<detail::EMatrix> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("itq_fit: eigendecomposition failed");
    const Eigen::VectorXd evals = eig.eigenvalues(); // ascending
    const double tol = 1e-10 * std::max(1.0, evals(d - 1));
    if (evals(d - b) <= tol)
        throw DataError("itq_fit: covariance rank below " + std::to_string(b));
    detail::EMatrix proj(d, b);
    for (int j = 0; j < b; ++j) {
        Eigen::VectorXd col = eig.eigenvectors().col(d - 1 - j);
        // fix an arbitrary sign for determinism across backends
        int imax = 0;
        for (int i = 1; i < d; ++i)
            if (std::abs(col(i)) > std::abs(col(imax))) imax = i;
        if (col(imax) < 0) col = -col;
        proj.col(j) = col;
    }

    detail::EMatrix v = xc * proj; // n x b
    detail::EMatrix rot = detail::random_rotation(b, seed);

    ItqModel model;
    model.bits = b;
    for (int it = 0; it < iters; ++it) {
        detail::EMatrix vr = v * rot;
        detail::EMatrix bmat(n, b);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < b; ++j) bmat(i, j) = vr(i, j) > 0.0 ? 1.0 : -1.0;
        // orthogonal Procrustes: maximize tr(R^T V^T B)
        Eigen::JacobiSVD<detail::EMatrix> svd(v.transpose() * bmat,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        rot = svd.matrixU() * svd.matrixV().transpose();
        model.quant_errors.push_back((bmat - v * rot).squaredNorm());
        model.ortho_errors.push_back(detail::max_abs_off_identity(rot.transpose() * rot));
    }

    model.mean = Tensor({d});
    for (int i = 0; i < d; ++i) model.mean[i] = mean(i);
    model.projection = detail::from_eigen(proj);
    model.rotation = detail::from_eigen(rot);
    return model;
}

/// Quantize one feature: bit j set iff the rotated PCA coordinate is > 0.
inline BinaryCode itq_encode(const ItqModel& model, const Tensor& feature) {
    const int d = model.mean.size();
    if (feature.size() != d || feature.rank() != 1)
        throw ShapeError("itq_encode: feature must be a vector of dim " + std::to_string(d));
    const int b = model.bits;
    std::vector<double> centered(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) centered[static_cast<std::size_t>(i)] = feature[i] - model.mean[i];
    std::vector<double> projected(static_cast<std::size_t>(b), 0.0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < b; ++j)
            projected[static_cast<std::size_t>(j)] +=
                centered[static_cast<std::size_t>(i)] * model.projection.at(i, j);
    BinaryCode code = BinaryCode::zeros(b);
    for (int j = 0; j < b; ++j) {
        double z = 0.0;
        for (int k = 0; k < b; ++k)
            z += projected[static_cast<std::size_t>(k)] * model.rotation.at(k, j);
        code.set(j, z > 0.0);
    }
    return code;
}

/// Evaluation summary serialized to the report JSON.
struct EvalReport {
    double map_at_all = 0.0;
    double prec_at_100 = 0.0;
    int n_queries = 0;
    int n_gallery = 0;
    std::string metric;
    int d_ret = 0;
    bool binary = false;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["map_at_all"] = map_at_all;
        j["prec_at_100"] = prec_at_100;
        j["n_queries"] = n_queries;
        j["n_gallery"] = n_gallery;
        j["metric"] = metric;
        j["d_ret"] = d_ret;
        j["binary"] = binary;
        return j;
    }
};

/// Rank every query against the gallery and summarize mAP@all and Prec@100.
inline EvalReport evaluate_retrieval(const std::vector<RetrievalFeature>& queries,
                                     const std::vector<RetrievalFeature>& gallery,
                                     Metric metric, int d_ret) {
    std::vector<RankedResult> rankings;
    EvalReport rep;
    rep.map_at_all = map_at_all(queries, gallery, metric, &rankings);
    double psum = 0.0;
    for (const auto& r : rankings) psum += prec_at_k(r, 100);
    rep.prec_at_100 = psum / static_cast<double>(rankings.size());
    rep.n_queries = static_cast<int>(queries.size());
    rep.n_gallery = static_cast<int>(gallery.size());
    rep.metric = metric_name(metric);
    rep.d_ret = d_ret;
    rep.binary = false;
    return rep;
}

inline EvalReport evaluate_retrieval_binary(const std::vector<BinaryCode>& query_codes,
                                            const std::vector<int>& query_categories,
                                            const std::vector<BinaryCode>& gallery_codes,
                                            const std::vector<int>& gallery_categories,
                                            int d_ret) {
    std::vector<RankedResult> rankings;
    EvalReport rep;
    rep.map_at_all = map_at_all(query_codes, query_categories, gallery_codes,
                                gallery_categories, &rankings);
    double psum = 0.0;
    for (const auto& r : rankings) psum += prec_at_k(r, 100);
    rep.prec_at_100 = psum / static_cast<double>(rankings.size());
    rep.n_queries = static_cast<int>(query_codes.size());
    rep.n_gallery = static_cast<int>(gallery_codes.size());
    rep.metric = metric_name(Metric::hamming);
    rep.d_ret = d_ret;
    rep.binary = true;
    return rep;
}

} // namespace pdfd
