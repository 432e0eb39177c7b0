#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>

#include "pdfd/retrieval.hpp"

using namespace pdfd;

namespace {

RetrievalFeature feat(std::vector<double> v, int category, std::int64_t id = 0) {
    RetrievalFeature f;
    const int n = static_cast<int>(v.size());
    f.vector = Tensor({n}, std::move(v));
    f.category = category;
    f.id = id;
    return f;
}

// Brute-force oracle: recompute distances and the AP definition from
// scratch, without touching rank_gallery/average_precision internals.
double oracle_ap(const RetrievalFeature& q, const std::vector<RetrievalFeature>& gallery,
                 Metric metric) {
    std::vector<std::pair<double, int>> scored;
    for (std::size_t i = 0; i < gallery.size(); ++i) {
        double dist = 0.0;
        if (metric == Metric::cosine) {
            double qq = 0, gg = 0, qg = 0;
            for (int j = 0; j < q.vector.size(); ++j) {
                qq += q.vector[j] * q.vector[j];
                gg += gallery[i].vector[j] * gallery[i].vector[j];
                qg += q.vector[j] * gallery[i].vector[j];
            }
            dist = 1.0 - qg / (std::sqrt(qq) * std::sqrt(gg));
        } else {
            for (int j = 0; j < q.vector.size(); ++j) {
                const double d = q.vector[j] - gallery[i].vector[j];
                dist += d * d;
            }
            dist = std::sqrt(dist);
        }
        scored.emplace_back(dist, static_cast<int>(i));
    }
    std::sort(scored.begin(), scored.end());
    int total_rel = 0, hits = 0;
    for (const auto& [d, i] : scored)
        total_rel += gallery[static_cast<std::size_t>(i)].category == q.category ? 1 : 0;
    if (total_rel == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < scored.size(); ++k) {
        if (gallery[static_cast<std::size_t>(scored[k].second)].category != q.category)
            continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    return sum / total_rel;
}

} // namespace

TEST_CASE("rank_gallery basics", "[retrieval]") {
    SECTION("an exact duplicate ranks first") {
        auto g = std::vector<RetrievalFeature>{feat({1, 0}, 0), feat({0.3, 0.7}, 1),
                                               feat({-1, 0.2}, 0)};
        auto r = rank_gallery(feat({0.3, 0.7}, 1), g, Metric::euclidean);
        CHECK(r.order[0] == 1);
        CHECK(r.relevant[0] == 1);
    }
    SECTION("equidistant items resolve to the lower index") {
        auto g = std::vector<RetrievalFeature>{feat({0, 2}, 0), feat({0, 2}, 1),
                                               feat({5, 5}, 0)};
        auto r = rank_gallery(feat({0, 1}, 0), g, Metric::euclidean);
        CHECK(r.order[0] == 0);
        CHECK(r.order[1] == 1);
    }
    SECTION("empty gallery and zero-norm cosine vectors are errors") {
        CHECK_THROWS_AS(rank_gallery(feat({1, 0}, 0), {}, Metric::cosine), DataError);
        auto g = std::vector<RetrievalFeature>{feat({1, 0}, 0)};
        CHECK_THROWS_AS(rank_gallery(feat({0, 0}, 0), g, Metric::cosine), DataError);
    }
    SECTION("order is a permutation matching a brute-force sort") {
        Rng rng(5);
        std::vector<RetrievalFeature> g;
        for (int i = 0; i < 5; ++i) {
            std::vector<double> v{rng.gaussian(), rng.gaussian(), rng.gaussian()};
            g.push_back(feat(v, i % 2, i));
        }
        auto q = feat({rng.gaussian(), rng.gaussian(), rng.gaussian()}, 1);
        for (auto metric : {Metric::cosine, Metric::euclidean}) {
            auto r = rank_gallery(q, g, metric);
            std::set<int> seen(r.order.begin(), r.order.end());
            CHECK(seen.size() == g.size());
            CHECK(average_precision(r.relevant) ==
                  Catch::Approx(oracle_ap(q, g, metric)).margin(1e-12));
        }
    }
}

TEST_CASE("average precision worked examples", "[retrieval]") {
    CHECK(average_precision({1, 1, 0}) == 1.0);
    CHECK(average_precision({0, 1}) == 0.5);
    CHECK(average_precision({1, 0, 1}) == Catch::Approx(5.0 / 6.0).margin(1e-15));
    CHECK(average_precision({}) == 0.0);
    CHECK(average_precision({0, 0, 0}) == 0.0);
    // all-relevant lists of any length have AP exactly 1
    for (int len : {1, 2, 5, 17})
        CHECK(average_precision(std::vector<char>(static_cast<std::size_t>(len), 1)) == 1.0);
}

TEST_CASE("precision at k", "[retrieval]") {
    RankedResult r;
    r.order = {0, 1, 2};
    r.relevant = {1, 0, 1};
    CHECK(prec_at_k(r, 2) == 0.5);
    // gallery smaller than k: denominator is the gallery size
    CHECK(prec_at_k(r, 100) == Catch::Approx(2.0 / 3.0).margin(1e-15));
    CHECK_THROWS_AS(prec_at_k(r, 0), ConfigError);
}

TEST_CASE("mAP matches the brute-force oracle on random instances", "[retrieval]") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const int n_classes = rng.uniform_int(2, 8);
        const int n_gallery = rng.uniform_int(5, 50);
        const int n_queries = rng.uniform_int(1, 10);
        const int dim = rng.uniform_int(2, 6);
        std::vector<RetrievalFeature> gallery, queries;
        for (int i = 0; i < n_gallery; ++i) {
            std::vector<double> v;
            for (int j = 0; j < dim; ++j) v.push_back(rng.gaussian() + 0.01);
            gallery.push_back(feat(v, rng.uniform_int(0, n_classes - 1), i));
        }
        for (int i = 0; i < n_queries; ++i) {
            std::vector<double> v;
            for (int j = 0; j < dim; ++j) v.push_back(rng.gaussian() + 0.01);
            queries.push_back(feat(v, rng.uniform_int(0, n_classes - 1), 1000 + i));
        }
        const Metric metric = trial % 2 == 0 ? Metric::cosine : Metric::euclidean;
        double expect = 0.0;
        for (const auto& q : queries) expect += oracle_ap(q, gallery, metric);
        expect /= n_queries;
        CHECK(map_at_all(queries, gallery, metric) == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("map_at_all is invariant to gallery permutation with distinct distances",
          "[retrieval]") {
    Rng rng(7);
    std::vector<RetrievalFeature> gallery;
    for (int i = 0; i < 12; ++i) {
        std::vector<double> v{rng.gaussian(), rng.gaussian(), rng.gaussian()};
        gallery.push_back(feat(v, i % 3, i));
    }
    std::vector<RetrievalFeature> queries{feat({0.5, -0.2, 0.8}, 0, 100),
                                          feat({-1.2, 0.4, 0.1}, 2, 101)};
    const double before = map_at_all(queries, gallery, Metric::euclidean);
    std::reverse(gallery.begin(), gallery.end());
    CHECK(map_at_all(queries, gallery, Metric::euclidean) ==
          Catch::Approx(before).margin(1e-12));
}

TEST_CASE("hamming distance properties", "[retrieval]") {
    Rng rng(13);
    auto random_code = [&](int bits) {
        BinaryCode c = BinaryCode::zeros(bits);
        for (int i = 0; i < bits; ++i) c.set(i, rng.uniform() < 0.5);
        return c;
    };
    for (int trial = 0; trial < 50; ++trial) {
        const int bits = trial % 2 == 0 ? 64 : 130;
        BinaryCode a = random_code(bits), b = random_code(bits), c = random_code(bits);
        CHECK(hamming_distance(a, a) == 0);
        CHECK(hamming_distance(a, b) == hamming_distance(b, a));
        CHECK(hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c));
    }
    CHECK_THROWS_AS(hamming_distance(random_code(64), random_code(32)), ShapeError);
}

TEST_CASE("itq on axis-aligned corner data is a fixed point", "[retrieval]") {
    // 4 corners x 3 copies: covariance is isotropic, quantization is exact
    std::vector<double> rows;
    for (int copy = 0; copy < 3; ++copy)
        for (double a : {-1.0, 1.0})
            for (double b : {-1.0, 1.0}) {
                rows.push_back(a);
                rows.push_back(b);
            }
    Tensor data({12, 2}, rows);
    for (int iters : {1, 2, 10}) {
        auto model = itq_fit(data, 2, iters);
        CHECK(model.quant_errors.back() == Catch::Approx(0.0).margin(1e-18));
    }
}

TEST_CASE("itq quantization error is non-increasing with orthogonal rotations",
          "[retrieval]") {
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 60, d = 6, b = 4;
        Tensor data({n, d});
        for (int i = 0; i < data.size(); ++i) data[i] = rng.gaussian() * (1.0 + i % d);
        auto model = itq_fit(data, b, 30, 1000 + static_cast<std::uint64_t>(trial));
        REQUIRE(model.quant_errors.size() == 30u);
        for (std::size_t i = 1; i < model.quant_errors.size(); ++i)
            CHECK(model.quant_errors[i] <=
                  model.quant_errors[i - 1] * (1.0 + 1e-12) + 1e-12);
        for (double e : model.ortho_errors) CHECK(e < 1e-8);
    }
}

TEST_CASE("itq rejects degenerate inputs", "[retrieval]") {
    SECTION("rank-deficient covariance") {
        // all mass on one direction: second eigenvalue is zero
        Tensor data({10, 3});
        Rng rng(31);
        for (int i = 0; i < 10; ++i) {
            const double t = rng.gaussian();
            data.at(i, 0) = t;
            data.at(i, 1) = 2.0 * t;
            data.at(i, 2) = -t;
        }
        CHECK_THROWS_AS(itq_fit(data, 2, 10), DataError);
    }
    SECTION("not enough samples") {
        Tensor data({3, 4});
        CHECK_THROWS_AS(itq_fit(data, 3, 10), DataError);
    }
    SECTION("bits exceeding the dimension") {
        Tensor data({10, 3});
        CHECK_THROWS_AS(itq_fit(data, 4, 10), ConfigError);
    }
}

TEST_CASE("itq un-rotates a rotated 2-D Gaussian", "[retrieval]") {
    // plant axis-aligned N(0, diag(4, 1)) samples, rotate them by 45 degrees
    const int n = 400;
    Rng rng(41);
    const double c = std::cos(3.14159265358979323846 / 4.0);
    const double s = std::sin(3.14159265358979323846 / 4.0);
    Tensor planted({n, 2});
    Tensor data({n, 2});
    for (int i = 0; i < n; ++i) {
        const double a = 2.0 * rng.gaussian();
        const double b = 1.0 * rng.gaussian();
        planted.at(i, 0) = a;
        planted.at(i, 1) = b;
        data.at(i, 0) = c * a - s * b;
        data.at(i, 1) = s * a + c * b;
    }

    (void)planted;
    auto model = itq_fit(data, 2, 100);

    // oracle: exhaustive search over 2-D orthogonal maps (1-degree grid,
    // both orientations) minimizing the same quantization objective
    Eigen::RowVector2d mean(0.0, 0.0);
    for (int i = 0; i < n; ++i) {
        mean(0) += data.at(i, 0);
        mean(1) += data.at(i, 1);
    }
    mean /= n;
    auto grid_error = [&](double theta, bool reflect) {
        const double ct = std::cos(theta), st = std::sin(theta);
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = data.at(i, 0) - mean(0);
            const double y = data.at(i, 1) - mean(1);
            const double u = ct * x - st * y;
            double v = st * x + ct * y;
            if (reflect) v = -v;
            const double bu = u > 0 ? 1.0 : -1.0;
            const double bv = v > 0 ? 1.0 : -1.0;
            err += (bu - u) * (bu - u) + (bv - v) * (bv - v);
        }
        return err;
    };
    double best = 1e300;
    int best_deg = 0;
    bool best_reflect = false;
    for (int deg = 0; deg < 360; ++deg) {
        for (bool reflect : {false, true}) {
            const double e = grid_error(deg * 3.14159265358979323846 / 180.0, reflect);
            if (e < best) {
                best = e;
                best_deg = deg;
                best_reflect = reflect;
            }
        }
    }

    // the learned rotation reaches the oracle's optimum (up to the grid
    // resolution and finite-iteration convergence)
    CHECK(model.quant_errors.back() <= best * (1.0 + 1e-4));

    // the codes partition the points exactly like the oracle's best
    // orthogonal map, up to relabeling, away from its decision boundaries
    const double th = best_deg * 3.14159265358979323846 / 180.0;
    const double ct = std::cos(th), st = std::sin(th);
    std::map<std::pair<bool, bool>, std::pair<bool, bool>> mapping;
    bool consistent = true;
    for (int i = 0; i < n; ++i) {
        const double x = data.at(i, 0) - mean(0);
        const double y = data.at(i, 1) - mean(1);
        const double u = ct * x - st * y;
        double v = st * x + ct * y;
        if (best_reflect) v = -v;
        if (std::abs(u) < 0.15 || std::abs(v) < 0.15) continue;
        Tensor row({2}, {data.at(i, 0), data.at(i, 1)});
        BinaryCode code = itq_encode(model, row);
        const std::pair<bool, bool> got{code.get(0), code.get(1)};
        const std::pair<bool, bool> oracle{u > 0, v > 0};
        auto it = mapping.find(oracle);
        if (it == mapping.end())
            mapping[oracle] = got;
        else if (it->second != got)
            consistent = false;
    }
    CHECK(consistent);
    CHECK(mapping.size() == 4u);
    std::set<std::pair<bool, bool>> images;
    for (const auto& [k, v] : mapping) images.insert(v);
    CHECK(images.size() == mapping.size()); // injective relabeling
}

TEST_CASE("binary evaluation pipeline", "[retrieval]") {
    // two well-separated clusters stay separated through 8-bit codes
    Rng rng(47);
    const int d = 10;
    Tensor data({40, d});
    std::vector<int> cats;
    for (int i = 0; i < 40; ++i) {
        const int c = i % 2;
        cats.push_back(c);
        for (int j = 0; j < d; ++j)
            data.at(i, j) = (c == 0 ? 2.0 : -2.0) * (j < 5 ? 1.0 : -0.5) + 0.2 * rng.gaussian();
    }
    auto model = itq_fit(data, 8, 30);
    std::vector<BinaryCode> codes;
    for (int i = 0; i < 40; ++i) {
        Tensor row({d});
        for (int j = 0; j < d; ++j) row[j] = data.at(i, j);
        codes.push_back(itq_encode(model, row));
    }
    std::vector<BinaryCode> queries(codes.begin(), codes.begin() + 6);
    std::vector<int> qcats(cats.begin(), cats.begin() + 6);
    const double m = map_at_all(queries, qcats, codes, cats);
    CHECK(m > 0.9);

    auto rep = evaluate_retrieval_binary(queries, qcats, codes, cats, d);
    CHECK(rep.binary);
    CHECK(rep.metric == "hamming");
    CHECK(rep.map_at_all == Catch::Approx(m));
    CHECK(rep.n_queries == 6);
}
