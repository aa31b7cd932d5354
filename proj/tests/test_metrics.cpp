#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "evfuse/metrics.hpp"
#include "oracles.hpp"

using namespace evfuse;
using namespace evfuse::metrics;

namespace {

using Vec = std::vector<double>;
using Labels = std::vector<int>;

}  // namespace

TEST_CASE("roc_auc examples") {
    CHECK(roc_auc(Vec{0.9, 0.8, 0.2, 0.1}, Labels{1, 1, 0, 0}) == 1.0);
    CHECK(roc_auc(Vec{0.9, 0.6, 0.4, 0.1}, Labels{1, 0, 1, 0}) == 0.75);
    CHECK(oracle::pairwise_auc({0.9, 0.6, 0.4, 0.1}, {1, 0, 1, 0}) == 0.75);
    CHECK(roc_auc(Vec(6, 0.3), Labels{0, 1, 1, 0, 1, 0}) == 0.5);
    CHECK(oracle::error_code([] { roc_auc(Vec{0.1, 0.2}, Labels{1, 1}); }) == ErrorCode::DegenerateLabels);
    CHECK(oracle::error_code([] { roc_auc(Vec{0.1, 0.2}, Labels{1, 2}); }) == ErrorCode::DegenerateLabels);
    CHECK(oracle::error_code([] { roc_auc(Vec{0.1}, Labels{1, 0}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("average_precision examples") {
    CHECK(average_precision(Vec{0.9, 0.8, 0.2, 0.1}, Labels{1, 1, 0, 0}) == 1.0);
    CHECK(average_precision(Vec{0.9, 0.6, 0.4, 0.1}, Labels{1, 0, 1, 0}) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(oracle::stable_walk_ap({0.9, 0.6, 0.4, 0.1}, {1, 0, 1, 0}) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    // Constant scores form one threshold, so AP equals the prevalence whatever the order.
    CHECK(average_precision(Vec(6, 0.4), Labels{1, 0, 1, 0, 1, 0}) == 0.5);
    CHECK(average_precision(Vec(6, 0.4), Labels{0, 0, 0, 1, 1, 1}) == 0.5);
    CHECK(oracle::error_code([] { average_precision(Vec{0.1, 0.2}, Labels{0, 0}); }) ==
          ErrorCode::DegenerateLabels);
}

TEST_CASE("brier and prediction_kl examples") {
    CHECK(brier(Vec{1.0, 0.0}, Labels{1, 0}) == 0.0);
    CHECK(brier(Vec(4, 0.5), Labels{1, 0, 0, 1}) == 0.25);
    CHECK(brier(Vec{0.8, 0.3}, Labels{1, 0}) == doctest::Approx(0.065).epsilon(1e-14));
    CHECK(prediction_kl(Vec{0.2, 0.7}, Vec{0.2, 0.7}) == 0.0);
    CHECK(prediction_kl(Vec{0.5}, Vec{0.5}) == 0.0);
    CHECK(prediction_kl(Vec{0.9}, Vec{0.5}) ==
          doctest::Approx(0.9 * std::log(1.8) + 0.1 * std::log(0.2)).epsilon(1e-14));
    CHECK(prediction_kl(Vec{0.9}, Vec{0.5}) == doctest::Approx(0.36806).epsilon(1e-5));
    CHECK(std::isfinite(prediction_kl(Vec{0.0, 1.0}, Vec{1.0, 0.0})));
    CHECK(oracle::error_code([] { brier(Vec{1.2}, Labels{1}); }) == ErrorCode::NonFiniteValue);
}

TEST_CASE("ano_auc examples") {
    const Vec s{0.9, 0.1, 0.8, 0.7, 0.2, 0.95};
    const Labels y{1, 0, 1, 0, 0, 1};
    CHECK(ano_auc(s, y, {true, true, true, false, false, false}) == 1.0);
    CHECK(ano_auc(s, y, std::vector<bool>(6, true)) == roc_auc(s, y));
    const std::vector<bool> f{true, false, true, true, true, false};
    std::vector<double> ss;
    std::vector<int> yy;
    for (int k = 0; k < 6; ++k)
        if (f[k]) {
            ss.push_back(s[k]);
            yy.push_back(y[k]);
        }
    CHECK(ano_auc(s, y, f) == oracle::pairwise_auc(ss, yy));
}

// AP sums the same fractions as the oracle in a different order, so it can
// differ in the last bits; AUC is a ratio of exact half-integer counts.
constexpr double kApUlps = 4 * std::numeric_limits<double>::epsilon();

TEST_CASE("metrics match brute-force oracles on every label pattern up to size 12") {
    std::mt19937_64 rng(401);
    std::uniform_int_distribution<int> level(0, 5);
    for (std::size_t n = 2; n <= 12; ++n) {
        Vec scores(n);
        for (double& v : scores) v = level(rng) / 5.0;  // ties are common
        Vec distinct(n);
        for (std::size_t k = 0; k < n; ++k) distinct[k] = static_cast<double>((k * 856) % 1009) / 1009.0;
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            Labels y(n);
            int pos = 0;
            for (std::size_t k = 0; k < n; ++k) pos += y[k] = (mask >> k) & 1u;
            if (pos == 0) continue;
            for (const Vec* s : {&scores, &distinct}) {
                CHECK(std::abs(average_precision(*s, y) - oracle::per_positive_ap(*s, y)) <= kApUlps);
                if (pos < static_cast<int>(n)) CHECK(roc_auc(*s, y) == oracle::pairwise_auc(*s, y));
            }
            CHECK(std::abs(average_precision(distinct, y) - oracle::stable_walk_ap(distinct, y)) <= kApUlps);
        }
    }
}

TEST_CASE("metrics match the oracles on random size-200 inputs") {
    std::mt19937_64 rng(403);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> coarse(0, 40);
    for (int rep = 0; rep < 300; ++rep) {
        Vec s(200);
        Labels y(200);
        for (int k = 0; k < 200; ++k) {
            s[k] = rep % 2 ? u(rng) : coarse(rng) / 40.0;
            y[k] = u(rng) < 0.3;
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(std::abs(roc_auc(s, y) - oracle::pairwise_auc(s, y)) < 1e-12);
        CHECK(std::abs(average_precision(s, y) - oracle::per_positive_ap(s, y)) < 1e-12);
    }
}

TEST_CASE("roc_auc is invariant under increasing transforms and complementary in labels") {
    std::mt19937_64 rng(405);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int rep = 0; rep < 200; ++rep) {
        Vec s(50);
        Labels y(50), flip(50);
        for (int k = 0; k < 50; ++k) {
            s[k] = std::round(u(rng) * 4) / 4;
            y[k] = u(rng) > 0;
            flip[k] = 1 - y[k];
        }
        y[0] = 1;
        y[1] = 0;
        flip[0] = 0;
        flip[1] = 1;
        Vec t(50);
        for (int k = 0; k < 50; ++k) t[k] = std::exp(2 * s[k]) + 5;
        CHECK(roc_auc(s, y) == roc_auc(t, y));
        CHECK(std::abs(roc_auc(s, y) + roc_auc(s, flip) - 1.0) < 1e-12);
    }
}

TEST_CASE("AP equals the prevalence for constant scores") {
    std::mt19937_64 rng(407);
    std::bernoulli_distribution coin(0.35);
    for (int rep = 0; rep < 200; ++rep) {
        Labels y(30);
        int pos = 0;
        for (int& v : y) pos += v = coin(rng);
        if (pos == 0) continue;
        CHECK(std::abs(average_precision(Vec(30, 0.25), y) - pos / 30.0) < 1e-15);
    }
}

TEST_CASE("a positive ranked first does not guarantee AP above the prevalence") {
    // One positive on top and fifteen at the bottom of thirty items.
    Vec s(30);
    Labels y(30, 0);
    for (int k = 0; k < 30; ++k) s[k] = 30.0 - k;
    y[0] = 1;
    for (int k = 15; k < 30; ++k) y[k] = 1;
    const double ap = average_precision(s, y);
    CHECK(ap == doctest::Approx(oracle::stable_walk_ap(s, y)).epsilon(1e-14));
    CHECK(ap < 16.0 / 30.0);
}

TEST_CASE("brier and prediction_kl ranges") {
    std::mt19937_64 rng(409);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 200; ++rep) {
        Vec p(20), q(20);
        Labels y(20);
        for (int k = 0; k < 20; ++k) {
            p[k] = u(rng);
            q[k] = u(rng);
            y[k] = u(rng) < 0.5;
        }
        const double b = brier(p, y);
        CHECK(b >= 0.0);
        CHECK(b <= 1.0);
        CHECK(prediction_kl(p, q) > 0.0);
        CHECK(prediction_kl(p, p) == 0.0);
    }
    // Values that coincide after clipping give zero.
    CHECK(prediction_kl(Vec{0.0, 1.0}, Vec{1e-9, 1.0 - 1e-9}) == 0.0);
}

TEST_CASE("evaluate flattens series and derives anomalous videos from labels") {
    const std::vector<ScoreSeries> series{{"a", {0.9, 0.2}, {1, 0}, std::nullopt},
                                          {"b", {0.3, 0.1}, {0, 0}, std::nullopt},
                                          {"c", {0.7, 0.4}, {1, 0}, true}};
    const auto r = evaluate(series);
    const Vec s{0.9, 0.2, 0.3, 0.1, 0.7, 0.4};
    const Labels y{1, 0, 0, 0, 1, 0};
    CHECK(r.auc == oracle::pairwise_auc(s, y));
    CHECK(r.ap == oracle::per_positive_ap(s, y));
    REQUIRE(r.ano_auc.has_value());
    CHECK(*r.ano_auc == oracle::pairwise_auc({0.9, 0.2, 0.7, 0.4}, {1, 0, 1, 0}));
    CHECK(r.pred_kl == 0.0);
    CHECK(evaluate(series, &series).pred_kl == 0.0);
    const std::vector<ScoreSeries> normal_only{{"a", {0.9, 0.2}, {1, 0}, false}, {"b", {0.3}, {0}, false}};
    CHECK_FALSE(evaluate(normal_only).ano_auc.has_value());
}
