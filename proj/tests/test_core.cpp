#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "evfuse/core.hpp"
#include "oracles.hpp"

using namespace evfuse;

namespace {

EmbeddingSequence seq_of(Shape s, std::vector<double> v) { return {Tensor3(s, std::move(v)), Modality::Other}; }

}  // namespace

TEST_CASE("validate_sequence accepts all zeros") {
    const auto s = seq_of({1, 1, 4}, {0, 0, 0, 0});
    CHECK(validate_sequence(s) == s);
}

TEST_CASE("validate_sequence rejects NaN and reports the index") {
    auto s = seq_of({1, 2, 2}, {0, 0, 0, 0});
    s.values.data[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK(oracle::error_code([&] { validate_sequence(s); }) == ErrorCode::NonFiniteValue);
    try {
        validate_sequence(s);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find('3') != std::string::npos);
    }
    s.values.data[3] = std::numeric_limits<double>::infinity();
    CHECK(oracle::error_code([&] { validate_sequence(s); }) == ErrorCode::NonFiniteValue);
}

TEST_CASE("validate_sequence rejects a length that is not B*T*D") {
    auto s = seq_of({1, 2, 2}, {0, 0, 0, 0});
    s.values.data.push_back(1.0);
    CHECK(oracle::error_code([&] { validate_sequence(s); }) == ErrorCode::ShapeMismatch);
    CHECK(oracle::error_code([] { Tensor3({2, 2, 2}, std::vector<double>(7, 0.0)); }) == ErrorCode::ShapeMismatch);
    CHECK(oracle::error_code([] { validate_sequence(EmbeddingSequence{Tensor3({0, 1, 1}), Modality::Image}); }) ==
          ErrorCode::ShapeMismatch);
}

TEST_CASE("validate_sequence is idempotent") {
    std::mt19937_64 rng(3);
    const EmbeddingSequence s{oracle::random_tensor({2, 3, 4}, rng), Modality::Event};
    const auto& once = validate_sequence(s);
    const auto& twice = validate_sequence(once);
    CHECK(twice == s);
}

TEST_CASE("layer_normalize examples") {
    const auto c = layer_normalize(seq_of({1, 1, 4}, {3.5, 3.5, 3.5, 3.5}));
    for (double v : c.values.data) CHECK(v == 0.0);

    const auto id = layer_normalize(seq_of({1, 1, 2}, {1, -1}));
    CHECK(id.values.data[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(id.values.data[1] == doctest::Approx(-1.0).epsilon(1e-12));

    const auto h = layer_normalize(seq_of({1, 1, 2}, {0, 2}));
    CHECK(h.values.data[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(h.values.data[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("layer_normalize gives zero mean and unit std per slice") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t d = 2 + rep % 17;
        Tensor3 t = oracle::random_tensor({3, 4, d}, rng, -5, 5);
        const double sc = scale(rng);
        for (double& v : t.data) v *= sc;
        const auto out = layer_normalize({t, Modality::Image});
        CHECK(out.modality == Modality::Image);
        for (std::size_t b = 0; b < 3; ++b) {
            for (std::size_t s = 0; s < 4; ++s) {
                auto x = out.values.slice(b, s);
                double mean = 0.0;
                for (double v : x) mean += v;
                mean /= static_cast<double>(d);
                double var = 0.0;
                for (double v : x) var += (v - mean) * (v - mean);
                const double sd = std::sqrt(var / static_cast<double>(d));
                CHECK(std::abs(mean) < 1e-9);
                CHECK(std::abs(sd - 1.0) < 1e-6);
            }
        }
    }
}

TEST_CASE("layer_normalize rejects non-finite input") {
    auto s = seq_of({1, 1, 3}, {1, 2, std::nan("")});
    CHECK(oracle::error_code([&] { layer_normalize(s); }) == ErrorCode::NonFiniteValue);
}

TEST_CASE("FusionConfig defaults") {
    const FusionConfig cfg;
    CHECK(cfg.nu == 8.0);
    CHECK(cfg.refine_steps == 10);
    CHECK(cfg.refine_lambda == 0.5);
    CHECK(cfg.epsilon == 1e-8);
    CHECK(cfg.reg_lambda1 == 0.5);
    CHECK(cfg.reg_lambda2 == 0.5);
    CHECK(cfg.segment_len == 16);
    CHECK(cfg.noise_model == NoiseKind::StudentT);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("FusionConfig validation") {
    auto bad = [](auto mutate) {
        FusionConfig cfg;
        mutate(cfg);
        return oracle::error_code([&] { cfg.validate(); });
    };
    CHECK(bad([](FusionConfig& c) { c.refine_lambda = 0.0; }) == ErrorCode::InvalidConfig);
    CHECK(bad([](FusionConfig& c) { c.refine_lambda = 1.0; }) == ErrorCode::InvalidConfig);
    CHECK(bad([](FusionConfig& c) { c.nu = 0.0; }) == ErrorCode::InvalidConfig);
    CHECK(bad([](FusionConfig& c) { c.epsilon = 0.0; }) == ErrorCode::InvalidConfig);
    CHECK(bad([](FusionConfig& c) { c.reg_lambda1 = -0.1; }) == ErrorCode::InvalidConfig);
    CHECK(bad([](FusionConfig& c) { c.segment_len = 0; }) == ErrorCode::InvalidConfig);
    FusionConfig g;
    g.noise_model = NoiseKind::Gaussian;
    g.nu = -1.0;  // unused by the Gaussian model
    CHECK_NOTHROW(g.validate());
}

TEST_CASE("string round trips") {
    for (auto m : {Modality::Image, Modality::Event, Modality::Other}) CHECK(modality_from_string(to_string(m)) == m);
    for (auto k : {NoiseKind::Gaussian, NoiseKind::StudentT}) CHECK(noise_kind_from_string(to_string(k)) == k);
    CHECK(modality_from_string("radar") == Modality::Other);
}

TEST_CASE("validate_scores") {
    CHECK_NOTHROW(validate_scores({"v", {0.0, 0.5, 1.0}, {0, 1, 1}, std::nullopt}));
    CHECK(oracle::error_code([] { validate_scores({"v", {1.5}, {1}, std::nullopt}); }) == ErrorCode::NonFiniteValue);
    CHECK(oracle::error_code([] { validate_scores({"v", {0.5}, {2}, std::nullopt}); }) == ErrorCode::DegenerateLabels);
    CHECK(oracle::error_code([] { validate_scores({"v", {0.5, 0.2, 0.1}, {1, 0}, std::nullopt}); }) == ErrorCode::ShapeMismatch);
    CHECK_NOTHROW(validate_scores({"v", {0.5, 0.2}, {1}, std::nullopt}));
}
