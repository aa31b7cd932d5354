#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "evfuse/gradients.hpp"
#include "evfuse/pipeline.hpp"
#include "oracles.hpp"

using namespace evfuse;
using namespace evfuse::gradients;

namespace {

LossFixture random_fixture(std::mt19937_64& rng, std::size_t b, std::size_t t, std::size_t d, bool step_labels) {
    LossFixture fx{{oracle::random_tensor({b, t, d}, rng, -2, 2), Modality::Image},
                   {oracle::random_tensor({b, t, d}, rng, -2, 2), Modality::Event},
                   {}};
    std::bernoulli_distribution coin(0.5);
    fx.labels.resize(step_labels ? b * t : b);
    for (int& y : fx.labels) y = coin(rng);
    return fx;
}

ModelParams random_params(std::mt19937_64& rng, std::size_t d, double scale) {
    ModelParams p = ModelParams::zeros(d);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& np : parameters(p)) *np.value = u(rng);
    return p;
}

struct Variant {
    PipelineMode mode;
    TrajectoryMode trajectory;
    bool layer_norm;
    NoiseKind noise;
    bool step_labels;
};

void check_against_finite_differences(const LossFixture& fx, ModelParams params, const PipelineOptions& opt,
                                      const std::string& label) {
    const auto analytic = loss_gradients(fx, params, opt);
    ModelParams grad = analytic.grad;
    auto gp = parameters(grad);
    auto pp = parameters(params);
    REQUIRE(gp.size() == pp.size());
    const double h = 1e-5;
    for (std::size_t k = 0; k < pp.size(); ++k) {
        const double keep = *pp[k].value;
        *pp[k].value = keep + h;
        const double up = evaluate_loss(fx, params, opt).total;
        *pp[k].value = keep - h;
        const double down = evaluate_loss(fx, params, opt).total;
        *pp[k].value = keep;
        const double fd = (up - down) / (2 * h);
        const double g = *gp[k].value;
        const bool ok = std::abs(g) < 1e-3 ? std::abs(g - fd) <= 1e-7 || oracle::close_rel(g, fd, 1e-4, 0.0)
                                           : oracle::close_rel(g, fd, 1e-4, 0.0);
        INFO(label << " " << pp[k].name << " analytic=" << g << " fd=" << fd);
        CHECK(ok);
    }
}

}  // namespace

TEST_CASE("parameter names cover every trainable scalar") {
    ModelParams p = ModelParams::zeros(3);
    const auto ps = parameters(p);
    CHECK(ps.size() == 2 * (2 * 9 + 2 * 3) + 3 + 1 + 9 + 3);
    std::size_t cls = 0, ref = 0, img = 0, evt = 0;
    for (const auto& np : ps) {
        cls += np.name.rfind("classifier.", 0) == 0;
        ref += np.name.rfind("refiner.", 0) == 0;
        img += np.name.rfind("image.", 0) == 0;
        evt += np.name.rfind("event.", 0) == 0;
    }
    CHECK(cls == 4);
    CHECK(ref == 12);
    CHECK(img == 24);
    CHECK(evt == 24);
}

TEST_CASE("analytic gradients match central finite differences") {
    std::mt19937_64 rng(101);
    const Variant variants[] = {
        {PipelineMode::Fused, TrajectoryMode::Smoothed, true, NoiseKind::StudentT, false},
        {PipelineMode::Fused, TrajectoryMode::PerStep, true, NoiseKind::StudentT, true},
        {PipelineMode::Fused, TrajectoryMode::Smoothed, false, NoiseKind::Gaussian, true},
        {PipelineMode::ImageOnly, TrajectoryMode::Smoothed, true, NoiseKind::StudentT, false},
        {PipelineMode::EventOnly, TrajectoryMode::PerStep, false, NoiseKind::StudentT, false},
    };
    int idx = 0;
    for (const auto& v : variants) {
        PipelineOptions opt;
        opt.mode = v.mode;
        opt.trajectory = v.trajectory;
        opt.layer_norm = v.layer_norm;
        opt.config.noise_model = v.noise;
        opt.config.refine_steps = 4;
        const auto fx = random_fixture(rng, 2, 20, 3, v.step_labels);
        check_against_finite_differences(fx, random_params(rng, 3, 0.4), opt, "variant " + std::to_string(idx++));
    }
}

TEST_CASE("gradients with the default ten refinement steps") {
    std::mt19937_64 rng(103);
    const auto fx = random_fixture(rng, 3, 17, 4, false);
    check_against_finite_differences(fx, random_params(rng, 4, 0.3), PipelineOptions{}, "defaults");
}

TEST_CASE("zero-input fixture gives the closed-form classifier bias gradient") {
    const std::size_t b = 3, t = 40, d = 2;
    LossFixture fx{{Tensor3({b, t, d}), Modality::Image}, {Tensor3({b, t, d}), Modality::Event}, {1, 0, 1}};
    ModelParams p = ModelParams::zeros(d);
    p.heads.classifier_bias = 0.7;
    const auto r = loss_gradients(fx, p, PipelineOptions{});
    // Each video has 3 segments of constant probability sigmoid(b).
    const double s = oracle::sigmoid(0.7);
    const double expected = ((s - 1) * 3 + s * 3 + (s - 1) * 3) / 9.0;
    CHECK(r.grad.heads.classifier_bias == doctest::Approx(expected).epsilon(1e-12));
    for (double g : r.grad.heads.classifier_weight) CHECK(g == 0.0);
}

TEST_CASE("evaluate_loss agrees with the pipeline and the loss functions") {
    std::mt19937_64 rng(107);
    for (int rep = 0; rep < 6; ++rep) {
        const auto fx = random_fixture(rng, 2, 33, 5, rep % 2 == 1);
        const auto params = random_params(rng, 5, 0.3);
        PipelineOptions opt;
        opt.trajectory = rep % 3 == 0 ? TrajectoryMode::PerStep : TrajectoryMode::Smoothed;
        const auto got = evaluate_loss(fx, params, opt);

        const FusionPipeline pipe(opt, params.heads,
                                  std::make_shared<refine::AffineEstimator>(params.refiner));
        const auto out = pipe.run(fx.image, fx.event);
        const auto model = opt.config.noise();
        const double cls = losses::bce_segmented(out.logits, fx.labels, opt.config.segment_len).loss;
        const double kx = losses::kl_to_standard_normal(out.image, model);
        const double ke = losses::kl_to_standard_normal(out.event, model);
        const double reg =
            losses::reg_loss(out.image.mean, out.event.mean, opt.config.reg_lambda1, opt.config.reg_lambda2).loss;
        CHECK(got.cls == doctest::Approx(cls).epsilon(1e-12));
        CHECK(got.kl_image == doctest::Approx(kx).epsilon(1e-12));
        CHECK(got.kl_event == doctest::Approx(ke).epsilon(1e-12));
        CHECK(got.reg == doctest::Approx(reg).epsilon(1e-12));
        CHECK(got.total == doctest::Approx(losses::total_loss({cls, {kx, ke}, reg})).epsilon(1e-12));
    }
}

TEST_CASE("zero regularizer weights remove the regularizer") {
    std::mt19937_64 rng(109);
    const auto fx = random_fixture(rng, 2, 16, 3, false);
    PipelineOptions opt;
    opt.config.reg_lambda1 = 0.0;
    opt.config.reg_lambda2 = 0.0;
    opt.config.refine_steps = 2;
    const auto params = random_params(rng, 3, 0.3);
    CHECK(evaluate_loss(fx, params, opt).reg == 0.0);
    check_against_finite_differences(fx, params, opt, "no reg");
}

TEST_CASE("single-modality modes drop the absent KL and the regularizer") {
    std::mt19937_64 rng(113);
    const auto fx = random_fixture(rng, 2, 16, 3, false);
    const auto params = random_params(rng, 3, 0.3);
    PipelineOptions opt;
    opt.mode = PipelineMode::ImageOnly;
    const auto a = evaluate_loss(fx, params, opt);
    CHECK(a.kl_event == 0.0);
    CHECK(a.reg == 0.0);
    CHECK(a.kl_image > 0.0);
    opt.mode = PipelineMode::EventOnly;
    const auto b = evaluate_loss(fx, params, opt);
    CHECK(b.kl_image == 0.0);
    CHECK(b.reg == 0.0);
    CHECK(b.kl_event > 0.0);
}

TEST_CASE("dimension mismatch is reported") {
    std::mt19937_64 rng(127);
    const auto fx = random_fixture(rng, 1, 4, 3, false);
    CHECK(oracle::error_code([&] { evaluate_loss(fx, ModelParams::zeros(2), PipelineOptions{}); }) ==
          ErrorCode::ShapeMismatch);
}
