#include "evfuse/refine.hpp"

#include <algorithm>
#include <cmath>

namespace evfuse::refine {

namespace {

void require_finite(const std::vector<double>& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, std::string(what) + " is not finite");
    }
}

void require_size(const std::vector<double>& v, std::size_t n, const char* what) {
    if (v.size() != n) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected " + std::to_string(n) +
                                                  " values, got " + std::to_string(v.size()));
    }
}

}  // namespace

AffineEstimator::AffineEstimator(std::size_t dim, std::vector<double> weight, std::vector<double> bias)
    : dim_(dim), weight_(std::move(weight)), bias_(std::move(bias)) {
    require_size(weight_, dim_ * dim_, "affine weight");
    require_size(bias_, dim_, "affine bias");
    require_finite(weight_, "affine weight");
    require_finite(bias_, "affine bias");
}

AffineEstimator AffineEstimator::zero(std::size_t dim) {
    return {dim, std::vector<double>(dim * dim, 0.0), std::vector<double>(dim, 0.0)};
}

AffineEstimator AffineEstimator::identity(std::size_t dim) {
    std::vector<double> w(dim * dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) w[j * dim + j] = 1.0;
    return {dim, std::move(w), std::vector<double>(dim, 0.0)};
}

Tensor3 AffineEstimator::residual(const Tensor3& latent, const RefineContext&) const {
    if (latent.shape.dim != dim_) {
        throw Error(ErrorCode::ShapeMismatch, "affine estimator of dim " + std::to_string(dim_) +
                                                  " applied to " + to_string(latent.shape));
    }
    Tensor3 out(latent.shape);
    for (std::size_t b = 0; b < latent.shape.batch; ++b) {
        for (std::size_t t = 0; t < latent.shape.steps; ++t) {
            auto x = latent.slice(b, t);
            auto y = out.slice(b, t);
            for (std::size_t j = 0; j < dim_; ++j) {
                double acc = bias_[j];
                const double* row = weight_.data() + j * dim_;
                for (std::size_t k = 0; k < dim_; ++k) acc += row[k] * x[k];
                y[j] = acc;
            }
        }
    }
    return out;
}

MlpEstimator::MlpEstimator(std::size_t dim, std::size_t hidden, std::vector<double> w1,
                           std::vector<double> b1, std::vector<double> w2, std::vector<double> b2)
    : dim_(dim), hidden_(hidden), w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)),
      b2_(std::move(b2)) {
    require_size(w1_, hidden_ * dim_, "mlp w1");
    require_size(b1_, hidden_, "mlp b1");
    require_size(w2_, dim_ * hidden_, "mlp w2");
    require_size(b2_, dim_, "mlp b2");
    for (const auto* v : {&w1_, &b1_, &w2_, &b2_}) require_finite(*v, "mlp parameter");
}

Tensor3 MlpEstimator::residual(const Tensor3& latent, const RefineContext&) const {
    if (latent.shape.dim != dim_) {
        throw Error(ErrorCode::ShapeMismatch, "mlp estimator dim mismatch: " + to_string(latent.shape));
    }
    Tensor3 out(latent.shape);
    std::vector<double> h(hidden_);
    for (std::size_t b = 0; b < latent.shape.batch; ++b) {
        for (std::size_t t = 0; t < latent.shape.steps; ++t) {
            auto x = latent.slice(b, t);
            auto y = out.slice(b, t);
            for (std::size_t u = 0; u < hidden_; ++u) {
                double acc = b1_[u];
                for (std::size_t k = 0; k < dim_; ++k) acc += w1_[u * dim_ + k] * x[k];
                h[u] = std::max(0.0, acc);
            }
            for (std::size_t j = 0; j < dim_; ++j) {
                double acc = b2_[j];
                for (std::size_t u = 0; u < hidden_; ++u) acc += w2_[j * hidden_ + u] * h[u];
                y[j] = acc;
            }
        }
    }
    return out;
}

AffineEstimator make_affine_estimator(std::size_t dim, std::vector<double> weight,
                                      std::vector<double> bias) {
    return {dim, std::move(weight), std::move(bias)};
}

RefineResult refine(const FusedTrajectory& state0, const ResidualEstimator& estimator,
                    const FusionConfig& cfg, std::span<const double> lambda_schedule) {
    const std::size_t steps = cfg.refine_steps;
    if (!lambda_schedule.empty() && lambda_schedule.size() != steps) {
        throw Error(ErrorCode::InvalidConfig, "lambda schedule length must equal refine_steps");
    }
    auto check_lambda = [](double l) {
        if (!(l > 0.0 && l < 1.0)) throw Error(ErrorCode::InvalidConfig, "refine lambda must lie in (0,1)");
    };
    if (lambda_schedule.empty()) {
        check_lambda(cfg.refine_lambda);
    } else {
        std::for_each(lambda_schedule.begin(), lambda_schedule.end(), check_lambda);
    }

    RefineResult result{state0, {}};
    result.residual_norms.reserve(steps);
    Tensor3& mu = result.trajectory.mean;
    for (std::size_t r = 0; r < steps; ++r) {
        const RefineContext ctx{r, &result.trajectory.variance};
        const Tensor3 delta = estimator.residual(mu, ctx);
        require_same_shape(mu.shape, delta.shape, "residual estimator output");
        const double lambda = lambda_schedule.empty() ? cfg.refine_lambda : lambda_schedule[r];
        double sq = 0.0;
        for (std::size_t k = 0; k < mu.data.size(); ++k) {
            sq += delta.data[k] * delta.data[k];
            mu.data[k] -= lambda * delta.data[k];
        }
        result.residual_norms.push_back(std::sqrt(sq));
    }
    return result;
}

}  // namespace evfuse::refine
