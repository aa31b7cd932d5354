#include "evfuse/noise.hpp"

#include <cmath>

namespace evfuse::noise {

namespace {

void require_positive(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw Error(ErrorCode::NonPositiveVariance, "variance must be positive and finite, got " +
                                                        std::to_string(sigma2));
    }
}

}  // namespace

double effective_log_variance(double log_var, const NoiseModel& model) {
    if (model.kind == NoiseKind::Gaussian) return log_var;
    return log_var + std::log(model.nu / (model.nu + 1.0));
}

double effective_variance(double sigma2, const NoiseModel& model) {
    require_positive(sigma2);
    return sigma2 * model.variance_factor();
}

double neg_log_likelihood(double delta, double sigma2, const NoiseModel& model) {
    require_positive(sigma2);
    if (model.kind == NoiseKind::Gaussian) return delta * delta / (2.0 * sigma2);
    return 0.5 * (model.nu + 1.0) * std::log1p(delta * delta / (model.nu * sigma2));
}

double score(double delta, double sigma2, const NoiseModel& model) {
    require_positive(sigma2);
    if (model.kind == NoiseKind::Gaussian) return delta / sigma2;
    return (model.nu + 1.0) * delta / (model.nu * sigma2 + delta * delta);
}

double score_peak(double sigma2, const NoiseModel& model) {
    require_positive(sigma2);
    if (model.kind == NoiseKind::Gaussian) {
        throw Error(ErrorCode::InvalidConfig, "Gaussian score is unbounded");
    }
    return (model.nu + 1.0) / (2.0 * std::sqrt(sigma2) * std::sqrt(model.nu));
}

}  // namespace evfuse::noise
