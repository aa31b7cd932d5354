#pragma once

#include "evfuse/core.hpp"

namespace evfuse::noise {

/// log sigma~^2: unchanged for Gaussian, shifted by ln(nu/(nu+1)) for Student-t.
double effective_log_variance(double log_var, const NoiseModel& model);

/// Laplace-approximated variance, sigma^2 * nu/(nu+1) for Student-t.
double effective_variance(double sigma2, const NoiseModel& model);

// Negative log-likelihood of a residual, additive constants dropped.
double neg_log_likelihood(double delta, double sigma2, const NoiseModel& model);

// d/d(delta) of neg_log_likelihood.
double score(double delta, double sigma2, const NoiseModel& model);

/// Supremum of |score| for Student-t, (nu+1)/(2 sigma sqrt(nu)), reached at
/// |delta| = sigma sqrt(nu). Gaussian has no finite peak and throws.
double score_peak(double sigma2, const NoiseModel& model);

}  // namespace evfuse::noise
