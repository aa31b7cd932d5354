#include "evfuse/temporal.hpp"

#include <cmath>

#include "evfuse/fusion.hpp"

namespace evfuse::temporal {

FusedTrajectory sequential_update(const Tensor3& mean, const Tensor3& effective_variance,
                                  double epsilon) {
    require_same_shape(mean.shape, effective_variance.shape, "sequential update inputs");
    validate_tensor(mean, "observation mean");
    validate_tensor(effective_variance, "observation variance");
    if (mean.shape.steps == 0) throw Error(ErrorCode::EmptyInput, "sequence has no time steps");
    if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be >= 0");
    for (double v : effective_variance.data) {
        if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveVariance, "observation variance must be > 0");
    }

    const Shape s = mean.shape;
    FusedTrajectory out{Tensor3(s), Tensor3(s), {Tensor3(s), Tensor3(s)}};
    Tensor3& w_state = out.weights[0];
    Tensor3& w_obs = out.weights[1];

    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t i = 0; i < s.dim; ++i) {
            double m = mean.at(b, 0, i);
            double v = effective_variance.at(b, 0, i);
            out.mean.at(b, 0, i) = m;
            out.variance.at(b, 0, i) = v;
            w_obs.at(b, 0, i) = 1.0 / (v + epsilon);
            for (std::size_t t = 1; t < s.steps; ++t) {
                const double a = 1.0 / (v + epsilon);
                const double c = 1.0 / (effective_variance.at(b, t, i) + epsilon);
                m = (a * m + c * mean.at(b, t, i)) / (a + c);
                v = 1.0 / (a + c);
                out.mean.at(b, t, i) = m;
                out.variance.at(b, t, i) = v;
                w_state.at(b, t, i) = a;
                w_obs.at(b, t, i) = c;
            }
        }
    }
    return out;
}

FusedTrajectory sequential_update(const UncertainEstimate& obs, const FusionConfig& cfg) {
    return sequential_update(obs.mean, fusion::effective_variances(obs, cfg.noise()), cfg.epsilon);
}

TemporalState final_state(const FusedTrajectory& trajectory) {
    const Shape& s = trajectory.shape();
    TemporalState st{s.batch, s.dim, {}, {}, s.steps};
    st.mean.reserve(s.batch * s.dim);
    st.variance.reserve(s.batch * s.dim);
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t i = 0; i < s.dim; ++i) {
            st.mean.push_back(trajectory.mean.at(b, s.steps - 1, i));
            st.variance.push_back(trajectory.variance.at(b, s.steps - 1, i));
        }
    }
    return st;
}

}  // namespace evfuse::temporal
