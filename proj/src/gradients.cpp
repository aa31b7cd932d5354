#include "evfuse/gradients.hpp"

#include <algorithm>
#include <cmath>

#include "evfuse/fusion.hpp"
#include "evfuse/temporal.hpp"

namespace evfuse::gradients {

namespace {

using losses::ProjectionHeads;

// Forward intermediates kept for the backward pass. Flat (B,T,D) arrays.
struct Tape {
    Shape shape;
    bool use_image = true;
    bool use_event = true;
    Tensor3 z_image, z_event;
    Tensor3 mean_image, mean_event;
    Tensor3 var_image, var_event;  // effective variances
    Tensor3 w_image, w_event;
    Tensor3 step_mean, step_var;  // per-step fusion
    Tensor3 state_mean, state_var;  // after sequential update
    std::vector<Tensor3> refine_states;  // x^0 .. x^N
    std::vector<double> logits;          // B*T
    std::vector<double> probs;           // B*T
    std::vector<losses::Segment> segs;
    std::vector<std::vector<int>> seg_labels;
    std::vector<std::vector<double>> seg_probs;
    std::size_t seg_count = 0;
    LossBreakdown loss;
};

void affine(const Tensor3& in, const std::vector<double>& w, const std::vector<double>& bias, Tensor3& out) {
    const std::size_t d = in.shape.dim;
    for (std::size_t s = 0; s < in.shape.slices(); ++s) {
        const double* x = in.data.data() + s * d;
        double* y = out.data.data() + s * d;
        for (std::size_t j = 0; j < d; ++j) {
            double acc = bias[j];
            for (std::size_t k = 0; k < d; ++k) acc += w[j * d + k] * x[k];
            y[j] = acc;
        }
    }
}

// Accumulates dW += g x^T and db += g over every slice.
void affine_backward(const Tensor3& in, const Tensor3& grad_out, std::vector<double>& dw,
                     std::vector<double>& db) {
    const std::size_t d = in.shape.dim;
    for (std::size_t s = 0; s < in.shape.slices(); ++s) {
        const double* x = in.data.data() + s * d;
        const double* g = grad_out.data.data() + s * d;
        for (std::size_t j = 0; j < d; ++j) {
            db[j] += g[j];
            for (std::size_t k = 0; k < d; ++k) dw[j * d + k] += g[j] * x[k];
        }
    }
}

Tape forward(const LossFixture& fx, const ModelParams& params, const PipelineOptions& opt) {
    const FusionConfig& cfg = opt.config;
    const double factor = cfg.noise().variance_factor();
    const double eps = cfg.epsilon;
    params.heads.validate();
    validate_sequence(fx.image);
    validate_sequence(fx.event);
    require_same_shape(fx.image.shape(), fx.event.shape(), "fixture modalities");
    if (params.refiner.dim() != params.heads.dim() || fx.image.shape().dim != params.heads.dim()) {
        throw Error(ErrorCode::ShapeMismatch, "parameter dims do not match the fixture");
    }

    Tape tp;
    tp.shape = fx.image.shape();
    tp.use_image = opt.mode != PipelineMode::EventOnly;
    tp.use_event = opt.mode != PipelineMode::ImageOnly;
    const Shape s = tp.shape;
    const std::size_t n = s.size();

    tp.z_image = opt.layer_norm ? layer_normalize(fx.image).values : fx.image.values;
    tp.z_event = opt.layer_norm ? layer_normalize(fx.event).values : fx.event.values;

    auto heads_forward = [&](const Tensor3& z, const ProjectionHeads& h, Tensor3& mean, Tensor3& var,
                             Tensor3& w) {
        mean = Tensor3(s);
        Tensor3 logvar(s);
        affine(z, h.mean_weight, h.mean_bias, mean);
        affine(z, h.logvar_weight, h.logvar_bias, logvar);
        var = Tensor3(s);
        w = Tensor3(s);
        for (std::size_t k = 0; k < n; ++k) {
            var.data[k] = factor * std::exp(logvar.data[k]);
            w.data[k] = 1.0 / (var.data[k] + eps);
        }
    };
    heads_forward(tp.z_image, params.heads.image, tp.mean_image, tp.var_image, tp.w_image);
    heads_forward(tp.z_event, params.heads.event, tp.mean_event, tp.var_event, tp.w_event);

    std::vector<Tensor3> means, weights;
    if (tp.use_image) {
        means.push_back(tp.mean_image);
        weights.push_back(tp.w_image);
    }
    if (tp.use_event) {
        means.push_back(tp.mean_event);
        weights.push_back(tp.w_event);
    }
    FusedTrajectory step = fusion::fuse_weighted(means, weights);
    tp.step_mean = std::move(step.mean);
    tp.step_var = std::move(step.variance);

    if (opt.trajectory == TrajectoryMode::Smoothed) {
        FusedTrajectory state = temporal::sequential_update(tp.step_mean, tp.step_var, eps);
        tp.state_mean = std::move(state.mean);
        tp.state_var = std::move(state.variance);
    } else {
        tp.state_mean = tp.step_mean;
        tp.state_var = tp.step_var;
    }

    const auto& A = params.refiner.weight();
    const auto& beta = params.refiner.bias();
    const double lambda = cfg.refine_lambda;
    tp.refine_states.reserve(cfg.refine_steps + 1);
    tp.refine_states.push_back(tp.state_mean);
    for (std::size_t r = 0; r < cfg.refine_steps; ++r) {
        const Tensor3& x = tp.refine_states.back();
        Tensor3 delta(s);
        affine(x, A, beta, delta);
        Tensor3 next = x;
        for (std::size_t k = 0; k < n; ++k) next.data[k] -= lambda * delta.data[k];
        tp.refine_states.push_back(std::move(next));
    }

    const Tensor3& xn = tp.refine_states.back();
    const auto& u = params.heads.classifier_weight;
    tp.logits.resize(s.slices());
    tp.probs.resize(s.slices());
    for (std::size_t sl = 0; sl < s.slices(); ++sl) {
        double z = params.heads.classifier_bias;
        for (std::size_t i = 0; i < s.dim; ++i) z += u[i] * xn.data[sl * s.dim + i];
        tp.logits[sl] = z;
        tp.probs[sl] = losses::sigmoid(z);
    }

    tp.segs = losses::segments(s.steps, cfg.segment_len);
    tp.seg_labels = losses::segment_labels(fx.labels, s.batch, s.steps, cfg.segment_len);
    tp.seg_probs.assign(s.batch, {});
    double cls = 0.0;
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t k = 0; k < tp.segs.size(); ++k) {
            double p = 0.0;
            for (std::size_t t = tp.segs[k].begin; t < tp.segs[k].end; ++t) p += tp.probs[b * s.steps + t];
            p /= static_cast<double>(tp.segs[k].end - tp.segs[k].begin);
            tp.seg_probs[b].push_back(p);
            const double pc = std::clamp(p, losses::kProbabilityFloor, 1.0 - losses::kProbabilityFloor);
            cls += tp.seg_labels[b][k] == 1 ? -std::log(pc) : -std::log1p(-pc);
        }
    }
    tp.seg_count = s.batch * tp.segs.size();
    tp.loss.cls = cls / static_cast<double>(tp.seg_count);

    auto kl = [&](const Tensor3& mean, const Tensor3& var) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += losses::kl_closed_form(mean.data[k], var.data[k]);
        return acc / static_cast<double>(n);
    };
    tp.loss.kl_image = tp.use_image ? kl(tp.mean_image, tp.var_image) : 0.0;
    tp.loss.kl_event = tp.use_event ? kl(tp.mean_event, tp.var_event) : 0.0;
    if (tp.use_image && tp.use_event) {
        tp.loss.reg = losses::reg_loss(tp.mean_image, tp.mean_event, cfg.reg_lambda1, cfg.reg_lambda2).loss;
    }
    tp.loss.total = losses::total_loss({tp.loss.cls, {tp.loss.kl_image, tp.loss.kl_event}, tp.loss.reg});
    return tp;
}

}  // namespace

ModelParams ModelParams::zeros(std::size_t dim) {
    return {losses::LinearHeads::zeros(dim), refine::AffineEstimator::zero(dim)};
}

LossBreakdown evaluate_loss(const LossFixture& fixture, const ModelParams& params,
                            const PipelineOptions& options) {
    return forward(fixture, params, options).loss;
}

GradientResult loss_gradients(const LossFixture& fixture, const ModelParams& params,
                              const PipelineOptions& options) {
    const Tape tp = forward(fixture, params, options);
    const FusionConfig& cfg = options.config;
    const double eps = cfg.epsilon;
    const Shape s = tp.shape;
    const std::size_t n = s.size();
    const std::size_t d = s.dim;

    GradientResult res{tp.loss, ModelParams::zeros(d)};
    auto& g = res.grad;

    // Classifier and BCE.
    std::vector<double> g_logit(s.slices(), 0.0);
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t k = 0; k < tp.segs.size(); ++k) {
            const double p = tp.seg_probs[b][k];
            if (p <= losses::kProbabilityFloor || p >= 1.0 - losses::kProbabilityFloor) continue;
            const int y = tp.seg_labels[b][k];
            const double dp = (y == 1 ? -1.0 / p : 1.0 / (1.0 - p)) / static_cast<double>(tp.seg_count);
            const double len = static_cast<double>(tp.segs[k].end - tp.segs[k].begin);
            for (std::size_t t = tp.segs[k].begin; t < tp.segs[k].end; ++t) {
                const double q = tp.probs[b * s.steps + t];
                g_logit[b * s.steps + t] += dp * q * (1.0 - q) / len;
            }
        }
    }
    const Tensor3& xn = tp.refine_states.back();
    const auto& u = params.heads.classifier_weight;
    Tensor3 gx(s);
    for (std::size_t sl = 0; sl < s.slices(); ++sl) {
        g.heads.classifier_bias += g_logit[sl];
        for (std::size_t i = 0; i < d; ++i) {
            g.heads.classifier_weight[i] += g_logit[sl] * xn.data[sl * d + i];
            gx.data[sl * d + i] = g_logit[sl] * u[i];
        }
    }

    // Refinement: x^{r+1} = x^r - lambda (A x^r + beta).
    const auto& A = params.refiner.weight();
    const double lambda = cfg.refine_lambda;
    auto& gA = g.refiner.weight();
    auto& gbeta = g.refiner.bias();
    for (std::size_t r = cfg.refine_steps; r-- > 0;) {
        const Tensor3& x = tp.refine_states[r];
        Tensor3 prev(s);
        for (std::size_t sl = 0; sl < s.slices(); ++sl) {
            const double* gn = gx.data.data() + sl * d;
            const double* xr = x.data.data() + sl * d;
            double* gp = prev.data.data() + sl * d;
            for (std::size_t j = 0; j < d; ++j) {
                gbeta[j] -= lambda * gn[j];
                for (std::size_t k = 0; k < d; ++k) gA[j * d + k] -= lambda * gn[j] * xr[k];
            }
            for (std::size_t k = 0; k < d; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += A[j * d + k] * gn[j];
                gp[k] = gn[k] - lambda * acc;
            }
        }
        gx = std::move(prev);
    }

    // Sequential update, reversed along t for every (b,i).
    Tensor3 g_step_mean(s), g_step_var(s);
    if (options.trajectory == TrajectoryMode::Smoothed) {
        for (std::size_t b = 0; b < s.batch; ++b) {
            for (std::size_t i = 0; i < d; ++i) {
                double gm_carry = 0.0, gv_carry = 0.0;
                for (std::size_t t = s.steps; t-- > 1;) {
                    const double gm = gx.at(b, t, i) + gm_carry;
                    const double gv = gv_carry;
                    const double a = 1.0 / (tp.state_var.at(b, t - 1, i) + eps);
                    const double c = 1.0 / (tp.step_var.at(b, t, i) + eps);
                    const double sum = a + c;
                    const double m = tp.state_mean.at(b, t, i);
                    const double v = tp.state_var.at(b, t, i);
                    const double ga = gm * (tp.state_mean.at(b, t - 1, i) - m) / sum - gv * v * v;
                    const double gc = gm * (tp.step_mean.at(b, t, i) - m) / sum - gv * v * v;
                    g_step_mean.at(b, t, i) += gm * c / sum;
                    g_step_var.at(b, t, i) += -gc * c * c;
                    gm_carry = gm * a / sum;
                    gv_carry = -ga * a * a;
                }
                g_step_mean.at(b, 0, i) += gx.at(b, 0, i) + gm_carry;
                g_step_var.at(b, 0, i) += gv_carry;
            }
        }
    } else {
        g_step_mean = gx;
    }

    // Weighted fusion, variances, KL and regularizer.
    Tensor3 g_mean_image(s), g_mean_event(s), g_logvar_image(s), g_logvar_event(s);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double wsum = 1.0 / tp.step_var.data[k];
        const double mu = tp.step_mean.data[k];
        const double gmu = g_step_mean.data[k];
        const double gvar = g_step_var.data[k];
        auto modality = [&](bool active, const Tensor3& mean, const Tensor3& var, const Tensor3& w,
                            Tensor3& gmean, Tensor3& glogvar) {
            if (!active) return;
            const double wm = w.data[k];
            const double gw = gmu * (mean.data[k] - mu) / wsum - gvar / (wsum * wsum);
            const double gv = -wm * wm * gw;
            gmean.data[k] += gmu * wm / wsum + mean.data[k] * inv_n;
            glogvar.data[k] += gv * var.data[k] + 0.5 * (var.data[k] - 1.0) * inv_n;
        };
        modality(tp.use_image, tp.mean_image, tp.var_image, tp.w_image, g_mean_image, g_logvar_image);
        modality(tp.use_event, tp.mean_event, tp.var_event, tp.w_event, g_mean_event, g_logvar_event);
    }

    if (tp.use_image && tp.use_event) {
        const auto reg = losses::reg_loss(tp.mean_image, tp.mean_event, cfg.reg_lambda1, cfg.reg_lambda2);
        if (reg.used_slices > 0) {
            const double scale = 1.0 / static_cast<double>(reg.used_slices);
            for (std::size_t sl = 0; sl < s.slices(); ++sl) {
                const double* x = tp.mean_image.data.data() + sl * d;
                const double* e = tp.mean_event.data.data() + sl * d;
                double dot = 0.0, nx = 0.0, ne = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    dot += x[i] * e[i];
                    nx += x[i] * x[i];
                    ne += e[i] * e[i];
                }
                if (nx == 0.0 || ne == 0.0) continue;
                nx = std::sqrt(nx);
                ne = std::sqrt(ne);
                const double cosv = dot / (nx * ne);
                const double diff = nx - ne;
                const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                for (std::size_t i = 0; i < d; ++i) {
                    const double dcos_x = e[i] / (nx * ne) - cosv * x[i] / (nx * nx);
                    const double dcos_e = x[i] / (nx * ne) - cosv * e[i] / (ne * ne);
                    g_mean_image.data[sl * d + i] +=
                        scale * (-cfg.reg_lambda1 * dcos_x + cfg.reg_lambda2 * sgn * x[i] / nx);
                    g_mean_event.data[sl * d + i] +=
                        scale * (-cfg.reg_lambda1 * dcos_e - cfg.reg_lambda2 * sgn * e[i] / ne);
                }
            }
        }
    }

    affine_backward(tp.z_image, g_mean_image, g.heads.image.mean_weight, g.heads.image.mean_bias);
    affine_backward(tp.z_image, g_logvar_image, g.heads.image.logvar_weight, g.heads.image.logvar_bias);
    affine_backward(tp.z_event, g_mean_event, g.heads.event.mean_weight, g.heads.event.mean_bias);
    affine_backward(tp.z_event, g_logvar_event, g.heads.event.logvar_weight, g.heads.event.logvar_bias);
    return res;
}

std::vector<NamedParam> parameters(ModelParams& params) {
    std::vector<NamedParam> out;
    auto add = [&](const std::string& prefix, std::vector<double>& v) {
        for (std::size_t k = 0; k < v.size(); ++k) out.push_back({prefix + "[" + std::to_string(k) + "]", &v[k]});
    };
    auto add_heads = [&](const std::string& prefix, losses::ProjectionHeads& h) {
        add(prefix + ".mean_weight", h.mean_weight);
        add(prefix + ".mean_bias", h.mean_bias);
        add(prefix + ".logvar_weight", h.logvar_weight);
        add(prefix + ".logvar_bias", h.logvar_bias);
    };
    add_heads("image", params.heads.image);
    add_heads("event", params.heads.event);
    add("classifier.weight", params.heads.classifier_weight);
    out.push_back({"classifier.bias", &params.heads.classifier_bias});
    add("refiner.weight", params.refiner.weight());
    add("refiner.bias", params.refiner.bias());
    return out;
}

}  // namespace evfuse::gradients
