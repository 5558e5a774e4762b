#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "viti/autograd.hpp"
#include "viti/latent_ops.hpp"
#include "viti/rng.hpp"
#include "viti/tensor.hpp"

namespace viti {

// Forward-diffusion coefficients: beta_t in (0,1) nondecreasing,
// alpha_bar_t = prod(1 - beta_s) strictly decreasing.
class NoiseSchedule {
public:
    NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
        if (beta_.empty())
            throw ConfigError("schedule: need at least one step");
        double prod = 1.0;
        double prev = 0.0;
        for (double b : beta_) {
            if (!(b > 0.0 && b < 1.0))
                throw ConfigError("schedule: beta must be in (0,1)");
            if (b < prev)
                throw ConfigError("schedule: beta must be nondecreasing");
            prev = b;
            prod *= 1.0 - b;
            alpha_bar_.push_back(prod);
        }
    }

    static NoiseSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 2e-2) {
        if (steps < 1)
            throw ConfigError("schedule: steps must be >= 1");
        std::vector<double> b(static_cast<size_t>(steps));
        for (int i = 0; i < steps; ++i)
            b[static_cast<size_t>(i)] =
                (steps == 1) ? beta_start
                             : beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                                   static_cast<double>(steps - 1);
        return NoiseSchedule(std::move(b));
    }

    int steps() const { return static_cast<int>(beta_.size()); }

    double beta(int t) const {
        check_range(t);
        return beta_[static_cast<size_t>(t)];
    }

    double alpha_bar(int t) const {
        check_range(t);
        return alpha_bar_[static_cast<size_t>(t)];
    }

    // alpha_bar at the step before t; t = 0 looks back to the clean latent
    double alpha_bar_before(int t) const { return t <= 0 ? 1.0 : alpha_bar(t - 1); }

    void check_range(int t) const {
        if (t < 0 || t >= steps())
            throw ContractError("schedule: timestep out of range");
    }

private:
    std::vector<double> beta_;
    std::vector<double> alpha_bar_;
};

// z_t = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) eps
inline Tensor q_sample(const Tensor& z0, const NoiseSchedule& sched, int t, const Tensor& eps) {
    check_same_shape(z0, eps, "q_sample");
    double ab = sched.alpha_bar(t);
    double c0 = std::sqrt(ab), c1 = std::sqrt(1.0 - ab);
    Tensor out = z0;
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = c0 * z0[i] + c1 * eps[i];
    return out;
}

enum class LossForm {
    mean_masked,    // sum((m*(eps-pred))^2) / count(m != 0), count over channels
    paper_literal,  // sum((m*(eps-pred) / count)^2), the normalizer inside the norm
};

inline LossForm loss_form_from(const std::string& s) {
    if (s == "mean_masked")
        return LossForm::mean_masked;
    if (s == "paper_literal")
        return LossForm::paper_literal;
    throw ConfigError("unknown loss form: " + s);
}

namespace detail {

// mask [T,h,w,1] replicated across the C channels of `like`
inline Tensor broadcast_mask(const Tensor& m_z, const Tensor& like) {
    if (m_z.rank() != 4 || m_z.dim(3) != 1)
        throw AlignmentError("mask must be [T,h,w,1]");
    if (like.rank() != 4 || m_z.dim(0) != like.dim(0) || m_z.dim(1) != like.dim(1) ||
        m_z.dim(2) != like.dim(2))
        throw AlignmentError("mask not aligned with prediction");
    Tensor out(like.shape);
    int64_t T = like.dim(0), h = like.dim(1), w = like.dim(2), C = like.dim(3);
    for (int64_t t = 0; t < T; ++t)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                double m = m_z.at(t, y, x, 0);
                for (int64_t c = 0; c < C; ++c)
                    out.at(t, y, x, c) = m;
            }
    return out;
}

inline int64_t count_active(const Tensor& mask_bcast) {
    int64_t n = 0;
    for (double v : mask_bcast.data)
        n += (v != 0.0) ? 1 : 0;
    return n;
}

}  // namespace detail

// Masked noise-regression loss. The squared error is weighted by the mask
// and accumulated only over the active set {m_z != 0}; entries outside it
// contribute exactly zero value and zero gradient.
inline ag::Var masked_diffusion_loss(const ag::Var& eps_hat, const Tensor& eps, const Tensor& m_z,
                                     LossForm form = LossForm::mean_masked) {
    check_same_shape(eps_hat.value(), eps, "masked_diffusion_loss");
    Tensor mb = detail::broadcast_mask(m_z, eps);
    int64_t active = detail::count_active(mb);
    if (active == 0)
        throw EmptyMaskError("masked_diffusion_loss: empty active set");
    ag::Var diff = ag::add_const(eps_hat, viti::scaled(eps, -1.0));
    if (form == LossForm::paper_literal)
        for (double& v : mb.data)
            v /= static_cast<double>(active);
    ag::Var weighted = ag::mul_const(diff, std::move(mb));
    ag::Var sq = ag::mul(weighted, weighted);
    ag::Var total = ag::sum(sq);
    if (form == LossForm::mean_masked)
        total = ag::scale(total, 1.0 / static_cast<double>(active));
    return total;
}

// sum over consecutive latent frames of the squared frame difference
inline ag::Var temporal_consistency_loss(const ag::Var& eps_hat) {
    const Tensor& v = eps_hat.value();
    if (v.rank() != 4)
        throw ContractError("temporal_consistency_loss: expected [T,h,w,C]");
    int64_t T = v.dim(0);
    if (T <= 1)
        return ag::Var::constant(Tensor::scalar(0.0));
    int64_t per = v.numel() / T;
    ag::Var flat = ag::reshape(eps_hat, {T, per});
    ag::Var head = ag::slice_rows(flat, 0, T - 1);
    ag::Var tail = ag::slice_rows(flat, 1, T);
    ag::Var d = ag::sub(head, tail);
    return ag::sum(ag::mul(d, d));
}

struct LossReport {
    double l_masked = 0.0;
    std::optional<double> l_temporal;
    double l_total = 0.0;
    double alpha = 0.0;
};

struct TotalLoss {
    ag::Var loss;  // scalar graph node
    LossReport report;
};

// l_total = l_masked + alpha * l_temporal (temporal term only when enabled)
inline TotalLoss total_loss(const Tensor& eps, const ag::Var& eps_hat, const Tensor& m_z, double alpha,
                            LossForm form = LossForm::mean_masked, bool temporal_on = true) {
    TotalLoss out;
    ag::Var lm = masked_diffusion_loss(eps_hat, eps, m_z, form);
    out.report.l_masked = lm.value()[0];
    out.report.alpha = alpha;
    if (temporal_on) {
        ag::Var lt = temporal_consistency_loss(eps_hat);
        out.report.l_temporal = lt.value()[0];
        out.loss = ag::add(lm, ag::scale(lt, alpha));
        out.report.l_total = out.report.l_masked + alpha * *out.report.l_temporal;
    } else {
        out.loss = lm;
        out.report.l_total = out.report.l_masked;
    }
    return out;
}

}  // namespace viti
