#pragma once

#include <functional>

#include "viti/conditioning.hpp"
#include "viti/diffusion.hpp"
#include "viti/latent_ops.hpp"

namespace viti {

// The denoiser as seen by the sampler: fused latent input + timestep +
// conditions -> predicted noise. Test oracles substitute closures here.
using DenoiserFn = std::function<Tensor(const Tensor& fused, int t, const ConditionBundle& cond)>;

struct SampleOptions {
    int steps = 0;  // <= schedule steps; 0 means the full schedule
    uint64_t seed = 0;
    double guidance = 1.0;  // classifier-free guidance weight; 1 = off
    // called after every update with (step index, timestep, current state)
    std::function<void(int, int, const Tensor&)> observer;
};

namespace detail {

// descending timesteps, evenly spaced over [0, T_diff)
inline std::vector<int> sample_timesteps(int total, int steps) {
    if (steps < 1 || steps > total)
        throw ContractError("sampler: steps must be in [1, schedule steps]");
    std::vector<int> ts(static_cast<size_t>(steps));
    if (steps == 1) {
        ts[0] = total - 1;
        return ts;
    }
    for (int i = 0; i < steps; ++i) {
        double f = static_cast<double>(i) / static_cast<double>(steps - 1);
        ts[static_cast<size_t>(i)] = static_cast<int>(llround(f * (total - 1)));
    }
    // descending, deduplicated
    std::sort(ts.begin(), ts.end(), std::greater<int>());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

}  // namespace detail

// One generalized ancestral update from timestep t to s (s < t; s = -1 is
// the final jump to the clean estimate). Exposed for the closed-form tests.
struct PosteriorStep {
    double coef_z0, coef_zt, sigma;
};

inline PosteriorStep posterior_coefficients(const NoiseSchedule& sched, int t, int s) {
    double ab_t = sched.alpha_bar(t);
    double ab_s = (s < 0) ? 1.0 : sched.alpha_bar(s);
    double alpha_ts = ab_t / ab_s;
    double beta_ts = 1.0 - alpha_ts;
    if (s < 0)
        return {1.0, 0.0, 0.0};  // the posterior collapses onto z0_hat
    double denom = 1.0 - ab_t;
    double coef_z0 = std::sqrt(ab_s) * beta_ts / denom;
    double coef_zt = std::sqrt(alpha_ts) * (1.0 - ab_s) / denom;
    double var = beta_ts * (1.0 - ab_s) / denom;
    return {coef_z0, coef_zt, std::sqrt(std::max(0.0, var))};
}

inline Tensor predicted_z0(const Tensor& z, const Tensor& eps_hat, double alpha_bar_t) {
    double c = std::sqrt(1.0 - alpha_bar_t), inv = 1.0 / std::sqrt(alpha_bar_t);
    Tensor out = z;
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = (z[i] - c * eps_hat[i]) * inv;
    return out;
}

// Ancestral DDPM from pure noise. At every step the model input is
// fuse_inputs(current z_t, mask, masked latent); deterministic given the
// seed. Returns the z_0 estimate.
inline Tensor sample(const DenoiserFn& model, const NoiseSchedule& sched, const Tensor& m_z,
                     const Tensor& masked_latent, const ConditionBundle& cond,
                     const SampleOptions& opts) {
    int steps = opts.steps == 0 ? sched.steps() : opts.steps;
    auto timesteps = detail::sample_timesteps(sched.steps(), steps);
    RngStream rng(derive_seed(opts.seed, "sampler"));
    Tensor z = rng.normal_tensor(masked_latent.shape);

    ConditionBundle uncond;  // empty text/garment/pose for guidance
    for (size_t k = 0; k < timesteps.size(); ++k) {
        int t = timesteps[k];
        int s = (k + 1 < timesteps.size()) ? timesteps[k + 1] : -1;
        Tensor fused = fuse_inputs_raw(z, m_z, masked_latent);
        Tensor eps_hat = model(fused, t, cond);
        if (opts.guidance != 1.0) {
            uncond.timestep = t;
            Tensor eps_u = model(fused, t, uncond);
            for (int64_t i = 0; i < eps_hat.numel(); ++i)
                eps_hat[i] = eps_u[i] + opts.guidance * (eps_hat[i] - eps_u[i]);
        }
        Tensor z0_hat = predicted_z0(z, eps_hat, sched.alpha_bar(t));
        PosteriorStep ps = posterior_coefficients(sched, t, s);
        for (int64_t i = 0; i < z.numel(); ++i)
            z[i] = ps.coef_z0 * z0_hat[i] + ps.coef_zt * z[i];
        if (ps.sigma > 0.0)
            for (int64_t i = 0; i < z.numel(); ++i)
                z[i] += ps.sigma * rng.normal();
        if (opts.observer)
            opts.observer(static_cast<int>(k), t, z);
    }
    if (!z.all_finite())
        throw NumericError("sampler produced non-finite values");
    return z;
}

}  // namespace viti
