#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "viti/diffusion.hpp"
#include "viti/video.hpp"

namespace viti {

// map [-1,1] pixel data to [0,1] for the metric conventions
inline Tensor to_unit_range(const Tensor& pm1) {
    Tensor out = pm1;
    for (double& v : out.data)
        v = std::min(1.0, std::max(0.0, 0.5 * (v + 1.0)));
    return out;
}

// ---- SSIM ----

// Standard windowed SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01,
// K2=0.03, dynamic range 1 (inputs in [0,1]), averaged over valid window
// positions and channels.
inline double ssim(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3)
        throw ContractError("ssim: expected [H,W,C] frames");
    check_same_shape(a, b, "ssim");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
    int64_t H = a.dim(0), W = a.dim(1), C = a.dim(2);
    if (H < kWin || W < kWin)
        throw ContractError("ssim: frames smaller than the 11x11 window");

    double win[kWin][kWin];
    double norm = 0.0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            double dy = i - (kWin - 1) / 2.0, dx = j - (kWin - 1) / 2.0;
            win[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
            norm += win[i][j];
        }
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j)
            win[i][j] /= norm;

    double total = 0.0;
    int64_t count = 0;
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y + kWin <= H; ++y)
            for (int64_t x = 0; x + kWin <= W; ++x) {
                double mua = 0, mub = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < kWin; ++i)
                    for (int j = 0; j < kWin; ++j) {
                        double va = a.at(y + i, x + j, c), vb = b.at(y + i, x + j, c);
                        double wgt = win[i][j];
                        mua += wgt * va;
                        mub += wgt * vb;
                        saa += wgt * va * va;
                        sbb += wgt * vb * vb;
                        sab += wgt * va * vb;
                    }
                double va = saa - mua * mua, vb = sbb - mub * mub, cov = sab - mua * mub;
                double s = ((2 * mua * mub + kC1) * (2 * cov + kC2)) /
                           ((mua * mua + mub * mub + kC1) * (va + vb + kC2));
                total += s;
                ++count;
            }
    return total / static_cast<double>(count);
}

// mean SSIM over frames of two aligned videos in [-1,1]
inline double video_ssim(const Video& a, const Video& b) {
    if (!a.data.same_shape(b.data))
        throw AlignmentError("video_ssim: shape mismatch");
    Tensor ua = to_unit_range(a.data), ub = to_unit_range(b.data);
    int64_t N = a.frames(), H = a.height(), W = a.width();
    double total = 0.0;
    for (int64_t f = 0; f < N; ++f) {
        Tensor fa({H, W, 3}), fb({H, W, 3});
        std::copy_n(&ua.data[static_cast<size_t>(f * H * W * 3)], H * W * 3, fa.data.begin());
        std::copy_n(&ub.data[static_cast<size_t>(f * H * W * 3)], H * W * 3, fb.data.begin());
        total += ssim(fa, fb);
    }
    return total / static_cast<double>(N);
}

// ---- perceptual distance (pluggable; hermetic stub) ----

class PerceptualDistance {
public:
    virtual ~PerceptualDistance() = default;
    // frames [H,W,C] in [0,1]; 0 for identical inputs, >= 0 always
    virtual double distance(const Tensor& a, const Tensor& b) const = 0;
    virtual std::string name() const = 0;
};

// Multi-scale gradient-magnitude differences. A deterministic stand-in for
// a learned perceptual metric; not LPIPS itself, but zero at identity and
// responsive to structural change.
class GradMagPerceptualStub final : public PerceptualDistance {
public:
    double distance(const Tensor& a, const Tensor& b) const override {
        check_same_shape(a, b, "perceptual distance");
        double total = 0.0;
        Tensor ca = a, cb = b;
        for (int scale = 0; scale < 3; ++scale) {
            if (ca.dim(0) < 2 || ca.dim(1) < 2)
                break;
            total += grad_mag_gap(ca, cb);
            ca = halve(ca);
            cb = halve(cb);
        }
        return total;
    }

    std::string name() const override { return "gradmag_stub"; }

private:
    static double grad_mag_gap(const Tensor& a, const Tensor& b) {
        int64_t H = a.dim(0), W = a.dim(1), C = a.dim(2);
        double acc = 0.0;
        int64_t n = 0;
        for (int64_t y = 0; y + 1 < H; ++y)
            for (int64_t x = 0; x + 1 < W; ++x)
                for (int64_t c = 0; c < C; ++c) {
                    double ga = std::hypot(a.at(y + 1, x, c) - a.at(y, x, c),
                                           a.at(y, x + 1, c) - a.at(y, x, c));
                    double gb = std::hypot(b.at(y + 1, x, c) - b.at(y, x, c),
                                           b.at(y, x + 1, c) - b.at(y, x, c));
                    acc += std::abs(ga - gb);
                    ++n;
                }
        return acc / static_cast<double>(n);
    }

    static Tensor halve(const Tensor& t) {
        int64_t H = t.dim(0) / 2, W = t.dim(1) / 2, C = t.dim(2);
        Tensor out({std::max<int64_t>(1, H), std::max<int64_t>(1, W), C});
        for (int64_t y = 0; y < out.dim(0); ++y)
            for (int64_t x = 0; x < out.dim(1); ++x)
                for (int64_t c = 0; c < C; ++c) {
                    double s = t.at(2 * y, 2 * x, c);
                    int cnt = 1;
                    if (2 * y + 1 < t.dim(0)) { s += t.at(2 * y + 1, 2 * x, c); ++cnt; }
                    if (2 * x + 1 < t.dim(1)) { s += t.at(2 * y, 2 * x + 1, c); ++cnt; }
                    if (2 * y + 1 < t.dim(0) && 2 * x + 1 < t.dim(1)) { s += t.at(2 * y + 1, 2 * x + 1, c); ++cnt; }
                    out.at(y, x, c) = s / cnt;
                }
        return out;
    }
};

inline double video_perceptual(const Video& a, const Video& b, const PerceptualDistance& pd) {
    if (!a.data.same_shape(b.data))
        throw AlignmentError("video_perceptual: shape mismatch");
    Tensor ua = to_unit_range(a.data), ub = to_unit_range(b.data);
    int64_t N = a.frames(), H = a.height(), W = a.width();
    double total = 0.0;
    for (int64_t f = 0; f < N; ++f) {
        Tensor fa({H, W, 3}), fb({H, W, 3});
        std::copy_n(&ua.data[static_cast<size_t>(f * H * W * 3)], H * W * 3, fa.data.begin());
        std::copy_n(&ub.data[static_cast<size_t>(f * H * W * 3)], H * W * 3, fb.data.begin());
        total += pd.distance(fa, fb);
    }
    return total / static_cast<double>(N);
}

// ---- VFID ----

class FeatureExtractor3D {
public:
    virtual ~FeatureExtractor3D() = default;
    virtual Tensor extract(const Video& v) const = 0;  // [d]
    virtual int feature_dim() const = 0;
    virtual std::string name() const = 0;
};

// Pooled handcrafted spatio-temporal statistics: channel means/stds,
// temporal difference energy, spatial gradient energy, high-frequency
// residual, and frame-mean drift. Sensitive to both per-frame quality and
// temporal coherence, which is what the Frechet metric needs to see.
class StubStats3D final : public FeatureExtractor3D {
public:
    Tensor extract(const Video& v) const override {
        Tensor u = to_unit_range(v.data);
        int64_t N = v.frames(), H = v.height(), W = v.width();
        Tensor f({10});
        // per-channel mean and std
        for (int64_t c = 0; c < 3; ++c) {
            double s = 0, s2 = 0;
            int64_t n = N * H * W;
            for (int64_t fr = 0; fr < N; ++fr)
                for (int64_t y = 0; y < H; ++y)
                    for (int64_t x = 0; x < W; ++x) {
                        double val = u.at(fr, y, x, c);
                        s += val;
                        s2 += val * val;
                    }
            double m = s / n;
            f[c] = m;
            f[3 + c] = std::sqrt(std::max(0.0, s2 / n - m * m));
        }
        // temporal difference energy
        double td = 0.0;
        if (N > 1) {
            for (int64_t fr = 0; fr + 1 < N; ++fr)
                for (int64_t y = 0; y < H; ++y)
                    for (int64_t x = 0; x < W; ++x)
                        for (int64_t c = 0; c < 3; ++c)
                            td += std::abs(u.at(fr + 1, y, x, c) - u.at(fr, y, x, c));
            td /= static_cast<double>((N - 1) * H * W * 3);
        }
        f[6] = td;
        // spatial gradient energy
        double sg = 0.0;
        for (int64_t fr = 0; fr < N; ++fr)
            for (int64_t y = 0; y + 1 < H; ++y)
                for (int64_t x = 0; x + 1 < W; ++x)
                    for (int64_t c = 0; c < 3; ++c)
                        sg += std::abs(u.at(fr, y + 1, x, c) - u.at(fr, y, x, c)) +
                              std::abs(u.at(fr, y, x + 1, c) - u.at(fr, y, x, c));
        f[7] = sg / static_cast<double>(N * (H - 1) * (W - 1) * 3);
        // high-frequency residual vs 3x3 box blur
        double hf = 0.0;
        int64_t hfn = 0;
        for (int64_t fr = 0; fr < N; ++fr)
            for (int64_t y = 1; y + 1 < H; ++y)
                for (int64_t x = 1; x + 1 < W; ++x)
                    for (int64_t c = 0; c < 3; ++c) {
                        double blur = 0.0;
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx)
                                blur += u.at(fr, y + dy, x + dx, c);
                        blur /= 9.0;
                        double r = u.at(fr, y, x, c) - blur;
                        hf += r * r;
                        ++hfn;
                    }
        f[8] = hfn > 0 ? hf / static_cast<double>(hfn) : 0.0;
        // drift of per-frame means over time
        double drift = 0.0;
        if (N > 1) {
            std::vector<double> fm(static_cast<size_t>(N), 0.0);
            for (int64_t fr = 0; fr < N; ++fr) {
                double s = 0;
                for (int64_t y = 0; y < H; ++y)
                    for (int64_t x = 0; x < W; ++x)
                        for (int64_t c = 0; c < 3; ++c)
                            s += u.at(fr, y, x, c);
                fm[static_cast<size_t>(fr)] = s / static_cast<double>(H * W * 3);
            }
            double m = 0;
            for (double v2 : fm)
                m += v2;
            m /= N;
            for (double v2 : fm)
                drift += (v2 - m) * (v2 - m);
            drift = std::sqrt(drift / N);
        }
        f[9] = drift;
        return f;
    }

    int feature_dim() const override { return 10; }
    std::string name() const override { return "stub3d"; }
};

// Frechet distance between Gaussian fits:
// |mu_r - mu_g|^2 + Tr(S_r + S_g - 2 (S_r S_g)^(1/2)).
// The cross term is computed as Tr sqrtm(S_r^(1/2) S_g S_r^(1/2)) via
// symmetric eigendecomposition; covariances get +1e-6 I and negative
// eigenvalues clamp to zero.
inline double frechet_distance(const Tensor& mu1, const Tensor& cov1, const Tensor& mu2,
                               const Tensor& cov2) {
    int64_t d = mu1.dim(0);
    if (mu2.dim(0) != d || cov1.dim(0) != d || cov1.dim(1) != d || cov2.dim(0) != d || cov2.dim(1) != d)
        throw ContractError("frechet_distance: dimension mismatch");
    using Mat = Eigen::MatrixXd;
    Mat s1(d, d), s2(d, d);
    for (int64_t i = 0; i < d; ++i)
        for (int64_t j = 0; j < d; ++j) {
            s1(i, j) = cov1.at(i, j);
            s2(i, j) = cov2.at(i, j);
        }
    // symmetrize and regularize
    s1 = 0.5 * (s1 + s1.transpose()) + 1e-6 * Mat::Identity(d, d);
    s2 = 0.5 * (s2 + s2.transpose()) + 1e-6 * Mat::Identity(d, d);

    auto sqrtm = [&](const Mat& m) {
        Eigen::SelfAdjointEigenSolver<Mat> es(m);
        if (es.info() != Eigen::Success)
            throw NumericError("frechet_distance: eigendecomposition failed");
        Eigen::VectorXd ev = es.eigenvalues();
        for (int64_t i = 0; i < d; ++i)
            ev(i) = std::sqrt(std::max(0.0, ev(i)));
        return Mat(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
    };

    Mat r1 = sqrtm(s1);
    Mat inner = r1 * s2 * r1;
    Mat cross = sqrtm(0.5 * (inner + inner.transpose()));

    double mean_term = 0.0;
    for (int64_t i = 0; i < d; ++i) {
        double diff = mu1[i] - mu2[i];
        mean_term += diff * diff;
    }
    double tr = s1.trace() + s2.trace() - 2.0 * cross.trace();
    double d2 = mean_term + tr;
    return std::max(0.0, d2);  // clip eigensolver roundoff below zero
}

struct GaussianFit {
    Tensor mu;   // [d]
    Tensor cov;  // [d, d], unbiased (n-1) normalization
};

inline GaussianFit fit_gaussian(const std::vector<Tensor>& features) {
    if (features.size() < 2)
        throw ContractError("fit_gaussian: need at least two feature vectors");
    int64_t n = static_cast<int64_t>(features.size());
    int64_t d = features[0].dim(0);
    GaussianFit fit{Tensor({d}), Tensor({d, d})};
    for (const Tensor& f : features)
        for (int64_t i = 0; i < d; ++i)
            fit.mu[i] += f[i];
    for (int64_t i = 0; i < d; ++i)
        fit.mu[i] /= static_cast<double>(n);
    for (const Tensor& f : features)
        for (int64_t i = 0; i < d; ++i)
            for (int64_t j = 0; j < d; ++j)
                fit.cov.at(i, j) += (f[i] - fit.mu[i]) * (f[j] - fit.mu[j]);
    for (int64_t i = 0; i < d; ++i)
        for (int64_t j = 0; j < d; ++j)
            fit.cov.at(i, j) /= static_cast<double>(n - 1);
    return fit;
}

inline double vfid(const std::vector<Video>& real_set, const std::vector<Video>& gen_set,
                   const FeatureExtractor3D& fx) {
    if (real_set.size() < 2 || gen_set.size() < 2)
        throw ContractError("vfid: each set needs at least two clips");
    std::vector<Tensor> fr, fg;
    fr.reserve(real_set.size());
    fg.reserve(gen_set.size());
    for (const Video& v : real_set)
        fr.push_back(fx.extract(v));
    for (const Video& v : gen_set)
        fg.push_back(fx.extract(v));
    GaussianFit a = fit_gaussian(fr), b = fit_gaussian(fg);
    return frechet_distance(a.mu, a.cov, b.mu, b.cov);
}

// ---- pixel-space inpainting reconstruction ----

// Masked reconstruction error between the original clip and a prediction,
// same normalization decision (and config flag) as the latent-space loss.
inline double inpaint_reconstruction(const Video& x0, const Video& xp, const MaskVideo& m0,
                                     LossForm form = LossForm::mean_masked) {
    check_video_mask_aligned(x0, m0, "inpaint_reconstruction");
    if (!x0.data.same_shape(xp.data))
        throw AlignmentError("inpaint_reconstruction: prediction shape mismatch");
    int64_t N = x0.frames(), H = x0.height(), W = x0.width();
    int64_t active = 0;
    for (double v : m0.data.data)
        active += (v != 0.0) ? 3 : 0;  // counted per channel
    if (active == 0)
        throw EmptyMaskError("inpaint_reconstruction: empty mask");
    double acc = 0.0;
    for (int64_t f = 0; f < N; ++f)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double m = m0.data.at(f, y, x, 0);
                if (m == 0.0)
                    continue;
                for (int64_t c = 0; c < 3; ++c) {
                    double dv = (x0.data.at(f, y, x, c) - xp.data.at(f, y, x, c)) * m;
                    if (form == LossForm::paper_literal)
                        dv /= static_cast<double>(active);
                    acc += dv * dv;
                }
            }
    if (form == LossForm::mean_masked)
        acc /= static_cast<double>(active);
    return acc;
}

// mean absolute consecutive-frame difference on [0,1]; lower is less
// flicker. A convenience proxy, not the VBench temporal-flickering metric.
inline double flicker_proxy(const Video& v) {
    int64_t N = v.frames();
    if (N < 2)
        return 0.0;
    Tensor u = to_unit_range(v.data);
    int64_t per = v.height() * v.width() * 3;
    double acc = 0.0;
    for (int64_t f = 0; f + 1 < N; ++f)
        for (int64_t i = 0; i < per; ++i)
            acc += std::abs(u[(f + 1) * per + i] - u[f * per + i]);
    return acc / static_cast<double>((N - 1) * per);
}

// ---- report ----

struct MetricReport {
    std::optional<double> ssim;
    std::optional<double> lpips;
    std::optional<double> vfid;
    std::optional<double> inpaint_rec;
    std::optional<double> flicker;
};

}  // namespace viti
