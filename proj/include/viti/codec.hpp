#pragma once

#include <memory>
#include <string>

#include "viti/rng.hpp"
#include "viti/video.hpp"

namespace viti {

// Pixel <-> latent boundary. Real pretrained video VAEs plug in behind this
// interface; the bundled codecs keep the suite hermetic.
class VideoCodec {
public:
    virtual ~VideoCodec() = default;
    virtual LatentVideo encode(const Video& v) const = 0;
    virtual Video decode(const LatentVideo& z) const = 0;
    virtual int spatial_factor() const = 0;
    virtual int temporal_factor() const = 0;
    virtual int latent_channels() const = 0;
    virtual std::string name() const = 0;
    // whether one handle may be used from multiple workers
    virtual bool shareable() const { return true; }

    void check_encodable(const Video& v) const {
        if (v.height() % spatial_factor() != 0 || v.width() % spatial_factor() != 0)
            throw ContractError("codec: H and W must be divisible by the spatial factor");
    }

    int64_t source_frames_of(const LatentVideo& z) const {
        int64_t n = z.source_frames;
        if (n == 0)
            n = 1 + (z.frames() - 1) * temporal_factor();
        if (latent_frames_for(n, temporal_factor()) != z.frames())
            throw ContractError("codec: latent frame count inconsistent with source_frames");
        return n;
    }
};

// f_s = f_t = 1, latent == pixels. decode(encode(v)) is exact equality.
class IdentityCodec final : public VideoCodec {
public:
    LatentVideo encode(const Video& v) const override { return LatentVideo(v.data, 1, 1, v.frames()); }

    Video decode(const LatentVideo& z) const override {
        if (z.channels() != 3)
            throw ContractError("identity codec: latent must have 3 channels");
        return Video(z.data);
    }

    int spatial_factor() const override { return 1; }
    int temporal_factor() const override { return 1; }
    int latent_channels() const override { return 3; }
    std::string name() const override { return "identity"; }
};

// Fixed seeded orthogonal linear codec with f_s = f_t = 2. Each causal
// temporal group of 2x2x3 pixel blocks maps through a matrix with
// orthonormal columns, so decode(encode(v)) is exact up to float roundoff.
// Single-frame groups (the causal first frame, or a trailing remainder)
// use a 24x12 map; full groups use the 24x24 one.
class OrthogonalCodec final : public VideoCodec {
public:
    explicit OrthogonalCodec(uint64_t seed = 7) {
        q_full_ = random_orthonormal_cols(kC, kC, derive_seed(seed, "codec-ortho-full"));
        q_single_ = random_orthonormal_cols(kC, kC / 2, derive_seed(seed, "codec-ortho-single"));
    }

    LatentVideo encode(const Video& v) const override {
        check_encodable(v);
        auto groups = temporal_groups(v.frames(), kF);
        int64_t T = static_cast<int64_t>(groups.size());
        int64_t h = v.height() / kF, w = v.width() / kF;
        Tensor z({T, h, w, kC});
        std::vector<double> block(static_cast<size_t>(kC));
        for (int64_t tj = 0; tj < T; ++tj) {
            auto [b, e] = groups[static_cast<size_t>(tj)];
            const Tensor& q = (e - b == kF) ? q_full_ : q_single_;
            int64_t in_dim = (e - b) * kF * kF * 3;
            for (int64_t y = 0; y < h; ++y) {
                for (int64_t x = 0; x < w; ++x) {
                    gather_block(v.data, b, e, y, x, block);
                    // z = Q v; Q^T Q = I makes decode an exact inverse
                    for (int64_t c = 0; c < kC; ++c) {
                        double s = 0.0;
                        for (int64_t j = 0; j < in_dim; ++j)
                            s += q.at(c, j) * block[static_cast<size_t>(j)];
                        z.at(tj, y, x, c) = s;
                    }
                }
            }
        }
        return LatentVideo(std::move(z), kF, kF, v.frames());
    }

    Video decode(const LatentVideo& z) const override {
        if (z.channels() != kC)
            throw ContractError("orthogonal codec: wrong latent channel count");
        int64_t N = source_frames_of(z);
        auto groups = temporal_groups(N, kF);
        int64_t h = z.height(), w = z.width();
        Tensor out({N, h * kF, w * kF, 3});
        std::vector<double> block(static_cast<size_t>(kC));
        for (size_t tj = 0; tj < groups.size(); ++tj) {
            auto [b, e] = groups[tj];
            const Tensor& q = (e - b == kF) ? q_full_ : q_single_;
            int64_t in_dim = (e - b) * kF * kF * 3;
            for (int64_t y = 0; y < h; ++y) {
                for (int64_t x = 0; x < w; ++x) {
                    // v = Q^T z
                    for (int64_t i = 0; i < in_dim; ++i) {
                        double s = 0.0;
                        for (int64_t c = 0; c < kC; ++c)
                            s += q.at(c, i) * z.data.at(static_cast<int64_t>(tj), y, x, c);
                        block[static_cast<size_t>(i)] = s;
                    }
                    scatter_block(out, b, e, y, x, block);
                }
            }
        }
        // truncate roundoff that leaks outside the pixel range
        for (double& v : out.data)
            v = std::min(1.0, std::max(-1.0, v));
        return Video(std::move(out));
    }

    int spatial_factor() const override { return kF; }
    int temporal_factor() const override { return kF; }
    int latent_channels() const override { return kC; }
    std::string name() const override { return "ortho2x"; }

private:
    static constexpr int64_t kF = 2;
    static constexpr int64_t kC = 24;  // 3 * f_s^2 * f_t
    Tensor q_full_;    // [kC, kC], orthonormal columns
    Tensor q_single_;  // [kC, kC/2], orthonormal columns

    static void gather_block(const Tensor& px, int64_t b, int64_t e, int64_t y, int64_t x,
                             std::vector<double>& out) {
        size_t i = 0;
        for (int64_t f = b; f < e; ++f)
            for (int64_t dy = 0; dy < kF; ++dy)
                for (int64_t dx = 0; dx < kF; ++dx)
                    for (int64_t c = 0; c < 3; ++c)
                        out[i++] = px.at(f, y * kF + dy, x * kF + dx, c);
    }

    static void scatter_block(Tensor& px, int64_t b, int64_t e, int64_t y, int64_t x,
                              const std::vector<double>& in) {
        size_t i = 0;
        for (int64_t f = b; f < e; ++f)
            for (int64_t dy = 0; dy < kF; ++dy)
                for (int64_t dx = 0; dx < kF; ++dx)
                    for (int64_t c = 0; c < 3; ++c)
                        px.at(f, y * kF + dy, x * kF + dx, c) = in[i++];
    }

    // [rows, cols] matrix with orthonormal columns (modified Gram-Schmidt)
    static Tensor random_orthonormal_cols(int64_t rows, int64_t cols, uint64_t seed) {
        RngStream rng(seed);
        Tensor m = rng.normal_tensor({rows, cols});
        for (int64_t j = 0; j < cols; ++j) {
            for (int64_t k = 0; k < j; ++k) {
                double dot = 0.0;
                for (int64_t i = 0; i < rows; ++i)
                    dot += m.at(i, j) * m.at(i, k);
                for (int64_t i = 0; i < rows; ++i)
                    m.at(i, j) -= dot * m.at(i, k);
            }
            double norm = 0.0;
            for (int64_t i = 0; i < rows; ++i)
                norm += m.at(i, j) * m.at(i, j);
            norm = std::sqrt(norm);
            if (norm < 1e-12)
                throw NumericError("orthonormalization degenerated");
            for (int64_t i = 0; i < rows; ++i)
                m.at(i, j) /= norm;
        }
        return m;
    }
};

inline std::unique_ptr<VideoCodec> make_codec(const std::string& name, uint64_t seed = 7) {
    if (name == "identity")
        return std::make_unique<IdentityCodec>();
    if (name == "ortho2x")
        return std::make_unique<OrthogonalCodec>(seed);
    throw ConfigError("unknown codec: " + name);
}

}  // namespace viti
