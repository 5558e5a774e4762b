#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "viti/latent_ops.hpp"
#include "viti/nn.hpp"
#include "viti/video.hpp"

namespace viti {

// Everything the denoiser is conditioned on. Token tensors are graph
// variables so the trainable encoders behind them receive gradients;
// absent inputs are represented by zero-row tensors / undefined vars.
struct ConditionBundle {
    ag::Var text_tokens;     // [M, text_dim], M may be 0
    ag::Var garment_tokens;  // [K, garment_dim], K may be 0
    ag::Var pose_latent;     // [T,h,w,C] or undefined
    int timestep = 0;

    int64_t text_count() const { return text_tokens.defined() ? text_tokens.value().dim(0) : 0; }
    int64_t garment_count() const { return garment_tokens.defined() ? garment_tokens.value().dim(0) : 0; }
    bool has_pose() const { return pose_latent.defined(); }
};

// ---- text ----

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    // [M, text_dim]; deterministic for a fixed prompt; empty prompt -> M = 0
    virtual Tensor embed(const std::string& prompt) const = 0;
    virtual int text_dim() const = 0;
    virtual int max_tokens() const = 0;
    virtual std::string name() const = 0;
};

// Deterministic stand-in for a pretrained text encoder: each whitespace
// token maps to a fixed seeded vector derived from its hash.
class HashTextEmbedder final : public TextEmbedder {
public:
    HashTextEmbedder(int dim, int max_tokens = 32, uint64_t seed = 11)
        : dim_(dim), max_tokens_(max_tokens), seed_(seed) {}

    Tensor embed(const std::string& prompt) const override {
        std::istringstream ss(prompt);
        std::vector<std::string> words;
        std::string word;
        while (ss >> word && static_cast<int>(words.size()) < max_tokens_)
            words.push_back(word);
        Tensor out({static_cast<int64_t>(words.size()), dim_});
        for (size_t i = 0; i < words.size(); ++i) {
            RngStream rng(derive_seed(seed_, words[i], i));
            for (int64_t j = 0; j < dim_; ++j)
                out.at(static_cast<int64_t>(i), j) = rng.normal();
        }
        return out;
    }

    int text_dim() const override { return static_cast<int>(dim_); }
    int max_tokens() const override { return max_tokens_; }
    std::string name() const override { return "hash"; }

private:
    int64_t dim_;
    int max_tokens_;
    uint64_t seed_;
};

// ---- garment feature branches ----

class VisualFeatureExtractor {
public:
    virtual ~VisualFeatureExtractor() = default;
    // [K_b, d_b] tokens; deterministic; K_b fixed per configured input size
    virtual Tensor extract(const GarmentImage& img) const = 0;
    virtual int token_count() const = 0;
    virtual int feature_dim() const = 0;
    virtual std::string name() const = 0;
};

// Fixed seeded linear maps over average-pooled image patches. Stands in for
// the pretrained image-VAE / semantic-backbone branches so the pipeline
// trains end to end without external weights.
class StubPatchExtractor final : public VisualFeatureExtractor {
public:
    StubPatchExtractor(std::string name, int input_h, int input_w, int grid, int dim, uint64_t seed)
        : name_(std::move(name)), in_h_(input_h), in_w_(input_w), grid_(grid), dim_(dim) {
        if (input_h % grid != 0 || input_w % grid != 0)
            throw ConfigError("StubPatchExtractor: input size not divisible by grid");
        ph_ = input_h / grid;
        pw_ = input_w / grid;
        RngStream rng(derive_seed(seed, "stub-extractor", static_cast<uint64_t>(dim)));
        proj_ = rng.normal_tensor({dim, ph_ * pw_ * 3}, 0.0,
                                  1.0 / std::sqrt(static_cast<double>(ph_ * pw_ * 3)));
    }

    Tensor extract(const GarmentImage& img) const override {
        if (img.data.dim(0) != in_h_ || img.data.dim(1) != in_w_)
            throw AlignmentError("StubPatchExtractor: image size differs from configured size");
        Tensor out({static_cast<int64_t>(grid_) * grid_, dim_});
        std::vector<double> patch(static_cast<size_t>(ph_ * pw_ * 3));
        for (int gy = 0; gy < grid_; ++gy)
            for (int gx = 0; gx < grid_; ++gx) {
                size_t i = 0;
                for (int64_t y = 0; y < ph_; ++y)
                    for (int64_t x = 0; x < pw_; ++x)
                        for (int64_t c = 0; c < 3; ++c)
                            patch[i++] = img.data.at(gy * ph_ + y, gx * pw_ + x, c);
                int64_t tok = static_cast<int64_t>(gy) * grid_ + gx;
                for (int64_t d = 0; d < dim_; ++d) {
                    double s = 0.0;
                    for (size_t j = 0; j < patch.size(); ++j)
                        s += proj_.at(d, static_cast<int64_t>(j)) * patch[j];
                    out.at(tok, d) = s;
                }
            }
        return out;
    }

    int token_count() const override { return grid_ * grid_; }
    int feature_dim() const override { return static_cast<int>(dim_); }
    std::string name() const override { return name_; }

private:
    std::string name_;
    int64_t in_h_, in_w_;
    int grid_;
    int64_t dim_;
    int64_t ph_, pw_;
    Tensor proj_;  // [dim, ph*pw*3]
};

// ---- garment encoder ----

// Two visual branches -> per-branch linear -> concat along the token axis
// -> shared MLP -> [K_A + K_B, garment_dim].
class GarmentEncoder {
public:
    GarmentEncoder() = default;
    GarmentEncoder(nn::ParamStore& store, const std::string& prefix, int dim_a, int dim_b,
                   int garment_dim, RngStream& rng)
        : lin_a_(store, prefix + ".branch_a", dim_a, garment_dim, rng),
          lin_b_(store, prefix + ".branch_b", dim_b, garment_dim, rng),
          mlp_(store, prefix + ".mlp", garment_dim, garment_dim * 2, garment_dim, rng) {}

    ag::Var encode(const Tensor& tokens_a, const Tensor& tokens_b) const {
        ag::Var a = lin_a_(ag::Var::constant(tokens_a));
        ag::Var b = lin_b_(ag::Var::constant(tokens_b));
        ag::Var cat = ag::concat_rows({a, b});
        return mlp_(cat);
    }

private:
    nn::Linear lin_a_, lin_b_;
    nn::Mlp mlp_;
};

// ---- pose encoder ----

// Average-pools the dense-pose map onto the latent grid (causal temporal
// grouping, f_s x f_s spatial), then a per-position MLP maps P channels to
// the latent channel count, giving exactly the latent-noise shape.
class PoseEncoder {
public:
    PoseEncoder() = default;
    PoseEncoder(nn::ParamStore& store, const std::string& prefix, int pose_channels, int latent_channels,
                RngStream& rng)
        : pose_channels_(pose_channels),
          mlp_(store, prefix + ".mlp", pose_channels, 2 * latent_channels, latent_channels, rng) {}

    static Tensor pool_to_latent(const PoseVideo& pose, int fs, int ft, const LatentGeometry& target) {
        int64_t N = pose.frames(), H = pose.data.dim(1), W = pose.data.dim(2), P = pose.channels();
        LatentGeometry expect = latent_geometry(N, H, W, fs, ft);
        if (expect.frames != target.frames || expect.height != target.height ||
            expect.width != target.width)
            throw AlignmentError("pose encoder: pose map not aligned with latent geometry");
        auto groups = temporal_groups(N, ft);
        Tensor out({target.frames, target.height, target.width, P});
        for (int64_t tj = 0; tj < target.frames; ++tj) {
            auto [b, e] = groups[static_cast<size_t>(tj)];
            double inv = 1.0 / static_cast<double>((e - b) * fs * fs);
            for (int64_t y = 0; y < target.height; ++y)
                for (int64_t x = 0; x < target.width; ++x)
                    for (int64_t c = 0; c < P; ++c) {
                        double acc = 0.0;
                        for (int64_t f = b; f < e; ++f)
                            for (int64_t dy = 0; dy < fs; ++dy)
                                for (int64_t dx = 0; dx < fs; ++dx)
                                    acc += pose.data.at(f, y * fs + dy, x * fs + dx, c);
                        out.at(tj, y, x, c) = acc * inv;
                    }
        }
        return out;
    }

    // pooled: [T, h, w, P] -> [T, h, w, C]
    ag::Var encode_pooled(const Tensor& pooled) const {
        if (pooled.dim(3) != pose_channels_)
            throw AlignmentError("pose encoder: channel count mismatch");
        int64_t T = pooled.dim(0), h = pooled.dim(1), w = pooled.dim(2);
        ag::Var rows = ag::Var::constant(pooled.reshaped({T * h * w, pose_channels_}));
        ag::Var mapped = mlp_(rows);
        return ag::reshape(mapped, {T, h, w, mapped.value().dim(1)});
    }

    ag::Var encode(const PoseVideo& pose, int fs, int ft, const LatentGeometry& target) const {
        return encode_pooled(pool_to_latent(pose, fs, ft, target));
    }

private:
    int64_t pose_channels_ = 3;
    nn::Mlp mlp_;
};

// ---- bundle assembly ----

// Aggregates the configured encoders into ConditionBundles. Absent garment
// means zero garment tokens; absent pose means no pose latent — the text-only
// configuration is exactly the stage 1-3 inpainting mode.
struct ConditionBuilder {
    const TextEmbedder* text = nullptr;
    const VisualFeatureExtractor* branch_a = nullptr;
    const VisualFeatureExtractor* branch_b = nullptr;
    const GarmentEncoder* garment_encoder = nullptr;
    const PoseEncoder* pose_encoder = nullptr;
    int spatial_factor = 1, temporal_factor = 1;
    LatentGeometry geometry{1, 1, 1};
    int max_timestep = 1000;

    ConditionBundle build(const std::string& prompt, const GarmentImage* garment, const PoseVideo* pose,
                          int t) const {
        if (t < 0 || t >= max_timestep)
            throw ContractError("build_condition: timestep out of schedule range");
        if (!text)
            throw ContractError("build_condition: no text embedder configured");
        ConditionBundle bundle;
        bundle.timestep = t;
        bundle.text_tokens = ag::Var::constant(text->embed(prompt));
        if (garment) {
            if (!branch_a || !branch_b || !garment_encoder)
                throw ContractError("build_condition: garment encoder not configured");
            bundle.garment_tokens =
                garment_encoder->encode(branch_a->extract(*garment), branch_b->extract(*garment));
        }
        if (pose) {
            if (!pose_encoder)
                throw ContractError("build_condition: pose encoder not configured");
            bundle.pose_latent = pose_encoder->encode(*pose, spatial_factor, temporal_factor, geometry);
        }
        return bundle;
    }
};

}  // namespace viti
