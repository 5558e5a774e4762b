#pragma once

#include <memory>
#include <optional>
#include <string>

#include "viti/dit.hpp"

namespace viti {

// The full try-on denoiser: the DiT plus the trainable garment and pose
// encoders, all registered in one parameter store so checkpoints carry the
// complete state under stable names. Stage 1-3 inpainting models simply
// construct without the garment/pose branches.
class ViTIModel {
public:
    ViTIModel(const DiTConfig& cfg, uint64_t seed, int garment_branch_dim_a = 8,
              int garment_branch_dim_b = 8, int pose_channels = 3)
        : cfg_(cfg),
          rng_(derive_seed(seed, "model-init")),
          dit_(store_, cfg, rng_) {
        if (cfg_.garment_branch)
            garment_enc_.emplace(store_, "garment", garment_branch_dim_a, garment_branch_dim_b,
                                 cfg.garment_dim, rng_);
        if (cfg_.pose_branch)
            pose_enc_.emplace(store_, "pose", pose_channels, cfg.latent_channels, rng_);
    }

    const DiTConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }
    const DiTModel& dit() const { return dit_; }

    bool has_garment_encoder() const { return garment_enc_.has_value(); }
    bool has_pose_encoder() const { return pose_enc_.has_value(); }

    const GarmentEncoder& garment_encoder() const {
        if (!garment_enc_)
            throw ContractError("model has no garment encoder");
        return *garment_enc_;
    }

    const PoseEncoder& pose_encoder() const {
        if (!pose_enc_)
            throw ContractError("model has no pose encoder");
        return *pose_enc_;
    }

    // predicted noise for a fused latent input, with gradients when any
    // parameter requires them
    ag::Var predict(const Tensor& fused, const ConditionBundle& cond,
                    std::optional<double> garment_scale = std::nullopt) const {
        double s = garment_scale.value_or(cfg_.garment_scale);
        return dit_.forward(ag::Var::constant(fused), cond, s);
    }

    Tensor predict_value(const Tensor& fused, const ConditionBundle& cond,
                         std::optional<double> garment_scale = std::nullopt) const {
        return predict(fused, cond, garment_scale).value();
    }

private:
    DiTConfig cfg_;
    nn::ParamStore store_;
    RngStream rng_;
    DiTModel dit_;
    std::optional<GarmentEncoder> garment_enc_;
    std::optional<PoseEncoder> pose_enc_;
};

}  // namespace viti
