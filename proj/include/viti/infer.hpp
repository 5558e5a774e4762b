#pragma once

#include <optional>
#include <string>

#include "viti/checkpoint.hpp"
#include "viti/config.hpp"
#include "viti/imageio.hpp"
#include "viti/model.hpp"
#include "viti/sampler.hpp"

namespace viti {

struct InferRequest {
    fs::path checkpoint;
    fs::path video;             // frame dir or raw tensor
    fs::path mask;              // frame dir or raw tensor
    std::string prompt;
    fs::path garment;           // optional garment image (.ppm)
    fs::path pose;              // optional pose tensor (.vt)
    int steps = 0;              // 0 = full schedule
    uint64_t seed = 0;
    double guidance = 1.0;
    std::optional<double> garment_scale;
    fs::path out_dir;
    bool raw = false;           // additionally emit the raw tensor container
};

struct InferResult {
    Video output;               // composited pixel clip
    fs::path frames_dir;
};

// Restores the model recorded in the checkpoint manifest. The run config
// supplies only plugins and schedule; the architecture comes from the
// checkpoint so names line up exactly.
inline ViTIModel load_model(const RunConfig& run, const fs::path& ckpt_dir) {
    CheckpointInfo info = checkpoint_info(ckpt_dir);
    ViTIModel model(info.config, derive_seed(run.seed, "model-restore"), run.garment_input.dim_a,
                    run.garment_input.dim_b, run.pose_channels);
    std::set<std::string> fresh = load_checkpoint(ckpt_dir, model.params());
    if (!fresh.empty())
        throw ContractError("checkpoint is missing " + std::to_string(fresh.size()) +
                            " model tensors (wrong flavor?)");
    return model;
}

// Full conditional-inpainting pass: agnostic -> encode -> T-step denoise in
// latent space -> decode -> composite with the known pixels.
inline InferResult run_inference(const RunConfig& run, const InferRequest& req) {
    PluginSet plugins = make_plugins(run);
    NoiseSchedule sched = run.make_schedule();
    ViTIModel model = load_model(run, req.checkpoint);

    Video video = load_video(req.video);
    MaskVideo mask = load_mask(req.mask);
    check_video_mask_aligned(video, mask, "infer");

    Video agnostic = make_agnostic(video, mask);
    LatentVideo masked_latent = plugins.codec->encode(agnostic);
    LatentGeometry geom{masked_latent.frames(), masked_latent.height(), masked_latent.width()};
    LatentMask m_z = reshape_mask(mask, geom, plugins.codec->spatial_factor(),
                                  plugins.codec->temporal_factor());

    ConditionBundle cond;
    cond.text_tokens = ag::Var::constant(plugins.text->embed(req.prompt));
    if (!req.garment.empty()) {
        if (!model.has_garment_encoder())
            throw ContractError("checkpoint has no garment branch but a garment image was given");
        GarmentImage g(read_ppm(req.garment));
        cond.garment_tokens = model.garment_encoder().encode(plugins.garment_a->extract(g),
                                                             plugins.garment_b->extract(g));
    }
    if (!req.pose.empty()) {
        if (!model.has_pose_encoder())
            throw ContractError("checkpoint has no pose branch but a pose map was given");
        PoseVideo p(read_raw_tensor(req.pose));
        cond.pose_latent = model.pose_encoder().encode(p, plugins.codec->spatial_factor(),
                                                       plugins.codec->temporal_factor(), geom);
    }

    DenoiserFn denoiser = [&](const Tensor& fused, int t, const ConditionBundle& c) {
        ConditionBundle step_cond = c;
        step_cond.timestep = t;
        return model.predict_value(fused, step_cond, req.garment_scale);
    };

    SampleOptions opts;
    opts.steps = req.steps;
    opts.seed = req.seed;
    opts.guidance = req.guidance;
    Tensor z0 = sample(denoiser, sched, m_z.data, masked_latent.data, cond, opts);

    LatentVideo z0_latent(std::move(z0), plugins.codec->spatial_factor(),
                          plugins.codec->temporal_factor(), video.frames());
    Video generated = plugins.codec->decode(z0_latent);
    Video composited = composite_output(generated, video, mask);

    InferResult res;
    res.frames_dir = req.out_dir / "frames";
    write_video_frames(res.frames_dir, composited);
    if (req.raw)
        write_raw_tensor(req.out_dir / "output.vt", composited.data, RangeTag::pm1);
    res.output = std::move(composited);
    return res;
}

}  // namespace viti
