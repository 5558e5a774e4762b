#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "viti/codec.hpp"
#include "viti/conditioning.hpp"
#include "viti/diffusion.hpp"
#include "viti/dit.hpp"
#include "viti/masking.hpp"
#include "viti/metrics.hpp"

namespace viti {

namespace fs = std::filesystem;

struct StageConfig {
    std::string id;              // "1", "2", "3", "viti"
    std::string dataset;         // manifest path
    MaskSpec mask;
    int steps = 0;
    double lr = 1e-5;            // default per the training setup; toys go higher
    int batch_size = 1;
    std::string init;            // "", "auto" (previous stage), or a checkpoint dir
    double alpha = 0.1;          // temporal-loss weight, viti stage only
    double cond_dropout = 0.0;   // prompt dropout for classifier-free guidance
    std::string trainable = "all";
    double weight_decay = 0.01;

    bool is_viti() const { return id == "viti"; }
    bool temporal_loss_on() const { return is_viti(); }
    bool conditions_on() const { return is_viti(); }

    void validate() const {
        if (id != "1" && id != "2" && id != "3" && id != "viti")
            throw ConfigError("stage id must be one of 1, 2, 3, viti");
        if (steps < 0 || batch_size < 1 || lr <= 0.0)
            throw ConfigError("stage " + id + ": bad steps/batch/lr");
        if (!(cond_dropout >= 0.0 && cond_dropout <= 1.0))
            throw ConfigError("stage " + id + ": cond_dropout must be in [0,1]");
        mask.validate();
    }
};

struct GarmentInputConfig {
    int height = 16, width = 16;
    int grid_a = 2, dim_a = 8;   // image-VAE-like branch
    int grid_b = 4, dim_b = 8;   // semantic-backbone-like branch
};

struct RunConfig {
    uint64_t seed = 0;
    std::string out_dir = "runs/out";
    LossForm loss_form = LossForm::mean_masked;
    DiTConfig model;  // latent_channels / branches / max_timestep filled per stage
    int schedule_steps = 1000;
    double beta_start = 1e-4, beta_end = 2e-2;
    std::string codec = "identity";
    GarmentInputConfig garment_input;
    int pose_channels = 3;
    std::string text_plugin = "hash";
    std::string features3d_plugin = "stub3d";
    std::string perceptual_plugin = "gradmag_stub";
    int workers = 1;
    std::vector<StageConfig> stages;

    NoiseSchedule make_schedule() const { return NoiseSchedule::linear(schedule_steps, beta_start, beta_end); }

    void validate() const {
        if (schedule_steps < 1 || beta_start <= 0 || beta_end >= 1 || beta_start > beta_end)
            throw ConfigError("bad schedule parameters");
        if (workers < 1)
            throw ConfigError("workers must be >= 1");
        for (const StageConfig& s : stages)
            s.validate();
        // stage ordering: the try-on stage must initialize from stage 3+
        for (size_t i = 0; i < stages.size(); ++i) {
            const StageConfig& s = stages[i];
            if (s.is_viti() && (s.init.empty() || s.init == "auto")) {
                if (i == 0)
                    throw ConfigError("viti stage needs an init checkpoint (stage 3 or later)");
                const std::string& prev = stages[i - 1].id;
                if (prev != "3" && prev != "viti")
                    throw ConfigError("viti stage must follow stage 3 (got stage " + prev + ")");
            }
        }
    }
};

inline MaskSpec mask_spec_from_json(const nlohmann::json& j) {
    MaskSpec m;
    m.strategy = mask_strategy_from(j.value("strategy", std::string("time_invariant_box")));
    m.min_frac = j.value("min_frac", 0.25);
    m.max_frac = j.value("max_frac", 0.75);
    m.invert_prob = j.value("invert_prob", 0.0);
    m.target_label = j.value("target_label",
                             m.strategy == MaskStrategy::garment ? 2 : 1);
    return m;
}

inline nlohmann::json mask_spec_to_json(const MaskSpec& m) {
    return nlohmann::json{{"strategy", to_string(m.strategy)},
                          {"min_frac", m.min_frac},
                          {"max_frac", m.max_frac},
                          {"invert_prob", m.invert_prob},
                          {"target_label", m.target_label}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig r;
    r.seed = j.value("seed", 0ULL);
    r.out_dir = j.value("out_dir", std::string("runs/out"));
    r.loss_form = loss_form_from(j.value("loss_form", std::string("mean_masked")));
    if (j.contains("model")) {
        const auto& m = j.at("model");
        r.model.depth = m.value("depth", r.model.depth);
        r.model.dim = m.value("dim", r.model.dim);
        r.model.heads = m.value("heads", r.model.heads);
        r.model.patch = m.value("patch", r.model.patch);
        r.model.text_dim = m.value("text_dim", r.model.text_dim);
        r.model.garment_dim = m.value("garment_dim", r.model.garment_dim);
        r.model.garment_scale = m.value("garment_scale", r.model.garment_scale);
        r.model.ffn_mult = m.value("ffn_mult", r.model.ffn_mult);
        r.model.max_frames = m.value("max_frames", r.model.max_frames);
        r.model.max_rows = m.value("max_rows", r.model.max_rows);
        r.model.max_cols = m.value("max_cols", r.model.max_cols);
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        r.schedule_steps = s.value("steps", r.schedule_steps);
        r.beta_start = s.value("beta_start", r.beta_start);
        r.beta_end = s.value("beta_end", r.beta_end);
    }
    r.codec = j.value("codec", r.codec);
    if (j.contains("garment_input")) {
        const auto& g = j.at("garment_input");
        r.garment_input.height = g.value("height", 16);
        r.garment_input.width = g.value("width", 16);
        r.garment_input.grid_a = g.value("grid_a", 2);
        r.garment_input.dim_a = g.value("dim_a", 8);
        r.garment_input.grid_b = g.value("grid_b", 4);
        r.garment_input.dim_b = g.value("dim_b", 8);
    }
    r.pose_channels = j.value("pose_channels", 3);
    if (j.contains("plugins")) {
        const auto& p = j.at("plugins");
        r.text_plugin = p.value("text", r.text_plugin);
        r.features3d_plugin = p.value("features3d", r.features3d_plugin);
        r.perceptual_plugin = p.value("perceptual", r.perceptual_plugin);
    }
    r.workers = j.value("workers", 1);
    if (j.contains("stages"))
        for (const auto& sj : j.at("stages")) {
            StageConfig s;
            s.id = sj.at("id").is_string() ? sj.at("id").get<std::string>()
                                           : std::to_string(sj.at("id").get<int>());
            s.dataset = sj.value("dataset", std::string());
            if (sj.contains("mask"))
                s.mask = mask_spec_from_json(sj.at("mask"));
            s.steps = sj.value("steps", 0);
            s.lr = sj.value("lr", 1e-5);
            s.batch_size = sj.value("batch_size", 1);
            s.init = sj.value("init", std::string("auto"));
            s.alpha = sj.value("alpha", 0.1);
            s.cond_dropout = sj.value("cond_dropout", 0.0);
            s.trainable = sj.value("trainable", std::string("all"));
            s.weight_decay = sj.value("weight_decay", 0.01);
            r.stages.push_back(std::move(s));
        }
    return r;
}

inline RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig r = run_config_from_json(j);
    r.validate();
    return r;
}

// Frozen plugin handles resolved from the run config. Every plugin's
// declared dims are validated against the model before any compute.
struct PluginSet {
    std::unique_ptr<VideoCodec> codec;
    std::unique_ptr<TextEmbedder> text;
    std::unique_ptr<VisualFeatureExtractor> garment_a, garment_b;
    std::unique_ptr<FeatureExtractor3D> features3d;
    std::unique_ptr<PerceptualDistance> perceptual;
};

inline std::unique_ptr<TextEmbedder> make_text_embedder(const std::string& name, int dim,
                                                        uint64_t seed) {
    if (name == "hash")
        return std::make_unique<HashTextEmbedder>(dim, 32, derive_seed(seed, "text-embedder"));
    throw ConfigError("unknown text plugin: " + name);
}

inline std::unique_ptr<FeatureExtractor3D> make_features3d(const std::string& name) {
    if (name == "stub3d")
        return std::make_unique<StubStats3D>();
    throw ConfigError("unknown features3d plugin: " + name);
}

inline std::unique_ptr<PerceptualDistance> make_perceptual(const std::string& name) {
    if (name == "gradmag_stub")
        return std::make_unique<GradMagPerceptualStub>();
    throw ConfigError("unknown perceptual plugin: " + name);
}

inline PluginSet make_plugins(const RunConfig& r) {
    PluginSet p;
    p.codec = make_codec(r.codec, derive_seed(r.seed, "codec"));
    p.text = make_text_embedder(r.text_plugin, r.model.text_dim, r.seed);
    const GarmentInputConfig& g = r.garment_input;
    p.garment_a = std::make_unique<StubPatchExtractor>("stub_vae_branch", g.height, g.width, g.grid_a,
                                                       g.dim_a, derive_seed(r.seed, "garment-a"));
    p.garment_b = std::make_unique<StubPatchExtractor>("stub_semantic_branch", g.height, g.width,
                                                       g.grid_b, g.dim_b, derive_seed(r.seed, "garment-b"));
    p.features3d = make_features3d(r.features3d_plugin);
    p.perceptual = make_perceptual(r.perceptual_plugin);

    // capability checks before any compute
    if (p.text->text_dim() != r.model.text_dim)
        throw ConfigError("text plugin dim does not match model text_dim");
    if (p.garment_a->feature_dim() != g.dim_a || p.garment_b->feature_dim() != g.dim_b)
        throw ConfigError("garment extractor dims inconsistent with config");
    return p;
}

// model flavor for a stage: stages 1-3 are pure inpainting (no garment
// adapter, no pose branch, garment scale pinned to 0)
inline DiTConfig stage_model_config(const RunConfig& r, bool viti_flavor) {
    DiTConfig cfg = r.model;
    cfg.latent_channels = make_codec(r.codec)->latent_channels();
    cfg.max_timestep = r.schedule_steps;
    cfg.garment_branch = viti_flavor;
    cfg.pose_branch = viti_flavor;
    if (!viti_flavor)
        cfg.garment_scale = 0.0;
    cfg.validate();
    return cfg;
}

}  // namespace viti
