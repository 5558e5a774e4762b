// viti: conditional video inpainting for virtual try-on.
// Subcommands: train, infer, eval, maskgen, data-synth.
// Exit codes: 0 ok, 2 config error, 3 runtime numeric error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "viti/eval_runner.hpp"
#include "viti/infer.hpp"
#include "viti/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitRuntime = 1;

viti::RunConfig load_config_or_default(const std::string& path, std::optional<uint64_t> seed,
                                       std::optional<std::string> loss_form,
                                       std::optional<int> workers) {
    viti::RunConfig run;
    if (!path.empty())
        run = viti::load_run_config(path);
    if (seed)
        run.seed = *seed;
    if (loss_form)
        run.loss_form = viti::loss_form_from(*loss_form);
    if (workers)
        run.workers = *workers;
    if (const char* env_out = std::getenv("VITI_OUT_DIR"))
        run.out_dir = env_out;
    return run;
}

void emit_error(const std::string& kind, const std::string& what) {
    nlohmann::json j{{"error", kind}, {"message", what}};
    std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"viti - conditional video inpainting for virtual try-on"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<uint64_t> seed_override;
    std::optional<std::string> loss_form_override;
    std::optional<int> workers_override;
    app.add_option("--config", config_path, "run config JSON")->envname("VITI_CONFIG");
    app.add_option("--seed", seed_override, "root seed override");
    app.add_option("--loss-form", loss_form_override, "mean_masked | paper_literal");
    app.add_option("--workers", workers_override, "data-preparation workers");

    // train
    auto* tr = app.add_subcommand("train", "run the configured stage sequence");
    tr->fallthrough();

    // infer
    auto* in = app.add_subcommand("infer", "inpaint a clip with a trained checkpoint");
    in->fallthrough();
    std::string in_ckpt, in_video, in_mask, in_prompt, in_garment, in_pose, in_out = "infer_out";
    int in_steps = 0;
    uint64_t in_seed = 0;
    double in_guidance = 1.0;
    std::optional<double> in_garment_scale;
    bool in_raw = false;
    in->add_option("--checkpoint", in_ckpt)->required();
    in->add_option("--video", in_video)->required();
    in->add_option("--mask", in_mask)->required();
    in->add_option("--prompt", in_prompt);
    in->add_option("--garment", in_garment);
    in->add_option("--pose", in_pose);
    in->add_option("--steps", in_steps, "denoising steps (0 = full schedule)");
    in->add_option("--infer-seed", in_seed, "sampler seed");
    in->add_option("--guidance", in_guidance, "classifier-free guidance weight");
    in->add_option("--garment-scale", in_garment_scale, "garment adapter scale s");
    in->add_option("--out", in_out);
    in->add_flag("--raw", in_raw, "also write the raw tensor container");

    // eval
    auto* ev = app.add_subcommand("eval", "compute metrics over paired clip sets");
    ev->fallthrough();
    std::string ev_real, ev_gen, ev_masks, ev_out = "eval_report.ndjson";
    ev->add_option("--real", ev_real)->required();
    ev->add_option("--gen", ev_gen)->required();
    ev->add_option("--masks", ev_masks);
    ev->add_option("--out", ev_out);

    // maskgen
    auto* mg = app.add_subcommand("maskgen", "generate masks with a configured strategy");
    mg->fallthrough();
    std::string mg_strategy = "time_invariant_box", mg_out = "masks_out", mg_seg;
    int mg_frames = 8, mg_h = 32, mg_w = 24, mg_label = 1, mg_clips = 1;
    double mg_min = 0.25, mg_max = 0.75, mg_q = 0.0;
    uint64_t mg_seed = 0;
    mg->add_option("--strategy", mg_strategy, "time_invariant_box|time_variant_box|instance|garment");
    mg->add_option("--frames", mg_frames);
    mg->add_option("--height", mg_h);
    mg->add_option("--width", mg_w);
    mg->add_option("--min-frac", mg_min);
    mg->add_option("--max-frac", mg_max);
    mg->add_option("--invert-prob", mg_q);
    mg->add_option("--label", mg_label, "target label for segmentation strategies");
    mg->add_option("--seg", mg_seg, "segmentation frame dir (instance/garment)");
    mg->add_option("--clips", mg_clips, "number of masks to generate");
    mg->add_option("--mask-seed", mg_seed);
    mg->add_option("--out", mg_out);

    // data-synth
    auto* ds = app.add_subcommand("data-synth", "write a synthetic desk-scale dataset");
    ds->fallthrough();
    std::string ds_out = "data_synth";
    int ds_clips = 8, ds_frames = 8, ds_h = 32, ds_w = 24, ds_gsize = 16;
    uint64_t ds_seed = 0;
    ds->add_option("--out", ds_out);
    ds->add_option("--clips", ds_clips);
    ds->add_option("--frames", ds_frames);
    ds->add_option("--height", ds_h);
    ds->add_option("--width", ds_w);
    ds->add_option("--garment-size", ds_gsize);
    ds->add_option("--data-seed", ds_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (tr->parsed()) {
            if (config_path.empty()) {
                emit_error("config", "train requires --config");
                return kExitConfig;
            }
            viti::RunConfig run =
                load_config_or_default(config_path, seed_override, loss_form_override, workers_override);
            viti::fs::path ckpt = viti::run_training(run);
            std::cout << nlohmann::json{{"checkpoint", ckpt.string()}}.dump() << std::endl;
            return kExitOk;
        }
        if (in->parsed()) {
            viti::RunConfig run =
                load_config_or_default(config_path, seed_override, loss_form_override, workers_override);
            viti::InferRequest req;
            req.checkpoint = in_ckpt;
            req.video = in_video;
            req.mask = in_mask;
            req.prompt = in_prompt;
            req.garment = in_garment;
            req.pose = in_pose;
            req.steps = in_steps;
            req.seed = in_seed;
            req.guidance = in_guidance;
            req.garment_scale = in_garment_scale;
            req.out_dir = in_out;
            req.raw = in_raw;
            viti::InferResult res = viti::run_inference(run, req);
            std::cout << nlohmann::json{{"frames", res.frames_dir.string()}}.dump() << std::endl;
            return kExitOk;
        }
        if (ev->parsed()) {
            viti::RunConfig run =
                load_config_or_default(config_path, seed_override, loss_form_override, workers_override);
            viti::EvalOutcome out = viti::evaluate_dirs(run, ev_real, ev_gen,
                                                        ev_masks.empty() ? viti::fs::path()
                                                                         : viti::fs::path(ev_masks));
            viti::write_eval_report(ev_out, out);
            nlohmann::json agg = viti::metric_report_json(out.aggregate, out.vfid_column);
            agg["report"] = ev_out;
            std::cout << agg.dump() << std::endl;
            return kExitOk;
        }
        if (mg->parsed()) {
            viti::MaskSpec spec;
            spec.strategy = viti::mask_strategy_from(mg_strategy);
            spec.min_frac = mg_min;
            spec.max_frac = mg_max;
            spec.invert_prob = mg_q;
            spec.target_label = mg_label;
            spec.validate();
            viti::fs::path out_root = mg_out;
            char buf[32];
            for (int c = 0; c < mg_clips; ++c) {
                viti::MaskVideo m;
                viti::RngStream rng(viti::derive_seed(mg_seed, "maskgen", static_cast<uint64_t>(c)));
                if (spec.strategy == viti::MaskStrategy::instance ||
                    spec.strategy == viti::MaskStrategy::garment) {
                    if (mg_seg.empty()) {
                        emit_error("config", "segmentation strategies need --seg");
                        return kExitConfig;
                    }
                    viti::Tensor seg = viti::read_seg_frames(mg_seg);
                    m = viti::from_segmentation(seg, spec.target_label);
                    m = viti::maybe_invert(m, spec.invert_prob, rng);
                } else {
                    m = viti::generate_mask(spec, mg_frames, mg_h, mg_w, rng);
                }
                std::snprintf(buf, sizeof(buf), "mask_%03d", c);
                viti::write_mask_frames(out_root / buf, m);
            }
            std::cout << nlohmann::json{{"masks", out_root.string()}, {"clips", mg_clips}}.dump()
                      << std::endl;
            return kExitOk;
        }
        if (ds->parsed()) {
            viti::SynthSpec spec;
            spec.clips = ds_clips;
            spec.frames = ds_frames;
            spec.height = ds_h;
            spec.width = ds_w;
            spec.garment_image_size = ds_gsize;
            spec.seed = ds_seed;
            viti::fs::path manifest = viti::synth_dataset(ds_out, spec);
            std::cout << nlohmann::json{{"manifest", manifest.string()}}.dump() << std::endl;
            return kExitOk;
        }
    } catch (const viti::ConfigError& e) {
        emit_error("config", e.what());
        return kExitConfig;
    } catch (const viti::NumericError& e) {
        emit_error("numeric", e.what());
        return kExitNumeric;
    } catch (const viti::Error& e) {
        emit_error("runtime", e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        emit_error("runtime", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
