#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "viti/checkpoint.hpp"
#include "viti/config.hpp"
#include "viti/dataset.hpp"
#include "viti/model.hpp"
#include "viti/optimizer.hpp"
#include "viti/sampler.hpp"

namespace viti {

// ---- freeze policy ----

// "all", "adapter_only" (garment/pose/adapter tensors), or
// "prefix:<p1>,<p2>,..." for an explicit prefix list.
inline std::set<std::string> trainable_parameter_set(const nn::ParamStore& store,
                                                     const std::string& policy) {
    std::set<std::string> out;
    if (policy == "all")
        return store.names();
    if (policy == "adapter_only") {
        for (const auto& name : store.names())
            if (name.rfind("garment.", 0) == 0 || name.rfind("pose.", 0) == 0 ||
                name.find(".garment_attn.") != std::string::npos)
                out.insert(name);
        return out;
    }
    if (policy.rfind("prefix:", 0) == 0) {
        std::vector<std::string> prefixes;
        std::string rest = policy.substr(7);
        size_t pos = 0;
        while (pos != std::string::npos) {
            size_t comma = rest.find(',', pos);
            prefixes.push_back(rest.substr(pos, comma == std::string::npos ? comma : comma - pos));
            pos = comma == std::string::npos ? comma : comma + 1;
        }
        for (const auto& name : store.names())
            for (const auto& p : prefixes)
                if (!p.empty() && name.rfind(p, 0) == 0)
                    out.insert(name);
        return out;
    }
    throw ConfigError("unknown trainable policy: " + policy);
}

// ---- batch assembly ----

// Raw tensors prepared off the training thread. Everything behind frozen
// plugins is materialized here; trainable encoders run in-graph later.
struct BatchItem {
    std::string record_id;
    Tensor fused;        // [T,h,w,C] model input
    Tensor eps;          // target noise
    Tensor m_z;          // [T,h,w,1]
    int t = 0;
    Tensor text_tokens;  // [M, text_dim]
    std::optional<Tensor> garment_a, garment_b;  // extractor outputs
    std::optional<Tensor> pose_pooled;           // [T,h,w,P]
};

struct StageData {
    DatasetManifest manifest;
    std::vector<LoadedSample> samples;
    std::vector<std::string> rejected_ids;  // empty-mask records dropped up front
};

inline StageData load_stage_data(const RunConfig& run, const StageConfig& stage) {
    if (stage.dataset.empty())
        throw ConfigError("stage " + stage.id + ": no dataset configured");
    StageData data{DatasetManifest::load(stage.dataset), {}, {}};
    bool seg_strategy = stage.mask.strategy == MaskStrategy::instance ||
                        stage.mask.strategy == MaskStrategy::garment;
    for (const SampleRecord& r : data.manifest.records) {
        LoadedSample s = load_sample(data.manifest, r);
        if (seg_strategy) {
            bool ok = s.seg.has_value();
            if (ok) {
                bool any = false;
                for (double v : s.seg->data)
                    any = any || (v == static_cast<double>(stage.mask.target_label));
                ok = any;
            }
            if (!ok) {  // empty-mask samples are rejected at dataset level
                data.rejected_ids.push_back(s.id);
                continue;
            }
        }
        data.samples.push_back(std::move(s));
    }
    if (data.samples.empty())
        throw ConfigError("stage " + stage.id + ": no usable records after empty-mask rejection");
    return data;
}

namespace detail {

inline std::vector<size_t> epoch_permutation(uint64_t seed, const std::string& stage_id, int64_t epoch,
                                             size_t n) {
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i)
        perm[i] = i;
    RngStream rng(derive_seed(seed, "order-" + stage_id, static_cast<uint64_t>(epoch)));
    for (size_t i = n; i > 1; --i) {
        size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace detail

// Prepares the k-th training sample of a stage. All randomness is derived
// from (seed, stage, k, attempt), so any worker count yields the same batch
// stream. Records whose mask comes out empty are logged and skipped.
inline BatchItem prepare_sample(const RunConfig& run, const StageConfig& stage, const PluginSet& plugins,
                                const NoiseSchedule& sched, const StageData& data, int64_t k,
                                std::vector<std::string>* skip_log = nullptr) {
    size_t n = data.samples.size();
    for (int64_t shift = 0; shift < static_cast<int64_t>(n) + 8; ++shift) {
        int64_t pos = k + shift;
        int64_t epoch = pos / static_cast<int64_t>(n);
        auto perm = detail::epoch_permutation(run.seed, stage.id, epoch, n);
        const LoadedSample& rec = data.samples[perm[static_cast<size_t>(pos % n)]];
        for (uint64_t attempt = 0; attempt < 16; ++attempt) {
            RngStream rng(derive_seed(run.seed, "sample-" + stage.id,
                                      static_cast<uint64_t>(pos) * 16 + attempt));
            MaskVideo mask;
            try {
                switch (stage.mask.strategy) {
                    case MaskStrategy::time_invariant_box:
                        mask = gen_time_invariant_box(stage.mask, rec.video.frames(), rec.video.height(),
                                                      rec.video.width(), rng);
                        break;
                    case MaskStrategy::time_variant_box:
                        mask = gen_time_variant_box(stage.mask, rec.video.frames(), rec.video.height(),
                                                    rec.video.width(), rng);
                        break;
                    case MaskStrategy::instance:
                    case MaskStrategy::garment:
                        if (!rec.seg)
                            throw EmptyMaskError("record has no segmentation: " + rec.id);
                        mask = from_segmentation(*rec.seg, stage.mask.target_label);
                        break;
                }
                mask = maybe_invert(mask, stage.mask.invert_prob, rng);
                if (viti::sum(mask.data) == 0.0)
                    throw EmptyMaskError("generated mask is empty");

                BatchItem item;
                item.record_id = rec.id;
                LatentVideo z0 = plugins.codec->encode(rec.video);
                Video agnostic = make_agnostic(rec.video, mask);
                LatentVideo ml = plugins.codec->encode(agnostic);
                LatentGeometry geom{z0.frames(), z0.height(), z0.width()};
                LatentMask mz = reshape_mask(mask, geom, plugins.codec->spatial_factor(),
                                             plugins.codec->temporal_factor());
                if (viti::sum(mz.data) == 0.0)
                    throw EmptyMaskError("latent mask is empty");
                item.t = static_cast<int>(rng.uniform_int(0, sched.steps() - 1));
                item.eps = rng.normal_tensor(z0.data.shape);
                Tensor z_t = q_sample(z0.data, sched, item.t, item.eps);
                item.fused = fuse_inputs_raw(z_t, mz.data, ml.data);
                item.m_z = std::move(mz.data);

                bool drop_cond = stage.cond_dropout > 0.0 && rng.bernoulli(stage.cond_dropout);
                item.text_tokens = drop_cond ? Tensor({0, run.model.text_dim})
                                             : plugins.text->embed(rec.prompt);
                if (stage.conditions_on() && rec.garment && !drop_cond) {
                    item.garment_a = plugins.garment_a->extract(*rec.garment);
                    item.garment_b = plugins.garment_b->extract(*rec.garment);
                }
                if (stage.conditions_on() && rec.pose) {
                    LatentGeometry g2{z0.frames(), z0.height(), z0.width()};
                    item.pose_pooled = PoseEncoder::pool_to_latent(
                        *rec.pose, plugins.codec->spatial_factor(), plugins.codec->temporal_factor(), g2);
                }
                return item;
            } catch (const EmptyMaskError&) {
                if (skip_log)
                    skip_log->push_back(rec.id);
                break;  // try the next record; regenerating won't help an empty source
            }
        }
    }
    throw ConfigError("stage " + stage.id + ": could not assemble a non-empty-mask sample");
}

// build_batch: the single-threaded assembly path (workers wrap it)
inline std::vector<BatchItem> build_batch(const RunConfig& run, const StageConfig& stage,
                                          const PluginSet& plugins, const NoiseSchedule& sched,
                                          const StageData& data, int64_t step,
                                          std::vector<std::string>* skip_log = nullptr) {
    std::vector<BatchItem> batch;
    batch.reserve(static_cast<size_t>(stage.batch_size));
    for (int slot = 0; slot < stage.batch_size; ++slot)
        batch.push_back(prepare_sample(run, stage, plugins, sched, data,
                                       step * stage.batch_size + slot, skip_log));
    return batch;
}

// ---- bounded prefetch for data workers ----

class PrefetchQueue {
public:
    explicit PrefetchQueue(int64_t capacity) : capacity_(capacity) {}

    void put(int64_t index, BatchItem item) {
        std::unique_lock<std::mutex> lk(m_);
        cv_space_.wait(lk, [&] { return index < next_emit_ + capacity_; });
        ready_.emplace(index, std::move(item));
        cv_item_.notify_all();
    }

    BatchItem take() {
        std::unique_lock<std::mutex> lk(m_);
        cv_item_.wait(lk, [&] { return ready_.count(next_emit_) > 0; });
        BatchItem item = std::move(ready_.at(next_emit_));
        ready_.erase(next_emit_);
        ++next_emit_;
        cv_space_.notify_all();
        return item;
    }

private:
    std::mutex m_;
    std::condition_variable cv_item_, cv_space_;
    std::map<int64_t, BatchItem> ready_;
    int64_t next_emit_ = 0;
    int64_t capacity_;
};

// ---- stage runner ----

struct StageResult {
    fs::path checkpoint_dir;
    std::vector<double> loss_history;  // l_total per step
};

inline ViTIModel make_stage_model(const RunConfig& run, const StageConfig& stage) {
    DiTConfig cfg = stage_model_config(run, stage.is_viti());
    return ViTIModel(cfg, derive_seed(run.seed, "model-" + stage.id), run.garment_input.dim_a,
                     run.garment_input.dim_b, run.pose_channels);
}

// Executes one stage: optimizer iterations of the total loss with the
// stage's flags, checkpoint + newline-delimited metrics log at the end.
// Deterministic for a fixed seed regardless of worker count (per-sample
// seed derivation).
inline StageResult run_stage(const RunConfig& run, const StageConfig& stage, ViTIModel& model,
                             const fs::path& stage_dir, const fs::path& init_ckpt) {
    PluginSet plugins = make_plugins(run);
    NoiseSchedule sched = run.make_schedule();

    if (!init_ckpt.empty()) {
        CheckpointInfo info = checkpoint_info(init_ckpt);
        if (stage.is_viti() && info.stage != "3" && info.stage != "viti")
            throw ContractError("viti stage requires a stage-3 (or later) init checkpoint, got stage " +
                                info.stage);
        std::set<std::string> fresh = load_checkpoint(init_ckpt, model.params());
        (void)fresh;  // fresh adapter/pose tensors keep their initialization
    } else if (stage.is_viti()) {
        throw ContractError("viti stage requires a stage-3 (or later) init checkpoint");
    }

    fs::create_directories(stage_dir);
    std::ofstream log(stage_dir / "metrics.ndjson", std::ios::trunc);
    StageData data = load_stage_data(run, stage);
    for (const std::string& id : data.rejected_ids)
        log << nlohmann::json{{"rejected_record", id}, {"reason", "empty mask"}}.dump() << "\n";

    std::set<std::string> trainable = trainable_parameter_set(model.params(), stage.trainable);
    AdamW opt({stage.lr, 0.9, 0.999, 1e-8, stage.weight_decay});

    StageResult result;
    int64_t total_tasks = static_cast<int64_t>(stage.steps) * stage.batch_size;

    PrefetchQueue queue(std::max<int64_t>(4, 2 * stage.batch_size * run.workers));
    std::atomic<int64_t> task_counter{0};
    std::vector<std::thread> workers;
    std::mutex skip_mutex;
    std::vector<std::string> skipped;
    if (run.workers > 1 && total_tasks > 0) {
        for (int w = 0; w < run.workers; ++w)
            workers.emplace_back([&] {
                for (;;) {
                    int64_t k = task_counter.fetch_add(1);
                    if (k >= total_tasks)
                        return;
                    std::vector<std::string> local_skips;
                    BatchItem item = prepare_sample(run, stage, plugins, sched, data, k, &local_skips);
                    if (!local_skips.empty()) {
                        std::lock_guard<std::mutex> lk(skip_mutex);
                        skipped.insert(skipped.end(), local_skips.begin(), local_skips.end());
                    }
                    queue.put(k, std::move(item));
                }
            });
    }

    auto wall_start = std::chrono::steady_clock::now();
    for (int step = 0; step < stage.steps; ++step) {
        std::vector<BatchItem> batch;
        if (run.workers > 1) {
            for (int slot = 0; slot < stage.batch_size; ++slot)
                batch.push_back(queue.take());
        } else {
            batch = build_batch(run, stage, plugins, sched, data, step, &skipped);
        }

        ag::Var loss;
        double lm_sum = 0.0, lt_sum = 0.0;
        bool any_temporal = false;
        for (const BatchItem& item : batch) {
            ConditionBundle bundle;
            bundle.timestep = item.t;
            bundle.text_tokens = ag::Var::constant(item.text_tokens);
            if (item.garment_a && model.has_garment_encoder())
                bundle.garment_tokens = model.garment_encoder().encode(*item.garment_a, *item.garment_b);
            if (item.pose_pooled && model.has_pose_encoder())
                bundle.pose_latent = model.pose_encoder().encode_pooled(*item.pose_pooled);
            ag::Var eps_hat = model.predict(item.fused, bundle);
            TotalLoss tl = total_loss(item.eps, eps_hat, item.m_z, stage.alpha, run.loss_form,
                                      stage.temporal_loss_on());
            lm_sum += tl.report.l_masked;
            if (tl.report.l_temporal) {
                lt_sum += *tl.report.l_temporal;
                any_temporal = true;
            }
            loss = loss.defined() ? ag::add(loss, tl.loss) : tl.loss;
        }
        loss = ag::scale(loss, 1.0 / static_cast<double>(batch.size()));
        double l_total = loss.value()[0];
        if (!std::isfinite(l_total)) {
            save_checkpoint(stage_dir / "diagnostic", model.params(), model.config(), stage.id);
            throw NumericError("stage " + stage.id + ": non-finite loss at step " +
                               std::to_string(step) + " (diagnostic checkpoint written)");
        }
        ag::backward(loss);
        opt.step(model.params(), trainable);
        model.params().zero_grads();

        result.loss_history.push_back(l_total);
        auto now = std::chrono::steady_clock::now();
        nlohmann::json line{{"step", step},
                            {"l_masked", lm_sum / static_cast<double>(batch.size())},
                            {"l_total", l_total},
                            {"lr", stage.lr},
                            {"wall_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                            now - wall_start)
                                            .count()}};
        if (any_temporal)
            line["l_temporal"] = lt_sum / static_cast<double>(batch.size());
        log << line.dump() << "\n";
    }
    for (std::thread& w : workers)
        w.join();
    {
        std::lock_guard<std::mutex> lk(skip_mutex);
        for (const std::string& id : skipped)
            log << nlohmann::json{{"skipped_record", id}, {"reason", "empty mask"}}.dump() << "\n";
    }

    result.checkpoint_dir = stage_dir / "checkpoint";
    save_checkpoint(result.checkpoint_dir, model.params(), model.config(), stage.id);
    return result;
}

// Runs the configured stage sequence, feeding each stage's checkpoint into
// the next ("auto" init). Returns the final checkpoint directory.
inline fs::path run_training(const RunConfig& run) {
    run.validate();
    fs::path out_root = run.out_dir;
    fs::path prev_ckpt;
    for (const StageConfig& stage : run.stages) {
        fs::path init;
        if (stage.init == "auto")
            init = prev_ckpt;  // empty for the first stage
        else if (!stage.init.empty())
            init = stage.init;
        ViTIModel model = make_stage_model(run, stage);
        StageResult res = run_stage(run, stage, model, out_root / ("stage_" + stage.id), init);
        prev_ckpt = res.checkpoint_dir;
    }
    if (prev_ckpt.empty())
        throw ConfigError("no stages configured");
    return prev_ckpt;
}

}  // namespace viti
