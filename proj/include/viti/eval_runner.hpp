#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "viti/config.hpp"
#include "viti/imageio.hpp"
#include "viti/metrics.hpp"

namespace viti {

// Paired evaluation over directories of clips: real/<clip>/, gen/<clip>/,
// optional masks/<clip>/. Emits one record per clip plus an aggregate row;
// the aggregate column names follow the usual try-on comparison tables
// (SSIM, LPIPS, VFID(<extractor>)).
struct EvalOutcome {
    std::vector<std::pair<std::string, MetricReport>> per_clip;
    MetricReport aggregate;
    std::string vfid_column;
};

inline std::vector<fs::path> clip_dirs(const fs::path& root) {
    if (!fs::is_directory(root))
        throw IoError("not a directory: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory())
            dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty())
        throw IoError("no clip directories under " + root.string());
    return dirs;
}

inline EvalOutcome evaluate_dirs(const RunConfig& run, const fs::path& real_dir, const fs::path& gen_dir,
                                 const fs::path& mask_dir) {
    PluginSet plugins = make_plugins(run);
    auto real_clips = clip_dirs(real_dir);
    auto gen_clips = clip_dirs(gen_dir);
    if (real_clips.size() != gen_clips.size())
        throw ContractError("clip count mismatch between real and generated sets");

    EvalOutcome out;
    out.vfid_column = "VFID(" + plugins.features3d->name() + ")";
    std::vector<Video> reals, gens;
    double ssim_sum = 0, lpips_sum = 0, rec_sum = 0, flick_sum = 0;
    int rec_count = 0;
    for (size_t i = 0; i < real_clips.size(); ++i) {
        if (real_clips[i].filename() != gen_clips[i].filename())
            throw ContractError("clip name mismatch: " + real_clips[i].filename().string() + " vs " +
                                gen_clips[i].filename().string());
        Video r = load_video(real_clips[i]);
        Video g = load_video(gen_clips[i]);
        if (!r.data.same_shape(g.data))
            throw AlignmentError("clip shape mismatch at " + real_clips[i].filename().string());
        MetricReport rep;
        rep.ssim = video_ssim(r, g);
        rep.lpips = video_perceptual(r, g, *plugins.perceptual);
        rep.flicker = flicker_proxy(g);
        if (!mask_dir.empty()) {
            MaskVideo m = load_mask(mask_dir / real_clips[i].filename());
            rep.inpaint_rec = inpaint_reconstruction(r, g, m, run.loss_form);
            rec_sum += *rep.inpaint_rec;
            ++rec_count;
        }
        ssim_sum += *rep.ssim;
        lpips_sum += *rep.lpips;
        flick_sum += *rep.flicker;
        out.per_clip.emplace_back(real_clips[i].filename().string(), rep);
        reals.push_back(std::move(r));
        gens.push_back(std::move(g));
    }
    double n = static_cast<double>(real_clips.size());
    out.aggregate.ssim = ssim_sum / n;
    out.aggregate.lpips = lpips_sum / n;
    out.aggregate.flicker = flick_sum / n;
    if (rec_count > 0)
        out.aggregate.inpaint_rec = rec_sum / rec_count;
    if (reals.size() >= 2)
        out.aggregate.vfid = vfid(reals, gens, *plugins.features3d);
    return out;
}

inline nlohmann::json metric_report_json(const MetricReport& r, const std::string& vfid_col) {
    nlohmann::json j;
    if (r.ssim)
        j["SSIM"] = *r.ssim;
    if (r.lpips)
        j["LPIPS"] = *r.lpips;
    if (r.vfid)
        j[vfid_col] = *r.vfid;
    if (r.inpaint_rec)
        j["InpaintRec"] = *r.inpaint_rec;
    if (r.flicker)
        j["Flicker"] = *r.flicker;
    return j;
}

inline void write_eval_report(const fs::path& path, const EvalOutcome& out) {
    std::ofstream f(path, std::ios::trunc);
    if (!f)
        throw IoError("cannot write " + path.string());
    for (const auto& [clip, rep] : out.per_clip) {
        nlohmann::json j = metric_report_json(rep, out.vfid_column);
        j["clip"] = clip;
        f << j.dump() << "\n";
    }
    nlohmann::json agg = metric_report_json(out.aggregate, out.vfid_column);
    agg["clip"] = "__aggregate__";
    f << agg.dump() << "\n";
}

}  // namespace viti
