#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "viti/imageio.hpp"
#include "viti/latent_ops.hpp"
#include "viti/masking.hpp"

namespace viti {

// One training clip: where its tensors live and how its mask is sourced.
// Paths are relative to the manifest directory.
struct SampleRecord {
    std::string id;
    std::string video;             // frame dir or raw tensor
    std::string seg;               // label-map frame dir ("" = none)
    std::string prompt;
    std::string garment;           // garment image ("" = none)
    std::string pose;              // pose raw tensor ("" = none)
};

struct DatasetManifest {
    fs::path root;
    std::vector<SampleRecord> records;

    static DatasetManifest load(const fs::path& manifest_path) {
        std::ifstream in(manifest_path);
        if (!in)
            throw IoError("cannot read dataset manifest: " + manifest_path.string());
        nlohmann::json j;
        in >> j;
        DatasetManifest m;
        m.root = manifest_path.parent_path();
        for (const auto& e : j.at("clips")) {
            SampleRecord r;
            r.id = e.at("id").get<std::string>();
            r.video = e.at("video").get<std::string>();
            r.seg = e.value("seg", "");
            r.prompt = e.value("prompt", "");
            r.garment = e.value("garment", "");
            r.pose = e.value("pose", "");
            m.records.push_back(std::move(r));
        }
        if (m.records.empty())
            throw ConfigError("dataset manifest lists no clips");
        return m;
    }

    fs::path resolve(const std::string& rel) const { return root / rel; }
};

// A fully materialized clip, cached in memory for the desk-scale trainer.
struct LoadedSample {
    std::string id;
    Video video;
    std::optional<Tensor> seg;  // [N,H,W,1] labels
    std::string prompt;
    std::optional<GarmentImage> garment;
    std::optional<PoseVideo> pose;
};

inline LoadedSample load_sample(const DatasetManifest& m, const SampleRecord& r) {
    LoadedSample s;
    s.id = r.id;
    s.video = load_video(m.resolve(r.video));
    s.prompt = r.prompt;
    if (!r.seg.empty())
        s.seg = read_seg_frames(m.resolve(r.seg));
    if (!r.garment.empty()) {
        Tensor g = read_ppm(m.resolve(r.garment));
        s.garment = GarmentImage(std::move(g));
    }
    if (!r.pose.empty()) {
        Tensor p = read_raw_tensor(m.resolve(r.pose));
        s.pose = PoseVideo(std::move(p));
    }
    return s;
}

// ---- synthetic desk-scale data ----
// Moving-rectangle clips with known segmentation: label 0 background,
// 1 figure, 2 garment. The garment image is cropped from the middle frame
// via the garment mask region, mirroring how reference images are obtained
// when no standalone product shot exists.

struct SynthSpec {
    int clips = 8;
    int frames = 8;
    int height = 32;
    int width = 24;
    int garment_image_size = 16;
    uint64_t seed = 0;
};

constexpr int kSynthLabelFigure = 1;
constexpr int kSynthLabelGarment = 2;

namespace detail {

inline Tensor area_resize_rgb(const Tensor& img, int64_t oh, int64_t ow) {
    std::vector<std::vector<std::pair<int64_t, double>>> wy, wx;
    area_resample_axis(img.dim(0), oh, wy);
    area_resample_axis(img.dim(1), ow, wx);
    Tensor out({oh, ow, 3});
    for (int64_t y = 0; y < oh; ++y)
        for (int64_t x = 0; x < ow; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (auto [iy, vy] : wy[static_cast<size_t>(y)])
                    for (auto [ix, vx] : wx[static_cast<size_t>(x)])
                        acc += vy * vx * img.at(iy, ix, c);
                out.at(y, x, c) = acc;
            }
    return out;
}

}  // namespace detail

struct SynthClip {
    Video video;
    Tensor seg;  // [N,H,W,1]
    GarmentImage garment;
    PoseVideo pose;
    std::string prompt;
};

inline SynthClip synth_clip(const SynthSpec& spec, int clip_index) {
    RngStream rng(derive_seed(spec.seed, "synth-clip", static_cast<uint64_t>(clip_index)));
    int64_t N = spec.frames, H = spec.height, W = spec.width;

    static const char* kColorNames[] = {"red", "green", "blue", "yellow", "magenta", "cyan"};
    static const double kColors[][3] = {{0.9, -0.6, -0.6}, {-0.6, 0.9, -0.6}, {-0.6, -0.6, 0.9},
                                        {0.9, 0.9, -0.6},  {0.9, -0.6, 0.9}, {-0.6, 0.9, 0.9}};
    int color = static_cast<int>(rng.uniform_int(0, 5));

    // figure box occupies the middle of the frame; the garment band sits on
    // its upper half and sways horizontally over time
    int64_t fig_w = std::max<int64_t>(4, W / 3);
    int64_t fig_h = std::max<int64_t>(6, (2 * H) / 3);
    int64_t fig_y = (H - fig_h) / 2;
    int64_t fig_x0 = (W - fig_w) / 2;
    int64_t gar_h = std::max<int64_t>(3, fig_h / 3);
    int64_t gar_y = fig_y + fig_h / 6;
    double sway_amp = static_cast<double>(W - fig_w) / 2.0 - 1.0;
    double phase = rng.uniform(0.0, 6.28318);
    double bg_kx = rng.uniform(0.5, 2.0), bg_ky = rng.uniform(0.5, 2.0);

    Tensor vid({N, H, W, 3});
    Tensor seg({N, H, W, 1});
    Tensor pose({N, H, W, 3});
    for (int64_t f = 0; f < N; ++f) {
        double sway = sway_amp * std::sin(phase + 6.28318 * static_cast<double>(f) / static_cast<double>(N));
        int64_t fx = fig_x0 + static_cast<int64_t>(llround(sway));
        fx = std::max<int64_t>(0, std::min(W - fig_w, fx));
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                // smooth background gradient
                double gx = std::sin(bg_kx * 3.14159 * static_cast<double>(x) / W);
                double gy = std::cos(bg_ky * 3.14159 * static_cast<double>(y) / H);
                vid.at(f, y, x, 0) = 0.35 * gx - 0.1;
                vid.at(f, y, x, 1) = 0.35 * gy - 0.1;
                vid.at(f, y, x, 2) = 0.2 * (gx + gy);
                bool in_fig = (y >= fig_y && y < fig_y + fig_h && x >= fx && x < fx + fig_w);
                if (in_fig) {
                    bool in_gar = (y >= gar_y && y < gar_y + gar_h);
                    if (in_gar) {
                        // garment with a simple texture stripe
                        double stripe = ((x - fx) % 3 == 0) ? 0.15 : 0.0;
                        for (int64_t c = 0; c < 3; ++c)
                            vid.at(f, y, x, c) = std::min(1.0, kColors[color][c] + stripe);
                        seg.at(f, y, x, 0) = kSynthLabelGarment;
                    } else {
                        vid.at(f, y, x, 0) = 0.25;
                        vid.at(f, y, x, 1) = 0.1;
                        vid.at(f, y, x, 2) = -0.2;
                        seg.at(f, y, x, 0) = kSynthLabelFigure;
                    }
                    // IUV-style pose channels inside the figure
                    pose.at(f, y, x, 0) = static_cast<double>(x - fx) / static_cast<double>(fig_w);
                    pose.at(f, y, x, 1) = static_cast<double>(y - fig_y) / static_cast<double>(fig_h);
                    pose.at(f, y, x, 2) = 1.0;
                }
            }
    }

    // crop the garment band from the middle frame, resize to the reference
    int64_t mid = N / 2;
    double sway_mid =
        sway_amp * std::sin(phase + 6.28318 * static_cast<double>(mid) / static_cast<double>(N));
    int64_t fx_mid = std::max<int64_t>(
        0, std::min(W - fig_w, fig_x0 + static_cast<int64_t>(llround(sway_mid))));
    Tensor crop({gar_h, fig_w, 3});
    for (int64_t y = 0; y < gar_h; ++y)
        for (int64_t x = 0; x < fig_w; ++x)
            for (int64_t c = 0; c < 3; ++c)
                crop.at(y, x, c) = vid.at(mid, gar_y + y, fx_mid + x, c);
    Tensor gimg = detail::area_resize_rgb(crop, spec.garment_image_size, spec.garment_image_size);

    SynthClip out;
    out.video = Video(std::move(vid));
    out.seg = std::move(seg);
    out.garment = GarmentImage(std::move(gimg));
    out.pose = PoseVideo(std::move(pose));
    out.prompt = std::string("a ") + kColorNames[color] + " garment on a moving figure";
    return out;
}

// Writes clips + manifest.json under dir; returns the manifest path.
inline fs::path synth_dataset(const fs::path& dir, const SynthSpec& spec) {
    fs::create_directories(dir);
    nlohmann::json clips = nlohmann::json::array();
    char buf[64];
    for (int i = 0; i < spec.clips; ++i) {
        SynthClip clip = synth_clip(spec, i);
        std::snprintf(buf, sizeof(buf), "clip_%03d", i);
        std::string base = buf;
        write_video_frames(dir / base / "video", clip.video);
        write_seg_frames(dir / base / "seg", clip.seg);
        write_ppm(dir / base / "garment.ppm", clip.garment.data);
        write_raw_tensor(dir / base / "pose.vt", clip.pose.data, RangeTag::unit);
        nlohmann::json e;
        e["id"] = base;
        e["video"] = base + "/video";
        e["seg"] = base + "/seg";
        e["prompt"] = clip.prompt;
        e["garment"] = base + "/garment.ppm";
        e["pose"] = base + "/pose.vt";
        clips.push_back(e);
    }
    nlohmann::json manifest;
    manifest["clips"] = clips;
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << "\n";
    return dir / "manifest.json";
}

}  // namespace viti
