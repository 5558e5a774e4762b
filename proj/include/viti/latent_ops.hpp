#pragma once

#include <algorithm>
#include <vector>

#include "viti/video.hpp"

namespace viti {

// x0 * (1 - m0): pixels under the mask become exactly 0 (the latent-space
// "masked video" input is the encoding of this).
inline Video make_agnostic(const Video& video, const MaskVideo& mask) {
    check_video_mask_aligned(video, mask, "make_agnostic");
    Video out = video;
    int64_t n = video.frames(), h = video.height(), w = video.width();
    for (int64_t f = 0; f < n; ++f)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                double keep = 1.0 - mask.data.at(f, y, x, 0);
                for (int64_t c = 0; c < 3; ++c)
                    out.data.at(f, y, x, c) *= keep;
            }
    return out;
}

// generated * m0 + original * (1 - m0)
inline Video composite_output(const Video& generated, const Video& original, const MaskVideo& mask) {
    check_video_mask_aligned(original, mask, "composite_output");
    if (!generated.data.same_shape(original.data))
        throw AlignmentError("composite_output: generated/original shape mismatch");
    Video out = original;
    int64_t n = original.frames(), h = original.height(), w = original.width();
    for (int64_t f = 0; f < n; ++f)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                double m = mask.data.at(f, y, x, 0);
                if (m == 0.0)
                    continue;
                for (int64_t c = 0; c < 3; ++c)
                    out.data.at(f, y, x, c) =
                        generated.data.at(f, y, x, c) * m + original.data.at(f, y, x, c) * (1.0 - m);
            }
    return out;
}

namespace detail {

// Exact box-overlap (area) resampling weights for one axis: out bin j covers
// [j*in/out, (j+1)*in/out) in source coordinates. Mean-preserving.
inline void area_resample_axis(int64_t in_n, int64_t out_n,
                               std::vector<std::vector<std::pair<int64_t, double>>>& weights) {
    weights.assign(static_cast<size_t>(out_n), {});
    double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (int64_t j = 0; j < out_n; ++j) {
        double lo = j * scale, hi = (j + 1) * scale;
        int64_t i0 = static_cast<int64_t>(std::floor(lo));
        int64_t i1 = std::min<int64_t>(in_n, static_cast<int64_t>(std::ceil(hi)));
        for (int64_t i = i0; i < i1; ++i) {
            double overlap = std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
            if (overlap > 0)
                weights[static_cast<size_t>(j)].push_back({i, overlap / scale});
        }
    }
}

}  // namespace detail

struct LatentGeometry {
    int64_t frames, height, width;
};

inline LatentGeometry latent_geometry(int64_t n, int64_t h, int64_t w, int fs, int ft) {
    if (h % fs != 0 || w % fs != 0)
        throw ConfigError("latent_geometry: dims not divisible by spatial factor");
    return {latent_frames_for(n, ft), h / fs, w / fs};
}

// The reshaper R: causal max-pool over each temporal group (any masked pixel
// frame activates its latent frame), then area interpolation down to (h, w),
// clamped to [0, 1].
inline LatentMask reshape_mask(const MaskVideo& mask, const LatentGeometry& target, int fs, int ft) {
    LatentGeometry expect = latent_geometry(mask.frames(), mask.height(), mask.width(), fs, ft);
    if (expect.frames != target.frames || expect.height != target.height || expect.width != target.width)
        throw ConfigError("reshape_mask: target dims inconsistent with codec factors");

    auto groups = temporal_groups(mask.frames(), ft);
    int64_t T = target.frames, h = target.height, w = target.width;
    int64_t H = mask.height(), W = mask.width();

    std::vector<std::vector<std::pair<int64_t, double>>> wy, wx;
    detail::area_resample_axis(H, h, wy);
    detail::area_resample_axis(W, w, wx);

    Tensor out({T, h, w, 1});
    Tensor pooled({H, W});
    for (int64_t tj = 0; tj < T; ++tj) {
        auto [b, e] = groups[static_cast<size_t>(tj)];
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double m = 0.0;
                for (int64_t f = b; f < e; ++f)
                    m = std::max(m, mask.data.at(f, y, x, 0));
                pooled.at(y, x) = m;
            }
        for (int64_t oy = 0; oy < h; ++oy)
            for (int64_t ox = 0; ox < w; ++ox) {
                double acc = 0.0;
                for (auto [iy, vy] : wy[static_cast<size_t>(oy)])
                    for (auto [ix, vx] : wx[static_cast<size_t>(ox)])
                        acc += vy * vx * pooled.at(iy, ix);
                out.at(tj, oy, ox, 0) = std::min(1.0, std::max(0.0, acc));
            }
    }
    return LatentMask(std::move(out));
}

// Tensor-level core shared by the typed op and the sampler loop:
// z_t + masked_latent + mask broadcast across the C channels.
inline Tensor fuse_inputs_raw(const Tensor& z_t, const Tensor& m_z, const Tensor& masked_latent) {
    check_same_shape(z_t, masked_latent, "fuse_inputs");
    if (m_z.rank() != 4 || m_z.dim(3) != 1 || m_z.dim(0) != z_t.dim(0) || m_z.dim(1) != z_t.dim(1) ||
        m_z.dim(2) != z_t.dim(2))
        throw AlignmentError("fuse_inputs: mask not aligned with latent");
    Tensor out = viti::add(z_t, masked_latent);
    int64_t T = out.dim(0), h = out.dim(1), w = out.dim(2), c = out.dim(3);
    for (int64_t t = 0; t < T; ++t)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                double m = m_z.at(t, y, x, 0);
                for (int64_t ch = 0; ch < c; ++ch)
                    out.at(t, y, x, ch) += m;
            }
    return out;
}

inline LatentVideo fuse_inputs(const LatentVideo& z_t, const LatentMask& m_z, const LatentVideo& masked_latent) {
    Tensor fused = fuse_inputs_raw(z_t.data, m_z.data, masked_latent.data);
    return LatentVideo(std::move(fused), z_t.spatial_factor, z_t.temporal_factor, z_t.source_frames);
}

}  // namespace viti
