#pragma once

#include <cmath>
#include <string>

#include "viti/rng.hpp"
#include "viti/video.hpp"

namespace viti {

enum class MaskStrategy { time_invariant_box, time_variant_box, instance, garment };

inline MaskStrategy mask_strategy_from(const std::string& s) {
    if (s == "time_invariant_box")
        return MaskStrategy::time_invariant_box;
    if (s == "time_variant_box")
        return MaskStrategy::time_variant_box;
    if (s == "instance")
        return MaskStrategy::instance;
    if (s == "garment")
        return MaskStrategy::garment;
    throw ConfigError("unknown mask strategy: " + s);
}

inline std::string to_string(MaskStrategy s) {
    switch (s) {
        case MaskStrategy::time_invariant_box: return "time_invariant_box";
        case MaskStrategy::time_variant_box: return "time_variant_box";
        case MaskStrategy::instance: return "instance";
        case MaskStrategy::garment: return "garment";
    }
    throw ContractError("bad strategy");
}

struct MaskSpec {
    MaskStrategy strategy = MaskStrategy::time_invariant_box;
    double min_frac = 0.25;  // box edge as a fraction of (H, W)
    double max_frac = 0.75;
    double invert_prob = 0.0;
    uint64_t seed = 0;
    int target_label = 1;  // for the segmentation strategies

    void validate() const {
        if (!(min_frac > 0.0 && min_frac <= 1.0 && max_frac > 0.0 && max_frac <= 1.0 && min_frac <= max_frac))
            throw ConfigError("MaskSpec: size fractions must be in (0,1] with min <= max");
        if (!(invert_prob >= 0.0 && invert_prob <= 1.0))
            throw ConfigError("MaskSpec: inversion probability must be in [0,1]");
    }
};

namespace detail {

struct Box {
    int64_t y0, x0, h, w;
};

inline Box draw_box(const MaskSpec& spec, int64_t H, int64_t W, RngStream& rng) {
    double fh = rng.uniform(spec.min_frac, spec.max_frac);
    double fw = rng.uniform(spec.min_frac, spec.max_frac);
    int64_t bh = std::min<int64_t>(H, llround(fh * static_cast<double>(H)));
    int64_t bw = std::min<int64_t>(W, llround(fw * static_cast<double>(W)));
    int64_t y0 = (bh >= H) ? 0 : rng.uniform_int(0, H - bh);
    int64_t x0 = (bw >= W) ? 0 : rng.uniform_int(0, W - bw);
    return {y0, x0, bh, bw};
}

inline void paint_box(Tensor& m, int64_t frame, const Box& b) {
    for (int64_t y = b.y0; y < b.y0 + b.h; ++y)
        for (int64_t x = b.x0; x < b.x0 + b.w; ++x)
            m.at(frame, y, x, 0) = 1.0;
}

}  // namespace detail

// One random in-bounds box, shared by every frame.
inline MaskVideo gen_time_invariant_box(const MaskSpec& spec, int64_t N, int64_t H, int64_t W,
                                        RngStream& rng) {
    spec.validate();
    Tensor m({N, H, W, 1});
    detail::Box b = detail::draw_box(spec, H, W, rng);
    for (int64_t f = 0; f < N; ++f)
        detail::paint_box(m, f, b);
    return MaskVideo(std::move(m));
}

// Independent box per frame.
inline MaskVideo gen_time_variant_box(const MaskSpec& spec, int64_t N, int64_t H, int64_t W,
                                      RngStream& rng) {
    spec.validate();
    Tensor m({N, H, W, 1});
    for (int64_t f = 0; f < N; ++f)
        detail::paint_box(m, f, detail::draw_box(spec, H, W, rng));
    return MaskVideo(std::move(m));
}

// Binary mask per frame: seg == target_label. Errors if the label never
// appears anywhere in the clip (such samples cannot drive the masked loss).
inline MaskVideo from_segmentation(const Tensor& seg, int target_label) {
    if (seg.rank() != 4 || seg.dim(3) != 1)
        throw AlignmentError("from_segmentation: expected labels [N,H,W,1]");
    Tensor m(seg.shape);
    bool any = false;
    for (int64_t i = 0; i < seg.numel(); ++i) {
        bool hit = seg[i] == static_cast<double>(target_label);
        m[i] = hit ? 1.0 : 0.0;
        any = any || hit;
    }
    if (!any)
        throw EmptyMaskError("from_segmentation: label " + std::to_string(target_label) +
                             " absent in all frames");
    return MaskVideo(std::move(m));
}

// With probability q, return the complement. The decision is per clip, not
// per frame; per-frame inversion would make targets temporally incoherent.
inline MaskVideo maybe_invert(const MaskVideo& mask, double q, RngStream& rng) {
    if (!(q >= 0.0 && q <= 1.0))
        throw ConfigError("maybe_invert: q must be in [0,1]");
    if (q > 0.0 && rng.bernoulli(q)) {
        MaskVideo out = mask;
        for (double& v : out.data.data)
            v = 1.0 - v;
        return out;
    }
    return mask;
}

// Generator entry for the box strategies used by the training pipeline.
inline MaskVideo generate_mask(const MaskSpec& spec, int64_t N, int64_t H, int64_t W, RngStream& rng) {
    spec.validate();
    MaskVideo m;
    switch (spec.strategy) {
        case MaskStrategy::time_invariant_box:
            m = gen_time_invariant_box(spec, N, H, W, rng);
            break;
        case MaskStrategy::time_variant_box:
            m = gen_time_variant_box(spec, N, H, W, rng);
            break;
        default:
            throw ContractError("generate_mask: segmentation strategies need a label map");
    }
    return maybe_invert(m, spec.invert_prob, rng);
}

}  // namespace viti
