#pragma once

#include <utility>
#include <vector>

#include "viti/tensor.hpp"

namespace viti {

// Pixel-space clip, [N, H, W, 3] in [-1, 1]. fps is metadata only.
struct Video {
    Tensor data;
    double fps = 8.0;

    Video() = default;
    explicit Video(Tensor t, double fps_ = 8.0) : data(std::move(t)), fps(fps_) { validate(); }

    int64_t frames() const { return data.dim(0); }
    int64_t height() const { return data.dim(1); }
    int64_t width() const { return data.dim(2); }

    void validate() const {
        if (data.rank() != 4 || data.dim(3) != 3)
            throw ContractError("Video: expected [N,H,W,3]");
        if (data.dim(0) < 1)
            throw ContractError("Video: need at least one frame");
        if (!data.all_finite())
            throw NumericError("Video: non-finite entries");
        if (fps <= 0)
            throw ContractError("Video: fps must be positive");
    }
};

// Binary per-frame mask, [N, H, W, 1]; 1 marks pixels to modify.
struct MaskVideo {
    Tensor data;

    MaskVideo() = default;
    explicit MaskVideo(Tensor t) : data(std::move(t)) { validate(); }

    int64_t frames() const { return data.dim(0); }
    int64_t height() const { return data.dim(1); }
    int64_t width() const { return data.dim(2); }

    void validate() const {
        if (data.rank() != 4 || data.dim(3) != 1)
            throw ContractError("MaskVideo: expected [N,H,W,1]");
        for (double v : data.data)
            if (v != 0.0 && v != 1.0)
                throw ContractError("MaskVideo: entries must be 0 or 1");
    }
};

// VAE-compressed clip, [T, h, w, C] with the codec factors it came from.
// source_frames records the pixel frame count N so that a causal codec can
// reconstruct a trailing partial temporal group; 0 means N = 1 + (T-1)*f_t.
struct LatentVideo {
    Tensor data;
    int spatial_factor = 1;
    int temporal_factor = 1;
    int64_t source_frames = 0;

    LatentVideo() = default;
    LatentVideo(Tensor t, int fs, int ft, int64_t src_frames = 0)
        : data(std::move(t)), spatial_factor(fs), temporal_factor(ft), source_frames(src_frames) {
        validate();
    }

    int64_t frames() const { return data.dim(0); }
    int64_t height() const { return data.dim(1); }
    int64_t width() const { return data.dim(2); }
    int64_t channels() const { return data.dim(3); }

    void validate() const {
        if (data.rank() != 4)
            throw ContractError("LatentVideo: expected [T,h,w,C]");
        if (!data.all_finite())
            throw NumericError("LatentVideo: non-finite entries");
        if (spatial_factor < 1 || temporal_factor < 1)
            throw ContractError("LatentVideo: factors must be positive");
    }
};

// Mask mapped into latent geometry, [T, h, w, 1], entries in [0, 1].
// Interpolation may produce fractional values; the active set is m != 0.
struct LatentMask {
    Tensor data;

    LatentMask() = default;
    explicit LatentMask(Tensor t) : data(std::move(t)) { validate(); }

    void validate() const {
        if (data.rank() != 4 || data.dim(3) != 1)
            throw ContractError("LatentMask: expected [T,h,w,1]");
        for (double v : data.data)
            if (!(v >= 0.0 && v <= 1.0))
                throw ContractError("LatentMask: entries must be in [0,1]");
    }
};

// Dense-pose style channel map aligned with a pixel clip, [N, H, W, P].
struct PoseVideo {
    Tensor data;

    PoseVideo() = default;
    explicit PoseVideo(Tensor t) : data(std::move(t)) { validate(); }

    int64_t frames() const { return data.dim(0); }
    int64_t channels() const { return data.dim(3); }

    void validate() const {
        if (data.rank() != 4)
            throw ContractError("PoseVideo: expected [N,H,W,P]");
        if (!data.all_finite())
            throw NumericError("PoseVideo: non-finite entries");
    }
};

// Reference garment image, [Hg, Wg, 3] in [-1, 1].
struct GarmentImage {
    Tensor data;

    GarmentImage() = default;
    explicit GarmentImage(Tensor t) : data(std::move(t)) { validate(); }

    void validate() const {
        if (data.rank() != 3 || data.dim(2) != 3)
            throw ContractError("GarmentImage: expected [H,W,3]");
        if (!data.all_finite())
            throw NumericError("GarmentImage: non-finite entries");
    }
};

// Causal temporal grouping: pixel frame 0 maps to latent frame 0 alone,
// then f_t pixel frames per latent frame. Half-open [begin, end) ranges.
inline std::vector<std::pair<int64_t, int64_t>> temporal_groups(int64_t n_frames, int ft) {
    if (n_frames < 1 || ft < 1)
        throw ContractError("temporal_groups: bad arguments");
    std::vector<std::pair<int64_t, int64_t>> groups;
    groups.push_back({0, 1});
    int64_t begin = 1;
    while (begin < n_frames) {
        int64_t end = std::min<int64_t>(begin + ft, n_frames);
        groups.push_back({begin, end});
        begin = end;
    }
    return groups;
}

inline int64_t latent_frames_for(int64_t n_frames, int ft) {
    return static_cast<int64_t>(temporal_groups(n_frames, ft).size());
}

inline void check_video_mask_aligned(const Video& v, const MaskVideo& m, const char* what) {
    if (v.frames() != m.frames() || v.height() != m.height() || v.width() != m.width())
        throw AlignmentError(std::string(what) + ": video and mask are not aligned");
}

}  // namespace viti
