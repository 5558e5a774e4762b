#pragma once

#include <optional>
#include <string>
#include <vector>

#include "viti/conditioning.hpp"
#include "viti/nn.hpp"

namespace viti {

struct DiTConfig {
    int depth = 2;
    int dim = 32;         // model width D
    int heads = 4;        // D divisible by heads
    int patch = 2;        // h, w divisible by patch
    int text_dim = 16;
    int garment_dim = 16;
    double garment_scale = 1.0;  // s in the adapter branch
    int latent_channels = 3;
    int ffn_mult = 4;
    // token-grid capacity for the learned factorized position tables
    int max_frames = 16;
    int max_rows = 32;
    int max_cols = 32;
    int max_timestep = 1000;  // diffusion steps the model was built for
    bool garment_branch = false;  // true for the try-on flavor
    bool pose_branch = false;

    void validate() const {
        check_config(depth >= 1, "DiTConfig: depth must be >= 1");
        check_config(dim >= 1 && heads >= 1 && dim % heads == 0, "DiTConfig: dim divisible by heads");
        check_config(patch >= 1, "DiTConfig: patch must be >= 1");
        check_config(text_dim >= 1 && garment_dim >= 1, "DiTConfig: embedding dims must be positive");
        check_config(garment_scale >= 0.0, "DiTConfig: garment_scale must be nonnegative");
        check_config(latent_channels >= 1, "DiTConfig: latent channels must be positive");
        check_config(max_frames >= 1 && max_rows >= 1 && max_cols >= 1, "DiTConfig: bad grid capacity");
        check_config(max_timestep >= 1, "DiTConfig: max_timestep must be positive");
    }
};

// (frames, rows, cols) factorization of a flattened token sequence;
// required to undo patchify.
struct TokenLayout {
    int64_t frames = 0, rows = 0, cols = 0;

    int64_t tokens() const { return frames * rows * cols; }
    bool valid() const { return frames > 0 && rows > 0 && cols > 0; }
};

struct TokenSequence {
    ag::Var data;  // [L, D]
    TokenLayout layout;
};

// ---- patchify / unpatchify (rearrangement only; projection is separate) ----

// [T, h, w, C] -> [L, p*p*C] with tokens in (frame, row, col) scan order
// and per-token layout (py, px, channel).
inline Tensor patchify_rearrange(const Tensor& latent, int p, TokenLayout* layout_out = nullptr) {
    if (latent.rank() != 4)
        throw ContractError("patchify: expected [T,h,w,C]");
    int64_t T = latent.dim(0), h = latent.dim(1), w = latent.dim(2), C = latent.dim(3);
    if (p < 1 || h % p != 0 || w % p != 0)
        throw ConfigError("patchify: latent dims not divisible by patch size");
    int64_t rows = h / p, cols = w / p;
    int64_t L = T * rows * cols, pv = static_cast<int64_t>(p);
    Tensor out({L, pv * pv * C});
    for (int64_t t = 0; t < T; ++t)
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < cols; ++c) {
                int64_t tok = (t * rows + r) * cols + c;
                int64_t i = 0;
                for (int64_t py = 0; py < pv; ++py)
                    for (int64_t px = 0; px < pv; ++px)
                        for (int64_t ch = 0; ch < C; ++ch)
                            out.at(tok, i++) = latent.at(t, r * pv + py, c * pv + px, ch);
            }
    if (layout_out)
        *layout_out = {T, rows, cols};
    return out;
}

// exact inverse of the rearrangement above
inline Tensor unpatchify_rearrange(const Tensor& tokens, int p, const TokenLayout& layout,
                                   int64_t channels) {
    if (!layout.valid())
        throw ContractError("unpatchify: missing layout metadata");
    int64_t pv = static_cast<int64_t>(p);
    if (tokens.rank() != 2 || tokens.dim(0) != layout.tokens() || tokens.dim(1) != pv * pv * channels)
        throw ContractError("unpatchify: token shape inconsistent with layout");
    Tensor out({layout.frames, layout.rows * pv, layout.cols * pv, channels});
    for (int64_t t = 0; t < layout.frames; ++t)
        for (int64_t r = 0; r < layout.rows; ++r)
            for (int64_t c = 0; c < layout.cols; ++c) {
                int64_t tok = (t * layout.rows + r) * layout.cols + c;
                int64_t i = 0;
                for (int64_t py = 0; py < pv; ++py)
                    for (int64_t px = 0; px < pv; ++px)
                        for (int64_t ch = 0; ch < channels; ++ch)
                            out.at(t, r * pv + py, c * pv + px, ch) = tokens.at(tok, i++);
            }
    return out;
}

namespace ag_ops {

// gradient flows through the pure rearrangement by applying the inverse
inline ag::Var patchify(const ag::Var& latent, int p, TokenLayout* layout_out = nullptr) {
    TokenLayout layout;
    Tensor v = patchify_rearrange(latent.value(), p, &layout);
    if (layout_out)
        *layout_out = layout;
    int64_t C = latent.value().dim(3);
    return ag::detail::make_op(std::move(v), {latent}, [p, layout, C](ag::Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor back = unpatchify_rearrange(self.grad, p, layout, C);
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i)
            g[i] += back[i];
    });
}

inline ag::Var unpatchify(const ag::Var& tokens, int p, const TokenLayout& layout, int64_t channels) {
    Tensor v = unpatchify_rearrange(tokens.value(), p, layout, channels);
    return ag::detail::make_op(std::move(v), {tokens}, [p, layout, channels](ag::Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor back = patchify_rearrange(self.grad, p, nullptr);
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i)
            g[i] += back[i];
    });
}

}  // namespace ag_ops

// standard transformer sinusoidal embedding of an integer timestep
inline Tensor timestep_sinusoid(int t, int64_t dim) {
    Tensor out({dim});
    int64_t half = dim / 2;
    for (int64_t i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
        out[i] = std::sin(static_cast<double>(t) * freq);
        out[half + i] = std::cos(static_cast<double>(t) * freq);
    }
    if (dim % 2 == 1)
        out[dim - 1] = 0.0;
    return out;
}

namespace detail {

// scaled dot-product attention over pre-projected q/k/v, split into heads
// along the feature axis
inline ag::Var attend(const ag::Var& q, const ag::Var& k, const ag::Var& v, int heads) {
    int64_t D = q.value().dim(1);
    int64_t dh = D / heads;
    std::vector<ag::Var> outs;
    outs.reserve(static_cast<size_t>(heads));
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int hidx = 0; hidx < heads; ++hidx) {
        ag::Var qh = ag::slice_cols(q, hidx * dh, (hidx + 1) * dh);
        ag::Var kh = ag::slice_cols(k, hidx * dh, (hidx + 1) * dh);
        ag::Var vh = ag::slice_cols(v, hidx * dh, (hidx + 1) * dh);
        ag::Var scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt);
        ag::Var probs = ag::softmax_rows(scores);
        outs.push_back(ag::matmul(probs, vh));
    }
    return ag::concat_cols(outs);
}

}  // namespace detail

// Multi-head self-attention over the whole token sequence: no
// spatial/temporal factorization and no causal masking.
struct SelfAttention {
    nn::Linear wq, wk, wv, wo;
    int heads = 1;

    SelfAttention() = default;
    SelfAttention(nn::ParamStore& store, const std::string& prefix, int dim, int heads_, RngStream& rng)
        : wq(store, prefix + ".wq", dim, dim, rng),
          wk(store, prefix + ".wk", dim, dim, rng),
          wv(store, prefix + ".wv", dim, dim, rng),
          wo(store, prefix + ".wo", dim, dim, rng),
          heads(heads_) {}

    ag::Var operator()(const ag::Var& x) const { return wo(detail::attend(wq(x), wk(x), wv(x), heads)); }
};

// Cross-attention from tokens to a conditioning sequence [M, ctx_dim].
struct CrossAttention {
    nn::Linear wq, wk, wv, wo;
    int heads = 1;

    CrossAttention() = default;
    CrossAttention(nn::ParamStore& store, const std::string& prefix, int dim, int ctx_dim, int heads_,
                   RngStream& rng)
        : wq(store, prefix + ".wq", dim, dim, rng),
          wk(store, prefix + ".wk", ctx_dim, dim, rng),
          wv(store, prefix + ".wv", ctx_dim, dim, rng),
          wo(store, prefix + ".wo", dim, dim, rng),
          heads(heads_) {}

    ag::Var operator()(const ag::Var& x, const ag::Var& ctx) const {
        return wo(detail::attend(wq(x), wk(ctx), wv(ctx), heads));
    }
};

// Free-function forms of the two attention ops, exercised directly by the
// oracle tests against naive double-loop references.
inline ag::Var full3d_attention(const SelfAttention& attn, const ag::Var& tokens) {
    return attn(tokens);
}

// x + CrossAttn(x, text) + s * CrossAttn(x, garment). Empty token sets and
// s = 0 skip their branch entirely, so the output is bitwise independent of
// the skipped inputs.
inline ag::Var dual_cross_attention(const CrossAttention& text_attn,
                                    const CrossAttention* garment_attn, const ag::Var& x,
                                    const ConditionBundle& cond, double garment_scale) {
    ag::Var out = x;
    if (cond.text_count() > 0)
        out = ag::add(out, text_attn(x, cond.text_tokens));
    if (garment_attn && garment_scale != 0.0 && cond.garment_count() > 0)
        out = ag::add(out, ag::scale((*garment_attn)(x, cond.garment_tokens), garment_scale));
    return out;
}

// pre-norm -> self-attention -> residual -> dual cross-attention (its own
// residual) -> post-norm -> FFN -> residual
struct DitBlock {
    nn::LayerNorm ln1, ln2;
    SelfAttention self_attn;
    CrossAttention text_attn;
    std::optional<CrossAttention> garment_attn;
    nn::Mlp ffn;

    DitBlock() = default;
    DitBlock(nn::ParamStore& store, const std::string& prefix, const DiTConfig& cfg, RngStream& rng)
        : ln1(store, prefix + ".ln1", cfg.dim),
          ln2(store, prefix + ".ln2", cfg.dim),
          self_attn(store, prefix + ".self_attn", cfg.dim, cfg.heads, rng),
          text_attn(store, prefix + ".text_attn", cfg.dim, cfg.text_dim, cfg.heads, rng),
          ffn(store, prefix + ".ffn", cfg.dim, cfg.dim * cfg.ffn_mult, cfg.dim, rng) {
        if (cfg.garment_branch)
            garment_attn.emplace(store, prefix + ".garment_attn", cfg.dim, cfg.garment_dim, cfg.heads,
                                 rng);
    }

    ag::Var forward(const ag::Var& x, const ConditionBundle& cond, double garment_scale) const {
        ag::Var h = ag::add(x, self_attn(ln1(x)));
        h = dual_cross_attention(text_attn, garment_attn ? &*garment_attn : nullptr, h, cond,
                                 garment_scale);
        return ag::add(h, ffn(ln2(h)));
    }
};

// The denoiser: patchify + learned factorized position tables + timestep
// embedding, a stack of full 3D attention blocks, linear head, unpatchify.
class DiTModel {
public:
    DiTModel(nn::ParamStore& store, const DiTConfig& cfg, RngStream& rng) : cfg_(cfg) {
        cfg_.validate();
        int64_t patch_dim = static_cast<int64_t>(cfg.patch) * cfg.patch * cfg.latent_channels;
        token_in_ = nn::Linear(store, "dit.token_in", patch_dim, cfg.dim, rng);
        pos_frames_ = store.add("dit.pos.frames", rng.normal_tensor({cfg.max_frames, cfg.dim}, 0.0, 0.02));
        pos_rows_ = store.add("dit.pos.rows", rng.normal_tensor({cfg.max_rows, cfg.dim}, 0.0, 0.02));
        pos_cols_ = store.add("dit.pos.cols", rng.normal_tensor({cfg.max_cols, cfg.dim}, 0.0, 0.02));
        time_mlp_ = nn::Mlp(store, "dit.time_mlp", cfg.dim, cfg.dim, cfg.dim, rng);
        for (int i = 0; i < cfg.depth; ++i)
            blocks_.emplace_back(store, "dit.block" + std::to_string(i), cfg, rng);
        // zero-initialized head: an untrained model predicts zero noise
        head_ = nn::Linear(store, "dit.head", cfg.dim, patch_dim, rng, /*zero_init=*/true);
    }

    const DiTConfig& config() const { return cfg_; }

    // fused latent [T,h,w,C] (+ optional pose latent added before patchify)
    // -> predicted noise of the same shape
    ag::Var forward(const ag::Var& fused, const ConditionBundle& cond, double garment_scale) const {
        if (cond.timestep < 0 || cond.timestep >= cfg_.max_timestep)
            throw ContractError("DiT forward: timestep out of schedule range");
        ag::Var z = fused;
        if (cond.has_pose()) {
            check_same_shape(z.value(), cond.pose_latent.value(), "pose fusion");
            z = ag::add(z, cond.pose_latent);
        }
        TokenLayout layout;
        ag::Var patches = ag_ops::patchify(z, cfg_.patch, &layout);
        if (layout.frames > cfg_.max_frames || layout.rows > cfg_.max_rows || layout.cols > cfg_.max_cols)
            throw ConfigError("DiT forward: token grid exceeds configured capacity");
        ag::Var x = token_in_(patches);
        x = ag::add(x, position_embedding(layout));
        ag::Var temb = time_mlp_(ag::Var::constant(timestep_sinusoid(cond.timestep, cfg_.dim).reshaped(
            {1, cfg_.dim})));
        x = ag::add_rowvec(x, ag::reshape(temb, {cfg_.dim}));
        for (const DitBlock& blk : blocks_)
            x = blk.forward(x, cond, garment_scale);
        ag::Var out_tokens = head_(x);
        return ag_ops::unpatchify(out_tokens, cfg_.patch, layout, cfg_.latent_channels);
    }

    const std::vector<DitBlock>& blocks() const { return blocks_; }

private:
    ag::Var position_embedding(const TokenLayout& layout) const {
        std::vector<int64_t> fi, ri, ci;
        fi.reserve(static_cast<size_t>(layout.tokens()));
        for (int64_t t = 0; t < layout.frames; ++t)
            for (int64_t r = 0; r < layout.rows; ++r)
                for (int64_t c = 0; c < layout.cols; ++c) {
                    fi.push_back(t);
                    ri.push_back(r);
                    ci.push_back(c);
                }
        ag::Var e = ag::gather_rows(pos_frames_, fi);
        e = ag::add(e, ag::gather_rows(pos_rows_, ri));
        return ag::add(e, ag::gather_rows(pos_cols_, ci));
    }

    DiTConfig cfg_;
    nn::Linear token_in_;
    ag::Var pos_frames_, pos_rows_, pos_cols_;
    nn::Mlp time_mlp_;
    std::vector<DitBlock> blocks_;
    nn::Linear head_;
};

}  // namespace viti
