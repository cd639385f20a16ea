#include "fusevid/denoiser.hpp"

#include <cmath>
#include <string>

#include "fusevid/errors.hpp"
#include "fusevid/rng.hpp"

namespace fusevid {
namespace {

Tensor trainable(Tensor t) {
    t.set_requires_grad(true);
    return t;
}

// Gaussian init scaled by 1/sqrt(fan_in).
Tensor init_linear(std::size_t out, std::size_t in, Rng& rng, DType dtype) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    return trainable(Tensor::randn({out, in}, rng, scale, dtype));
}

Tensor zero_param(std::vector<std::size_t> shape, DType dtype) {
    return trainable(Tensor::zeros(std::move(shape), dtype));
}

// y = x * W^T + b for W (out, in).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_rowvec(matmul(x, transpose(w)), b);
}

// x_norm * (1 + scale) + shift, vectors broadcast over rows.
Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale) {
    constexpr double kEps = 1e-5;
    Tensor normed = layer_norm(x, kEps);
    return add_rowvec(mul_rowvec(normed, add_scalar(scale, 1.0)), shift);
}

Tensor attention(const AttentionBlock& blk, const Tensor& x,
                 std::size_t heads) {
    const std::size_t d = x.shape()[1];
    const std::size_t dh = d / heads;
    Tensor qkv = linear(x, blk.qkv_weight, blk.qkv_bias);
    Tensor q = slice_cols(qkv, 0, d);
    Tensor k = slice_cols(qkv, d, d);
    Tensor v = slice_cols(qkv, 2 * d, d);

    std::vector<Tensor> head_outs;
    head_outs.reserve(heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor scores = scalar_mul(matmul(qh, transpose(kh)), inv_sqrt);
        head_outs.push_back(matmul(softmax_rows(scores), vh));
    }
    Tensor merged = heads == 1 ? head_outs.front() : concat(head_outs, 1);
    return linear(merged, blk.out_weight, blk.out_bias);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> DenoiserState::named_parameters()
    const {
    std::vector<std::pair<std::string, Tensor>> out = {
        {"video_in.weight", video_in_weight},
        {"video_in.bias", video_in_bias},
        {"text_in.weight", text_in_weight},
        {"text_in.bias", text_in_bias},
        {"pos_video", pos_video},
        {"pos_text", pos_text},
        {"t_mlp1.weight", t_mlp1_weight},
        {"t_mlp1.bias", t_mlp1_bias},
        {"t_mlp2.weight", t_mlp2_weight},
        {"t_mlp2.bias", t_mlp2_bias},
    };
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string prefix = "block" + std::to_string(b) + ".";
        const auto& blk = blocks[b];
        out.emplace_back(prefix + "qkv.weight", blk.qkv_weight);
        out.emplace_back(prefix + "qkv.bias", blk.qkv_bias);
        out.emplace_back(prefix + "attn_out.weight", blk.out_weight);
        out.emplace_back(prefix + "attn_out.bias", blk.out_bias);
        out.emplace_back(prefix + "mlp1.weight", blk.mlp1_weight);
        out.emplace_back(prefix + "mlp1.bias", blk.mlp1_bias);
        out.emplace_back(prefix + "mlp2.weight", blk.mlp2_weight);
        out.emplace_back(prefix + "mlp2.bias", blk.mlp2_bias);
        out.emplace_back(prefix + "mod.weight", blk.mod_weight);
        out.emplace_back(prefix + "mod.bias", blk.mod_bias);
    }
    out.emplace_back("out.weight", out_weight);
    out.emplace_back("out.bias", out_bias);
    return out;
}

std::vector<Tensor> DenoiserState::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

DenoiserState make_denoiser(const DenoiserConfig& cfg, std::uint64_t seed,
                            DType dtype) {
    if (cfg.d_model == 0 || cfg.d_model % cfg.heads != 0)
        throw ParamError("denoiser: d_model must be a positive multiple of "
                         "heads");
    if (cfg.d_model % 2 != 0)
        throw ParamError("denoiser: d_model must be even");
    if (cfg.depth == 0) throw ParamError("denoiser: depth must be >= 1");
    if (cfg.video_token_width == 0 || cfg.text_width == 0 ||
        cfg.max_video_tokens == 0 || cfg.max_text_tokens == 0)
        throw ParamError("denoiser: extents must be positive");

    Rng rng(seed);
    const std::size_t d = cfg.d_model;
    DenoiserState s;
    s.cfg = cfg;
    s.video_in_weight = init_linear(d, cfg.video_token_width, rng, dtype);
    s.video_in_bias = zero_param({d}, dtype);
    s.text_in_weight = init_linear(d, cfg.text_width, rng, dtype);
    s.text_in_bias = zero_param({d}, dtype);
    s.pos_video = trainable(
        Tensor::randn({cfg.max_video_tokens, d}, rng, 0.02, dtype));
    s.pos_text = trainable(
        Tensor::randn({cfg.max_text_tokens + 4, d}, rng, 0.02, dtype));
    s.t_mlp1_weight = init_linear(d, d, rng, dtype);
    s.t_mlp1_bias = zero_param({d}, dtype);
    s.t_mlp2_weight = init_linear(d, d, rng, dtype);
    s.t_mlp2_bias = zero_param({d}, dtype);
    for (std::size_t b = 0; b < cfg.depth; ++b) {
        AttentionBlock blk;
        blk.qkv_weight = init_linear(3 * d, d, rng, dtype);
        blk.qkv_bias = zero_param({3 * d}, dtype);
        blk.out_weight = init_linear(d, d, rng, dtype);
        blk.out_bias = zero_param({d}, dtype);
        blk.mlp1_weight = init_linear(4 * d, d, rng, dtype);
        blk.mlp1_bias = zero_param({4 * d}, dtype);
        blk.mlp2_weight = init_linear(d, 4 * d, rng, dtype);
        blk.mlp2_bias = zero_param({d}, dtype);
        blk.mod_weight = zero_param({4 * d, d}, dtype);
        blk.mod_bias = zero_param({4 * d}, dtype);
        s.blocks.push_back(std::move(blk));
    }
    s.out_weight = zero_param({cfg.video_token_width, d}, dtype);
    s.out_bias = zero_param({cfg.video_token_width}, dtype);
    return s;
}

Tensor timestep_embedding(std::size_t t, std::size_t d, std::size_t max_t) {
    if (t < 1) throw ParamError("timestep embedding: t must be >= 1");
    if (max_t > 0 && t > max_t)
        throw ParamError("timestep embedding: t=" + std::to_string(t) +
                         " exceeds max " + std::to_string(max_t));
    if (d < 2 || d % 2 != 0)
        throw ParamError("timestep embedding: width must be even and >= 2");
    const std::size_t half = d / 2;
    Tensor out = Tensor::zeros({d}, DType::f64);
    for (std::size_t k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(10000.0) *
                                     static_cast<double>(k) /
                                     static_cast<double>(half));
        const double angle = static_cast<double>(t) * freq;
        out.set_value_at(k, std::sin(angle));
        out.set_value_at(half + k, std::cos(angle));
    }
    return out;
}

Tensor denoise(const DenoiserState& state, const Tensor& video_tokens,
               const FusedConditioning& cond, std::size_t t) {
    const auto& cfg = state.cfg;
    const Tensor& text = cond.sequence;
    if (video_tokens.rank() != 2 ||
        video_tokens.shape()[1] != cfg.video_token_width)
        throw ShapeError("denoiser: video tokens must be (*, " +
                         std::to_string(cfg.video_token_width) + "), got " +
                         shape_to_string(video_tokens.shape()));
    if (text.rank() != 2 || text.shape()[1] != cfg.text_width)
        throw ShapeError("denoiser: conditioning must be (*, " +
                         std::to_string(cfg.text_width) + "), got " +
                         shape_to_string(text.shape()));
    const std::size_t n_video = video_tokens.shape()[0];
    const std::size_t n_text = text.shape()[0];
    if (n_video > cfg.max_video_tokens)
        throw CapacityError("denoiser: " + std::to_string(n_video) +
                            " video tokens exceed capacity " +
                            std::to_string(cfg.max_video_tokens));
    if (n_text > cfg.max_text_tokens + 4)
        throw CapacityError("denoiser: " + std::to_string(n_text) +
                            " conditioning tokens exceed capacity " +
                            std::to_string(cfg.max_text_tokens + 4));

    const std::size_t d = cfg.d_model;
    DType dt = video_tokens.dtype();

    // Timestep conditioning vector u = MLP(sinusoid(t)), kept as a row.
    Tensor sinus = timestep_embedding(t, d, cfg.max_timestep);
    if (dt == DType::f32) {
        Tensor cast = Tensor::zeros({d}, dt);
        for (std::size_t i = 0; i < d; ++i)
            cast.set_value_at(i, sinus.value_at(i));
        sinus = cast;
    }
    Tensor u = reshape(sinus, {1, d});
    u = linear(u, state.t_mlp1_weight, state.t_mlp1_bias);
    u = linear(gelu(u), state.t_mlp2_weight, state.t_mlp2_bias);

    // Project segments, add positions: text first, then video.
    Tensor text_h = linear(text, state.text_in_weight, state.text_in_bias);
    text_h = add(text_h, slice_rows(state.pos_text, 0, n_text));
    Tensor video_h =
        linear(video_tokens, state.video_in_weight, state.video_in_bias);
    video_h = add(video_h, slice_rows(state.pos_video, 0, n_video));
    Tensor x = concat({text_h, video_h}, 0);

    for (const auto& blk : state.blocks) {
        Tensor mods = linear(u, blk.mod_weight, blk.mod_bias);  // (1, 4d)
        Tensor shift1 = reshape(slice_cols(mods, 0, d), {d});
        Tensor scale1 = reshape(slice_cols(mods, d, d), {d});
        Tensor shift2 = reshape(slice_cols(mods, 2 * d, d), {d});
        Tensor scale2 = reshape(slice_cols(mods, 3 * d, d), {d});

        x = add(x, attention(blk, modulate(x, shift1, scale1), cfg.heads));
        Tensor h = modulate(x, shift2, scale2);
        h = linear(gelu(linear(h, blk.mlp1_weight, blk.mlp1_bias)),
                   blk.mlp2_weight, blk.mlp2_bias);
        x = add(x, h);
    }

    Tensor video_out = slice_rows(x, n_text, n_video);
    return linear(video_out, state.out_weight, state.out_bias);
}

}  // namespace fusevid
