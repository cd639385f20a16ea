#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fusevid/fuser.hpp"
#include "fusevid/tensor.hpp"

namespace fusevid {

// Joint-sequence diffusion transformer: conditioning tokens and video
// tokens are projected to a common width, concatenated (text first), run
// through full self-attention blocks with timestep-adaptive layer norm,
// and only the video positions are read out.

struct DenoiserConfig {
    std::size_t d_model = 64;
    std::size_t depth = 2;
    std::size_t heads = 4;
    std::size_t video_token_width = 128;  // w_v of incoming patch tokens
    std::size_t text_width = 32;          // width of conditioning tokens
    std::size_t max_video_tokens = 64;
    std::size_t max_text_tokens = 16;  // encoder tokens; +4 stabilizer rows
    std::size_t max_timestep = 1000;
};

struct AttentionBlock {
    Tensor qkv_weight;   // (3*d_model, d_model)
    Tensor qkv_bias;     // (3*d_model)
    Tensor out_weight;   // (d_model, d_model)
    Tensor out_bias;     // (d_model)
    Tensor mlp1_weight;  // (4*d_model, d_model)
    Tensor mlp1_bias;    // (4*d_model)
    Tensor mlp2_weight;  // (d_model, 4*d_model)
    Tensor mlp2_bias;    // (d_model)
    Tensor mod_weight;   // (4*d_model, d_model), zero at init
    Tensor mod_bias;     // (4*d_model), zero at init
};

struct DenoiserState {
    DenoiserConfig cfg;
    Tensor video_in_weight;  // (d_model, w_v)
    Tensor video_in_bias;    // (d_model)
    Tensor text_in_weight;   // (d_model, text_width)
    Tensor text_in_bias;     // (d_model)
    Tensor pos_video;        // (max_video_tokens, d_model)
    Tensor pos_text;         // (max_text_tokens + 4, d_model)
    Tensor t_mlp1_weight;    // (d_model, d_model)
    Tensor t_mlp1_bias;      // (d_model)
    Tensor t_mlp2_weight;    // (d_model, d_model)
    Tensor t_mlp2_bias;      // (d_model)
    std::vector<AttentionBlock> blocks;
    Tensor out_weight;  // (w_v, d_model), zero at init
    Tensor out_bias;    // (w_v), zero at init

    // Stable name -> tensor pairs in a fixed order, for the optimizer and
    // checkpoints.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> parameters() const;
};

DenoiserState make_denoiser(const DenoiserConfig& cfg, std::uint64_t seed,
                            DType dtype = DType::f32);

// Sinusoidal features for step t, shape (d), before any learned layers.
// Requires 1 <= t (<= max_t when max_t > 0) and even d >= 2.
Tensor timestep_embedding(std::size_t t, std::size_t d,
                          std::size_t max_t = 0);

// Predicts a tensor shaped like video_tokens from the joint sequence.
Tensor denoise(const DenoiserState& state, const Tensor& video_tokens,
               const FusedConditioning& cond, std::size_t t);

}  // namespace fusevid
