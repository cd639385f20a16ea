#pragma once

#include <cstddef>
#include <vector>

#include "fusevid/tensor.hpp"
#include "fusevid/textcond.hpp"

namespace fusevid {

// Token fuser: merges narrow encoder tokens with wide decoder tokens
// through zero-initialized residual paths, so a fresh fuser is an exact
// identity on the encoder sequence and the decoder influence has to be
// learned from zero.

// Per-token affine map whose weight and bias start exactly zero.
struct ZeroConvLayer {
    Tensor weight;  // (d, d)
    Tensor bias;    // (d)
};

// Layer normalization over the feature axis followed by learnable
// elementwise gamma * x + beta_bias.
struct NormScale {
    Tensor gamma;      // (d)
    Tensor beta_bias;  // (d)
    double eps = 1e-5;
};

struct FuserOptions {
    double alpha = 1.0;        // weight on the pooled decoder path
    double gamma_init = 0.01;  // initial norm scale
    double eps = 1e-5;
    bool use_norm = true;
    bool use_zero_conv = true;
    bool use_ss = true;       // append stabilizer tokens
    bool use_decoder = true;  // false: encoder-only conditioning
};

struct FuserState {
    ZeroConvLayer z_theta;  // residual on the encoder tokens
    ZeroConvLayer z_beta;   // projection of the normalized decoder tokens
    NormScale norm;
    Tensor e_l;  // (4, d) learnable stabilizer offsets, zero at init
    FuserOptions opts;

    std::size_t width() const { return e_l.shape()[1]; }
    // Trainable tensors in a fixed order (weights, biases, gamma,
    // beta_bias, e_l).
    std::vector<Tensor> parameters() const;
};

// Conditioning sequence handed to the denoiser: (m, d) for encoder-only
// or stabilizer-off arms, (m + 4, d) when stabilizer tokens are appended.
struct FusedConditioning {
    Tensor sequence;
};

FuserState make_fuser(std::size_t d, const FuserOptions& opts = {},
                      DType dtype = DType::f32);

// layer_norm over the feature axis, then gamma * x + beta_bias.
Tensor norm_scale(const NormScale& ns, const Tensor& e_beta);

// tokens * weight^T + bias, applied per token row.
Tensor zero_conv_apply(const ZeroConvLayer& layer, const Tensor& tokens);

// e_theta' = e_theta_raw + Z_theta(e_theta_raw)
// e_beta'  = Z_beta(norm_scale(e_beta_raw))
// result   = e_theta' + alpha * mean-pool(e_beta') broadcast to all rows.
// Honors use_norm / use_zero_conv reductions; ignores use_decoder and
// use_ss (those act in condition()).
Tensor fuse(const FuserState& state, const Tensor& e_theta_raw,
            const Tensor& e_beta_raw);

// e_s = e_i + e_l.
Tensor stabilize(const FuserState& state, const Tensor& e_i);

// concat(e, e_s) along the sequence axis.
FusedConditioning assemble(const Tensor& e, const Tensor& e_s);

// Full pipeline over a simulated token bundle.  use_decoder=false
// bypasses the fuser entirely (the conditioning is the raw encoder
// sequence, no parameters touched); use_ss=false drops the stabilizer
// block.
FusedConditioning condition(const FuserState& state,
                            const TokenBundle& bundle);

}  // namespace fusevid
