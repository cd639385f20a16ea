#include "fusevid/fuser.hpp"

#include <string>

#include "fusevid/errors.hpp"

namespace fusevid {
namespace {

void check_width(const Tensor& t, std::size_t d, const char* what) {
    if (t.rank() != 2 || t.shape()[1] != d)
        throw ShapeError(std::string("fuser: ") + what + " must be (*, " +
                         std::to_string(d) + "), got " +
                         shape_to_string(t.shape()));
}

Tensor trainable(Tensor t) {
    t.set_requires_grad(true);
    return t;
}

}  // namespace

std::vector<Tensor> FuserState::parameters() const {
    return {z_theta.weight, z_theta.bias, z_beta.weight, z_beta.bias,
            norm.gamma,     norm.beta_bias, e_l};
}

FuserState make_fuser(std::size_t d, const FuserOptions& opts, DType dtype) {
    if (d == 0) throw ParamError("fuser: width must be positive");
    if (opts.eps <= 0.0) throw ParamError("fuser: eps must be positive");
    FuserState s;
    s.z_theta.weight = trainable(Tensor::zeros({d, d}, dtype));
    s.z_theta.bias = trainable(Tensor::zeros({d}, dtype));
    s.z_beta.weight = trainable(Tensor::zeros({d, d}, dtype));
    s.z_beta.bias = trainable(Tensor::zeros({d}, dtype));
    s.norm.gamma = trainable(Tensor::full({d}, opts.gamma_init, dtype));
    s.norm.beta_bias = trainable(Tensor::zeros({d}, dtype));
    s.norm.eps = opts.eps;
    s.e_l = trainable(Tensor::zeros({4, d}, dtype));
    s.opts = opts;
    return s;
}

Tensor norm_scale(const NormScale& ns, const Tensor& e_beta) {
    check_width(e_beta, ns.gamma.shape()[0], "norm input");
    Tensor normed = layer_norm(e_beta, ns.eps);
    return add_rowvec(mul_rowvec(normed, ns.gamma), ns.beta_bias);
}

Tensor zero_conv_apply(const ZeroConvLayer& layer, const Tensor& tokens) {
    check_width(tokens, layer.weight.shape()[0], "zero-conv input");
    return add_rowvec(matmul(tokens, transpose(layer.weight)), layer.bias);
}

Tensor fuse(const FuserState& state, const Tensor& e_theta_raw,
            const Tensor& e_beta_raw) {
    const std::size_t d = state.width();
    check_width(e_theta_raw, d, "encoder tokens");
    check_width(e_beta_raw, d, "decoder tokens");

    Tensor e_theta = state.opts.use_zero_conv
                         ? add(e_theta_raw,
                               zero_conv_apply(state.z_theta, e_theta_raw))
                         : e_theta_raw;

    Tensor e_beta = e_beta_raw;
    if (state.opts.use_norm) e_beta = norm_scale(state.norm, e_beta);
    if (state.opts.use_zero_conv)
        e_beta = zero_conv_apply(state.z_beta, e_beta);

    Tensor pooled =
        broadcast_rows(mean_over_rows(e_beta), e_theta_raw.shape()[0]);
    return add(e_theta, scalar_mul(pooled, state.opts.alpha));
}

Tensor stabilize(const FuserState& state, const Tensor& e_i) {
    check_width(e_i, state.width(), "instruction tokens");
    if (e_i.shape()[0] != 4)
        throw ShapeError("fuser: stabilizer expects 4 instruction tokens, "
                         "got " +
                         std::to_string(e_i.shape()[0]));
    return add(e_i, state.e_l);
}

FusedConditioning assemble(const Tensor& e, const Tensor& e_s) {
    if (e.rank() != 2 || e_s.rank() != 2 || e.shape()[1] != e_s.shape()[1])
        throw ShapeError("fuser: assemble width mismatch: " +
                         shape_to_string(e.shape()) + " vs " +
                         shape_to_string(e_s.shape()));
    return FusedConditioning{concat({e, e_s}, 0)};
}

FusedConditioning condition(const FuserState& state,
                            const TokenBundle& bundle) {
    if (!state.opts.use_decoder)
        return FusedConditioning{bundle.encoder};
    Tensor e = fuse(state, bundle.encoder, bundle.decoder_tokens());
    if (!state.opts.use_ss) return FusedConditioning{e};
    return assemble(e, stabilize(state, bundle.instruction));
}

}  // namespace fusevid
