#pragma once

#include <cstddef>
#include <vector>

#include "fusevid/tensor.hpp"

namespace fusevid {

// Pixel-space clip: (N+1, H, W, 3), values in [0,1], N % 4 == 0, H and W
// multiples of 8.
struct VideoClip {
    Tensor frames;

    std::size_t frame_count() const { return frames.shape()[0]; }
    std::size_t height() const { return frames.shape()[1]; }
    std::size_t width() const { return frames.shape()[2]; }
};

// Latent-space clip: (n+1, h, w, C) with n = N/4, h = H/8, w = W/8.
struct VideoLatent {
    Tensor z;

    std::size_t frame_count() const { return z.shape()[0]; }
    std::size_t height() const { return z.shape()[1]; }
    std::size_t width() const { return z.shape()[2]; }
    std::size_t channels() const { return z.shape()[3]; }
};

struct PatchSpec {
    std::size_t q = 1;  // temporal patch size
    std::size_t p = 2;  // spatial patch size
};

// Toy stand-in for a pretrained 3D causal video autoencoder.
//
// Encoding: latent frame 0 is an 8x8 spatial average pool of source frame 0;
// latent frame g >= 1 averages its group of four source frames 4(g-1)+1..4g
// and then pools 8x8. A per-channel affine lift maps the 3 pooled channels to
// C latent channels: z[..., c] = scale[c] * pooled[..., c % 3] + bias[c].
// Decoding inverts the lift (averaging channels that share a source channel)
// and replicates nearest-neighbor 8x8 spatially and 4x temporally.
//
// The lift parameters are learnable in principle but frozen during training,
// mirroring a pretrained codec. Accumulation happens in double so a constant
// video round-trips exactly.
struct MediaCoder {
    std::size_t channels = 8;
    Tensor scale;  // (C) f64
    Tensor bias;   // (C) f64
};

VideoClip make_video_clip(Tensor frames);
VideoLatent make_video_latent(Tensor z);
MediaCoder make_media_coder(std::size_t channels);

VideoLatent compress(const VideoClip& v, const MediaCoder& coder);
// Non-finite values are sanitized to 0 and the output is clamped to [0,1], so
// the result is always a valid VideoClip even from a degenerate latent.
VideoClip decompress(const VideoLatent& z, const MediaCoder& coder);

// Rearranges the latent into L tokens of width q*p*p*C, one per (q,p,p,C)
// block, raster order temporal-major then row then column. q must divide the
// latent frame count and p the spatial extents; remainders are rejected.
Tensor patchify(const VideoLatent& z, const PatchSpec& spec);
// Exact inverse; dims is the original latent shape (n+1, h, w, C).
VideoLatent unpatchify(const Tensor& tokens, const std::vector<std::size_t>& dims,
                       const PatchSpec& spec);

// Token count for a latent shape under a patch spec.
std::size_t patch_token_count(const std::vector<std::size_t>& dims, const PatchSpec& spec);
std::size_t patch_token_width(const std::vector<std::size_t>& dims, const PatchSpec& spec);

}  // namespace fusevid
