#include "fusevid/media.hpp"

#include <cmath>

#include "fusevid/errors.hpp"

namespace fusevid {

namespace {

constexpr std::size_t kTemporalRate = 4;
constexpr std::size_t kSpatialRate = 8;

}  // namespace

VideoClip make_video_clip(Tensor frames) {
    if (frames.rank() != 4 || frames.shape()[3] != 3) {
        throw ShapeError("video clip: expected (N+1, H, W, 3), got " +
                         shape_to_string(frames.shape()));
    }
    const std::size_t f = frames.shape()[0], h = frames.shape()[1], w = frames.shape()[2];
    if (f == 0 || (f - 1) % kTemporalRate != 0) {
        throw ShapeError("video clip: frame count " + std::to_string(f) +
                         " is not 4k+1");
    }
    if (h % kSpatialRate != 0 || w % kSpatialRate != 0) {
        throw ShapeError("video clip: spatial extents must be multiples of 8, got " +
                         shape_to_string(frames.shape()));
    }
    detail::with_dtype(frames.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const auto d = frames.data<T>();
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!(d[i] >= T(0) && d[i] <= T(1))) {
                throw ParamError("video clip: value " + std::to_string(double(d[i])) +
                                 " at element " + std::to_string(i) + " outside [0,1]");
            }
        }
    });
    return VideoClip{std::move(frames)};
}

VideoLatent make_video_latent(Tensor z) {
    if (z.rank() != 4) {
        throw ShapeError("video latent: expected rank 4, got " + shape_to_string(z.shape()));
    }
    if (z.shape()[0] == 0 || z.shape()[3] == 0) {
        throw ShapeError("video latent: empty frame or channel axis in " +
                         shape_to_string(z.shape()));
    }
    return VideoLatent{std::move(z)};
}

MediaCoder make_media_coder(std::size_t channels) {
    if (channels < 3) throw ParamError("media coder: needs at least 3 channels");
    MediaCoder c;
    c.channels = channels;
    // Affine head maps pooled [0,1] pixel values onto the symmetric unit
    // range the diffusion process assumes; without it the latent signal is an
    // order of magnitude smaller than the injected noise.
    c.scale = Tensor::full({channels}, 2.0, DType::f64);
    c.bias = Tensor::full({channels}, -1.0, DType::f64);
    return c;
}

VideoLatent compress(const VideoClip& v, const MediaCoder& coder) {
    const std::size_t frames = v.frame_count();
    const std::size_t H = v.height(), W = v.width();
    const std::size_t n1 = (frames - 1) / kTemporalRate + 1;
    const std::size_t h = H / kSpatialRate, w = W / kSpatialRate;
    const std::size_t C = coder.channels;

    Tensor out = Tensor::zeros({n1, h, w, C}, v.frames.dtype());
    const auto scale = coder.scale.data<double>();
    const auto bias = coder.bias.data<double>();

    detail::with_dtype(v.frames.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* src = v.frames.data<T>().data();
        T* dst = out.data<T>().data();

        // Pool one latent frame from [src_lo, src_hi] in double precision.
        auto pool_group = [&](std::size_t g, std::size_t src_lo, std::size_t src_hi) {
            const double inv =
                1.0 / static_cast<double>((src_hi - src_lo + 1) * kSpatialRate * kSpatialRate);
            for (std::size_t i = 0; i < h; ++i) {
                for (std::size_t j = 0; j < w; ++j) {
                    double pooled[3] = {0.0, 0.0, 0.0};
                    for (std::size_t f = src_lo; f <= src_hi; ++f) {
                        for (std::size_t di = 0; di < kSpatialRate; ++di) {
                            const std::size_t base =
                                ((f * H + i * kSpatialRate + di) * W + j * kSpatialRate) * 3;
                            for (std::size_t dj = 0; dj < kSpatialRate; ++dj) {
                                pooled[0] += src[base + dj * 3 + 0];
                                pooled[1] += src[base + dj * 3 + 1];
                                pooled[2] += src[base + dj * 3 + 2];
                            }
                        }
                    }
                    for (std::size_t c = 0; c < 3; ++c) pooled[c] *= inv;
                    T* orow = dst + ((g * h + i) * w + j) * C;
                    for (std::size_t c = 0; c < C; ++c) {
                        orow[c] = static_cast<T>(scale[c] * pooled[c % 3] + bias[c]);
                    }
                }
            }
        };

        pool_group(0, 0, 0);  // causal head: latent frame 0 sees source frame 0 only
        for (std::size_t g = 1; g < n1; ++g) {
            pool_group(g, kTemporalRate * (g - 1) + 1, kTemporalRate * g);
        }
    });
    return VideoLatent{std::move(out)};
}

VideoClip decompress(const VideoLatent& z, const MediaCoder& coder) {
    const std::size_t n1 = z.frame_count();
    const std::size_t h = z.height(), w = z.width();
    const std::size_t C = z.channels();
    if (C != coder.channels) {
        throw ShapeError("decompress: latent has " + std::to_string(C) + " channels, coder has " +
                         std::to_string(coder.channels));
    }
    const std::size_t frames = (n1 - 1) * kTemporalRate + 1;
    const std::size_t H = h * kSpatialRate, W = w * kSpatialRate;

    Tensor out = Tensor::zeros({frames, H, W, 3}, z.z.dtype());
    const auto scale = coder.scale.data<double>();
    const auto bias = coder.bias.data<double>();

    std::size_t share[3] = {0, 0, 0};
    for (std::size_t c = 0; c < C; ++c) ++share[c % 3];

    detail::with_dtype(z.z.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* src = z.z.data<T>().data();
        T* dst = out.data<T>().data();
        for (std::size_t g = 0; g < n1; ++g) {
            const std::size_t f_lo = g == 0 ? 0 : kTemporalRate * (g - 1) + 1;
            const std::size_t f_hi = g == 0 ? 0 : kTemporalRate * g;
            for (std::size_t i = 0; i < h; ++i) {
                for (std::size_t j = 0; j < w; ++j) {
                    const T* zrow = src + ((g * h + i) * w + j) * C;
                    double rgb[3] = {0.0, 0.0, 0.0};
                    for (std::size_t c = 0; c < C; ++c) {
                        rgb[c % 3] += (static_cast<double>(zrow[c]) - bias[c]) / scale[c];
                    }
                    T px[3];
                    for (std::size_t c = 0; c < 3; ++c) {
                        double v = rgb[c] / static_cast<double>(share[c]);
                        if (!std::isfinite(v)) v = 0.0;
                        if (v < 0.0) v = 0.0;
                        if (v > 1.0) v = 1.0;
                        px[c] = static_cast<T>(v);
                    }
                    for (std::size_t f = f_lo; f <= f_hi; ++f) {
                        for (std::size_t di = 0; di < kSpatialRate; ++di) {
                            T* orow =
                                dst + ((f * H + i * kSpatialRate + di) * W + j * kSpatialRate) * 3;
                            for (std::size_t dj = 0; dj < kSpatialRate; ++dj) {
                                orow[dj * 3 + 0] = px[0];
                                orow[dj * 3 + 1] = px[1];
                                orow[dj * 3 + 2] = px[2];
                            }
                        }
                    }
                }
            }
        }
    });
    return VideoClip{std::move(out)};
}

std::size_t patch_token_count(const std::vector<std::size_t>& dims, const PatchSpec& spec) {
    if (dims.size() != 4) throw ShapeError("patchify: latent shape must be rank 4");
    if (spec.q == 0 || spec.p == 0) throw ParamError("patchify: patch sizes must be positive");
    if (dims[0] % spec.q != 0) {
        throw ShapeError("patchify: temporal extent " + std::to_string(dims[0]) +
                         " not divisible by q=" + std::to_string(spec.q));
    }
    if (dims[1] % spec.p != 0 || dims[2] % spec.p != 0) {
        throw ShapeError("patchify: spatial extents " + std::to_string(dims[1]) + "x" +
                         std::to_string(dims[2]) + " not divisible by p=" +
                         std::to_string(spec.p));
    }
    return (dims[0] / spec.q) * (dims[1] / spec.p) * (dims[2] / spec.p);
}

std::size_t patch_token_width(const std::vector<std::size_t>& dims, const PatchSpec& spec) {
    return spec.q * spec.p * spec.p * dims[3];
}

Tensor patchify(const VideoLatent& z, const PatchSpec& spec) {
    const auto& dims = z.z.shape();
    const std::size_t L = patch_token_count(dims, spec);
    const std::size_t width = patch_token_width(dims, spec);
    const std::size_t n1 = dims[0], h = dims[1], w = dims[2], C = dims[3];
    const std::size_t th = h / spec.p, tw = w / spec.p;

    Tensor out = Tensor::zeros({L, width}, z.z.dtype());
    detail::with_dtype(z.z.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* src = z.z.data<T>().data();
        T* dst = out.data<T>().data();
        std::size_t tok = 0;
        for (std::size_t g = 0; g < n1 / spec.q; ++g) {
            for (std::size_t bi = 0; bi < th; ++bi) {
                for (std::size_t bj = 0; bj < tw; ++bj, ++tok) {
                    T* trow = dst + tok * width;
                    std::size_t k = 0;
                    for (std::size_t dt = 0; dt < spec.q; ++dt) {
                        for (std::size_t di = 0; di < spec.p; ++di) {
                            for (std::size_t dj = 0; dj < spec.p; ++dj) {
                                const std::size_t base =
                                    (((g * spec.q + dt) * h + bi * spec.p + di) * w + bj * spec.p +
                                     dj) *
                                    C;
                                for (std::size_t c = 0; c < C; ++c) trow[k++] = src[base + c];
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

VideoLatent unpatchify(const Tensor& tokens, const std::vector<std::size_t>& dims,
                       const PatchSpec& spec) {
    const std::size_t L = patch_token_count(dims, spec);
    const std::size_t width = patch_token_width(dims, spec);
    if (tokens.rank() != 2 || tokens.shape()[0] != L || tokens.shape()[1] != width) {
        throw ShapeError("unpatchify: expected tokens (" + std::to_string(L) + ", " +
                         std::to_string(width) + "), got " + shape_to_string(tokens.shape()));
    }
    const std::size_t n1 = dims[0], h = dims[1], w = dims[2], C = dims[3];
    const std::size_t th = h / spec.p, tw = w / spec.p;

    Tensor out = Tensor::zeros(dims, tokens.dtype());
    detail::with_dtype(tokens.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* src = tokens.data<T>().data();
        T* dst = out.data<T>().data();
        std::size_t tok = 0;
        for (std::size_t g = 0; g < n1 / spec.q; ++g) {
            for (std::size_t bi = 0; bi < th; ++bi) {
                for (std::size_t bj = 0; bj < tw; ++bj, ++tok) {
                    const T* trow = src + tok * width;
                    std::size_t k = 0;
                    for (std::size_t dt = 0; dt < spec.q; ++dt) {
                        for (std::size_t di = 0; di < spec.p; ++di) {
                            for (std::size_t dj = 0; dj < spec.p; ++dj) {
                                const std::size_t base =
                                    (((g * spec.q + dt) * h + bi * spec.p + di) * w + bj * spec.p +
                                     dj) *
                                    C;
                                for (std::size_t c = 0; c < C; ++c) dst[base + c] = trow[k++];
                            }
                        }
                    }
                }
            }
        }
    });
    return VideoLatent{std::move(out)};
}

}  // namespace fusevid
