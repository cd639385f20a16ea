// Acceptance gate: ten end-to-end checks over the artifact, one pass/fail
// line each on stdout.  Exit code 0 only when every line passes.  All work
// runs at thread count 1 so every logged number is bit-reproducible.
#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fusevid/analysis.hpp"
#include "fusevid/corpus.hpp"
#include "fusevid/dataset.hpp"
#include "fusevid/denoiser.hpp"
#include "fusevid/errors.hpp"
#include "fusevid/fuser.hpp"
#include "fusevid/grad_check.hpp"
#include "fusevid/media.hpp"
#include "fusevid/rng.hpp"
#include "fusevid/schedule.hpp"
#include "fusevid/tensor.hpp"
#include "fusevid/textcond.hpp"
#include "fusevid/train.hpp"

namespace fs = std::filesystem;
using namespace fusevid;

namespace {

std::vector<std::string> g_notes;

void note(std::string s) { g_notes.push_back(std::move(s)); }

bool bits_equal(const Tensor& a, const Tensor& b) {
    if (a.dtype() != b.dtype() || a.shape() != b.shape()) return false;
    if (a.dtype() == DType::f32)
        return std::memcmp(a.data<float>().data(), b.data<float>().data(),
                           a.numel() * sizeof(float)) == 0;
    return std::memcmp(a.data<double>().data(), b.data<double>().data(),
                       a.numel() * sizeof(double)) == 0;
}

Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
    Rng rng(seed);
    Tensor r = Tensor::randn(t.shape(), rng, 1.0, t.dtype());
    return sum_all(mul(t, r));
}

void randomize(Tensor& t, std::uint64_t seed, double scale = 0.1) {
    Rng rng(seed);
    if (t.dtype() == DType::f64) {
        for (auto& v : t.data<double>()) v = rng.normal() * scale;
    } else {
        for (auto& v : t.data<float>())
            v = static_cast<float>(rng.normal() * scale);
    }
}

std::vector<Tensor*> denoiser_param_ptrs(DenoiserState& s) {
    std::vector<Tensor*> out = {
        &s.video_in_weight, &s.video_in_bias, &s.text_in_weight,
        &s.text_in_bias,    &s.pos_video,     &s.pos_text,
        &s.t_mlp1_weight,   &s.t_mlp1_bias,   &s.t_mlp2_weight,
        &s.t_mlp2_bias,
    };
    for (auto& blk : s.blocks) {
        out.push_back(&blk.qkv_weight);
        out.push_back(&blk.qkv_bias);
        out.push_back(&blk.out_weight);
        out.push_back(&blk.out_bias);
        out.push_back(&blk.mlp1_weight);
        out.push_back(&blk.mlp1_bias);
        out.push_back(&blk.mlp2_weight);
        out.push_back(&blk.mlp2_bias);
        out.push_back(&blk.mod_weight);
        out.push_back(&blk.mod_bias);
    }
    out.push_back(&s.out_weight);
    out.push_back(&s.out_bias);
    return out;
}

bool set_fuser_param(FuserState& s, std::size_t i, const Tensor& t) {
    switch (i) {
        case 0: s.z_theta.weight = t; return true;
        case 1: s.z_theta.bias = t; return true;
        case 2: s.z_beta.weight = t; return true;
        case 3: s.z_beta.bias = t; return true;
        case 4: s.norm.gamma = t; return true;
        case 5: s.norm.beta_bias = t; return true;
        case 6: s.e_l = t; return true;
        default: return false;
    }
}

std::string nth_prompt(std::size_t i) {
    SceneSpec sp;
    sp.count = 1 + i % 3;
    sp.color = static_cast<SceneColor>((i / 3) % 3);
    sp.direction = static_cast<SceneDirection>((i / 9) % 4);
    return scene_prompt(sp);
}

double window_mean(const std::vector<double>& v, bool tail,
                   std::size_t k = 25) {
    k = std::min(k, v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        s += tail ? v[v.size() - 1 - i] : v[i];
    return s / static_cast<double>(k);
}

// ---------------------------------------------------------------- 1
bool init_identity() {
    bool ok = true;
    for (std::size_t i = 0; i < 100; ++i) {
        const std::string prompt = nth_prompt(i);
        TokenBundle b = simulate_bundle(prompt, 32, 1000 + i, 2000 + i);
        FuserState f = make_fuser(32);
        Tensor got = condition(f, b).sequence;
        Tensor want = concat({b.encoder, b.instruction}, 0);
        if (!bits_equal(got, want)) {
            note("prompt " + std::to_string(i) + " not bit-identical");
            ok = false;
        }
    }
    return ok;
}

// ---------------------------------------------------------------- 2
bool gradient_suite() {
    double worst = 0.0;
    auto track = [&](const char* what, const GradReport& rep) {
        worst = std::max(worst, rep.max_relative_error);
        if (rep.max_relative_error >= 1e-5)
            note(std::string(what) + ": max relative error " +
                 std::to_string(rep.max_relative_error));
    };

    const std::size_t d = 8;
    Rng rng(5);
    Tensor e_beta = Tensor::randn({6, d}, rng, 1.0, DType::f64);
    Tensor e_theta = Tensor::randn({4, d}, rng, 0.3, DType::f64);
    Tensor e_i = Tensor::randn({4, d}, rng, 0.5, DType::f64);

    FuserState fus = make_fuser(d, {}, DType::f64);
    auto fus_params = fus.parameters();
    for (std::size_t i = 0; i < fus_params.size(); ++i)
        randomize(fus_params[i], 90 + i, 0.1);

    // norm_scale: input and both parameters.
    track("norm_scale/input", grad_check(
        [&](const Tensor& x) {
            return weighted_sum(norm_scale(fus.norm, x), 11);
        }, e_beta));
    track("norm_scale/gamma", grad_check(
        [&](const Tensor& g) {
            NormScale ns = fus.norm;
            ns.gamma = g;
            return weighted_sum(norm_scale(ns, e_beta), 12);
        }, fus.norm.gamma));
    track("norm_scale/beta_bias", grad_check(
        [&](const Tensor& bb) {
            NormScale ns = fus.norm;
            ns.beta_bias = bb;
            return weighted_sum(norm_scale(ns, e_beta), 13);
        }, fus.norm.beta_bias));

    // zero_conv: input, weight, bias.
    track("zero_conv/input", grad_check(
        [&](const Tensor& x) {
            return weighted_sum(zero_conv_apply(fus.z_beta, x), 14);
        }, e_beta));
    track("zero_conv/weight", grad_check(
        [&](const Tensor& w) {
            ZeroConvLayer zc = fus.z_beta;
            zc.weight = w;
            return weighted_sum(zero_conv_apply(zc, e_beta), 15);
        }, fus.z_beta.weight));
    track("zero_conv/bias", grad_check(
        [&](const Tensor& b) {
            ZeroConvLayer zc = fus.z_beta;
            zc.bias = b;
            return weighted_sum(zero_conv_apply(zc, e_beta), 16);
        }, fus.z_beta.bias));

    // fuse: every fuser parameter plus both inputs.
    for (std::size_t i = 0; i < fus_params.size(); ++i) {
        auto f = [&, i](const Tensor& probe) {
            FuserState f2 = fus;
            set_fuser_param(f2, i, probe);
            return weighted_sum(fuse(f2, e_theta, e_beta), 20 + i);
        };
        track("fuse/param", grad_check(f, fus_params[i]));
    }
    track("fuse/e_theta", grad_check(
        [&](const Tensor& x) { return weighted_sum(fuse(fus, x, e_beta), 30); },
        e_theta));
    track("fuse/e_beta", grad_check(
        [&](const Tensor& x) { return weighted_sum(fuse(fus, e_theta, x), 31); },
        e_beta));

    // stabilize: learnable tokens and input.
    track("stabilize/e_l", grad_check(
        [&](const Tensor& el) {
            FuserState f2 = fus;
            f2.e_l = el;
            return weighted_sum(stabilize(f2, e_i), 32);
        }, fus.e_l));
    track("stabilize/e_i", grad_check(
        [&](const Tensor& x) { return weighted_sum(stabilize(fus, x), 33); },
        e_i));

    // denoise: a 2-block, 16-wide model, every parameter, plus the fuser
    // parameters reached through the conditioning path.
    DenoiserConfig cfg;
    cfg.d_model = 16;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.video_token_width = 6;
    cfg.text_width = 5;
    cfg.max_video_tokens = 4;
    cfg.max_text_tokens = 8;
    cfg.max_timestep = 50;
    DenoiserState den = make_denoiser(cfg, 17, DType::f64);
    randomize(den.out_weight, 18, 0.2);
    randomize(den.out_bias, 19, 0.1);

    FuserState fus5 = make_fuser(5, {}, DType::f64);
    auto fus5_params = fus5.parameters();
    for (std::size_t i = 0; i < fus5_params.size(); ++i)
        randomize(fus5_params[i], 190 + i, 0.1);
    TokenBundle bundle = simulate_bundle("two red squares", 5, 23, 24,
                                         SimParams{.dtype = DType::f64});
    Rng vr(4);
    Tensor video = Tensor::randn({3, 6}, vr, 1.0, DType::f64);
    const std::size_t t = 21;

    auto base = den.parameters();
    FusedConditioning cond = condition(fus5, bundle);
    for (std::size_t i = 0; i < base.size(); ++i) {
        auto f = [&, i](const Tensor& probe) {
            DenoiserState s2 = den;
            *denoiser_param_ptrs(s2)[i] = probe;
            return weighted_sum(denoise(s2, video, cond, t), 300 + i);
        };
        track("denoise/param", grad_check(f, base[i]));
    }
    for (std::size_t i = 0; i < fus5_params.size(); ++i) {
        auto f = [&, i](const Tensor& probe) {
            FuserState f2 = fus5;
            set_fuser_param(f2, i, probe);
            return weighted_sum(denoise(den, video, condition(f2, bundle), t),
                                400 + i);
        };
        track("denoise/fuser-param", grad_check(f, fus5_params[i]));
    }
    return worst < 1e-5;
}

// ---------------------------------------------------------------- 3
bool terminal_snr() {
    bool ok = true;
    for (std::size_t T : {50u, 1000u}) {
        Schedule plain = make_schedule(T, 0.00085, 0.012, PredictionMode::v,
                                       false);
        Schedule zs = make_schedule(T, 0.00085, 0.012, PredictionMode::v,
                                    true);
        if (std::abs(zs.sab(T)) > std::numeric_limits<double>::min()) {
            note("T=" + std::to_string(T) + ": terminal signal " +
                 std::to_string(zs.sab(T)));
            ok = false;
        }
        const double rel =
            std::abs(zs.sab(1) - plain.sab(1)) / std::abs(plain.sab(1));
        if (!(rel < 1e-12)) {
            note("T=" + std::to_string(T) + ": first step moved by " +
                 std::to_string(rel));
            ok = false;
        }
    }
    try {
        make_schedule(50, 0.00085, 0.012, PredictionMode::epsilon, true);
        note("epsilon target at zero terminal signal was accepted");
        ok = false;
    } catch (const Error&) {
    }
    return ok;
}

// ---------------------------------------------------------------- 4
bool reconstruction_roundtrip() {
    bool ok = true;
    Rng rng(6);
    Tensor z0 = Tensor::randn({6, 8}, rng, 1.0, DType::f64);
    Tensor eps = Tensor::randn({6, 8}, rng, 1.0, DType::f64);
    for (bool zs : {true, false}) {
        PredictionMode mode = zs ? PredictionMode::v : PredictionMode::epsilon;
        Schedule s = make_schedule(50, 0.00085, 0.012, mode, zs);
        for (std::size_t t = 1; t <= 50; ++t) {
            Tensor zt = add_noise(z0, eps, t, s);
            Tensor pred = prediction_target(z0, eps, t, s);
            Tensor rec = reconstruct_z0(zt, pred, t, s);
            double max_rel = 0.0;
            for (std::size_t i = 0; i < rec.numel(); ++i) {
                const double want = z0.value_at(i);
                const double rel = std::abs(rec.value_at(i) - want) /
                                   (std::abs(want) + 1e-12);
                max_rel = std::max(max_rel, rel);
            }
            if (!(max_rel < 1e-5)) {
                note(std::string(prediction_mode_name(mode)) + " t=" +
                     std::to_string(t) + ": relative error " +
                     std::to_string(max_rel));
                ok = false;
            }
        }
    }
    return ok;
}

// ---------------------------------------------------------------- 5
bool shape_laws() {
    bool ok = true;
    MediaCoder coder = make_media_coder(8);

    VideoClip big = make_video_clip(Tensor::full({49, 256, 256, 3}, 0.25,
                                                 DType::f32));
    std::vector<std::size_t> want_big = {13, 32, 32, 8};
    if (compress(big, coder).z.shape() != want_big) {
        note("256x256x49 clip compressed to the wrong shape");
        ok = false;
    }
    VideoClip small = make_video_clip(Tensor::full({9, 32, 32, 3}, 0.75,
                                                   DType::f32));
    std::vector<std::size_t> want_small = {3, 4, 4, 8};
    if (compress(small, coder).z.shape() != want_small) {
        note("32x32x9 clip compressed to the wrong shape");
        ok = false;
    }

    Rng rng(7);
    VideoLatent lat = make_video_latent(
        Tensor::randn({13, 32, 32, 16}, rng, 1.0, DType::f32));
    PatchSpec spec;  // q=1, p=2
    Tensor tokens = patchify(lat, spec);
    std::vector<std::size_t> want_tok = {3328, 64};
    if (tokens.shape() != want_tok ||
        patch_token_count({13, 32, 32, 16}, spec) != 3328) {
        note("patchify token count is off");
        ok = false;
    }
    VideoLatent back = unpatchify(tokens, {13, 32, 32, 16}, spec);
    if (!bits_equal(back.z, lat.z)) {
        note("patchify round-trip is not bit-exact");
        ok = false;
    }
    return ok;
}

// ---------------------------------------------------------------- 6
struct AnalysisNumbers {
    double inside_frac = 0.0;
    std::size_t outside = 0;
    std::vector<double> stds;
    double qvar = -1.0;
    double avar = -1.0;
};

AnalysisNumbers run_analysis() {
    AnalysisNumbers an;
    std::size_t total = 0, inside = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        Tensor e = encode_prompt_encoder(nth_prompt(i), 32, 1000 + i);
        for (std::size_t j = 0; j < e.numel(); ++j) {
            ++total;
            if (std::abs(e.value_at(j)) <= 0.5) ++inside;
        }
    }
    an.inside_frac = static_cast<double>(inside) / static_cast<double>(total);

    for (std::size_t i = 0; i < 200; ++i) {
        DecoderTokens dt = encode_prompt_decoder(nth_prompt(i), 32, 3000 + i);
        for (const Tensor* t : {&dt.query, &dt.answer})
            for (std::size_t j = 0; j < t->numel(); ++j)
                if (std::abs(t->value_at(j)) > 1.0) ++an.outside;
    }

    std::string long_prompt;
    for (int i = 0; i < 40; ++i)
        long_prompt += (i ? " tok" : "tok") + std::to_string(i);
    DecoderTokens big = encode_prompt_decoder(long_prompt, 64, 7);
    NormScale ns;
    ns.gamma = Tensor::full({64}, 1.0, DType::f32);
    ns.beta_bias = Tensor::zeros({64}, DType::f32);
    Tensor normed = norm_scale(ns, concat({big.query, big.answer}, 0));
    const std::size_t rows = normed.shape()[0], d = normed.shape()[1];
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += normed.value_at(r * d + c);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double v = normed.value_at(r * d + c) - mean;
            var += v * v;
        }
        an.stds.push_back(std::sqrt(var / static_cast<double>(d)));
    }

    std::vector<std::uint64_t> seeds(50);
    std::iota(seeds.begin(), seeds.end(), 0);
    FluctuationReport fr =
        fluctuation_stats("2 blue squares moving up", 32, seeds);
    an.qvar = fr.query_var;
    an.avar = fr.answer_var;
    return an;
}

bool analysis_ok(const AnalysisNumbers& an) {
    bool ok = true;
    if (!(an.inside_frac >= 0.99)) {
        note("narrow-branch fraction inside [-0.5,0.5]: " +
             std::to_string(an.inside_frac));
        ok = false;
    }
    if (an.outside == 0) {
        note("wide branch produced no values outside [-1,1]");
        ok = false;
    }
    for (double s : an.stds)
        if (!(s >= 0.9 && s <= 1.1)) {
            note("post-norm token std " + std::to_string(s));
            ok = false;
            break;
        }
    if (an.qvar != 0.0) {
        note("query variance " + std::to_string(an.qvar));
        ok = false;
    }
    if (!(an.avar > 0.0)) {
        note("answer variance " + std::to_string(an.avar));
        ok = false;
    }
    return ok;
}

// ------------------------------------------------------------- 7, 8
struct TrendNumbers {
    bool ok = false;
    std::vector<std::vector<double>> losses;
    std::vector<std::vector<double>> grads;
    std::vector<double> over_losses;
    std::vector<double> over_grads;
    int wins = 0;
    double ratio = 1e9;
    std::vector<unsigned char> frame_bytes;
    std::array<std::array<bool, 3>, 4> scores{};
    int sample_all = 0;
    std::string prompt;
};

TrainConfig trend_config(std::uint64_t seed, const char* arm,
                         std::size_t steps) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.steps = steps;
    cfg.batch = 8;
    cfg.lr = 0.005;
    cfg.fuser = arm_flags(arm, FuserOptions{});
    return cfg;
}

TrendNumbers run_trend(const fs::path& root) {
    TrendNumbers tn;
    for (std::uint64_t seed : {42u, 43u, 44u}) {
        double fin[2] = {0.0, 0.0};
        int slot = 0;
        for (const char* arm : {"a2", "a7"}) {
            TrainConfig cfg = trend_config(seed, arm, 500);
            TrainResult r = train_run(
                cfg, root / (std::to_string(seed) + "-" + arm));
            if (r.diverged || r.losses.size() != cfg.steps) {
                note("comparison run " + std::to_string(seed) + "/" + arm +
                     " diverged or stopped early");
                return tn;
            }
            fin[slot++] = window_mean(r.losses, true);
            tn.losses.push_back(std::move(r.losses));
            tn.grads.push_back(std::move(r.grad_norms));
        }
        if (fin[0] > fin[1]) ++tn.wins;
    }

    TrainConfig ov = trend_config(42, "a7", 2000);
    TrainResult r = train_run(ov, root / "overfit");
    if (r.diverged || r.losses.size() != ov.steps) {
        note("overfit run diverged or stopped early");
        return tn;
    }
    tn.ratio = window_mean(r.losses, true) / window_mean(r.losses, false);
    tn.over_losses = std::move(r.losses);
    tn.over_grads = std::move(r.grad_norms);

    const std::vector<DatasetItem> data = synth_dataset(ov.data_seed, ov.clips);
    tn.prompt = data[0].prompt;
    Pipeline pipe = pipeline_from_checkpoint(r.checkpoint_dir);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        VideoClip clip = sample(pipe, tn.prompt, 50, seed);
        const auto& f = clip.frames.data<float>();
        const auto* raw = reinterpret_cast<const unsigned char*>(f.data());
        tn.frame_bytes.insert(tn.frame_bytes.end(), raw,
                              raw + f.size() * sizeof(float));
        SemanticScores sc = semantic_eval(clip, data[0].spec);
        tn.scores[seed] = {sc.count_ok, sc.color_ok, sc.direction_ok};
        if (sc.count_ok && sc.color_ok && sc.direction_ok) ++tn.sample_all;
    }
    tn.ok = true;
    return tn;
}

// ---------------------------------------------------------------- 9
ClipRecord good_record(const std::string& path) {
    ClipRecord r;
    r.path = path;
    r.frames = 120;
    r.width = 1280.0;
    r.height = 720.0;
    r.fps = 24.0;
    r.duration_s = 5.0;
    r.motion_score = 0.6;
    r.black_area = 0.1;
    r.brightness = 0.5;
    r.black_frame_rate = 0.0;
    r.aesthetic = 5.5;
    r.ocr_coverage = 0.02;
    r.watermark = false;
    r.caption = "a red kite drifts over the harbor at dawn";
    r.clip_score = 0.7;
    return r;
}

std::string caption_with_run(std::size_t uniques, std::size_t run) {
    std::string out;
    for (std::size_t i = 0; i < uniques; ++i)
        out += (i ? " w" : "w") + std::to_string(i);
    for (std::size_t i = 0; i < run; ++i) out += " rr";
    return out;
}

std::string oracle_caption(int round) {
    const char* vocab[] = {"sun", "rain", "gull", "pier", "net", "tide"};
    Rng r = Rng(2026).split(static_cast<std::uint64_t>(round));
    const auto len = static_cast<std::size_t>(r.uniform_int(0, 40));
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        if (i) out += ' ';
        out += vocab[r.uniform_int(0, 5)];
    }
    return out;
}

double oracle_rate(const std::string& caption, std::size_t n) {
    std::istringstream is(caption);
    std::vector<std::string> tokens;
    std::string tok;
    while (is >> tok) tokens.push_back(tok);
    if (tokens.size() < n) return 0.0;
    std::map<std::vector<std::string>, int> seen;
    std::size_t total = 0;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++seen[std::vector<std::string>(
            tokens.begin() + static_cast<long>(i),
            tokens.begin() + static_cast<long>(i + n))];
        ++total;
    }
    return 1.0 - static_cast<double>(seen.size()) / static_cast<double>(total);
}

bool corpus_rules(const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<std::string> lines;
    std::map<std::string, std::size_t> expect;
    auto drop = [&](ClipRecord r, const std::string& reason) {
        lines.push_back(clip_record_to_json(r));
        ++expect[reason];
    };

    ClipRecord r = good_record("clips/f01.mp4");
    r.frames = 64;
    drop(r, "min_frames");
    r = good_record("clips/f02.mp4");
    r.duration_s = 0.5;
    drop(r, "min_duration");
    r = good_record("clips/f03.mp4");
    r.width = 900.0;
    r.height = 1000.0;
    drop(r, "aspect_ratio");
    r = good_record("clips/f04.mp4");
    r.motion_score = 0.0;
    drop(r, "motion_score");
    r = good_record("clips/f05.mp4");
    r.black_area = 0.9;
    drop(r, "black_area");
    r = good_record("clips/f06.mp4");
    r.brightness = 0.1;
    drop(r, "brightness");
    r = good_record("clips/f07.mp4");
    r.black_frame_rate = 0.5;
    drop(r, "black_frame_rate");
    r = good_record("clips/f08.mp4");
    r.aesthetic = 3.9;
    drop(r, "aesthetic");
    r = good_record("clips/f09.mp4");
    r.ocr_coverage = 0.2;
    drop(r, "ocr_coverage");
    r = good_record("clips/f10.mp4");
    r.watermark = true;
    drop(r, "watermark");
    r = good_record("clips/f11.mp4");
    r.caption = "x y x y x y";
    drop(r, "rep_2gram");
    r = good_record("clips/f12.mp4");
    r.caption = caption_with_run(376, 24);
    drop(r, "rep_5gram");
    r = good_record("clips/f13.mp4");
    r.caption = caption_with_run(2855, 145);
    drop(r, "rep_10gram");
    r = good_record("clips/f14.mp4");
    r.clip_score = 0.2;
    drop(r, "clip_score");
    r = good_record("clips/f15.mp4");
    r.caption.reset();
    drop(r, "missing_caption");
    r = good_record("clips/f16.mp4");
    r.frames.reset();
    drop(r, "missing_field");
    lines.push_back("{\"path\": \"clips/f17.mp4\", \"frames\":");
    ++expect["parse_error"];

    // Clean trio; the first sits exactly on every numeric boundary.
    r = good_record("clips/k01.mp4");
    r.frames = 65;
    r.duration_s = 1.0;
    r.width = 2000.0;
    r.height = 1000.0;
    r.motion_score = 1e-9;
    r.black_area = 0.8;
    r.brightness = 0.2;
    r.black_frame_rate = 0.4;
    r.aesthetic = 4.0;
    r.ocr_coverage = 0.1;
    r.clip_score = 0.25;
    lines.push_back(clip_record_to_json(r));
    r = good_record("clips/k02.mp4");
    r.caption = caption_with_run(16, 3);  // one duplicated bigram, 1/18
    lines.push_back(clip_record_to_json(r));
    lines.push_back(clip_record_to_json(good_record("clips/k03.mp4")));

    const fs::path records = dir / "records.jsonl";
    {
        std::ofstream out(records);
        for (const std::string& l : lines) out << l << "\n";
    }
    PipelineReport rep =
        run_pipeline(records.string(), (dir / "kept.jsonl").string());

    bool ok = true;
    if (rep.input_count != 20 || rep.kept_count != 3) {
        note("pipeline counted " + std::to_string(rep.input_count) + " in / " +
             std::to_string(rep.kept_count) + " kept");
        ok = false;
    }
    if (rep.drops_by_reason != expect) {
        for (const auto& [k, v] : rep.drops_by_reason)
            note("got   " + k + " x" + std::to_string(v));
        for (const auto& [k, v] : expect)
            note("want  " + k + " x" + std::to_string(v));
        ok = false;
    }

    for (int c = 0; c < 50; ++c) {
        const std::string caption = oracle_caption(c);
        for (std::size_t n : {1u, 2u, 3u, 5u, 10u})
            if (ngram_repetition(caption, n) != oracle_rate(caption, n)) {
                note("n-gram mismatch on random caption " + std::to_string(c));
                ok = false;
            }
    }

    // Strictness right at the published thresholds.
    ClipRecord b = good_record("clips/b.mp4");
    b.clip_score = 0.25;
    if (!caption_rules_eval(b).kept) {
        note("similarity exactly 0.25 was dropped");
        ok = false;
    }
    b.clip_score = 0.2499999;
    if (caption_rules_eval(b).reason != "clip_score") {
        note("similarity below 0.25 was kept");
        ok = false;
    }
    b = good_record("clips/b2.mp4");
    b.caption = caption_with_run(16, 3);
    if (ngram_repetition(*b.caption, 2) >= 0.056 ||
        !caption_rules_eval(b).kept) {
        note("closest repetition rate under 0.056 was dropped");
        ok = false;
    }
    b.caption = "x y x y x y";
    if (caption_rules_eval(b).reason != "rep_2gram") {
        note("repetition above 0.056 was kept");
        ok = false;
    }
    return ok;
}

// --------------------------------------------------------------- 10
bool same_trend(const TrendNumbers& a, const TrendNumbers& b) {
    return a.ok && b.ok && a.losses == b.losses && a.grads == b.grads &&
           a.over_losses == b.over_losses && a.over_grads == b.over_grads &&
           a.wins == b.wins && a.ratio == b.ratio &&
           a.frame_bytes == b.frame_bytes && a.scores == b.scores &&
           a.sample_all == b.sample_all && a.prompt == b.prompt;
}

bool same_analysis(const AnalysisNumbers& a, const AnalysisNumbers& b) {
    return a.inside_frac == b.inside_frac && a.outside == b.outside &&
           a.stds == b.stds && a.qvar == b.qvar && a.avar == b.avar;
}

}  // namespace

int main() {
    omp_set_num_threads(1);
    const fs::path root = fs::temp_directory_path() / "fusevid_acceptance";
    std::error_code ec;
    fs::remove_all(root, ec);
    fs::create_directories(root);

    int passed = 0;
    auto gate = [&](int idx, const char* name, bool ok) {
        std::printf("%2d. %-56s %s\n", idx, name, ok ? "pass" : "FAIL");
        std::fflush(stdout);
        for (const std::string& n : g_notes)
            std::fprintf(stderr, "      %s\n", n.c_str());
        g_notes.clear();
        if (ok) ++passed;
        return ok;
    };
    auto safely = [&](const std::function<bool()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            note(std::string("exception: ") + e.what());
            return false;
        }
    };

    gate(1, "fresh fuser reproduces raw conditioning bit-exactly",
         safely(init_identity));
    gate(2, "analytic gradients match finite differences in f64",
         safely(gradient_suite));
    gate(3, "terminal step carries zero signal; bad mode rejected",
         safely(terminal_snr));
    gate(4, "noising round-trip recovers the clean latent",
         safely(reconstruction_roundtrip));
    gate(5, "codec and patch shape laws hold",
         safely(shape_laws));

    std::optional<AnalysisNumbers> analysis;
    gate(6, "token distributions, post-norm scale, fluctuation split",
         safely([&] {
             analysis = run_analysis();
             return analysis_ok(*analysis);
         }));

    std::optional<TrendNumbers> trend;
    gate(7, "direct-sum arm trails the full fuser; overfit converges",
         safely([&] {
             trend = run_trend(root / "trend1");
             return trend->ok && trend->wins >= 2 && trend->ratio < 0.25;
         }));
    gate(8, "overfit model passes the semantic check on 3+ of 4 seeds",
         safely([&] {
             if (!trend || !trend->ok) {
                 note("no overfit model available");
                 return false;
             }
             return trend->sample_all >= 3;
         }));
    gate(9, "curation fixture fires every rule exactly once",
         safely([&] { return corpus_rules(root / "corpus"); }));
    gate(10, "analysis, training, and sampling replay bit-exactly",
         safely([&] {
             if (!analysis || !trend || !trend->ok) {
                 note("earlier runs unavailable");
                 return false;
             }
             AnalysisNumbers a2 = run_analysis();
             TrendNumbers t2 = run_trend(root / "trend2");
             if (!same_analysis(*analysis, a2)) {
                 note("analysis numbers moved between runs");
                 return false;
             }
             if (!same_trend(*trend, t2)) {
                 note("training or sampling numbers moved between runs");
                 return false;
             }
             return true;
         }));

    std::printf("%d/10 criteria passed\n", passed);
    return passed == 10 ? 0 : 1;
}
