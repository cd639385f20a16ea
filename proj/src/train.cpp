#include "fusevid/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fusevid/checkpoint.hpp"
#include "fusevid/errors.hpp"
#include "fusevid/optimizer.hpp"
#include "json.hpp"

namespace fusevid {
namespace {

constexpr std::size_t kMaxTextTokens = 16;
constexpr std::size_t kDivergenceStreak = 20;
constexpr double kDivergenceFactor = 10.0;

std::string fmt_double(double v) { return format_f64(v); }

std::uint64_t draw_seed(Rng rng) {
    return static_cast<std::uint64_t>(
        rng.uniform_int(0, std::numeric_limits<std::int64_t>::max()));
}

NamedTensors fuser_named_parameters(const FuserState& fuser) {
    const std::vector<Tensor> p = fuser.parameters();
    static const char* names[] = {
        "fuser.enc_proj.weight", "fuser.enc_proj.bias",
        "fuser.dec_proj.weight", "fuser.dec_proj.bias",
        "fuser.norm.gamma",      "fuser.norm.bias",
        "fuser.stabilizer",
    };
    NamedTensors named;
    for (std::size_t i = 0; i < p.size(); ++i)
        named.emplace_back(names[i], p[i]);
    return named;
}

NamedTensors pipeline_named_parameters(const Pipeline& pipe) {
    NamedTensors named = fuser_named_parameters(pipe.fuser);
    for (auto& [name, t] : pipe.model.named_parameters())
        named.emplace_back("model." + name, t);
    return named;
}

void write_checkpoint(const Pipeline& pipe,
                      const std::filesystem::path& dir, std::size_t step,
                      double loss, bool diverged) {
    NamedTensors named = pipeline_named_parameters(pipe);
    std::map<std::string, std::string> meta;
    meta["config"] = render_config(to_run_config(pipe.cfg));
    meta["step"] = std::to_string(step);
    meta["loss"] = fmt_double(loss);
    meta["diverged"] = diverged ? "1" : "0";
    save_checkpoint(dir.string(), named, meta);
}

Tensor scene_latent_tokens(const VideoClip& clip, const Pipeline& pipe) {
    return patchify(compress(clip, pipe.coder), pipe.cfg.patch);
}

}  // namespace

TrainConfig to_train_config(const RunConfig& rc) {
    TrainConfig cfg;
    cfg.seed = rc.get_u64("seed");
    cfg.steps = rc.get_u64("train.steps");
    cfg.batch = rc.get_u64("train.batch");
    cfg.lr = rc.get_f64("train.lr");
    cfg.clips = rc.get_u64("train.clips");
    cfg.data_seed = rc.get_u64("train.data_seed");
    cfg.answer_seed = rc.get_u64("train.answer_seed");
    cfg.checkpoint_every = rc.get_u64("train.checkpoint_every");
    cfg.text_width = rc.get_u64("text.width");
    cfg.encoder_seed = rc.get_u64("text.encoder_seed");
    cfg.fuser.alpha = rc.get_f64("fuser.alpha");
    cfg.fuser.gamma_init = rc.get_f64("fuser.gamma_init");
    cfg.fuser.eps = rc.get_f64("fuser.eps");
    cfg.fuser.use_decoder = rc.get_bool("fuser.use_decoder");
    cfg.fuser.use_norm = rc.get_bool("fuser.use_norm");
    cfg.fuser.use_zero_conv = rc.get_bool("fuser.use_zero_conv");
    cfg.fuser.use_ss = rc.get_bool("fuser.use_ss");
    cfg.timesteps = rc.get_u64("schedule.timesteps");
    cfg.beta_start = rc.get_f64("schedule.beta_start");
    cfg.beta_end = rc.get_f64("schedule.beta_end");
    cfg.mode = prediction_mode_from_name(rc.get_text("schedule.mode"));
    cfg.zero_snr = rc.get_bool("schedule.zero_snr");
    cfg.d_model = rc.get_u64("model.d_model");
    cfg.depth = rc.get_u64("model.depth");
    cfg.heads = rc.get_u64("model.heads");
    cfg.channels = rc.get_u64("media.channels");
    cfg.patch.p = rc.get_u64("media.patch_p");
    cfg.patch.q = rc.get_u64("media.patch_q");
    return cfg;
}

RunConfig to_run_config(const TrainConfig& cfg) {
    RunConfig rc;
    rc.set("seed", std::to_string(cfg.seed));
    rc.set("train.steps", std::to_string(cfg.steps));
    rc.set("train.batch", std::to_string(cfg.batch));
    rc.set("train.lr", fmt_double(cfg.lr));
    rc.set("train.clips", std::to_string(cfg.clips));
    rc.set("train.data_seed", std::to_string(cfg.data_seed));
    rc.set("train.answer_seed", std::to_string(cfg.answer_seed));
    rc.set("train.checkpoint_every", std::to_string(cfg.checkpoint_every));
    rc.set("text.width", std::to_string(cfg.text_width));
    rc.set("text.encoder_seed", std::to_string(cfg.encoder_seed));
    rc.set("fuser.alpha", fmt_double(cfg.fuser.alpha));
    rc.set("fuser.gamma_init", fmt_double(cfg.fuser.gamma_init));
    rc.set("fuser.eps", fmt_double(cfg.fuser.eps));
    rc.set("fuser.use_decoder", cfg.fuser.use_decoder ? "true" : "false");
    rc.set("fuser.use_norm", cfg.fuser.use_norm ? "true" : "false");
    rc.set("fuser.use_zero_conv",
           cfg.fuser.use_zero_conv ? "true" : "false");
    rc.set("fuser.use_ss", cfg.fuser.use_ss ? "true" : "false");
    rc.set("schedule.timesteps", std::to_string(cfg.timesteps));
    rc.set("schedule.beta_start", fmt_double(cfg.beta_start));
    rc.set("schedule.beta_end", fmt_double(cfg.beta_end));
    rc.set("schedule.mode", prediction_mode_name(cfg.mode));
    rc.set("schedule.zero_snr", cfg.zero_snr ? "true" : "false");
    rc.set("model.d_model", std::to_string(cfg.d_model));
    rc.set("model.depth", std::to_string(cfg.depth));
    rc.set("model.heads", std::to_string(cfg.heads));
    rc.set("media.channels", std::to_string(cfg.channels));
    rc.set("media.patch_p", std::to_string(cfg.patch.p));
    rc.set("media.patch_q", std::to_string(cfg.patch.q));
    return rc;
}

Pipeline make_pipeline(const TrainConfig& cfg) {
    if (cfg.steps < 1) throw ParamError("train: steps must be >= 1");
    if (cfg.batch < 1) throw ParamError("train: batch must be >= 1");
    if (cfg.clips < 1) throw ParamError("train: clips must be >= 1");
    if (!(cfg.lr > 0.0)) throw ParamError("train: lr must be positive");

    Pipeline pipe;
    pipe.cfg = cfg;
    pipe.sched = make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end,
                               cfg.mode, cfg.zero_snr);
    pipe.coder = make_media_coder(cfg.channels);
    pipe.latent_dims = {1 + (kSceneFrames - 1) / 4, kSceneEdge / 8,
                        kSceneEdge / 8, cfg.channels};

    DenoiserConfig dcfg;
    dcfg.d_model = cfg.d_model;
    dcfg.depth = cfg.depth;
    dcfg.heads = cfg.heads;
    dcfg.video_token_width = patch_token_width(pipe.latent_dims, cfg.patch);
    dcfg.text_width = cfg.text_width;
    dcfg.max_video_tokens = patch_token_count(pipe.latent_dims, cfg.patch);
    dcfg.max_text_tokens = kMaxTextTokens;
    dcfg.max_timestep = cfg.timesteps;
    pipe.model = make_denoiser(dcfg, cfg.seed);
    pipe.fuser = make_fuser(cfg.text_width, cfg.fuser);
    return pipe;
}

Tensor diffusion_loss(const std::vector<TrainItem>& batch,
                      const DenoiserState& model, const FuserState& fuser,
                      const Schedule& sched) {
    if (batch.empty()) throw ParamError("train: empty batch");
    Tensor total;
    std::size_t elems = 0;
    for (const TrainItem& item : batch) {
        Tensor z_t = add_noise(item.video_tokens, item.noise, item.t, sched);
        Tensor target =
            prediction_target(item.video_tokens, item.noise, item.t, sched);
        FusedConditioning cond = condition(fuser, item.bundle);
        Tensor pred = denoise(model, z_t, cond, item.t);
        Tensor diff = sub(pred, target);
        Tensor sq = sum_all(mul(diff, diff));
        total = total.defined() ? add(total, sq) : sq;
        elems += item.video_tokens.numel();
    }
    return scalar_mul(total, 1.0 / static_cast<double>(elems));
}

TrainResult train_run(const TrainConfig& cfg,
                      const std::filesystem::path& out_dir) {
    Pipeline pipe = make_pipeline(cfg);
    const std::vector<DatasetItem> data = synth_dataset(cfg.data_seed,
                                                        cfg.clips);
    return train_run(pipe, data, out_dir);
}

TrainResult train_run(Pipeline& pipe, const std::vector<DatasetItem>& data,
                      const std::filesystem::path& out_dir) {
    const TrainConfig& cfg = pipe.cfg;
    if (data.empty()) throw ParamError("train: empty dataset");
    std::filesystem::create_directories(out_dir);

    std::vector<Tensor> clean;
    clean.reserve(data.size());
    for (const DatasetItem& item : data)
        clean.push_back(scene_latent_tokens(item.clip, pipe));

    std::vector<Tensor> params = pipe.fuser.parameters();
    for (const Tensor& p : pipe.model.parameters()) params.push_back(p);
    AdamConfig acfg;
    acfg.lr = cfg.lr;
    acfg.beta2 = 0.99;  // short horizon: desk-scale runs are a few hundred steps
    Adam opt(params, acfg);

    // Warmup then cosine decay; cfg.lr is the peak. Short runs converge
    // noticeably faster than under a constant step size.
    const std::size_t warmup =
        std::min<std::size_t>(50, std::max<std::size_t>(1, cfg.steps / 10));
    auto lr_at = [&](std::size_t step) {
        if (step <= warmup)
            return cfg.lr * static_cast<double>(step) /
                   static_cast<double>(warmup);
        const double progress = static_cast<double>(step - warmup) /
                                static_cast<double>(cfg.steps - warmup);
        const double kFloor = 0.05;
        return cfg.lr *
               (kFloor + (1.0 - kFloor) * 0.5 *
                             (1.0 + std::cos(3.14159265358979323846 * progress)));
    };

    std::ofstream csv(out_dir / "metrics.csv");
    if (!csv)
        throw IngestError("train: cannot write metrics.csv under " +
                          out_dir.string());
    csv << "step,loss,grad_norm\n";

    TrainResult result;
    double initial = 0.0;
    std::size_t high_streak = 0;
    const Rng batch_root = Rng(cfg.seed).split("batch");
    const Rng t_root = Rng(cfg.seed).split("t");
    const Rng noise_root = Rng(cfg.seed).split("noise");
    const Rng answer_root = Rng(cfg.answer_seed).split("answer");

    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        Rng pick = batch_root.split(step);
        std::vector<TrainItem> batch;
        batch.reserve(cfg.batch);
        for (std::size_t slot = 0; slot < cfg.batch; ++slot) {
            const std::size_t idx = static_cast<std::size_t>(pick.uniform_int(
                0, static_cast<std::int64_t>(data.size()) - 1));
            TrainItem item;
            item.video_tokens = clean[idx];
            Rng t_rng = t_root.split(step).split(slot);
            item.t = static_cast<std::size_t>(t_rng.uniform_int(
                1, static_cast<std::int64_t>(cfg.timesteps)));
            Rng noise_rng = noise_root.split(step).split(slot);
            item.noise = Tensor::randn(item.video_tokens.shape(), noise_rng,
                                       1.0, item.video_tokens.dtype());
            const std::uint64_t answer =
                draw_seed(answer_root.split(step).split(slot));
            SimParams sim;
            sim.dtype = item.video_tokens.dtype();
            item.bundle = simulate_bundle(data[idx].prompt, cfg.text_width,
                                          cfg.encoder_seed, answer, sim);
            batch.push_back(std::move(item));
        }

        opt.zero_grad();
        Tensor loss =
            diffusion_loss(batch, pipe.model, pipe.fuser, pipe.sched);
        const double lv = loss.item();
        if (!std::isfinite(lv)) {
            csv << step << "," << fmt_double(lv) << ",0\n";
            result.losses.push_back(lv);
            result.grad_norms.push_back(0.0);
            result.steps_run = step;
            result.diverged = true;
            break;
        }
        loss.backward();
        const double gn = opt.grad_norm();
        csv << step << "," << fmt_double(lv) << "," << fmt_double(gn)
            << "\n";
        result.losses.push_back(lv);
        result.grad_norms.push_back(gn);
        result.steps_run = step;

        if (step == 1) {
            initial = lv;
        } else if (lv > kDivergenceFactor * initial) {
            if (++high_streak >= kDivergenceStreak) {
                result.diverged = true;
                break;
            }
        } else {
            high_streak = 0;
        }

        opt.set_lr(lr_at(step));
        opt.step();

        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 &&
            step != cfg.steps) {
            char name[32];
            std::snprintf(name, sizeof name, "ckpt-%06zu", step);
            write_checkpoint(pipe, out_dir / name, step, lv,
                             result.diverged);
        }
    }

    result.checkpoint_dir = out_dir / "ckpt-final";
    write_checkpoint(pipe, result.checkpoint_dir, result.steps_run,
                     result.losses.empty() ? 0.0 : result.losses.back(),
                     result.diverged);
    return result;
}

VideoClip sample(const Pipeline& pipe, const std::string& prompt,
                 std::size_t steps, std::uint64_t seed) {
    const std::size_t T = pipe.sched.T;
    if (steps < 1 || steps > T)
        throw ParamError("sample: steps must be in 1.." + std::to_string(T));

    SimParams sim;
    const std::uint64_t answer = draw_seed(Rng(seed).split("answer"));
    const TokenBundle bundle = simulate_bundle(
        prompt, pipe.cfg.text_width, pipe.cfg.encoder_seed, answer, sim);
    const FusedConditioning cond = condition(pipe.fuser, bundle);

    std::vector<std::size_t> ts(steps);
    for (std::size_t i = 0; i < steps; ++i) ts[i] = T - (i * T) / steps;

    const std::size_t tokens =
        patch_token_count(pipe.latent_dims, pipe.cfg.patch);
    const std::size_t width =
        patch_token_width(pipe.latent_dims, pipe.cfg.patch);
    Rng init = Rng(seed).split("init");
    Tensor z = Tensor::randn({tokens, width}, init, 1.0, DType::f32);

    for (std::size_t i = 0; i < steps; ++i) {
        const std::size_t t = ts[i];
        Tensor pred = denoise(pipe.model, z, cond, t);
        Tensor z0_hat = reconstruct_z0(z, pred, t, pipe.sched);
        if (i + 1 == steps) {
            z = z0_hat.clone();
            break;
        }
        Tensor eps_hat =
            pipe.sched.mode == PredictionMode::v
                ? add(scalar_mul(z, pipe.sched.somab(t)),
                      scalar_mul(pred, pipe.sched.sab(t)))
                : pred;
        const std::size_t tn = ts[i + 1];
        Tensor next = add(scalar_mul(z0_hat, pipe.sched.sab(tn)),
                          scalar_mul(eps_hat, pipe.sched.somab(tn)));
        z = next.clone();  // drop the step's graph before the next iteration
    }

    VideoLatent latent = unpatchify(z, pipe.latent_dims, pipe.cfg.patch);
    return decompress(latent, pipe.coder);
}

Pipeline pipeline_from_checkpoint(const std::filesystem::path& ckpt_dir) {
    const auto meta = load_checkpoint_meta(ckpt_dir.string());
    const auto it = meta.find("config");
    if (it == meta.end())
        throw IngestError("checkpoint " + ckpt_dir.string() +
                          " has no config in its meta block");
    const RunConfig rc =
        parse_config_text(it->second, ckpt_dir.string() + ":config");
    Pipeline pipe = make_pipeline(to_train_config(rc));
    NamedTensors target = pipeline_named_parameters(pipe);
    load_checkpoint_into(ckpt_dir.string(), target);
    return pipe;
}

VideoClip sample_from_checkpoint(const std::filesystem::path& ckpt_dir,
                                 const std::string& prompt, std::size_t steps,
                                 std::uint64_t seed) {
    const Pipeline pipe = pipeline_from_checkpoint(ckpt_dir);
    return sample(pipe, prompt, steps, seed);
}

FuserOptions arm_flags(const std::string& name, const FuserOptions& base) {
    FuserOptions f = base;
    auto set = [&](bool dec, bool norm, bool zc, bool ss) {
        f.use_decoder = dec;
        f.use_norm = norm;
        f.use_zero_conv = zc;
        f.use_ss = ss;
    };
    if (name == "a1") set(false, true, true, true);
    else if (name == "a2") set(true, false, false, false);
    else if (name == "a3") set(true, true, false, false);
    else if (name == "a4") set(true, true, false, true);
    else if (name == "a5") set(true, false, true, false);
    else if (name == "a6") set(true, false, true, true);
    else if (name == "a7") set(true, true, true, true);
    else throw ParamError("ablation: unknown arm '" + name + "'");
    return f;
}

AblationReport ablation_run(const TrainConfig& base,
                            const std::vector<std::string>& arms,
                            const std::filesystem::path& out_dir) {
    if (arms.empty()) throw ParamError("ablation: no arms requested");
    for (const std::string& name : arms) arm_flags(name, base.fuser);
    std::filesystem::create_directories(out_dir);
    const std::vector<DatasetItem> data =
        synth_dataset(base.data_seed, base.clips);

    AblationReport report;
    for (const std::string& name : arms) {
        TrainConfig cfg = base;
        cfg.fuser = arm_flags(name, base.fuser);
        Pipeline pipe = make_pipeline(cfg);
        TrainResult run = train_run(pipe, data, out_dir / name);

        ArmResult arm;
        arm.name = name;
        arm.flags = cfg.fuser;
        arm.losses = run.losses;
        arm.final_loss = run.losses.empty() ? 0.0 : run.losses.back();
        arm.diverged = run.diverged;
        const std::size_t sample_steps = std::min<std::size_t>(
            10, pipe.sched.T);
        VideoClip clip =
            sample(pipe, data[0].prompt, sample_steps, base.seed);
        arm.scores = semantic_eval(clip, data[0].spec);
        report.arms.push_back(std::move(arm));
    }

    std::ofstream csv(out_dir / "ablation.csv");
    csv << "arm,final_loss,diverged,count_ok,color_ok,direction_ok\n";
    nlohmann::json summary;
    summary["arms"] = nlohmann::json::array();
    for (const ArmResult& arm : report.arms) {
        csv << arm.name << "," << fmt_double(arm.final_loss) << ","
            << (arm.diverged ? 1 : 0) << "," << (arm.scores.count_ok ? 1 : 0)
            << "," << (arm.scores.color_ok ? 1 : 0) << ","
            << (arm.scores.direction_ok ? 1 : 0) << "\n";
        nlohmann::json row;
        row["name"] = arm.name;
        row["final_loss"] = arm.final_loss;
        row["diverged"] = arm.diverged;
        row["count_ok"] = arm.scores.count_ok;
        row["color_ok"] = arm.scores.color_ok;
        row["direction_ok"] = arm.scores.direction_ok;
        row["losses"] = arm.losses;
        summary["arms"].push_back(std::move(row));
    }
    std::ofstream js(out_dir / "summary.json");
    js << summary.dump(2) << "\n";
    return report;
}

}  // namespace fusevid
