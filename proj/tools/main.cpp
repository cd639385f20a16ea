#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fusevid/analysis.hpp"
#include "fusevid/config.hpp"
#include "fusevid/corpus.hpp"
#include "fusevid/dataset.hpp"
#include "fusevid/errors.hpp"
#include "fusevid/fuser.hpp"
#include "fusevid/grad_check.hpp"
#include "fusevid/kernels.hpp"
#include "fusevid/tensor.hpp"
#include "fusevid/tensor_io.hpp"
#include "fusevid/textcond.hpp"
#include "fusevid/train.hpp"
#include "fusevid/version.hpp"

namespace fs = std::filesystem;
using namespace fusevid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

RunConfig config_from_flag(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return load_config(path);
}

// Every run directory records the resolved config, seed included, plus the
// version string, so the run can be reproduced exactly.
void echo_config(const fs::path& dir, const RunConfig& rc) {
    fs::create_directories(dir);
    std::ofstream out(dir / "config.txt");
    if (!out) throw IngestError("cannot write " + (dir / "config.txt").string());
    out << "# " << kVersionString << "\n" << render_config(rc);
}

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

TokenBundle bundle_for(const RunConfig& rc, const std::string& prompt) {
    return simulate_bundle(prompt, rc.get_u64("text.width"),
                           rc.get_u64("text.encoder_seed"),
                           rc.get_u64("train.answer_seed"));
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    const RunConfig rc = config_from_flag(config_path);
    const TrainConfig cfg = to_train_config(rc);
    echo_config(out_dir, to_run_config(cfg));
    const TrainResult res = train_run(cfg, out_dir);
    std::cout << "steps_run=" << res.steps_run
              << " initial_loss=" << (res.losses.empty() ? 0.0 : res.losses.front())
              << " final_loss=" << (res.losses.empty() ? 0.0 : res.losses.back())
              << " checkpoint=" << res.checkpoint_dir.string() << "\n";
    if (res.diverged) {
        std::cerr << "training diverged after " << res.steps_run << " steps\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& arms_text,
               const std::string& out_dir) {
    const RunConfig rc = config_from_flag(config_path);
    const TrainConfig cfg = to_train_config(rc);
    const std::vector<std::string> arms = split_commas(arms_text);
    echo_config(out_dir, to_run_config(cfg));
    const AblationReport report = ablation_run(cfg, arms, out_dir);
    for (const ArmResult& arm : report.arms) {
        std::cout << arm.name << ": final_loss=" << format_f64(arm.final_loss)
                  << " diverged=" << (arm.diverged ? 1 : 0)
                  << " count_ok=" << arm.scores.count_ok
                  << " color_ok=" << arm.scores.color_ok
                  << " direction_ok=" << arm.scores.direction_ok << "\n";
    }
    std::cout << "report: " << (fs::path(out_dir) / "ablation.csv").string() << "\n";
    return kExitOk;
}

int cmd_sample(const std::string& ckpt, const std::string& prompt,
               std::uint64_t seed, std::size_t steps, const std::string& out) {
    const VideoClip clip = sample_from_checkpoint(ckpt, prompt, steps, seed);
    write_tensor(out, clip.frames);
    std::cout << "wrote " << out << " frames=" << clip.frame_count()
              << " height=" << clip.height() << " width=" << clip.width() << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& video_path, const std::string& spec_text) {
    const VideoClip clip = make_video_clip(read_tensor(video_path));
    const SceneSpec spec = parse_scene_spec(spec_text);
    const SemanticScores s = semantic_eval(clip, spec);
    std::cout << "count_ok=" << s.count_ok << " color_ok=" << s.color_ok
              << " direction_ok=" << s.direction_ok << "\n";
    return kExitOk;
}

int cmd_analyze_hist(const RunConfig& rc, const std::string& prompt,
                     const std::string& set_name, std::size_t bins, double lo,
                     double hi, const fs::path& out_dir) {
    const TokenBundle bundle = bundle_for(rc, prompt);
    Tensor tokens;
    if (set_name == "encoder") {
        tokens = bundle.encoder;
    } else if (set_name == "decoder") {
        tokens = bundle.decoder_tokens();
    } else if (set_name == "answer") {
        tokens = bundle.decoder_answer;
    } else {  // normed: decoder tokens after unit-scale normalization
        const std::size_t d = bundle.width();
        NormScale ns{Tensor::full({d}, 1.0, DType::f64),
                     Tensor::zeros({d}, DType::f64), 1e-5};
        tokens = norm_scale(ns, bundle.decoder_tokens());
    }
    const Histogram h = value_histogram(tokens, bins, lo, hi);
    fs::create_directories(out_dir);
    write_histogram_csv((out_dir / "hist.csv").string(), h);
    write_histogram_svg((out_dir / "hist.svg").string(), h);
    std::cout << "set=" << set_name << " total=" << h.total
              << " mass_in_unit=" << format_f64(histogram_mass(h, -1.0, 1.0))
              << "\n";
    return kExitOk;
}

int cmd_analyze_project(const RunConfig& rc, const std::string& prompt,
                        const fs::path& out_dir) {
    const TokenBundle bundle = bundle_for(rc, prompt);
    const Projection2D proj = project_2d({{"encoder", bundle.encoder},
                                          {"decoder_query", bundle.decoder_query},
                                          {"decoder_answer", bundle.decoder_answer}});
    fs::create_directories(out_dir);
    write_projection_csv((out_dir / "proj.csv").string(), proj);
    write_projection_svg((out_dir / "proj.svg").string(), proj);
    std::cout << "points=" << proj.points.size() << "\n";
    return kExitOk;
}

int cmd_analyze_fluct(const RunConfig& rc, const std::string& prompt,
                      std::size_t repeats, const fs::path& out_dir) {
    std::vector<std::uint64_t> seeds(repeats);
    const std::uint64_t base = rc.get_u64("train.answer_seed");
    for (std::size_t i = 0; i < repeats; ++i) seeds[i] = base + i;
    const FluctuationReport rep =
        fluctuation_stats(prompt, rc.get_u64("text.width"), seeds);
    fs::create_directories(out_dir);
    write_fluctuation_csv((out_dir / "fluct.csv").string(), rep);
    write_fluctuation_svg((out_dir / "fluct.svg").string(), rep);
    std::cout << "query_var=" << format_f64(rep.query_var)
              << " answer_var=" << format_f64(rep.answer_var) << "\n";
    return kExitOk;
}

int cmd_curate(const std::string& in_path, const std::string& out_path,
               const std::string& report_path) {
    const PipelineReport report = run_pipeline(in_path, out_path);
    write_pipeline_report(report_path, report);
    std::cout << "kept " << report.kept_count << " of " << report.input_count
              << " records\n";
    for (const auto& [reason, count] : report.drops_by_reason) {
        std::cout << "  dropped " << count << " (" << reason << ")\n";
    }
    return kExitOk;
}

int cmd_gradcheck() {
    struct Check {
        const char* name;
        std::vector<std::size_t> shape;
        std::function<Tensor(const Tensor&)> f;
    };
    FuserState fuser = make_fuser(8, FuserOptions{}, DType::f64);
    Rng rng(4242);
    Rng beta_rng = rng.split("beta");
    const Tensor beta = Tensor::randn({5, 8}, beta_rng, 1.0, DType::f64);
    const std::vector<Check> checks = {
        {"affine_gelu", {3, 4}, [](const Tensor& x) {
             Tensor w = Tensor::full({4, 4}, 0.3, DType::f64);
             return sum_all(gelu(matmul(x, w)));
         }},
        {"layer_norm_softmax", {4, 6}, [](const Tensor& x) {
             return mean_all(softmax_rows(layer_norm(x, 1e-5)));
         }},
        {"concat_slice", {2, 6}, [](const Tensor& x) {
             Tensor both = concat({x, scalar_mul(x, 2.0)}, 0);
             return sum_all(slice_cols(both, 1, 4));
         }},
        {"variance", {5, 3}, [](const Tensor& x) {
             return var_all(gelu(x));
         }},
        {"fuse_encoder_path", {5, 8}, [&](const Tensor& x) {
             return sum_all(fuse(fuser, x, beta));
         }},
        {"fuse_decoder_path", {5, 8}, [&](const Tensor& x) {
             Tensor theta = Tensor::full({5, 8}, 0.1, DType::f64);
             return sum_all(fuse(fuser, theta, x));
         }},
    };
    constexpr double kTol = 1e-5;
    bool ok = true;
    for (const Check& c : checks) {
        Rng point_rng = rng.split(c.name);
        const Tensor x = Tensor::randn(c.shape, point_rng, 0.7, DType::f64);
        const GradReport rep = grad_check(c.f, x);
        const bool pass = rep.max_relative_error < kTol;
        ok = ok && pass;
        std::cout << c.name << ": max_rel_err=" << format_f64(rep.max_relative_error)
                  << (pass ? " ok" : " FAIL") << "\n";
    }
    return ok ? kExitOk : kExitRuntime;
}

int cmd_dump_embeddings(const std::string& config_path, const std::string& prompt,
                        const std::string& out_dir) {
    const RunConfig rc = config_from_flag(config_path);
    const TokenBundle bundle = bundle_for(rc, prompt);
    write_embedding_dump(out_dir, bundle);
    std::cout << "wrote dump to " << out_dir << " (d=" << bundle.width() << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent video diffusion with fused text conditioning"};
    app.set_version_flag("--version", std::string(kVersionString));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "run";
    std::string arms_text = "a1,a2,a3,a4,a5,a6,a7";
    std::string ckpt, prompt = "2 blue squares moving up", video_path, spec_text;
    std::string in_path, out_path, report_path, set_name = "encoder";
    std::string sample_out = "sample.mtf";
    std::uint64_t seed = 0;
    std::size_t steps = 10, bins = 64, repeats = 50;
    double lo = -4.0, hi = 4.0;

    CLI::App* train = app.add_subcommand("train", "run the training loop");
    train->add_option("--config", config_path, "key = value config file");
    train->add_option("--out", out_dir, "run directory")->capture_default_str();

    CLI::App* ablate = app.add_subcommand("ablate", "train fuser ablation arms");
    ablate->add_option("--config", config_path, "key = value config file");
    ablate->add_option("--arms", arms_text, "comma-separated arm names")
        ->capture_default_str();
    ablate->add_option("--out", out_dir, "report directory")->capture_default_str();

    CLI::App* sample_cmd = app.add_subcommand("sample", "sample a clip from a checkpoint");
    sample_cmd->add_option("--ckpt", ckpt, "checkpoint directory")->required();
    sample_cmd->add_option("--prompt", prompt, "scene prompt")->required();
    sample_cmd->add_option("--seed", seed, "noise seed")->capture_default_str();
    sample_cmd->add_option("--steps", steps, "sampler steps")->capture_default_str();
    sample_cmd->add_option("--out", sample_out, "output tensor file")
        ->capture_default_str();

    CLI::App* eval_cmd = app.add_subcommand("eval", "score a clip against a scene spec");
    eval_cmd->add_option("--video", video_path, "tensor file with frames")->required();
    eval_cmd->add_option("--spec", spec_text, "prompt or short scene form")->required();

    CLI::App* analyze = app.add_subcommand("analyze", "token statistics reports");
    analyze->require_subcommand(1);
    CLI::App* hist = analyze->add_subcommand("hist", "value histogram (hist.csv/.svg)");
    hist->add_option("--config", config_path, "key = value config file");
    hist->add_option("--prompt", prompt, "prompt to encode")->capture_default_str();
    hist->add_option("--set", set_name, "encoder|decoder|answer|normed")
        ->check(CLI::IsMember({"encoder", "decoder", "answer", "normed"}))
        ->capture_default_str();
    hist->add_option("--bins", bins, "bin count")->capture_default_str();
    hist->add_option("--lo", lo, "range low")->capture_default_str();
    hist->add_option("--hi", hi, "range high")->capture_default_str();
    hist->add_option("--out", out_dir, "output directory")->required();
    CLI::App* project = analyze->add_subcommand("project", "2D projection (proj.csv/.svg)");
    project->add_option("--config", config_path, "key = value config file");
    project->add_option("--prompt", prompt, "prompt to encode")->capture_default_str();
    project->add_option("--out", out_dir, "output directory")->required();
    CLI::App* fluct = analyze->add_subcommand("fluct", "repeat-encoding variance (fluct.csv/.svg)");
    fluct->add_option("--config", config_path, "key = value config file");
    fluct->add_option("--prompt", prompt, "prompt to encode")->capture_default_str();
    fluct->add_option("--repeats", repeats, "encodings per set")->capture_default_str();
    fluct->add_option("--out", out_dir, "output directory")->required();

    CLI::App* curate = app.add_subcommand("curate", "filter a JSON-lines clip corpus");
    curate->add_option("--in", in_path, "input records")->required();
    curate->add_option("--out", out_path, "kept records")->required();
    curate->add_option("--report", report_path, "JSON drop report")->required();

    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference gradient diagnostics");

    CLI::App* dump = app.add_subcommand("dump-embeddings",
                                        "write simulator tokens as a dump directory");
    dump->add_option("--config", config_path, "key = value config file");
    dump->add_option("--prompt", prompt, "prompt to encode")->required();
    dump->add_option("--out", out_dir, "dump directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, out_dir);
        if (ablate->parsed()) return cmd_ablate(config_path, arms_text, out_dir);
        if (sample_cmd->parsed()) return cmd_sample(ckpt, prompt, seed, steps, sample_out);
        if (eval_cmd->parsed()) return cmd_eval(video_path, spec_text);
        if (analyze->parsed()) {
            const RunConfig rc = config_from_flag(config_path);
            if (hist->parsed())
                return cmd_analyze_hist(rc, prompt, set_name, bins, lo, hi, out_dir);
            if (project->parsed()) return cmd_analyze_project(rc, prompt, out_dir);
            if (fluct->parsed()) return cmd_analyze_fluct(rc, prompt, repeats, out_dir);
        }
        if (curate->parsed()) return cmd_curate(in_path, out_path, report_path);
        if (gradcheck_cmd->parsed()) return cmd_gradcheck();
        if (dump->parsed()) return cmd_dump_embeddings(config_path, prompt, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParamError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
