#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fusevid/config.hpp"
#include "fusevid/dataset.hpp"
#include "fusevid/denoiser.hpp"
#include "fusevid/media.hpp"
#include "fusevid/schedule.hpp"
#include "fusevid/textcond.hpp"

namespace fusevid {

// Training loop over the synthetic scene dataset: latent diffusion with
// fused text conditioning, an Adam optimizer, per-step CSV metrics, and a
// deterministic DDIM-style sampler. Every random draw comes from a labeled
// split of the config seeds, so a (config, thread-count-1) pair fixes every
// logged number bit-exactly.

struct TrainConfig {
    std::uint64_t seed = 42;
    std::size_t steps = 200;
    std::size_t batch = 2;
    double lr = 1e-3;

    std::size_t clips = 8;
    std::uint64_t data_seed = 7;
    std::uint64_t answer_seed = 99;
    std::size_t checkpoint_every = 0;  // 0 = final checkpoint only

    std::size_t text_width = 32;
    std::uint64_t encoder_seed = 1234;
    FuserOptions fuser;

    std::size_t timesteps = 50;
    double beta_start = 0.00085;
    double beta_end = 0.012;
    PredictionMode mode = PredictionMode::v;
    bool zero_snr = true;

    std::size_t d_model = 64;
    std::size_t depth = 2;
    std::size_t heads = 4;

    std::size_t channels = 8;
    PatchSpec patch;
};

// Bidirectional bridge to the flat key = value registry.
TrainConfig to_train_config(const RunConfig& rc);
RunConfig to_run_config(const TrainConfig& cfg);

// Everything a run needs, constructed deterministically from the config:
// schedule, frozen codec, fresh model and fuser, and the latent geometry of
// the scene dataset.
struct Pipeline {
    TrainConfig cfg;
    Schedule sched;
    MediaCoder coder;
    DenoiserState model;
    FuserState fuser;
    std::vector<std::size_t> latent_dims;  // (frames, h, w, C)
};

Pipeline make_pipeline(const TrainConfig& cfg);

// One training example: clean latent tokens, its text conditioning, a
// timestep, and the noise draw for that step.
struct TrainItem {
    Tensor video_tokens;  // (L, w), no grad
    TokenBundle bundle;
    std::size_t t = 1;
    Tensor noise;  // (L, w)
};

// Mean squared error between the model prediction and the parameterization
// target, averaged over every element of the batch. Differentiable.
Tensor diffusion_loss(const std::vector<TrainItem>& batch,
                      const DenoiserState& model, const FuserState& fuser,
                      const Schedule& sched);

struct TrainResult {
    std::vector<double> losses;
    std::vector<double> grad_norms;
    bool diverged = false;
    std::size_t steps_run = 0;
    std::filesystem::path checkpoint_dir;
};

// Runs the loop, writing metrics.csv (step,loss,grad_norm), periodic
// checkpoints, and a final checkpoint into out_dir. Divergence (non-finite
// loss, or loss above 10x the first step's value for 20 consecutive steps)
// halts the run, keeps the partial log, and sets the flag.
TrainResult train_run(const TrainConfig& cfg,
                      const std::filesystem::path& out_dir);
TrainResult train_run(Pipeline& pipe, const std::vector<DatasetItem>& data,
                      const std::filesystem::path& out_dir);

// Deterministic sampler: starts from pure seeded noise at t = T, walks a
// trailing timestep subsequence with eta = 0 updates built on the
// clean-sample reconstruction, and decompresses the final latent.
VideoClip sample(const Pipeline& pipe, const std::string& prompt,
                 std::size_t steps, std::uint64_t seed);

// Rebuilds the pipeline recorded in a checkpoint's meta block and loads the
// saved weights into it.
Pipeline pipeline_from_checkpoint(const std::filesystem::path& ckpt_dir);
VideoClip sample_from_checkpoint(const std::filesystem::path& ckpt_dir,
                                 const std::string& prompt, std::size_t steps,
                                 std::uint64_t seed);

// Ablation arms: named fuser flag settings, trained on identical data and
// seeds, scored by sampling a training prompt after the run.
struct ArmResult {
    std::string name;
    FuserOptions flags;
    std::vector<double> losses;
    double final_loss = 0.0;
    bool diverged = false;
    SemanticScores scores;
};

struct AblationReport {
    std::vector<ArmResult> arms;
};

// Maps "a1".."a7" onto flag settings; alpha/gamma/eps come from `base`.
FuserOptions arm_flags(const std::string& name, const FuserOptions& base);

AblationReport ablation_run(const TrainConfig& base,
                            const std::vector<std::string>& arms,
                            const std::filesystem::path& out_dir);

}  // namespace fusevid
