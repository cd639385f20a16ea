#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fusevid/tensor.hpp"

namespace fusevid {

// Deterministic stand-ins for the two text towers of a frozen language
// model.  Encoder tokens are narrow (clipped Gaussian, sigma ~0.17 inside
// [-0.5, 0.5]); decoder tokens are wide (sigma ~1.2, unclipped), so the two
// sources are easy to tell apart in analysis and tests.

inline constexpr double kEncoderSigma = 0.17;
inline constexpr double kDecoderSigma = 1.2;
inline constexpr double kAnswerPerturbScale = 0.5;
inline constexpr std::size_t kInstructionCount = 4;

// Splits on runs of whitespace.  Empty result is the caller's problem.
std::vector<std::string> tokenize_words(std::string_view text);

// The four fixed probe instructions used for instruction tokens.
const std::array<std::string, kInstructionCount>& default_instructions();

// One narrow token per word.  Deterministic in (prompt, d, seed): each
// component is a Gaussian draw with the given sigma, clamped to
// [-0.5, 0.5], from a stream keyed by (seed, word, position).  Empty
// prompt (no words) throws ParamError.
Tensor encode_prompt_encoder(std::string_view prompt, std::size_t d,
                             std::uint64_t seed,
                             double sigma = kEncoderSigma,
                             DType dtype = DType::f32);

// Wide decoder tokens for a prompt.  `query` has one token per word and
// depends only on (prompt, d, sigma): it simulates re-reading the prompt.
// `answer` has max(4, m) tokens; token j is the base vector of word
// j mod m plus a perturbation of scale `perturb` drawn from answer_seed,
// simulating a sampled free-text answer.
struct DecoderTokens {
    Tensor query;
    Tensor answer;
};
DecoderTokens encode_prompt_decoder(std::string_view prompt, std::size_t d,
                                    std::uint64_t answer_seed,
                                    double sigma = kDecoderSigma,
                                    double perturb = kAnswerPerturbScale,
                                    DType dtype = DType::f32);

// Mean-pooled decoder-query tokens of each instruction text, one row per
// instruction, shape (4, d).  Throws ArityError unless exactly 4 texts.
Tensor instruction_tokens(const std::vector<std::string>& instructions,
                          std::size_t d, double sigma = kDecoderSigma,
                          DType dtype = DType::f32);

// Everything the fuser consumes for one prompt.
struct TokenBundle {
    std::string prompt;
    std::uint64_t answer_seed = 0;
    Tensor encoder;         // (m, d)
    Tensor decoder_query;   // (m, d)
    Tensor decoder_answer;  // (max(4, m), d)
    Tensor instruction;     // (4, d)

    std::size_t width() const { return encoder.shape()[1]; }
    // Query and answer rows stacked, the decoder-token block seen by the
    // fuser's cross-attention.
    Tensor decoder_tokens() const;
};

struct SimParams {
    double encoder_sigma = kEncoderSigma;
    double decoder_sigma = kDecoderSigma;
    double answer_perturb = kAnswerPerturbScale;
    DType dtype = DType::f32;
};

// Runs all three simulators with the default instruction texts.
TokenBundle simulate_bundle(std::string_view prompt, std::size_t d,
                            std::uint64_t encoder_seed,
                            std::uint64_t answer_seed,
                            const SimParams& params = {});

// Writes manifest.json plus one tensor file per field into `dir`
// (created if absent).  Inverse of load_embedding_dump.
void write_embedding_dump(const std::string& dir, const TokenBundle& bundle);

// Loads a dump written by write_embedding_dump (or by an external
// exporter following the same layout).  Validates that every manifest
// entry is present, every tensor has width d, and the instruction block
// has exactly 4 rows; violations throw IngestError naming the entry.
TokenBundle load_embedding_dump(const std::string& dir, std::size_t d);

}  // namespace fusevid
