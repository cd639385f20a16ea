#include "fusevid/textcond.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

#include "fusevid/errors.hpp"
#include "fusevid/rng.hpp"
#include "fusevid/tensor_io.hpp"
#include "json.hpp"

namespace fusevid {
namespace {

// A token stream keyed by (base, word, position).  Splitting by word then
// by position keeps identical words at different positions independent.
Rng word_stream(std::uint64_t base, std::string_view word, std::size_t pos) {
    return Rng(base).split(word).split(static_cast<std::uint64_t>(pos));
}

// Fixed base for decoder streams: decoder tokens are a function of the
// prompt alone, with no caller-supplied seed.
constexpr std::uint64_t kDecoderBase = 0x8d1c4f02be77a1e3ull;

template <typename T>
void fill_gaussian_row(Tensor& out, std::size_t row, Rng& rng, double sigma,
                       bool clip) {
    auto span = out.data<T>();
    const std::size_t d = out.shape()[1];
    for (std::size_t k = 0; k < d; ++k) {
        double v = rng.normal() * sigma;
        if (clip) v = std::clamp(v, -0.5, 0.5);
        span[row * d + k] = static_cast<T>(v);
    }
}

void fill_row(Tensor& out, std::size_t row, Rng& rng, double sigma,
              bool clip) {
    if (out.dtype() == DType::f32)
        fill_gaussian_row<float>(out, row, rng, sigma, clip);
    else
        fill_gaussian_row<double>(out, row, rng, sigma, clip);
}

std::vector<std::string> require_words(std::string_view prompt) {
    auto words = tokenize_words(prompt);
    if (words.empty())
        throw ParamError("text simulator: prompt has no words");
    return words;
}

Tensor decoder_query_tokens(const std::vector<std::string>& words,
                            std::size_t d, double sigma, DType dtype) {
    Tensor out = Tensor::zeros({words.size(), d}, dtype);
    for (std::size_t i = 0; i < words.size(); ++i) {
        Rng rng = word_stream(kDecoderBase, words[i], i);
        fill_row(out, i, rng, sigma, /*clip=*/false);
    }
    return out;
}

void add_perturbation(Tensor& out, std::size_t row, Rng& rng, double scale) {
    const std::size_t d = out.shape()[1];
    for (std::size_t k = 0; k < d; ++k) {
        const double delta = rng.normal() * scale;
        const std::size_t at = row * d + k;
        out.set_value_at(at, out.value_at(at) + delta);
    }
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in)
        throw IngestError("embedding dump: cannot open " + path.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("embedding dump: bad manifest.json: " +
                          std::string(e.what()));
    }
    return manifest;
}

Tensor load_entry(const std::filesystem::path& dir,
                  const nlohmann::json& manifest, const std::string& key,
                  std::size_t d) {
    if (!manifest.contains(key))
        throw IngestError("embedding dump: manifest missing entry '" + key +
                          "'");
    if (!manifest[key].is_string())
        throw IngestError("embedding dump: entry '" + key +
                          "' is not a file name");
    const auto path = dir / manifest[key].get<std::string>();
    Tensor t;
    try {
        t = read_tensor(path.string());
    } catch (const Error& e) {
        throw IngestError("embedding dump: entry '" + key +
                          "': " + std::string(e.what()));
    }
    if (t.rank() != 2)
        throw IngestError("embedding dump: entry '" + key + "' has rank " +
                          std::to_string(t.rank()) + ", expected 2");
    if (t.shape()[1] != d)
        throw IngestError("embedding dump: entry '" + key + "' has width " +
                          std::to_string(t.shape()[1]) + ", expected " +
                          std::to_string(d));
    return t;
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() &&
               std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        std::size_t start = i;
        while (i < text.size() &&
               !std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    return words;
}

const std::array<std::string, kInstructionCount>& default_instructions() {
    static const std::array<std::string, kInstructionCount> texts = {
        "Describe the detailed objects in the video.",
        "Describe the colors of the objects in the video.",
        "Describe the motion and direction of the objects in the video.",
        "Describe the spatial relations between the objects in the video.",
    };
    return texts;
}

Tensor encode_prompt_encoder(std::string_view prompt, std::size_t d,
                             std::uint64_t seed, double sigma, DType dtype) {
    if (d == 0) throw ParamError("text simulator: width must be positive");
    const auto words = require_words(prompt);
    Tensor out = Tensor::zeros({words.size(), d}, dtype);
    for (std::size_t i = 0; i < words.size(); ++i) {
        Rng rng = word_stream(seed, words[i], i);
        fill_row(out, i, rng, sigma, /*clip=*/true);
    }
    return out;
}

DecoderTokens encode_prompt_decoder(std::string_view prompt, std::size_t d,
                                    std::uint64_t answer_seed, double sigma,
                                    double perturb, DType dtype) {
    if (d == 0) throw ParamError("text simulator: width must be positive");
    const auto words = require_words(prompt);
    const std::size_t m = words.size();
    const std::size_t ma = std::max<std::size_t>(4, m);

    DecoderTokens out;
    out.query = decoder_query_tokens(words, d, sigma, dtype);
    out.answer = Tensor::zeros({ma, d}, dtype);
    Rng perturb_rng = Rng(answer_seed).split("answer");
    for (std::size_t j = 0; j < ma; ++j) {
        Rng base = word_stream(kDecoderBase, words[j % m], j % m);
        fill_row(out.answer, j, base, sigma, /*clip=*/false);
        Rng jitter = perturb_rng.split(static_cast<std::uint64_t>(j));
        add_perturbation(out.answer, j, jitter, perturb);
    }
    return out;
}

Tensor instruction_tokens(const std::vector<std::string>& instructions,
                          std::size_t d, double sigma, DType dtype) {
    if (instructions.size() != kInstructionCount)
        throw ArityError("instruction tokens: expected " +
                         std::to_string(kInstructionCount) + " texts, got " +
                         std::to_string(instructions.size()));
    Tensor out = Tensor::zeros({kInstructionCount, d}, dtype);
    for (std::size_t i = 0; i < kInstructionCount; ++i) {
        const auto words = require_words(instructions[i]);
        Tensor toks = decoder_query_tokens(words, d, sigma, dtype);
        for (std::size_t k = 0; k < d; ++k) {
            double acc = 0.0;
            for (std::size_t r = 0; r < words.size(); ++r)
                acc += toks.value_at(r * d + k);
            out.set_value_at(i * d + k,
                             acc / static_cast<double>(words.size()));
        }
    }
    return out;
}

Tensor TokenBundle::decoder_tokens() const {
    return concat({decoder_query, decoder_answer}, 0);
}

TokenBundle simulate_bundle(std::string_view prompt, std::size_t d,
                            std::uint64_t encoder_seed,
                            std::uint64_t answer_seed,
                            const SimParams& params) {
    TokenBundle bundle;
    bundle.prompt = std::string(prompt);
    bundle.answer_seed = answer_seed;
    bundle.encoder = encode_prompt_encoder(prompt, d, encoder_seed,
                                           params.encoder_sigma, params.dtype);
    auto dec = encode_prompt_decoder(prompt, d, answer_seed,
                                     params.decoder_sigma,
                                     params.answer_perturb, params.dtype);
    bundle.decoder_query = std::move(dec.query);
    bundle.decoder_answer = std::move(dec.answer);
    const auto& texts = default_instructions();
    bundle.instruction = instruction_tokens(
        std::vector<std::string>(texts.begin(), texts.end()), d,
        params.decoder_sigma, params.dtype);
    return bundle;
}

void write_embedding_dump(const std::string& dir, const TokenBundle& bundle) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    fs::create_directories(root);

    write_tensor((root / "encoder.mtf").string(), bundle.encoder);
    write_tensor((root / "decoder_query.mtf").string(), bundle.decoder_query);
    write_tensor((root / "decoder_answer.mtf").string(),
                 bundle.decoder_answer);
    write_tensor((root / "instruction.mtf").string(), bundle.instruction);

    nlohmann::json manifest;
    manifest["prompt"] = bundle.prompt;
    manifest["d"] = bundle.width();
    manifest["encoder"] = "encoder.mtf";
    manifest["decoder_query"] = "decoder_query.mtf";
    manifest["decoder_answer"] = "decoder_answer.mtf";
    manifest["instruction"] = "instruction.mtf";
    std::ofstream out(root / "manifest.json");
    if (!out)
        throw IngestError("embedding dump: cannot write manifest.json in " +
                          dir);
    out << manifest.dump(2) << '\n';
}

TokenBundle load_embedding_dump(const std::string& dir, std::size_t d) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    const auto manifest = read_manifest(root);

    if (!manifest.contains("prompt"))
        throw IngestError("embedding dump: manifest missing entry 'prompt'");
    if (!manifest.contains("d"))
        throw IngestError("embedding dump: manifest missing entry 'd'");
    if (manifest["d"].get<std::size_t>() != d)
        throw IngestError("embedding dump: manifest width " +
                          manifest["d"].dump() + " does not match expected " +
                          std::to_string(d));

    TokenBundle bundle;
    bundle.prompt = manifest["prompt"].get<std::string>();
    bundle.encoder = load_entry(root, manifest, "encoder", d);
    bundle.decoder_query = load_entry(root, manifest, "decoder_query", d);
    bundle.decoder_answer = load_entry(root, manifest, "decoder_answer", d);
    bundle.instruction = load_entry(root, manifest, "instruction", d);
    if (bundle.instruction.shape()[0] != kInstructionCount)
        throw IngestError("embedding dump: entry 'instruction' has " +
                          std::to_string(bundle.instruction.shape()[0]) +
                          " rows, expected " +
                          std::to_string(kInstructionCount));
    return bundle;
}

}  // namespace fusevid
