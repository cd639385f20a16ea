#include "fusevid/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fusevid/errors.hpp"
#include "fusevid/tensor_io.hpp"
#include "json.hpp"

namespace fusevid {
namespace {

namespace fs = std::filesystem;

nlohmann::json read_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in)
        throw IngestError("checkpoint: cannot open " +
                          (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("checkpoint: bad manifest.json: " +
                          std::string(e.what()));
    }
    if (!manifest.contains("tensors") || !manifest["tensors"].is_array())
        throw IngestError("checkpoint: manifest has no tensor list");
    return manifest;
}

Tensor load_listed(const fs::path& dir, const nlohmann::json& entry) {
    if (!entry.contains("name") || !entry.contains("file"))
        throw IngestError("checkpoint: manifest entry missing name/file");
    const std::string name = entry["name"].get<std::string>();
    Tensor t;
    try {
        t = read_tensor((dir / entry["file"].get<std::string>()).string());
    } catch (const Error& e) {
        throw IngestError("checkpoint: parameter '" + name +
                          "': " + std::string(e.what()));
    }
    return t;
}

}  // namespace

void save_checkpoint(const std::string& dir, const NamedTensors& named,
                     const std::map<std::string, std::string>& meta) {
    const fs::path root(dir);
    fs::create_directories(root);

    nlohmann::json manifest;
    manifest["tensors"] = nlohmann::json::array();
    std::size_t index = 0;
    for (const auto& [name, t] : named) {
        char file[32];
        std::snprintf(file, sizeof(file), "p%04zu.mtf", index++);
        write_tensor((root / file).string(), t);
        nlohmann::json entry;
        entry["name"] = name;
        entry["file"] = file;
        entry["shape"] = t.shape();
        entry["dtype"] = dtype_name(t.dtype());
        manifest["tensors"].push_back(std::move(entry));
    }
    manifest["meta"] = meta;
    std::ofstream out(root / "manifest.json");
    if (!out)
        throw IngestError("checkpoint: cannot write manifest.json in " + dir);
    out << manifest.dump(2) << '\n';
}

NamedTensors load_checkpoint(const std::string& dir) {
    const fs::path root(dir);
    const auto manifest = read_manifest(root);
    NamedTensors out;
    for (const auto& entry : manifest["tensors"])
        out.emplace_back(entry["name"].get<std::string>(),
                         load_listed(root, entry));
    return out;
}

std::map<std::string, std::string> load_checkpoint_meta(
    const std::string& dir) {
    const auto manifest = read_manifest(fs::path(dir));
    std::map<std::string, std::string> meta;
    if (manifest.contains("meta"))
        for (const auto& [k, v] : manifest["meta"].items())
            meta[k] = v.get<std::string>();
    return meta;
}

void load_checkpoint_into(const std::string& dir, NamedTensors& target) {
    NamedTensors loaded = load_checkpoint(dir);
    if (loaded.size() != target.size())
        throw IngestError("checkpoint: has " + std::to_string(loaded.size()) +
                          " parameters, expected " +
                          std::to_string(target.size()));
    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : loaded) {
        if (!by_name.emplace(name, t).second)
            throw IngestError("checkpoint: duplicate parameter '" + name +
                              "'");
    }
    for (auto& [name, dst] : target) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw IngestError("checkpoint: missing parameter '" + name + "'");
        const Tensor& src = it->second;
        if (src.shape() != dst.shape())
            throw IngestError("checkpoint: parameter '" + name +
                              "' has shape " + shape_to_string(src.shape()) +
                              ", expected " + shape_to_string(dst.shape()));
        if (src.dtype() != dst.dtype())
            throw IngestError("checkpoint: parameter '" + name +
                              "' has dtype mismatch");
        if (dst.dtype() == DType::f32)
            std::memcpy(dst.data<float>().data(), src.data<float>().data(),
                        dst.numel() * sizeof(float));
        else
            std::memcpy(dst.data<double>().data(), src.data<double>().data(),
                        dst.numel() * sizeof(double));
    }
}

}  // namespace fusevid
