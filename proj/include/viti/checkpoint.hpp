#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "viti/dit.hpp"
#include "viti/nn.hpp"

namespace viti {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Checkpoint directory layout:
//   manifest.json  - format version, producing stage, model config,
//                    tensor table (name -> shape/dtype/offset/bytes)
//   tensors.bin    - raw little-endian float64 payload
// Tensor names are the stable public API; loading is by name.

inline json dit_config_to_json(const DiTConfig& c) {
    return json{{"depth", c.depth},
                {"dim", c.dim},
                {"heads", c.heads},
                {"patch", c.patch},
                {"text_dim", c.text_dim},
                {"garment_dim", c.garment_dim},
                {"garment_scale", c.garment_scale},
                {"latent_channels", c.latent_channels},
                {"ffn_mult", c.ffn_mult},
                {"max_frames", c.max_frames},
                {"max_rows", c.max_rows},
                {"max_cols", c.max_cols},
                {"max_timestep", c.max_timestep},
                {"garment_branch", c.garment_branch},
                {"pose_branch", c.pose_branch}};
}

inline DiTConfig dit_config_from_json(const json& j) {
    DiTConfig c;
    c.depth = j.at("depth").get<int>();
    c.dim = j.at("dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.patch = j.at("patch").get<int>();
    c.text_dim = j.at("text_dim").get<int>();
    c.garment_dim = j.at("garment_dim").get<int>();
    c.garment_scale = j.at("garment_scale").get<double>();
    c.latent_channels = j.at("latent_channels").get<int>();
    c.ffn_mult = j.at("ffn_mult").get<int>();
    c.max_frames = j.at("max_frames").get<int>();
    c.max_rows = j.at("max_rows").get<int>();
    c.max_cols = j.at("max_cols").get<int>();
    c.max_timestep = j.at("max_timestep").get<int>();
    c.garment_branch = j.at("garment_branch").get<bool>();
    c.pose_branch = j.at("pose_branch").get<bool>();
    c.validate();
    return c;
}

inline void save_checkpoint(const fs::path& dir, const nn::ParamStore& store, const DiTConfig& cfg,
                            const std::string& stage) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = 1;
    manifest["stage"] = stage;
    manifest["config"] = dit_config_to_json(cfg);
    json tensors = json::array();

    std::ofstream bin(dir / "tensors.bin", std::ios::binary | std::ios::trunc);
    if (!bin)
        throw IoError("cannot write " + (dir / "tensors.bin").string());
    uint64_t offset = 0;
    for (const auto& [name, var] : store.all()) {
        const Tensor& t = var.value();
        json entry;
        entry["name"] = name;
        entry["shape"] = t.shape;
        entry["dtype"] = "f64";
        entry["offset"] = offset;
        uint64_t nbytes = static_cast<uint64_t>(t.numel()) * sizeof(double);
        entry["bytes"] = nbytes;
        tensors.push_back(entry);
        bin.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(nbytes));
        offset += nbytes;
    }
    bin.close();
    manifest["tensors"] = tensors;

    std::ofstream mf(dir / "manifest.json", std::ios::trunc);
    if (!mf)
        throw IoError("cannot write " + (dir / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
}

struct CheckpointInfo {
    std::string stage;
    DiTConfig config;
    std::set<std::string> tensor_names;
};

inline json read_manifest(const fs::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf)
        throw IoError("cannot read " + (dir / "manifest.json").string());
    json manifest;
    mf >> manifest;
    return manifest;
}

inline CheckpointInfo checkpoint_info(const fs::path& dir) {
    json manifest = read_manifest(dir);
    CheckpointInfo info;
    info.stage = manifest.at("stage").get<std::string>();
    info.config = dit_config_from_json(manifest.at("config"));
    for (const auto& e : manifest.at("tensors"))
        info.tensor_names.insert(e.at("name").get<std::string>());
    return info;
}

// Loads checkpoint tensors into the store by name. Every checkpoint tensor
// must exist in the store with a matching shape; store parameters missing
// from the checkpoint keep their fresh initialization and are reported back
// (the stage-transition case: new adapter/pose tensors).
inline std::set<std::string> load_checkpoint(const fs::path& dir, nn::ParamStore& store) {
    json manifest = read_manifest(dir);
    std::ifstream bin(dir / "tensors.bin", std::ios::binary);
    if (!bin)
        throw IoError("cannot read " + (dir / "tensors.bin").string());

    std::set<std::string> loaded;
    for (const auto& e : manifest.at("tensors")) {
        std::string name = e.at("name").get<std::string>();
        if (!store.contains(name))
            throw ContractError("checkpoint tensor has no destination parameter: " + name);
        ag::Var var = store.get(name);
        std::vector<int64_t> shape = e.at("shape").get<std::vector<int64_t>>();
        if (shape != var.value().shape)
            throw ContractError("checkpoint tensor shape mismatch: " + name);
        uint64_t offset = e.at("offset").get<uint64_t>();
        uint64_t nbytes = e.at("bytes").get<uint64_t>();
        Tensor& dst = var.mutable_value();
        if (nbytes != static_cast<uint64_t>(dst.numel()) * sizeof(double))
            throw ContractError("checkpoint tensor byte count mismatch: " + name);
        bin.seekg(static_cast<std::streamoff>(offset));
        bin.read(reinterpret_cast<char*>(dst.data.data()), static_cast<std::streamsize>(nbytes));
        if (!bin)
            throw IoError("checkpoint payload truncated at " + name);
        loaded.insert(name);
    }
    std::set<std::string> fresh;
    for (const auto& [name, var] : store.all())
        if (!loaded.count(name))
            fresh.insert(name);
    return fresh;
}

}  // namespace viti
