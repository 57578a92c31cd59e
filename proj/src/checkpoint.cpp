#include "visloco/checkpoint.hpp"

#include <json.hpp>

#include <fstream>

namespace visloco::checkpoint {

using nlohmann::json;

namespace {

constexpr int kVersion = 1;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    json j;
    in >> j;
    return j;
}

Meta meta_from(const json& j) {
    if (!j.contains("format") || j["format"] != "visloco-checkpoint") {
        throw std::runtime_error("checkpoint: unrecognized format");
    }
    if (j.at("version").get<int>() != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version");
    }
    Meta meta;
    meta.architecture = j.value("architecture", "");
    meta.phase = j.value("phase", 0);
    if (j.contains("extra")) {
        for (auto& [k, v] : j["extra"].items()) meta.extra[k] = v.get<std::string>();
    }
    return meta;
}

}  // namespace

void save(const std::string& path, const std::vector<nn::ParamView>& views, const Meta& meta) {
    json j;
    j["format"] = "visloco-checkpoint";
    j["version"] = kVersion;
    j["architecture"] = meta.architecture;
    j["phase"] = meta.phase;
    j["extra"] = meta.extra;
    json params = json::object();
    for (const auto& v : views) {
        json entry;
        entry["shape"] = v.shape;
        entry["data"] = std::vector<double>(v.value, v.value + v.size);
        params[v.name] = std::move(entry);
    }
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << j.dump();
}

Meta load(const std::string& path, const std::vector<nn::ParamView>& views) {
    json j = read_json(path);
    Meta meta = meta_from(j);
    const json& params = j.at("params");
    for (const auto& v : views) {
        if (!params.contains(v.name)) {
            throw std::runtime_error("checkpoint: missing parameter " + v.name);
        }
        const json& entry = params.at(v.name);
        const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
        if (shape != v.shape) {
            throw std::runtime_error("checkpoint: shape mismatch for " + v.name);
        }
        const auto data = entry.at("data").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(data.size()) != v.size) {
            throw std::runtime_error("checkpoint: size mismatch for " + v.name);
        }
        std::copy(data.begin(), data.end(), v.value);
    }
    return meta;
}

Meta peek(const std::string& path) { return meta_from(read_json(path)); }

}  // namespace visloco::checkpoint
