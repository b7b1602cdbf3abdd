#pragma once

// Run configuration: one JSON document fully determines a run. CLI flags
// apply dot-path overrides before parsing; every command writes the resolved
// snapshot beside its outputs.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmslt/decode.hpp"
#include "mmslt/engine.hpp"
#include "mmslt/model.hpp"
#include "mmslt/rng.hpp"

namespace mmslt {

struct MllmConfig {
    std::string client{"mock"};  // mock | http
    std::string model_id{"mock-mllm"};
    int prompt_id{default_prompt_id};
    int batch_frames{8};
    int max_tokens{256};
    int resize_side{256};
    std::string endpoint{"http://127.0.0.1:8080"};
    std::string path{"/v1/chat/completions"};
    std::string api_key_env{"MMSLT_API_KEY"};
    int retries{3};
    int backoff_ms{250};
};

inline void to_json(nlohmann::json& j, const MllmConfig& c) {
    j = nlohmann::json{{"client", c.client},       {"model_id", c.model_id},
                       {"prompt_id", c.prompt_id}, {"batch_frames", c.batch_frames},
                       {"max_tokens", c.max_tokens}, {"resize_side", c.resize_side},
                       {"endpoint", c.endpoint},   {"path", c.path},
                       {"api_key_env", c.api_key_env}, {"retries", c.retries},
                       {"backoff_ms", c.backoff_ms}};
}

inline void from_json(const nlohmann::json& j, MllmConfig& c) {
    c.client = j.value("client", c.client);
    c.model_id = j.value("model_id", c.model_id);
    c.prompt_id = j.value("prompt_id", c.prompt_id);
    c.batch_frames = j.value("batch_frames", c.batch_frames);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.resize_side = j.value("resize_side", c.resize_side);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.path = j.value("path", c.path);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.retries = j.value("retries", c.retries);
    c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
}

inline void stage_to_json(nlohmann::json& j, const StageConfig& c) {
    j = nlohmann::json{{"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"lr_max", c.lr_max},
                       {"lr_min", c.lr_min},
                       {"weight_decay", c.weight_decay},
                       {"betas", {c.beta1, c.beta2}},
                       {"label_smoothing", c.label_smoothing},
                       {"lambda", c.lambda},
                       {"augment_p", c.augment_p},
                       {"eval_every", c.eval_every}};
}

inline void stage_from_json(const nlohmann::json& j, StageConfig& c) {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_max = j.value("lr_max", c.lr_max);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    if (j.contains("betas")) {
        c.beta1 = j["betas"].at(0).get<double>();
        c.beta2 = j["betas"].at(1).get<double>();
    }
    c.label_smoothing = j.value("label_smoothing", c.label_smoothing);
    c.lambda = j.value("lambda", c.lambda);
    c.augment_p = j.value("augment_p", c.augment_p);
    c.eval_every = j.value("eval_every", c.eval_every);
}

struct PipelineConfig {
    std::uint64_t seed{7};
    ModelProfile model{ModelProfile::toy()};
    ModelOptions options;
    MllmConfig mllm;
    StageConfig mmlp{StageConfig::mmlp_defaults()};
    StageConfig slt{StageConfig::slt_defaults()};
    DecodeConfig decode{8, 1.0, 0};  // max_len 0 = derive from the train split

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["model"] = model;
        j["options"] = options;
        j["mllm"] = mllm;
        stage_to_json(j["mmlp"], mmlp);
        stage_to_json(j["slt"], slt);
        j["decode"] = {{"beam_size", decode.beam_size},
                       {"length_penalty", decode.length_penalty},
                       {"max_len", decode.max_len}};
        return j;
    }

    static PipelineConfig from_json(const nlohmann::json& j) {
        PipelineConfig c;
        c.seed = j.value("seed", c.seed);
        if (j.contains("model")) c.model = j["model"].get<ModelProfile>();
        if (j.contains("options")) c.options = j["options"].get<ModelOptions>();
        if (j.contains("mllm")) c.mllm = j["mllm"].get<MllmConfig>();
        if (j.contains("mmlp")) stage_from_json(j["mmlp"], c.mmlp);
        if (j.contains("slt")) stage_from_json(j["slt"], c.slt);
        if (j.contains("decode")) {
            c.decode.beam_size = j["decode"].value("beam_size", c.decode.beam_size);
            c.decode.length_penalty = j["decode"].value("length_penalty", c.decode.length_penalty);
            c.decode.max_len = j["decode"].value("max_len", c.decode.max_len);
        }
        c.mmlp.stage = Stage::mmlp;
        c.mmlp.seed = c.seed;
        c.slt.stage = Stage::slt;
        c.slt.seed = c.seed;
        return c;
    }

    std::string hash() const { return hex64(fnv1a(to_json().dump())); }
};

// dot-path override, value parsed as JSON when possible ("mmlp.epochs=5")
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw std::runtime_error("override must look like key.path=value: " + assignment);
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (...) {
        value = raw;  // unquoted string
    }
    nlohmann::json* cur = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw std::runtime_error("bad override path: " + assignment);
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            break;
        }
        cur = &(*cur)[key];
        start = dot + 1;
    }
}

inline PipelineConfig load_config(const std::filesystem::path& path,
                                  const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config not found: " + path.string());
        try {
            j = nlohmann::json::parse(in);
        } catch (const std::exception& e) {
            throw std::runtime_error("config " + path.string() + ": " + e.what());
        }
    }
    for (const auto& o : overrides) apply_override(j, o);
    return PipelineConfig::from_json(j);
}

inline void write_resolved_config(const std::filesystem::path& dir, const PipelineConfig& cfg) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "resolved_config.json");
    if (!out) throw std::runtime_error("cannot write resolved config in " + dir.string());
    out << cfg.to_json().dump(2) << "\n";
}

}  // namespace mmslt
