#pragma once

// File layout of a run directory, shared by `vwm simulate`, `vwm serve` and
// `vwm analyze`:
//
//   manifest.json                      written first
//   logs/p<NN>_<condition>.log         one event log per participant x condition
//   trials.csv                         simulated runs only

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vwm/event_log.hpp"

namespace vwm {

namespace fs = std::filesystem;

inline std::string log_file_name(int participant, Condition c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "p%02d_%s.log", participant, to_string(c).c_str());
    return buf;
}

/// Writes through a temporary file in the same directory and renames it over
/// `path`, so readers never see a partial file.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_condition_logs(const fs::path& run_dir, const std::array<ConditionLog, 4>& logs) {
    for (const auto& log : logs)
        write_file_atomic(run_dir / "logs" / log_file_name(log.participant, log.condition), format_log(log));
}

// ---- parameter files and manifests ----------------------------------------

inline constexpr std::array<const char*, 2> kInteractionKeys{"sensitivity", "animation_ms"};

inline std::vector<std::string> study_param_keys() {
    std::vector<std::string> keys;
    for (const char* k : DisplayConfig::keys) keys.emplace_back(k);
    for (const char* k : SceneConfig::keys) keys.emplace_back(k);
    for (const char* k : kInteractionKeys) keys.emplace_back(k);
    for (const char* k : AgentParams::keys) keys.emplace_back(k);
    return keys;
}

inline KeyValues study_params(const StudyConfig& cfg) {
    KeyValues kv;
    cfg.display.to_kv(kv);
    cfg.scene.to_kv(kv);
    kv.set("sensitivity", cfg.interaction.sensitivity);
    kv.set("animation_ms", cfg.interaction.animation_ms);
    cfg.agents.to_kv(kv);
    return kv;
}

/// One flat file may set display, scene, interaction and agent keys. Unknown
/// keys are rejected.
inline void apply_params(StudyConfig& cfg, const KeyValues& kv) {
    reject_unknown_keys(kv, study_param_keys());
    KeyValues merged = study_params(cfg);
    for (const auto& [k, v] : kv.entries()) merged.set(k, v);
    cfg.display = DisplayConfig::from_kv(merged);
    cfg.scene = SceneConfig::from_kv(merged);
    merged.read("sensitivity", cfg.interaction.sensitivity);
    merged.read("animation_ms", cfg.interaction.animation_ms);
    cfg.agents = AgentParams::from_kv(merged);
}

/// Throws ConfigError if the configuration cannot build a scene or drive agents.
inline void validate_study(const StudyConfig& cfg) {
    if (cfg.trials_per_condition < 0) throw ConfigError("trials_per_condition must be >= 0");
    if (!(cfg.interaction.sensitivity > 0) || !std::isfinite(cfg.interaction.sensitivity))
        throw ConfigError("sensitivity must be > 0");
    if (!(cfg.interaction.animation_ms >= 0) || !std::isfinite(cfg.interaction.animation_ms))
        throw ConfigError("animation_ms must be >= 0");
    cfg.agents.validate();
    (void)make_bar_for(cfg, layout_seed_for(participant_seed(cfg.seed, 0)));
}

inline constexpr std::string_view kManifestFormat = "vwm-run/1";

struct RunManifest {
    std::string command;            // subcommand that produced the directory
    std::vector<std::string> args;  // argv after the program name
    std::uint64_t seed = 0;
    int participants = 0;           // 0 for live runs
    int trials_per_condition = 0;
    std::string params_file;        // empty: built-in defaults
    std::string out;
    KeyValues params;               // every study parameter, resolved
};

inline std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.params.entries()) params[k] = v;
    nlohmann::ordered_json j{{"format", kManifestFormat},
                             {"command", m.command},
                             {"args", m.args},
                             {"seed", m.seed},
                             {"participants", m.participants},
                             {"trials_per_condition", m.trials_per_condition},
                             {"params_file", m.params_file},
                             {"out", m.out},
                             {"params", params}};
    return j.dump(2) + "\n";
}

inline RunManifest parse_manifest(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kManifestFormat)
            throw ConfigError("manifest: unsupported format " + j.at("format").dump());
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.args = j.at("args").get<std::vector<std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.participants = j.at("participants").get<int>();
        m.trials_per_condition = j.at("trials_per_condition").get<int>();
        m.params_file = j.at("params_file").get<std::string>();
        m.out = j.at("out").get<std::string>();
        for (const auto& [k, v] : j.at("params").items()) m.params.set(k, v.get<std::string>());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
}

inline StudyConfig study_from_manifest(const RunManifest& m) {
    StudyConfig cfg;
    cfg.seed = m.seed;
    cfg.participants = m.participants;
    cfg.trials_per_condition = m.trials_per_condition;
    apply_params(cfg, m.params);
    return cfg;
}

}  // namespace vwm
