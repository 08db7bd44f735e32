// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/harness/config.hpp"

#include "cei/error.hpp"
#include "cei/harness/file_io.hpp"
#include "cei/harness/presets.hpp"

namespace cei::harness {

namespace fs = std::filesystem;

void PolicySpec::merge(const PolicySpec& other) {
    if (other.mode) mode = other.mode;
    if (other.alpha) {
        alpha = other.alpha;
        alpha_auto = false;
    }
    if (other.alpha_auto) {
        alpha_auto = true;
        alpha.reset();
    }
    if (other.alpha_max) alpha_max = other.alpha_max;
    if (other.beta) beta = other.beta;
    if (other.scheduler) scheduler = other.scheduler;
    if (other.inject_layer) inject_layer = other.inject_layer;
}

void ExperimentConfig::validate() const {
    if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be at least 1");
    if (probe_k < 1) throw ConfigError("probe k must be at least 1");
    if (branch_length < 1) throw ConfigError("branch_length must be at least 1");
    if (max_scenes < 0) throw ConfigError("max_scenes must be >= 0");
    if (scene_offset < 0) throw ConfigError("scene_offset must be >= 0");
    if (bootstrap_n < 1) throw ConfigError("bootstrap_n must be at least 1");
    if (preset) find_preset(*preset);
}

void ExperimentConfig::check_paths() const {
    for (const auto& p : {weights_path, scenes_file(), ground_truth_file(), ontology_file()}) {
        if (!fs::exists(p)) throw InputError("path does not exist: " + p.string());
    }
}

fs::path ExperimentConfig::scenes_file() const { return scenes_path.value_or(world_dir / "scenes.jsonl"); }
fs::path ExperimentConfig::ground_truth_file() const {
    return ground_truth_path.value_or(world_dir / "ground_truth.jsonl");
}
fs::path ExperimentConfig::ontology_file() const { return ontology_path.value_or(world_dir / "ontology.json"); }

nlohmann::json to_json(const PolicySpec& s) {
    nlohmann::json j = nlohmann::json::object();
    if (s.mode) j["mode"] = to_string(*s.mode);
    if (s.alpha_auto) j["alpha"] = "auto";
    else if (s.alpha) j["alpha"] = *s.alpha;
    if (s.alpha_max) j["alpha_max"] = *s.alpha_max;
    if (s.beta) j["beta"] = *s.beta;
    if (s.scheduler) j["scheduler"] = to_string(*s.scheduler);
    if (s.inject_layer) j["inject_layer"] = *s.inject_layer;
    return j;
}

PolicySpec policy_spec_from_json(const nlohmann::json& j) {
    PolicySpec s;
    if (!j.is_object()) throw FormatError("policy must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "mode") {
            s.mode = parse_injection_mode(value.get<std::string>());
        } else if (key == "alpha") {
            if (value.is_string() && value.get<std::string>() == "auto") s.alpha_auto = true;
            else s.alpha = value.get<double>();
        } else if (key == "alpha_max") {
            s.alpha_max = value.get<double>();
        } else if (key == "beta") {
            s.beta = value.get<double>();
        } else if (key == "scheduler") {
            s.scheduler = parse_scheduler_kind(value.get<std::string>());
        } else if (key == "inject_layer") {
            s.inject_layer = value.get<int>();
        } else {
            throw FormatError("unknown policy field '" + key + "'");
        }
    }
    return s;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j{{"schema_version", kConfigSchemaVersion},
                     {"weights", weights_path.string()},
                     {"world", world_dir.string()},
                     {"output_dir", output_dir.string()},
                     {"policy", harness::to_json(policy_file)},
                     {"max_new_tokens", max_new_tokens},
                     {"probe_k", probe_k},
                     {"seed", seed},
                     {"branch_length", branch_length},
                     {"scene_offset", scene_offset},
                     {"max_scenes", max_scenes},
                     {"bootstrap_n", bootstrap_n}};
    if (preset) j["preset"] = *preset;
    if (scenes_path) j["scenes"] = scenes_path->string();
    if (ground_truth_path) j["ground_truth"] = ground_truth_path->string();
    if (ontology_path) j["ontology"] = ontology_path->string();
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        if (!j.is_object()) throw FormatError("configuration must be a JSON object");
        const int version = j.at("schema_version").get<int>();
        if (version != kConfigSchemaVersion) {
            throw FormatError("unsupported configuration schema_version " + std::to_string(version));
        }
        for (const auto& [key, value] : j.items()) {
            if (key == "schema_version") continue;
            if (key == "weights") c.weights_path = value.get<std::string>();
            else if (key == "world") c.world_dir = value.get<std::string>();
            else if (key == "scenes") c.scenes_path = value.get<std::string>();
            else if (key == "ground_truth") c.ground_truth_path = value.get<std::string>();
            else if (key == "ontology") c.ontology_path = value.get<std::string>();
            else if (key == "output_dir") c.output_dir = value.get<std::string>();
            else if (key == "policy") c.policy_file = policy_spec_from_json(value);
            else if (key == "preset") c.preset = value.get<std::string>();
            else if (key == "max_new_tokens") c.max_new_tokens = value.get<int>();
            else if (key == "probe_k") c.probe_k = value.get<int>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "branch_length") c.branch_length = value.get<int>();
            else if (key == "scene_offset") c.scene_offset = value.get<int>();
            else if (key == "max_scenes") c.max_scenes = value.get<int>();
            else if (key == "bootstrap_n") c.bootstrap_n = value.get<int>();
            else throw FormatError("unknown configuration field '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed configuration: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("invalid configuration: ") + e.what());
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) { return from_json(read_json(path)); }

InjectionPolicy resolve_policy(const ExperimentConfig& config, const ModelConfig& model) {
    PolicySpec merged;
    merged.merge(config.policy_file);
    if (config.preset) {
        const Preset& p = find_preset(*config.preset);
        PolicySpec from_preset;
        from_preset.alpha_max = p.alpha_max;
        from_preset.beta = p.beta;
        merged.merge(from_preset);
    }
    merged.merge(config.policy_flags);

    const Preset& fallback = find_preset("llava15");
    InjectionPolicy policy;
    policy.mode = merged.mode.value_or(InjectionMode::Dynamic);
    policy.alpha_max = merged.alpha_max.value_or(fallback.alpha_max);
    policy.beta = merged.beta.value_or(fallback.beta);
    policy.scheduler = merged.scheduler.value_or(SchedulerKind::HalfCosine);
    policy.inject_layer = merged.inject_layer.value_or(rescale_inject_layer(model.num_layers));
    policy.alpha = merged.alpha.value_or(policy.alpha_max / 2.0);
    policy.probe_k = config.probe_k;
    if (policy.mode == InjectionMode::Off) policy.alpha = 0.0;
    policy.validate(model);
    return policy;
}

bool wants_auto_alpha(const ExperimentConfig& config) {
    PolicySpec spec;
    spec.merge(config.policy_file);
    spec.merge(config.policy_flags);
    return spec.alpha_auto;
}

}  // namespace cei::harness
