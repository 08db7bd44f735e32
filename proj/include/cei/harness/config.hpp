// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/intervene.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

namespace cei::harness {

inline constexpr int kConfigSchemaVersion = 1;

/// Policy fields that may be left unset at one configuration layer.
struct PolicySpec {
    std::optional<InjectionMode> mode;
    std::optional<double> alpha;
    bool alpha_auto = false;  // static weight taken from a dynamic run's mean alpha
    std::optional<double> alpha_max;
    std::optional<double> beta;
    std::optional<SchedulerKind> scheduler;
    std::optional<int> inject_layer;

    /// Fields set in `other` replace ours.
    void merge(const PolicySpec& other);
};

struct ExperimentConfig {
    std::filesystem::path weights_path;
    std::filesystem::path world_dir;
    std::optional<std::filesystem::path> scenes_path;        // default: world_dir/scenes.jsonl
    std::optional<std::filesystem::path> ground_truth_path;  // default: world_dir/ground_truth.jsonl
    std::optional<std::filesystem::path> ontology_path;      // default: world_dir/ontology.json
    std::filesystem::path output_dir = "out";

    PolicySpec policy_file;   // from the configuration file
    std::optional<std::string> preset;
    PolicySpec policy_flags;  // from the command line

    int max_new_tokens = 64;
    int probe_k = 40;
    std::uint64_t seed = 0;
    int branch_length = 10;
    int scene_offset = 0;  // skip this many scenes (e.g. the training split)
    int max_scenes = 0;    // 0 uses every remaining scene
    int bootstrap_n = 1000;

    /// max_new_tokens >= 1, probe_k >= 1, branch_length >= 1, known preset.
    void validate() const;
    /// Throws InputError naming the first referenced path that does not exist.
    void check_paths() const;

    std::filesystem::path scenes_file() const;
    std::filesystem::path ground_truth_file() const;
    std::filesystem::path ontology_file() const;

    nlohmann::json to_json() const;
    /// Throws FormatError on a malformed or wrong-version document.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
};

/// Defaults, then the configuration file, then the preset, then flags.
/// Unset layers default to a dynamic half-cosine policy with the llava15
/// values; the injection layer is rescaled to the model depth; a static
/// weight without a value defaults to alpha_max / 2. `alpha_auto` is left for
/// the caller to resolve.
InjectionPolicy resolve_policy(const ExperimentConfig& config, const ModelConfig& model);

/// True when the resolved static weight should come from a dynamic run.
bool wants_auto_alpha(const ExperimentConfig& config);

nlohmann::json to_json(const PolicySpec& spec);
PolicySpec policy_spec_from_json(const nlohmann::json& j);

}  // namespace cei::harness
