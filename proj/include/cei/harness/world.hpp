// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/halmetrics.hpp"
#include "cei/harness/tokenizer.hpp"
#include "cei/ops.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cei::harness {

/// Instruction that follows the scene rows in every input.
inline constexpr std::string_view kPrompt = "describe this image in detail :";

struct WorldParams {
    int ontology_size = 32;
    int num_scenes = 100;
    std::uint64_t seed = 0;
    int vocab_size = 256;
    int dim = 64;
    double noise_scale = 0.1;

    nlohmann::json to_json() const;
    static WorldParams from_json(const nlohmann::json& j);
};

struct SceneSpec {
    std::string scene_id;
    std::vector<int> object_ids;  // sorted, distinct indices into World::objects
    std::uint64_t noise_seed = 0;
};

struct ObjectEntry {
    std::string name;
    std::optional<std::string> synonym;
    std::optional<std::string> plural;
};

struct World {
    WorldParams params;
    Tokenizer tokenizer;
    halmetrics::Ontology ontology;
    std::vector<ObjectEntry> objects;
    std::vector<SceneSpec> scenes;
    std::vector<halmetrics::GroundTruth> ground_truth;  // parallel to scenes
    Matrix object_table;  // [objects x dim]

    std::vector<TokenId> prompt_ids() const { return tokenizer.encode(kPrompt); }
    std::vector<std::string> object_names(const SceneSpec& scene) const;
    const SceneSpec& scene(const std::string& scene_id) const;
    halmetrics::GroundTruthIndex truth_index() const { return halmetrics::index_ground_truth(ground_truth); }
};

/// Throws ConfigError when the ontology or the function words do not fit the
/// vocabulary.
World synth_world(const WorldParams& params);

/// One row per object: table row plus Gaussian noise seeded by the scene.
Matrix render_scene(const SceneSpec& spec, const Matrix& embedding_table, double noise_scale);

/// "a photo of X , Y and Z ." followed by <eos>. The rng picks the order and
/// each object's surface form (name, synonym or plural).
std::vector<TokenId> caption_tokens(const World& world, const SceneSpec& scene, std::mt19937_64& rng);

std::vector<SceneSpec> read_scenes(const std::filesystem::path& path, int num_objects);
std::vector<halmetrics::GroundTruth> read_ground_truth(const std::filesystem::path& path);

void save_world(const World& world, const std::filesystem::path& dir);
World load_world(const std::filesystem::path& dir);

}  // namespace cei::harness
