// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/align.hpp"
#include "cei/halmetrics.hpp"
#include "cei/harness/config.hpp"
#include "cei/harness/plot_data.hpp"
#include "cei/harness/trainer.hpp"
#include "cei/harness/world.hpp"
#include "cei/intervene.hpp"
#include "cei/lens.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace cei::harness {

/// A generated object mention, labeled by the scene's ground truth.
struct LabeledToken {
    std::string scene_id;
    std::string word;     // surface text of the mention
    std::string object;   // canonical object
    TokenLabel label = TokenLabel::truthful;
    int token_index = 0;  // index of the first sub-token within the generated tokens
    int target_position = 0;  // absolute position in [scene rows; prompt; generated]
};

struct SceneCaption {
    std::string scene_id;
    Matrix prefix;
    std::vector<TokenId> prompt;
    DecodeTrace trace;
    std::string text;
};

struct ExperimentInputs {
    DecoderWeights weights;
    World world;
    std::vector<const SceneSpec*> scenes;  // honours max_scenes
};

/// Loads the weights and the world referenced by the config and checks that
/// they fit together.
ExperimentInputs load_inputs(const ExperimentConfig& config);

/// Greedy captions with no injection for every selected scene.
std::vector<SceneCaption> baseline_captions(const ExperimentInputs& inputs, int max_new_tokens);

/// Object mentions in a caption, labeled truthful when present in the scene.
std::vector<LabeledToken> label_mentions(const World& world, const SceneCaption& caption);

/// Every truthful label resolves to a present object and every
/// hallucinatory label to an absent one.
bool labels_sound(const World& world, std::span<const LabeledToken> labels);

struct ProbeResult {
    std::vector<LabeledToken> tokens;
    std::vector<CommitmentProfile> profiles;
    AggregateResult aggregate;
};

ProbeResult run_probe_experiment(const ExperimentConfig& config);
ProbeResult run_probe_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs);

struct DecodeExperimentResult {
    InjectionPolicy policy;  // resolved
    std::vector<DecodeTrace> baseline_traces;
    std::vector<DecodeTrace> policy_traces;
    std::vector<halmetrics::CaptionRecord> baseline_captions;
    std::vector<halmetrics::CaptionRecord> policy_captions;
    halmetrics::MetricReport baseline_report;
    halmetrics::MetricReport policy_report;
};

DecodeExperimentResult run_decode_experiment(const ExperimentConfig& config);
DecodeExperimentResult run_decode_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs,
                                             bool write_outputs = true);

struct AlignExperimentResult {
    std::vector<AlignmentSample> samples;
    AlignmentReport report;
    std::vector<std::string> warnings;  // one per skipped word
};

/// Sample for one labeled word, or nullopt with a warning appended when the
/// centered context or word vector has zero norm.
std::optional<AlignmentSample> alignment_sample_or_skip(const Vector& context, const WordVector& word, const Vector& mu,
                                                        const LabeledToken& token, std::vector<std::string>& warnings);

AlignExperimentResult run_align_experiment(const ExperimentConfig& config);
AlignExperimentResult run_align_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs);

std::vector<BranchedResult> run_branch(const ExperimentConfig& config);
std::vector<BranchedResult> run_branch(const ExperimentConfig& config, const ExperimentInputs& inputs);

struct SweepOptions {
    std::vector<double> alpha_maxes = {0.15, 0.17, 0.20};
    std::vector<double> betas = {0.25, 0.35, 0.45};
    /// When set, the world and model are synthesized and trained from the
    /// master seed under output_dir instead of being loaded.
    bool synthesize = true;
    /// Replaces the configured probe k; the synthesized vocabulary is too
    /// small for the default of 40 to leave any mass outside the top K.
    std::optional<int> probe_k;
    WorldParams world;
    ModelConfig model;
    TrainOptions train;
};

/// Small defaults that finish in seconds on one core.
SweepOptions default_sweep_options();

std::vector<SweepCell> run_sweep(const ExperimentConfig& config, const SweepOptions& options);

}  // namespace cei::harness
