// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/harness/world.hpp"
#include "cei/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cei::harness {

/// One scene-conditioned sequence. Positions predicting tokens[i] for
/// i >= target_begin contribute to the loss.
struct TrainingExample {
    Matrix prefix;
    std::vector<TokenId> tokens;  // prompt followed by caption and <eos>
    int target_begin = 0;
};

enum class Optimizer { GradientDescent, Adam };
std::string to_string(Optimizer optimizer);
Optimizer parse_optimizer(const std::string& text);

struct TrainOptions {
    int epochs = 300;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Adam;
    int max_scenes = 0;  // 0 trains on every scene
    bool cosine_decay = true;  // learning rate follows a half cosine to zero over the run
    std::function<void(int epoch, double loss)> on_epoch;
};

struct TrainResult {
    DecoderWeights weights;
    std::vector<double> losses;  // losses[e] is the loss before update e; the last entry follows the final update
};

/// Captions are sampled once per scene from `seed`.
std::vector<TrainingExample> make_training_set(const World& world, std::uint64_t seed, int max_scenes = 0);

/// Mean next-token cross-entropy over every target position of the batch.
/// When `grad` is non-null it receives d loss / d parameter with the same
/// shapes as `weights`.
double loss_and_gradient(const DecoderWeights& weights, std::span<const TrainingExample> batch,
                         DecoderWeights* grad);

/// Full-batch training. Throws TrainingError when the loss stops being
/// finite.
TrainResult fit_toy_captioner(const DecoderWeights& weights, const World& world, const TrainOptions& options);

/// True when the mean loss of the final `window` entries does not exceed the
/// mean of the `window` entries before them.
bool trailing_window_non_increasing(std::span<const double> losses, int window = 10);

}  // namespace cei::harness
