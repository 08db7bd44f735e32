// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <string_view>

namespace cei::harness {

struct Preset {
    std::string_view name;
    double alpha_max;
    double beta;
};

/// Reference depth and injection layer the presets were tuned for.
inline constexpr int kReferenceDepth = 32;
inline constexpr int kReferenceInjectLayer = 10;
inline constexpr int kPaperMaxNewTokens = 512;
inline constexpr int kDefaultProbeK = 40;

inline constexpr std::array<Preset, 3> kPresets = {{
    {"instructblip", 0.40, 0.70},
    {"llava15", 0.25, 0.55},
    {"llavanext", 0.17, 0.35},
}};

/// Throws ConfigError for an unknown name.
const Preset& find_preset(std::string_view name);

/// Keeps the relative depth of the reference injection layer:
/// round(10 * L / 32), clamped to [1, max(1, L - 1)].
int rescale_inject_layer(int num_layers, int reference_layer = kReferenceInjectLayer,
                         int reference_depth = kReferenceDepth);

}  // namespace cei::harness
