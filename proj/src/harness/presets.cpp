// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/harness/presets.hpp"

#include "cei/error.hpp"

#include <algorithm>
#include <cmath>

namespace cei::harness {

const Preset& find_preset(std::string_view name) {
    for (const auto& p : kPresets) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected instructblip, llava15 or llavanext)");
}

int rescale_inject_layer(int num_layers, int reference_layer, int reference_depth) {
    if (num_layers < 1 || reference_depth < 1) throw ConfigError("layer counts must be positive");
    const auto scaled = std::lround(static_cast<double>(reference_layer) * num_layers / reference_depth);
    const long hi = std::max(1, num_layers - 1);
    return static_cast<int>(std::clamp(scaled, 1L, hi));
}

}  // namespace cei::harness
