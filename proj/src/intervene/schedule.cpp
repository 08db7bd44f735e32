// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/error.hpp"
#include "cei/intervene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cei {
namespace {

void check_schedule_args(double mean_mass, double alpha_max, double beta) {
    if (!(beta > 0.0) || beta > 1.0) throw InputError("beta must lie in (0, 1]");
    if (!(alpha_max >= 0.0 && alpha_max <= 1.0)) throw InputError("alpha_max must lie in [0, 1]");
    if (!(mean_mass >= 0.0 && mean_mass <= 1.0)) throw InputError("mean mass must lie in [0, 1]");
}

}  // namespace

double schedule_half_cosine(double mean_mass, double alpha_max, double beta) {
    check_schedule_args(mean_mass, alpha_max, beta);
    if (mean_mass >= beta) return 0.0;
    return std::max(alpha_max * std::cos(std::numbers::pi / 2.0 * mean_mass / beta), 0.0);
}

double schedule_linear(double mean_mass, double alpha_max, double beta) {
    check_schedule_args(mean_mass, alpha_max, beta);
    return std::max(alpha_max * (1.0 - mean_mass / beta), 0.0);
}

double schedule(SchedulerKind kind, double mean_mass, double alpha_max, double beta) {
    return kind == SchedulerKind::Linear ? schedule_linear(mean_mass, alpha_max, beta)
                                         : schedule_half_cosine(mean_mass, alpha_max, beta);
}

std::string to_string(InjectionMode mode) {
    switch (mode) {
        case InjectionMode::Static: return "static";
        case InjectionMode::Dynamic: return "dynamic";
        case InjectionMode::Off: break;
    }
    return "off";
}

std::string to_string(SchedulerKind kind) {
    return kind == SchedulerKind::Linear ? "linear" : "half-cosine";
}

InjectionMode parse_injection_mode(const std::string& text) {
    if (text == "off") return InjectionMode::Off;
    if (text == "static") return InjectionMode::Static;
    if (text == "dynamic") return InjectionMode::Dynamic;
    throw ConfigError("unknown injection mode '" + text + "'");
}

SchedulerKind parse_scheduler_kind(const std::string& text) {
    if (text == "half-cosine" || text == "half_cosine") return SchedulerKind::HalfCosine;
    if (text == "linear") return SchedulerKind::Linear;
    throw ConfigError("unknown scheduler '" + text + "'");
}

InjectionPolicy InjectionPolicy::off() { return InjectionPolicy{}; }

InjectionPolicy InjectionPolicy::fixed(double alpha, int inject_layer) {
    InjectionPolicy p;
    p.mode = InjectionMode::Static;
    p.alpha = alpha;
    p.inject_layer = inject_layer;
    return p;
}

InjectionPolicy InjectionPolicy::scheduled(double alpha_max, double beta, int inject_layer, SchedulerKind scheduler,
                                           int probe_k) {
    InjectionPolicy p;
    p.mode = InjectionMode::Dynamic;
    p.alpha_max = alpha_max;
    p.beta = beta;
    p.inject_layer = inject_layer;
    p.scheduler = scheduler;
    p.probe_k = probe_k;
    return p;
}

void InjectionPolicy::validate(const ModelConfig& config) const {
    if (mode == InjectionMode::Off) return;
    if (inject_layer < 1 || inject_layer > config.num_layers) {
        throw ConfigError("inject_layer " + std::to_string(inject_layer) + " outside [1, " +
                          std::to_string(config.num_layers) + "]");
    }
    if (mode == InjectionMode::Static) {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
        return;
    }
    if (!(alpha_max >= 0.0 && alpha_max <= 1.0)) throw ConfigError("alpha_max must lie in [0, 1]");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
    if (probe_k < 1 || probe_k > config.vocab_size) {
        throw ConfigError("probe K " + std::to_string(probe_k) + " outside [1, " + std::to_string(config.vocab_size) +
                          "]");
    }
}

}  // namespace cei
