// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/error.hpp"
#include "cei/lens.hpp"

namespace cei {

nlohmann::json to_json(const CommitmentProfile& profile) {
    return nlohmann::json{{"mass_by_layer", profile.mass_by_layer},
                          {"mean_mass", profile.mean_mass},
                          {"k", profile.k},
                          {"target_position", profile.target_position},
                          {"label", to_string(profile.label)}};
}

nlohmann::json to_json(const ProfileAggregate& aggregate) {
    return nlohmann::json{{"mean_curve", aggregate.mean_curve},
                          {"std_curve", aggregate.std_curve},
                          {"count", aggregate.count},
                          {"label", to_string(aggregate.label)}};
}

nlohmann::json to_json(const MassHistogram& histogram) {
    return nlohmann::json{{"label", to_string(histogram.label)},
                          {"bins", kHistogramBins},
                          {"range", {0.0, 1.0}},
                          {"counts", histogram.counts}};
}

CommitmentProfile profile_from_json(const nlohmann::json& j) {
    try {
        CommitmentProfile p;
        p.mass_by_layer = j.at("mass_by_layer").get<std::vector<double>>();
        p.mean_mass = j.at("mean_mass").get<double>();
        p.k = j.at("k").get<int>();
        p.target_position = j.at("target_position").get<int>();
        p.label = parse_token_label(j.value("label", std::string{"unlabeled"}));
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed commitment profile: ") + e.what());
    }
}

}  // namespace cei
