// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/error.hpp"
#include "cei/intervene.hpp"

namespace cei {

nlohmann::json to_json(const InjectionPolicy& policy) {
    nlohmann::json j{{"mode", to_string(policy.mode)}};
    switch (policy.mode) {
        case InjectionMode::Off: break;
        case InjectionMode::Static:
            j["alpha"] = policy.alpha;
            j["inject_layer"] = policy.inject_layer;
            break;
        case InjectionMode::Dynamic:
            j["alpha_max"] = policy.alpha_max;
            j["beta"] = policy.beta;
            j["scheduler"] = to_string(policy.scheduler);
            j["inject_layer"] = policy.inject_layer;
            j["probe_k"] = policy.probe_k;
            break;
    }
    return j;
}

InjectionPolicy policy_from_json(const nlohmann::json& j) {
    try {
        InjectionPolicy p;
        p.mode = parse_injection_mode(j.value("mode", std::string{"off"}));
        p.alpha = j.value("alpha", p.alpha);
        p.alpha_max = j.value("alpha_max", p.alpha_max);
        p.beta = j.value("beta", p.beta);
        p.scheduler = parse_scheduler_kind(j.value("scheduler", std::string{"half-cosine"}));
        p.inject_layer = j.value("inject_layer", p.inject_layer);
        p.probe_k = j.value("probe_k", p.probe_k);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed injection policy: ") + e.what());
    }
}

nlohmann::json to_json(const StepRecord& r) {
    nlohmann::json j{{"step", r.step},
                     {"probe_argmax", r.probe_argmax},
                     {"injected_argmax", r.injected_argmax},
                     {"mean_mass", nullptr},
                     {"alpha_used", r.alpha_used},
                     {"swapped", r.swapped},
                     {"chosen", r.chosen}};
    if (r.mean_mass) j["mean_mass"] = *r.mean_mass;
    return j;
}

nlohmann::json to_json(const BranchRecord& r) {
    return nlohmann::json{{"branch_step", r.branch_step},
                          {"baseline_continuation", r.baseline_continuation},
                          {"main_continuation", r.main_continuation}};
}

std::string trace_to_jsonl(const DecodeTrace& trace) {
    std::string out;
    nlohmann::json header{{"record", "trace"},
                          {"schema_version", kTraceSchemaVersion},
                          {"source", trace.provenance.source},
                          {"model_hash", trace.provenance.model_hash},
                          {"seed", trace.provenance.seed},
                          {"policy", to_json(trace.policy)}};
    out += header.dump() + "\n";
    for (const auto& s : trace.steps) {
        nlohmann::json line = to_json(s);
        line["record"] = "step";
        line["source"] = trace.provenance.source;
        out += line.dump() + "\n";
    }
    nlohmann::json end{{"record", "end"}, {"source", trace.provenance.source}, {"tokens", trace.tokens}};
    out += end.dump() + "\n";
    return out;
}

std::string branches_to_jsonl(const std::string& source, std::span<const BranchRecord> branches) {
    std::string out;
    for (const auto& b : branches) {
        nlohmann::json line = to_json(b);
        line["record"] = "branch";
        line["schema_version"] = kTraceSchemaVersion;
        line["source"] = source;
        out += line.dump() + "\n";
    }
    return out;
}

}  // namespace cei
