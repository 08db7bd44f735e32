// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/harness/experiments.hpp"

#include "cei/error.hpp"
#include "cei/harness/file_io.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace cei::harness {
namespace {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

DecodeOptions decode_options(const World& world, int max_new_tokens) {
    DecodeOptions o;
    o.max_new_tokens = max_new_tokens;
    o.eos_token = world.tokenizer.eos();
    return o;
}

struct SceneInput {
    const SceneSpec* scene;
    Matrix prefix;
};

std::vector<SceneInput> scene_inputs(const ExperimentInputs& inputs) {
    std::vector<SceneInput> out;
    for (const auto* s : inputs.scenes) {
        out.push_back({s, render_scene(*s, inputs.world.object_table, inputs.world.params.noise_scale)});
    }
    return out;
}

std::vector<DecodeTrace> decode_all(const ExperimentInputs& inputs, const InjectionPolicy& policy, int max_new_tokens) {
    const auto prompt = inputs.world.prompt_ids();
    const auto options = decode_options(inputs.world, max_new_tokens);
    std::vector<DecodeTrace> traces;
    for (const auto& si : scene_inputs(inputs)) {
        auto trace = decode(inputs.weights, si.prefix, prompt, policy, options);
        trace.provenance.source = si.scene->scene_id;
        traces.push_back(std::move(trace));
    }
    return traces;
}

std::vector<halmetrics::CaptionRecord> caption_records(const World& world, std::span<const DecodeTrace> traces) {
    std::vector<halmetrics::CaptionRecord> out;
    for (const auto& t : traces) out.push_back({t.provenance.source, world.tokenizer.decode(t.tokens)});
    return out;
}

std::string traces_jsonl(std::span<const DecodeTrace> traces) {
    std::string out;
    for (const auto& t : traces) out += trace_to_jsonl(t);
    return out;
}

std::string captions_jsonl(std::span<const halmetrics::CaptionRecord> records) {
    std::vector<nlohmann::json> rows;
    for (const auto& r : records) rows.push_back(r.to_json());
    return to_jsonl(rows);
}

halmetrics::MetricReport score(const World& world, std::span<const halmetrics::CaptionRecord> records) {
    return halmetrics::evaluate(records, world.truth_index(), world.ontology);
}

nlohmann::json warnings_json() {
    return halmetrics::take_warnings();
}

InjectionPolicy resolve_for_run(const ExperimentConfig& config, const ExperimentInputs& inputs) {
    InjectionPolicy policy = resolve_policy(config, inputs.weights.config);
    if (policy.mode == InjectionMode::Static && wants_auto_alpha(config)) {
        InjectionPolicy dyn = policy;
        dyn.mode = InjectionMode::Dynamic;
        dyn.validate(inputs.weights.config);
        const auto traces = decode_all(inputs, dyn, config.max_new_tokens);
        policy.alpha = traces.empty() ? 0.0 : mean_effective_alpha(traces);
    }
    return policy;
}

void check_k(const ExperimentConfig& config, const ModelConfig& model) {
    if (config.probe_k < 1 || config.probe_k > model.vocab_size) {
        throw ConfigError(fmt::format("probe k {} outside [1, {}]", config.probe_k, model.vocab_size));
    }
}

void select_scenes(ExperimentInputs& in, const ExperimentConfig& config) {
    const auto total = in.world.scenes.size();
    const auto offset = std::min(total, static_cast<std::size_t>(config.scene_offset));
    const auto n = config.max_scenes > 0 ? std::min(total - offset, static_cast<std::size_t>(config.max_scenes)) : total - offset;
    in.scenes.clear();
    for (std::size_t i = offset; i < offset + n; ++i) in.scenes.push_back(&in.world.scenes[i]);
}

}  // namespace

ExperimentInputs load_inputs(const ExperimentConfig& config) {
    config.check_paths();
    ExperimentInputs in;
    in.weights = load_weights(config.weights_path);
    in.world = load_world(config.world_dir);
    if (config.scenes_path) in.world.scenes = read_scenes(*config.scenes_path, static_cast<int>(in.world.objects.size()));
    if (config.ground_truth_path) in.world.ground_truth = read_ground_truth(*config.ground_truth_path);
    if (config.ontology_path) in.world.ontology = halmetrics::Ontology::from_json(read_json(*config.ontology_path));

    const auto& mc = in.weights.config;
    if (in.world.params.dim != mc.dim || in.world.object_table.cols() != mc.dim) {
        throw InputError(fmt::format("world rows have width {}, model dim is {}", in.world.object_table.cols(), mc.dim));
    }
    if (in.world.tokenizer.size() != mc.vocab_size) {
        throw InputError(fmt::format("world vocabulary has {} tokens, model has {}", in.world.tokenizer.size(), mc.vocab_size));
    }
    select_scenes(in, config);
    return in;
}

std::vector<SceneCaption> baseline_captions(const ExperimentInputs& inputs, int max_new_tokens) {
    const auto prompt = inputs.world.prompt_ids();
    const auto options = decode_options(inputs.world, max_new_tokens);
    std::vector<SceneCaption> out;
    for (auto& si : scene_inputs(inputs)) {
        SceneCaption c;
        c.scene_id = si.scene->scene_id;
        c.prompt = prompt;
        c.trace = decode_baseline(inputs.weights, si.prefix, prompt, options);
        c.trace.provenance.source = c.scene_id;
        c.text = inputs.world.tokenizer.decode(c.trace.tokens);
        c.prefix = std::move(si.prefix);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<LabeledToken> label_mentions(const World& world, const SceneCaption& caption) {
    const auto truth = world.truth_index();
    auto it = truth.find(caption.scene_id);
    if (it == truth.end()) throw InputError("no ground truth for scene '" + caption.scene_id + "'");
    const auto& present = it->second.present_objects;

    const auto spans = world.tokenizer.decode_offsets(caption.trace.tokens);
    const auto mentions = halmetrics::extract_mentions(caption.text, world.ontology, caption.scene_id);
    std::vector<LabeledToken> out;
    for (const auto& m : mentions.mentions) {
        for (std::size_t i = 0; i < spans.size(); ++i) {
            if (spans[i].first != m.begin || spans[i].second == spans[i].first) continue;
            LabeledToken t;
            t.scene_id = caption.scene_id;
            t.word = caption.text.substr(m.begin, m.end - m.begin);
            t.object = m.object;
            t.label = present.contains(m.object) ? TokenLabel::truthful : TokenLabel::hallucinatory;
            t.token_index = static_cast<int>(i);
            t.target_position = static_cast<int>(caption.prefix.rows() + caption.prompt.size() + i);
            out.push_back(std::move(t));
            break;
        }
    }
    return out;
}

bool labels_sound(const World& world, std::span<const LabeledToken> labels) {
    const auto truth = world.truth_index();
    for (const auto& t : labels) {
        auto it = truth.find(t.scene_id);
        if (it == truth.end() || !world.ontology.is_object(t.object)) return false;
        const bool present = it->second.present_objects.contains(t.object);
        if (present != (t.label == TokenLabel::truthful)) return false;
    }
    return true;
}

ProbeResult run_probe_experiment(const ExperimentConfig& config) { return run_probe_experiment(config, load_inputs(config)); }

ProbeResult run_probe_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs) {
    check_k(config, inputs.weights.config);
    const auto captions = baseline_captions(inputs, config.max_new_tokens);
    ProbeResult result;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : captions) {
        std::vector<TokenId> tokens = c.prompt;
        tokens.insert(tokens.end(), c.trace.tokens.begin(), c.trace.tokens.end());
        for (auto& t : label_mentions(inputs.world, c)) {
            auto profile = commitment_profile(inputs.weights, c.prefix, tokens, t.target_position, config.probe_k);
            profile.label = t.label;
            rows.push_back({{"scene_id", t.scene_id},
                            {"word", t.word},
                            {"object", t.object},
                            {"token_index", t.token_index},
                            {"profile", to_json(profile)}});
            result.profiles.push_back(std::move(profile));
            result.tokens.push_back(std::move(t));
        }
    }
    if (result.tokens.empty()) throw ExperimentError("no labeled object tokens in the generated captions");
    if (!labels_sound(inputs.world, result.tokens)) throw ExperimentError("label soundness check failed");
    result.aggregate = aggregate_profiles(result.profiles);

    const fs::path& out = config.output_dir;
    write_json(out / "profiles.json", nlohmann::json{{"schema_version", 1},
                                                     {"k", config.probe_k},
                                                     {"model_hash", fmt::format("{:016x}", inputs.weights.content_hash())},
                                                     {"profiles", rows}});
    write_file_atomic(out / kCommitmentCurvesFile, commitment_curves_csv(&result.aggregate));
    write_file_atomic(out / kMassHistogramsFile, mass_histograms_csv(&result.aggregate));
    std::vector<halmetrics::CaptionRecord> records;
    for (const auto& c : captions) records.push_back({c.scene_id, c.text});
    write_file_atomic(out / "captions.jsonl", captions_jsonl(records));
    return result;
}

DecodeExperimentResult run_decode_experiment(const ExperimentConfig& config) {
    return run_decode_experiment(config, load_inputs(config));
}

DecodeExperimentResult run_decode_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs,
                                             bool write_outputs) {
    DecodeExperimentResult r;
    r.policy = resolve_for_run(config, inputs);
    r.baseline_traces = decode_all(inputs, InjectionPolicy::off(), config.max_new_tokens);
    r.policy_traces = decode_all(inputs, r.policy, config.max_new_tokens);
    r.baseline_captions = caption_records(inputs.world, r.baseline_traces);
    r.policy_captions = caption_records(inputs.world, r.policy_traces);
    r.baseline_report = score(inputs.world, r.baseline_captions);
    r.policy_report = score(inputs.world, r.policy_captions);
    const auto warnings = warnings_json();
    if (!write_outputs) return r;

    const fs::path& out = config.output_dir;
    write_file_atomic(out / "baseline_traces.jsonl", traces_jsonl(r.baseline_traces));
    write_file_atomic(out / "policy_traces.jsonl", traces_jsonl(r.policy_traces));
    write_file_atomic(out / "baseline_captions.jsonl", captions_jsonl(r.baseline_captions));
    write_file_atomic(out / "policy_captions.jsonl", captions_jsonl(r.policy_captions));
    write_json(out / "report.json",
               nlohmann::json{{"schema_version", 1},
                              {"policy", to_json(r.policy)},
                              {"scenes", inputs.scenes.size()},
                              {"baseline", r.baseline_report.to_json()},
                              {"intervened", r.policy_report.to_json()},
                              {"amber_hal_comparison",
                               {{"baseline", r.baseline_report.amber_hal},
                                {"intervened", r.policy_report.amber_hal},
                                {"intervened_not_worse", r.policy_report.amber_hal <= r.baseline_report.amber_hal}}},
                              {"warnings", warnings}});
    return r;
}

AlignExperimentResult run_align_experiment(const ExperimentConfig& config) {
    return run_align_experiment(config, load_inputs(config));
}

std::optional<AlignmentSample> alignment_sample_or_skip(const Vector& context, const WordVector& word, const Vector& mu,
                                                        const LabeledToken& token, std::vector<std::string>& warnings) {
    try {
        return make_alignment_sample(context, word, mu, token.label);
    } catch (const DegenerateInputError& e) {
        warnings.push_back(fmt::format("skipped '{}' in scene {}: {}", token.word, token.scene_id, e.what()));
        return std::nullopt;
    }
}

AlignExperimentResult run_align_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs) {
    const auto captions = baseline_captions(inputs, config.max_new_tokens);
    const Vector mu = mean_token_embedding(inputs.weights);
    const TokenizerFn tokenize = [&](const std::string& w) { return inputs.world.tokenizer.encode_word(w); };
    AlignExperimentResult result;
    std::string rows = "# cei-plot-data v1 alignment_samples\nscene_id,word,label,dot,raw_cosine,centered_cosine\n";
    for (const auto& c : captions) {
        const auto context = extract_context_embedding(inputs.weights, c.prefix, c.prompt);
        for (const auto& t : label_mentions(inputs.world, c)) {
            const auto wv = word_vector(inputs.weights, tokenize, t.word);
            auto s = alignment_sample_or_skip(context.vector, wv, mu, t, result.warnings);
            if (!s) continue;
            rows += fmt::format("{},{},{},{},{},{}\n", t.scene_id, t.word, to_string(t.label), format_double(s->dot),
                                format_double(s->raw_cosine), format_double(s->centered_cosine));
            result.samples.push_back(std::move(*s));
        }
    }
    if (result.samples.empty()) throw ExperimentError("no labeled object tokens in the generated captions");
    result.report = alignment_report(result.samples, config.bootstrap_n, config.seed);

    const fs::path& out = config.output_dir;
    auto report = to_json(result.report);
    report["warnings"] = result.warnings;
    write_json(out / "alignment_report.json", report);
    write_file_atomic(out / kAlignmentBoxFile, alignment_box_csv(&result.report));
    write_file_atomic(out / "alignment_samples.csv", rows);
    return result;
}

std::vector<BranchedResult> run_branch(const ExperimentConfig& config) { return run_branch(config, load_inputs(config)); }

std::vector<BranchedResult> run_branch(const ExperimentConfig& config, const ExperimentInputs& inputs) {
    const InjectionPolicy policy = resolve_for_run(config, inputs);
    const auto prompt = inputs.world.prompt_ids();
    const auto options = decode_options(inputs.world, config.max_new_tokens);
    std::vector<BranchedResult> results;
    std::string traces;
    std::string branches;
    for (const auto& si : scene_inputs(inputs)) {
        auto r = branched_decode(inputs.weights, si.prefix, prompt, policy, config.branch_length, options);
        r.trace.provenance.source = si.scene->scene_id;
        traces += trace_to_jsonl(r.trace);
        branches += branches_to_jsonl(si.scene->scene_id, r.branches);
        results.push_back(std::move(r));
    }
    write_file_atomic(config.output_dir / "traces.jsonl", traces);
    write_file_atomic(config.output_dir / "branches.jsonl", branches);
    return results;
}

SweepOptions default_sweep_options() {
    SweepOptions o;
    o.world.ontology_size = 16;
    o.world.num_scenes = 100;
    o.world.vocab_size = 64;
    o.world.dim = 32;
    o.world.noise_scale = 0.05;
    o.model.vocab_size = 64;
    o.model.dim = 32;
    o.model.num_layers = 4;
    o.model.num_heads = 4;
    o.model.max_seq = 128;
    o.train.epochs = 120;
    o.train.learning_rate = 0.01;
    o.train.max_scenes = 40;
    o.probe_k = 1;
    return o;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& base_config, const SweepOptions& options) {
    if (options.alpha_maxes.empty() || options.betas.empty()) throw ConfigError("sweep grid is empty");
    ExperimentConfig config = base_config;
    if (options.probe_k) config.probe_k = *options.probe_k;
    config.validate();
    const fs::path& out = config.output_dir;
    ExperimentInputs inputs;
    if (options.synthesize) {
        WorldParams wp = options.world;
        wp.seed = derive_seed(config.seed, 0);
        wp.vocab_size = options.model.vocab_size;
        wp.dim = options.model.dim;
        inputs.world = synth_world(wp);
        save_world(inputs.world, out / "world");

        ModelConfig mc = options.model;
        mc.seed = derive_seed(config.seed, 1);
        TrainOptions to = options.train;
        to.seed = derive_seed(config.seed, 2);
        auto trained = fit_toy_captioner(init_random(mc), inputs.world, to);
        inputs.weights = std::move(trained.weights);
        save_weights(inputs.weights, out / "model.ceiw");
        std::string losses = "# cei-plot-data v1 train_loss\nepoch,loss\n";
        for (std::size_t e = 0; e < trained.losses.size(); ++e) {
            losses += fmt::format("{},{}\n", e, format_double(trained.losses[e]));
        }
        write_file_atomic(out / "train_loss.csv", losses);
        ExperimentConfig held_out = config;
        if (held_out.scene_offset == 0) held_out.scene_offset = std::max(0, to.max_scenes);
        select_scenes(inputs, held_out);
    } else {
        inputs = load_inputs(config);
    }

    const auto baseline = decode_all(inputs, InjectionPolicy::off(), config.max_new_tokens);
    const auto baseline_report = score(inputs.world, caption_records(inputs.world, baseline));

    std::vector<SweepCell> cells;
    nlohmann::json cell_rows = nlohmann::json::array();
    for (double a : options.alpha_maxes) {
        for (double b : options.betas) {
            ExperimentConfig cell_config = config;
            cell_config.policy_flags.mode = InjectionMode::Dynamic;
            cell_config.policy_flags.alpha_max = a;
            cell_config.policy_flags.beta = b;
            const auto policy = resolve_policy(cell_config, inputs.weights.config);
            const auto traces = decode_all(inputs, policy, config.max_new_tokens);
            SweepCell cell{a, b, score(inputs.world, caption_records(inputs.world, traces))};
            cell_rows.push_back({{"alpha_max", a}, {"beta", b}, {"policy", to_json(policy)}, {"report", cell.report.to_json()}});
            cells.push_back(std::move(cell));
        }
    }
    write_file_atomic(out / kSweepGridFile, sweep_grid_csv(cells));
    write_json(out / "sweep.json", nlohmann::json{{"schema_version", 1},
                                                  {"master_seed", config.seed},
                                                  {"model_hash", fmt::format("{:016x}", inputs.weights.content_hash())},
                                                  {"baseline", baseline_report.to_json()},
                                                  {"cells", cell_rows},
                                                  {"warnings", warnings_json()}});
    return cells;
}

}  // namespace cei::harness
