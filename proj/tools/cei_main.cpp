// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: world synthesis, training, decoding experiments,
// scoring and plot-data export.

#include "CLI11.hpp"

#include "cei/error.hpp"
#include "cei/harness/experiments.hpp"
#include "cei/harness/file_io.hpp"
#include "cei/harness/presets.hpp"

#include <fmt/format.h>

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace cei;
using namespace cei::harness;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Raw flag values; applied on top of the configuration file.
struct Flags {
    std::string config;
    std::string weights;
    std::string world;
    std::string out;
    std::string preset;
    std::string mode;
    std::string alpha;
    std::optional<double> alpha_max;
    std::optional<double> beta;
    std::string scheduler;
    std::optional<int> inject_layer;
    std::optional<int> k;
    std::optional<int> max_new_tokens;
    std::optional<int> branch_length;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_scenes;
    std::optional<int> scene_offset;
    std::optional<int> bootstrap_n;
    bool paper_protocol = false;
};

void add_experiment_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "Experiment configuration (JSON)");
    cmd->add_option("--weights", f.weights, "Model checkpoint");
    cmd->add_option("--world", f.world, "World directory from synth-world");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--seed", f.seed, "Master seed");
    cmd->add_option("--preset", f.preset, "Hyperparameter preset")->check(CLI::IsMember({"instructblip", "llava15", "llavanext"}));
    cmd->add_option("--mode", f.mode, "Injection mode")->check(CLI::IsMember({"off", "static", "dynamic"}));
    cmd->add_option("--alpha", f.alpha, "Static injection weight, or 'auto'");
    cmd->add_option("--alpha-max", f.alpha_max, "Dynamic weight ceiling");
    cmd->add_option("--beta", f.beta, "Mean top-K mass cutoff");
    cmd->add_option("--scheduler", f.scheduler, "Dynamic schedule")->check(CLI::IsMember({"half-cosine", "linear"}));
    cmd->add_option("--inject-layer", f.inject_layer, "Injection layer (1-based)");
    cmd->add_option("--k", f.k, "Decision-set size");
    cmd->add_option("--max-new-tokens", f.max_new_tokens, "Generation budget per scene");
    cmd->add_option("--branch-length", f.branch_length, "Counterfactual branch length");
    cmd->add_option("--scene-offset", f.scene_offset, "Skip the first N scenes");
    cmd->add_option("--max-scenes", f.max_scenes, "Use at most N scenes (0 = all)");
    cmd->add_option("--bootstrap-n", f.bootstrap_n, "Bootstrap resamples for alignment intervals");
    cmd->add_flag("--paper-protocol", f.paper_protocol, "Use the full-length generation budget (512 tokens)");
}

ExperimentConfig build_config(const Flags& f) {
    ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(f.config);
    if (!f.weights.empty()) c.weights_path = f.weights;
    if (!f.world.empty()) c.world_dir = f.world;
    if (!f.out.empty()) c.output_dir = f.out;
    if (!f.preset.empty()) c.preset = f.preset;
    if (f.paper_protocol) c.max_new_tokens = kPaperMaxNewTokens;
    if (f.max_new_tokens) c.max_new_tokens = *f.max_new_tokens;
    if (f.k) c.probe_k = *f.k;
    if (f.branch_length) c.branch_length = *f.branch_length;
    if (f.seed) c.seed = *f.seed;
    if (f.max_scenes) c.max_scenes = *f.max_scenes;
    if (f.scene_offset) c.scene_offset = *f.scene_offset;
    if (f.bootstrap_n) c.bootstrap_n = *f.bootstrap_n;

    PolicySpec& p = c.policy_flags;
    if (!f.mode.empty()) p.mode = parse_injection_mode(f.mode);
    if (!f.alpha.empty()) {
        if (f.alpha == "auto") {
            p.alpha_auto = true;
        } else {
            try {
                std::size_t used = 0;
                p.alpha = std::stod(f.alpha, &used);
                if (used != f.alpha.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ConfigError("--alpha expects a number or 'auto', got '" + f.alpha + "'");
            }
        }
    }
    if (f.alpha_max) p.alpha_max = *f.alpha_max;
    if (f.beta) p.beta = *f.beta;
    if (!f.scheduler.empty()) p.scheduler = parse_scheduler_kind(f.scheduler);
    if (f.inject_layer) p.inject_layer = *f.inject_layer;
    c.validate();
    return c;
}

void print_report(const char* name, const halmetrics::MetricReport& r) {
    std::cout << fmt::format("{:<10} chair_i={:.4f} chair_s={:.4f} amber_chair={:.4f} amber_hal={:.4f} amber_cover={:.4f}\n",
                             name, r.chair_i, r.chair_s, r.amber_chair, r.amber_hal, r.amber_cover);
}

int run(int argc, char** argv) {
    CLI::App app{"Context-embedding injection toolkit for toy decoders"};
    app.require_subcommand(1);

    // synth-model
    ModelConfig mc;
    std::string model_out = "out";
    auto* synth_model = app.add_subcommand("synth-model", "Write a randomly initialised checkpoint");
    synth_model->add_option("--vocab", mc.vocab_size, "Vocabulary size");
    synth_model->add_option("--dim", mc.dim, "Model width");
    synth_model->add_option("--layers", mc.num_layers, "Decoder layers");
    synth_model->add_option("--heads", mc.num_heads, "Attention heads");
    synth_model->add_option("--max-seq", mc.max_seq, "Maximum sequence length");
    synth_model->add_option("--seed", mc.seed, "Initialisation seed");
    synth_model->add_option("--out", model_out, "Output directory");

    // synth-world
    WorldParams wp;
    std::string world_out = "out";
    auto* synth_world_cmd = app.add_subcommand("synth-world", "Generate a synthetic scene world");
    synth_world_cmd->add_option("--ontology-size", wp.ontology_size, "Number of object types");
    synth_world_cmd->add_option("--scenes", wp.num_scenes, "Number of scenes");
    synth_world_cmd->add_option("--vocab", wp.vocab_size, "Vocabulary size of the target model");
    synth_world_cmd->add_option("--dim", wp.dim, "Width of the target model");
    synth_world_cmd->add_option("--noise", wp.noise_scale, "Scene noise scale");
    synth_world_cmd->add_option("--seed", wp.seed, "World seed");
    synth_world_cmd->add_option("--out", world_out, "Output directory");

    // train
    TrainOptions to;
    std::string train_weights;
    std::string train_world;
    std::string train_out = "out";
    std::string optimizer = "adam";
    auto* train = app.add_subcommand("train", "Fit the toy captioner on a world");
    train->add_option("--weights", train_weights, "Initial checkpoint")->required();
    train->add_option("--world", train_world, "World directory")->required();
    train->add_option("--epochs", to.epochs, "Full-batch epochs");
    train->add_option("--lr", to.learning_rate, "Learning rate");
    train->add_option("--optimizer", optimizer, "adam or gd")->check(CLI::IsMember({"adam", "gd"}));
    train->add_option("--seed", to.seed, "Caption sampling seed");
    train->add_option("--max-scenes", to.max_scenes, "Train on the first N scenes (0 = all)");
    train->add_option("--out", train_out, "Output directory");

    Flags f;
    auto* decode_cmd = app.add_subcommand("decode", "Decode every scene with and without injection and score both");
    auto* probe = app.add_subcommand("probe", "Commitment profiles of generated object tokens");
    auto* align = app.add_subcommand("align", "Alignment of object words with the context embedding");
    auto* branch = app.add_subcommand("branch", "Counterfactual branches at swapped steps");
    auto* sweep = app.add_subcommand("sweep", "Grid over alpha_max and beta, end to end from a master seed");
    for (auto* cmd : {decode_cmd, probe, align, branch, sweep}) add_experiment_flags(cmd, f);
    std::vector<double> grid_alpha;
    std::vector<double> grid_beta;
    std::optional<int> sweep_epochs;
    sweep->add_option("--alpha-max-grid", grid_alpha, "alpha_max values");
    sweep->add_option("--beta-grid", grid_beta, "beta values");
    sweep->add_option("--epochs", sweep_epochs, "Training epochs for the synthesized model");

    // eval
    std::string eval_captions;
    std::string eval_truth;
    std::string eval_ontology;
    std::string eval_mmhal;
    std::string eval_out;
    auto* eval = app.add_subcommand("eval", "Score caption records against ground truth");
    eval->add_option("--captions", eval_captions, "Caption records (JSONL)")->required();
    eval->add_option("--ground-truth", eval_truth, "Ground truth (JSONL)")->required();
    eval->add_option("--ontology", eval_ontology, "Ontology (JSON)")->required();
    eval->add_option("--mmhal", eval_mmhal, "Judge scores (JSONL with a 'score' field)");
    eval->add_option("--out", eval_out, "Output directory for report.json");

    // plot-data
    std::vector<std::string> plot_from;
    std::string plot_out = "out";
    bool no_scheduler = false;
    auto* plot = app.add_subcommand("plot-data", "Export CSV tables for external plotting");
    plot->add_option("--from", plot_from, "Output directories of earlier runs");
    plot->add_option("--out", plot_out, "Output directory");
    plot->add_flag("--no-scheduler-curves", no_scheduler, "Omit the preset scheduler curves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (*synth_model) {
        mc.validate();
        const auto w = init_random(mc);
        const auto path = fs::path(model_out) / "model.ceiw";
        save_weights(w, path);
        std::cout << fmt::format("wrote {} ({} parameters, hash {:016x})\n", path.string(), w.parameter_count(), w.content_hash());
    } else if (*synth_world_cmd) {
        const auto world = synth_world(wp);
        save_world(world, world_out);
        std::cout << fmt::format("wrote {} ({} objects, {} scenes, {} tokens)\n", world_out, world.objects.size(),
                                 world.scenes.size(), world.tokenizer.size());
    } else if (*train) {
        to.optimizer = parse_optimizer(optimizer);
        const auto world = load_world(train_world);
        const auto weights = load_weights(train_weights);
        const auto result = fit_toy_captioner(weights, world, to);
        save_weights(result.weights, fs::path(train_out) / "model.ceiw");
        std::string losses = "# cei-plot-data v1 train_loss\nepoch,loss\n";
        for (std::size_t e = 0; e < result.losses.size(); ++e) losses += fmt::format("{},{}\n", e, format_double(result.losses[e]));
        write_file_atomic(fs::path(train_out) / "train_loss.csv", losses);
        std::cout << fmt::format("loss {:.6f} -> {:.6f} over {} epochs\n", result.losses.front(), result.losses.back(), to.epochs);
        if (!trailing_window_non_increasing(result.losses)) std::cerr << "warning: loss rose over the last 10 epochs\n";
    } else if (*decode_cmd) {
        const auto r = run_decode_experiment(build_config(f));
        print_report("baseline", r.baseline_report);
        print_report(to_string(r.policy.mode).c_str(), r.policy_report);
    } else if (*probe) {
        const auto r = run_probe_experiment(build_config(f));
        std::cout << fmt::format("{} labeled tokens\n", r.tokens.size());
        for (const auto& a : r.aggregate.aggregates) {
            double mean = 0.0;
            for (double v : a.mean_curve) mean += v;
            std::cout << fmt::format("{:<14} n={:<4} mean over layers={:.4f}\n", to_string(a.label), a.count,
                                     mean / static_cast<double>(a.mean_curve.size()));
        }
    } else if (*align) {
        const auto r = run_align_experiment(build_config(f));
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
        for (const auto& m : r.report.measures) {
            std::cout << fmt::format("{:<16} diff={:+.4f} ci95=[{:+.4f}, {:+.4f}]\n", to_string(m.measure), m.mean_difference,
                                     m.ci95_low, m.ci95_high);
        }
    } else if (*branch) {
        const auto r = run_branch(build_config(f));
        std::size_t n = 0;
        for (const auto& b : r) n += b.branches.size();
        std::cout << fmt::format("{} scenes, {} branches\n", r.size(), n);
    } else if (*sweep) {
        auto config = build_config(f);
        auto options = default_sweep_options();
        if (!grid_alpha.empty()) options.alpha_maxes = grid_alpha;
        if (!grid_beta.empty()) options.betas = grid_beta;
        if (sweep_epochs) options.train.epochs = *sweep_epochs;
        if (f.k) options.probe_k.reset();
        options.synthesize = f.weights.empty() && config.weights_path.empty();
        const auto cells = run_sweep(config, options);
        for (const auto& c : cells) {
            std::cout << fmt::format("alpha_max={:.2f} beta={:.2f} chair_s={:.4f}\n", c.alpha_max, c.beta, c.report.chair_s);
        }
    } else if (*eval) {
        std::vector<halmetrics::CaptionRecord> records;
        for (const auto& j : read_jsonl(eval_captions)) records.push_back(halmetrics::CaptionRecord::from_json(j));
        const auto truth = halmetrics::index_ground_truth(read_ground_truth(eval_truth));
        const auto ontology = halmetrics::Ontology::from_json(read_json(eval_ontology));
        std::vector<double> scores;
        if (!eval_mmhal.empty()) {
            try {
                for (const auto& j : read_jsonl(eval_mmhal)) scores.push_back(j.at("score").get<double>());
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(eval_mmhal + ": " + e.what());
            }
        }
        const auto report = halmetrics::evaluate(records, truth, ontology, scores);
        for (const auto& w : halmetrics::take_warnings()) std::cerr << "warning: " << w << "\n";
        const auto j = report.to_json();
        if (!eval_out.empty()) write_json(fs::path(eval_out) / "report.json", j);
        std::cout << j.dump(2) << "\n";
    } else if (*plot) {
        std::vector<fs::path> dirs(plot_from.begin(), plot_from.end());
        auto artifacts = collect_artifacts(dirs);
        if (!no_scheduler) {
            for (const auto& p : kPresets) artifacts.scheduler_curves.push_back({std::string(p.name), p.alpha_max, p.beta});
        }
        for (const auto& p : emit_plot_data(artifacts, plot_out)) std::cout << p.string() << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kUsage;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return kNumeric;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kNumeric;
    }
}
