// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/error.hpp"
#include "cei/harness/experiments.hpp"
#include "cei/harness/file_io.hpp"
#include "cei/harness/presets.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace cei;
using namespace cei::harness;
namespace fs = std::filesystem;

namespace {

WorldParams small_world_params(int scenes = 24, std::uint64_t seed = 3) {
    WorldParams p;
    p.ontology_size = 12;
    p.num_scenes = scenes;
    p.vocab_size = 64;
    p.dim = 16;
    p.noise_scale = 0.05;
    p.seed = seed;
    return p;
}

ModelConfig small_model(std::uint64_t seed = 5) { return test::tiny_config(64, 16, 2, 2, seed, 96); }

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
}

std::string tree_bytes(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += fs::relative(f, root).string() + "\n" + read_file(f);
    return all;
}

// A small world and a briefly trained model, saved once under the temp dir.
struct Fixture {
    fs::path dir;
    ExperimentConfig config;
    ExperimentInputs inputs;
};

const Fixture& trained_fixture() {
    static const Fixture f = [] {
        Fixture x;
        x.dir = test::scratch_dir("harness_fixture");
        const World world = synth_world(small_world_params(24));
        save_world(world, x.dir / "world");
        TrainOptions to;
        to.epochs = 60;
        to.seed = 1;
        to.max_scenes = 16;
        const auto trained = fit_toy_captioner(init_random(small_model()), world, to);
        save_weights(trained.weights, x.dir / "model.ceiw");
        x.config.weights_path = x.dir / "model.ceiw";
        x.config.world_dir = x.dir / "world";
        x.config.output_dir = x.dir / "out";
        x.config.max_new_tokens = 24;
        x.config.probe_k = 4;
        x.config.bootstrap_n = 200;
        x.inputs = load_inputs(x.config);
        return x;
    }();
    return f;
}

}  // namespace

TEST_CASE("tokenizer") {
    const Tokenizer t({"<pad>", "<eos>", "<unk>", "a", "photo", "of", "ele", "##phant", ",", ".", "cat"});
    const auto ids = t.encode("a photo of elephant , cat .");
    CHECK(ids == std::vector<TokenId>{3, 4, 5, 6, 7, 8, 10, 9});
    CHECK(t.decode(ids) == "a photo of elephant , cat .");
    CHECK(t.encode("zebra") == std::vector<TokenId>{2});
    CHECK(t.encode("cat,") == std::vector<TokenId>{10, 8});
    const std::vector<TokenId> with_eos{10, 1};
    CHECK(t.decode(with_eos) == "cat");
    CHECK_THROWS_AS(t.id("dog"), InputError);

    const auto offsets = t.decode_offsets(ids);
    const auto text = t.decode(ids);
    REQUIRE(offsets.size() == ids.size());
    CHECK(text.substr(offsets[3].first, offsets[4].second - offsets[3].first) == "elephant");
    CHECK(text.substr(offsets[4].first, offsets[4].second - offsets[4].first) == "phant");

    const auto back = Tokenizer::from_json(t.to_json());
    CHECK(back.tokens() == t.tokens());
    CHECK(is_special_token("<eos>"));
    CHECK_FALSE(is_special_token("cat"));
}

TEST_CASE("presets carry the published values") {
    CHECK(find_preset("instructblip").alpha_max == 0.40);
    CHECK(find_preset("instructblip").beta == 0.70);
    CHECK(find_preset("llava15").alpha_max == 0.25);
    CHECK(find_preset("llava15").beta == 0.55);
    CHECK(find_preset("llavanext").alpha_max == 0.17);
    CHECK(find_preset("llavanext").beta == 0.35);
    CHECK(kReferenceInjectLayer == 10);
    CHECK(kReferenceDepth == 32);
    CHECK(kPaperMaxNewTokens == 512);
    CHECK(kDefaultProbeK == 40);
    CHECK_THROWS_AS(find_preset("gpt"), ConfigError);
    for (const auto& p : kPresets) {
        CHECK((p.alpha_max >= 0.0 && p.alpha_max <= 1.0));
        CHECK((p.beta > 0.0 && p.beta <= 1.0));
    }
}

TEST_CASE("injection layer rescaling") {
    CHECK(rescale_inject_layer(32) == 10);
    CHECK(rescale_inject_layer(8) == 3);
    CHECK(rescale_inject_layer(4) == 1);
    CHECK(rescale_inject_layer(64) == 20);
    CHECK(rescale_inject_layer(1) == 1);
    CHECK(rescale_inject_layer(2) == 1);
    for (int L = 2; L <= 80; ++L) {
        const int l = rescale_inject_layer(L);
        CHECK((l >= 1 && l <= L - 1));
        CHECK(l == std::clamp(static_cast<int>(std::lround(10.0 * L / 32.0)), 1, L - 1));
    }
}

TEST_CASE("configuration precedence and validation") {
    const auto model = small_model();
    ExperimentConfig c;
    auto p = resolve_policy(c, model);
    CHECK(p.mode == InjectionMode::Dynamic);
    CHECK(p.alpha_max == 0.25);
    CHECK(p.beta == 0.55);
    CHECK(p.inject_layer == rescale_inject_layer(2));
    CHECK(p.probe_k == 40);

    c.policy_file.alpha_max = 0.9;
    c.policy_file.beta = 0.2;
    c.policy_file.scheduler = SchedulerKind::Linear;
    CHECK(resolve_policy(c, model).alpha_max == 0.9);
    c.preset = "instructblip";
    p = resolve_policy(c, model);
    CHECK(p.alpha_max == 0.4);
    CHECK(p.beta == 0.7);
    CHECK(p.scheduler == SchedulerKind::Linear);
    c.policy_flags.beta = 0.3;
    CHECK(resolve_policy(c, model).beta == 0.3);

    c.policy_flags.mode = InjectionMode::Static;
    CHECK(resolve_policy(c, model).alpha == 0.2);
    c.policy_flags.mode = InjectionMode::Off;
    CHECK(resolve_policy(c, model).alpha == 0.0);

    const auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    auto j = c.to_json();
    j["surprise"] = 1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), FormatError);
    j = c.to_json();
    j["schema_version"] = 2;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), FormatError);

    ExperimentConfig zero;
    zero.max_new_tokens = 0;
    CHECK_THROWS_AS(zero.validate(), ConfigError);
    ExperimentConfig bad_preset;
    bad_preset.preset = "nope";
    CHECK_THROWS_AS(bad_preset.validate(), ConfigError);
    ExperimentConfig missing;
    missing.weights_path = "/nonexistent/model.ceiw";
    CHECK_THROWS_AS(missing.check_paths(), InputError);
}

TEST_CASE("synth_world") {
    WorldParams p;
    p.ontology_size = 32;
    p.num_scenes = 100;
    p.seed = 11;
    const World w = synth_world(p);
    CHECK(w.objects.size() == 32);
    CHECK(w.scenes.size() == 100);
    CHECK(w.tokenizer.size() == 256);
    for (std::size_t i = 0; i < w.scenes.size(); ++i) {
        const auto& s = w.scenes[i];
        CHECK((s.object_ids.size() >= 1 && s.object_ids.size() <= 5));
        const auto names = w.object_names(s);
        CHECK(w.ground_truth[i].image_id == s.scene_id);
        CHECK(w.ground_truth[i].present_objects == std::set<std::string>(names.begin(), names.end()));
        for (const auto& h : w.ground_truth[i].hallucination_targets) CHECK_FALSE(w.ground_truth[i].present_objects.contains(h));
    }
    for (const auto& o : w.objects) {
        CHECK(w.ontology.is_object(o.name));
        CHECK(w.tokenizer.decode(w.tokenizer.encode(o.name)) == o.name);
    }

    const auto a = test::scratch_dir("world_a");
    const auto b = test::scratch_dir("world_b");
    save_world(w, a);
    save_world(synth_world(p), b);
    CHECK(tree_bytes(a) == tree_bytes(b));
    const World back = load_world(a);
    const auto c = test::scratch_dir("world_c");
    save_world(back, c);
    CHECK(tree_bytes(a) == tree_bytes(c));

    WorldParams big = p;
    big.ontology_size = 129;
    CHECK_THROWS_AS(synth_world(big), ConfigError);
    WorldParams crowded = p;
    crowded.vocab_size = 40;
    crowded.ontology_size = 21;
    CHECK_THROWS_AS(synth_world(crowded), ConfigError);
    WorldParams none = p;
    none.ontology_size = 0;
    CHECK_THROWS_AS(synth_world(none), ConfigError);
}

TEST_CASE("render_scene") {
    const World w = synth_world(small_world_params());
    const auto& s = w.scenes[0];
    const Matrix exact = render_scene(s, w.object_table, 0.0);
    for (std::size_t i = 0; i < s.object_ids.size(); ++i) {
        CHECK(exact.row(static_cast<Eigen::Index>(i)) == w.object_table.row(s.object_ids[i]));
    }
    CHECK(render_scene(s, w.object_table, 0.1) == render_scene(s, w.object_table, 0.1));

    const double bound = 3.0 * 0.1 * std::sqrt(16.0);
    double worst = 0.0;
    SceneSpec probe = s;
    for (std::uint64_t draw = 0; draw < 1000; ++draw) {
        probe.noise_seed = draw;
        const Matrix m = render_scene(probe, w.object_table, 0.1);
        for (std::size_t i = 0; i < probe.object_ids.size(); ++i) {
            worst = std::max(worst, (m.row(static_cast<Eigen::Index>(i)) - w.object_table.row(probe.object_ids[i])).norm());
        }
    }
    CHECK(worst < bound);

    SceneSpec unknown = s;
    unknown.object_ids.push_back(999);
    CHECK_THROWS_AS(render_scene(unknown, w.object_table, 0.1), InputError);
}

TEST_CASE("analytic gradient matches central differences") {
    WorldParams wp;
    wp.ontology_size = 8;
    wp.num_scenes = 3;
    wp.vocab_size = 32;
    wp.dim = 8;
    wp.seed = 3;
    const World world = synth_world(wp);
    auto w = init_random(test::tiny_config(32, 8, 2, 2, 5));
    const auto batch = make_training_set(world, 1);
    DecoderWeights g;
    loss_and_gradient(w, batch, &g);
    std::vector<std::pair<double*, Eigen::Index>> params, grads;
    w.for_each_tensor([&](std::string_view, double* d, Eigen::Index n) { params.push_back({d, n}); });
    g.for_each_tensor([&](std::string_view, double* d, Eigen::Index n) { grads.push_back({d, n}); });
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (Eigen::Index i = 0; i < params[t].second; ++i) {
            double* x = params[t].first + i;
            const double saved = *x;
            *x = saved + h;
            const double up = loss_and_gradient(w, batch, nullptr);
            *x = saved - h;
            const double down = loss_and_gradient(w, batch, nullptr);
            *x = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grads[t].first[i];
            worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-5}));
        }
    }
    MESSAGE("worst relative error " << worst);
    CHECK(worst < 1e-4);
}

TEST_CASE("fit_toy_captioner") {
    const World world = synth_world(small_world_params(20));
    const auto init = init_random(small_model());

    TrainOptions frozen;
    frozen.epochs = 5;
    frozen.learning_rate = 0.0;
    const auto still = fit_toy_captioner(init, world, frozen);
    CHECK(still.weights.content_hash() == init.content_hash());
    CHECK(still.losses.size() == 6);

    TrainOptions gd;
    gd.epochs = 200;
    gd.learning_rate = 0.5;
    gd.optimizer = Optimizer::GradientDescent;
    gd.seed = 2;
    const auto plain = fit_toy_captioner(init, world, gd);
    CHECK(plain.losses.back() < plain.losses.front());
    CHECK(trailing_window_non_increasing(plain.losses));

    TrainOptions adam;
    adam.epochs = 200;
    adam.seed = 2;
    const auto a = fit_toy_captioner(init, world, adam);
    const auto b = fit_toy_captioner(init, world, adam);
    CHECK(a.losses.back() < a.losses.front());
    CHECK(trailing_window_non_increasing(a.losses));
    CHECK(a.weights.content_hash() == b.weights.content_hash());
    CHECK(a.losses == b.losses);

    TrainOptions wild;
    wild.epochs = 50;
    wild.learning_rate = 1e200;
    wild.optimizer = Optimizer::GradientDescent;
    CHECK_THROWS_AS(fit_toy_captioner(init, world, wild), TrainingError);

    TrainOptions negative;
    negative.learning_rate = -1.0;
    CHECK_THROWS_AS(fit_toy_captioner(init, world, negative), ConfigError);
    CHECK_THROWS_AS(fit_toy_captioner(init_random(test::tiny_config(64, 8, 2, 2, 1)), world, adam), InputError);
    CHECK_THROWS_AS(parse_optimizer("sgd"), ConfigError);
}

TEST_CASE("trailing window") {
    const std::vector<double> rising{5, 4, 3, 2, 1, 1, 2, 3, 4, 5};
    CHECK_FALSE(trailing_window_non_increasing(rising, 3));
    const std::vector<double> falling{5, 4, 3, 2, 1, 1, 0.5, 0.4, 0.3, 0.2};
    CHECK(trailing_window_non_increasing(falling, 3));
    CHECK(trailing_window_non_increasing(std::vector<double>{1.0}, 10));
}

TEST_CASE("plot data tables") {
    const auto dir = test::scratch_dir("plot_empty");
    const auto written = emit_plot_data(PlotArtifacts{}, dir);
    CHECK(written.size() == 5);
    for (const auto& f : written) {
        const auto lines = lines_of(read_file(f));
        REQUIRE(lines.size() == 2);
        CHECK(lines[0].rfind("# cei-plot-data v1 ", 0) == 0);
    }
    CHECK(lines_of(read_file(dir / kCommitmentCurvesFile))[1] == "label,layer,mean,std,count");
    CHECK(lines_of(read_file(dir / kSweepGridFile))[1] == "alpha_max,beta,chair_s,chair_i,amber_chair,amber_hal,amber_cover");

    std::vector<SchedulerCurveSpec> specs;
    for (const auto& p : kPresets) specs.push_back({std::string(p.name), p.alpha_max, p.beta});
    const auto csv = lines_of(scheduler_curves_csv(specs));
    REQUIRE(csv.size() == 2 + 3 * kSchedulerCurvePoints);
    for (std::size_t i = 2; i < csv.size(); ++i) {
        const auto cells = split_csv(csv[i]);
        REQUIRE(cells.size() == 6);
        const double a = std::stod(cells[1]), b = std::stod(cells[2]), m = std::stod(cells[3]);
        CHECK(m == doctest::Approx(static_cast<double>((i - 2) % kSchedulerCurvePoints) / 100.0).epsilon(1e-15));
        const double hc = m >= b ? 0.0 : std::max(a * std::cos(std::numbers::pi / 2 * m / b), 0.0);
        const double li = std::max(a * (1 - m / b), 0.0);
        CHECK(std::abs(std::stod(cells[4]) - hc) < 1e-12);
        CHECK(std::abs(std::stod(cells[5]) - li) < 1e-12);
    }

    PlotArtifacts art;
    art.scheduler_curves = specs;
    const auto d1 = test::scratch_dir("plot_a");
    const auto d2 = test::scratch_dir("plot_b");
    emit_plot_data(art, d1);
    emit_plot_data(art, d2);
    CHECK(tree_bytes(d1) == tree_bytes(d2));
}

TEST_CASE("probe experiment") {
    const auto& f = trained_fixture();
    auto config = f.config;
    config.output_dir = test::scratch_dir("probe_full");
    config.probe_k = 64;
    const auto full = run_probe_experiment(config, f.inputs);
    REQUIRE_FALSE(full.profiles.empty());
    for (const auto& p : full.profiles) {
        for (double m : p.mass_by_layer) CHECK(m == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (const auto& agg : full.aggregate.aggregates) {
        for (double s : agg.std_curve) CHECK(s < 1e-12);
    }
    CHECK(labels_sound(f.inputs.world, full.tokens));
    for (const char* name : {"profiles.json", "commitment_curves.csv", "mass_histograms.csv", "captions.jsonl"}) {
        CHECK(fs::exists(config.output_dir / name));
    }

    const auto first = test::scratch_dir("probe_small");
    const auto second = test::scratch_dir("probe_small_again");
    config.probe_k = 4;
    config.output_dir = first;
    const auto small = run_probe_experiment(config, f.inputs);
    config.output_dir = second;
    run_probe_experiment(config, f.inputs);
    CHECK(tree_bytes(first) == tree_bytes(second));
    for (const auto& p : small.profiles) {
        for (std::size_t l = 0; l < p.mass_by_layer.size(); ++l) CHECK(p.mass_by_layer[l] <= 1.0 + 1e-12);
    }

    config.probe_k = 100;
    CHECK_THROWS_AS(run_probe_experiment(config, f.inputs), ConfigError);
}

TEST_CASE("single labeled token aggregates to its own curve") {
    const auto& f = trained_fixture();
    ExperimentInputs one = f.inputs;
    auto config = f.config;
    config.output_dir = test::scratch_dir("probe_single");
    // Greedy captions grow by prefix, so the shortest budget with one mention is found by scanning.
    for (int budget = 1; budget <= f.config.max_new_tokens; ++budget) {
        one.scenes = {f.inputs.scenes[0]};
        const auto caps = baseline_captions(one, budget);
        if (label_mentions(one.world, caps[0]).size() != 1) continue;
        config.max_new_tokens = budget;
        const auto r = run_probe_experiment(config, one);
        REQUIRE(r.profiles.size() == 1);
        REQUIRE(r.aggregate.aggregates.size() == 1);
        CHECK(r.aggregate.aggregates[0].mean_curve == r.profiles[0].mass_by_layer);
        CHECK(r.aggregate.aggregates[0].count == 1);
        return;
    }
    FAIL("the first scene never produced exactly one mention");
}

TEST_CASE("probe experiment without labeled tokens") {
    const auto& f = trained_fixture();
    auto config = f.config;
    config.output_dir = test::scratch_dir("probe_none");
    config.max_new_tokens = 1;
    CHECK_THROWS_AS(run_probe_experiment(config, f.inputs), ExperimentError);
}

TEST_CASE("decode experiment") {
    const auto& f = trained_fixture();
    auto config = f.config;
    config.output_dir = test::scratch_dir("decode_off");
    config.policy_flags.mode = InjectionMode::Off;
    const auto off = run_decode_experiment(config, f.inputs);
    config.output_dir = test::scratch_dir("decode_static0");
    config.policy_flags.mode = InjectionMode::Static;
    config.policy_flags.alpha = 0.0;
    const auto zero = run_decode_experiment(config, f.inputs);
    CHECK(off.policy_report.to_json() == zero.policy_report.to_json());
    CHECK(off.baseline_report.to_json() == off.policy_report.to_json());
    const auto report = read_json(config.output_dir / "report.json");
    CHECK(report.at("amber_hal_comparison").contains("baseline"));
    CHECK(report.at("amber_hal_comparison").contains("intervened"));

    auto edge = f.config;
    edge.max_new_tokens = 0;
    const auto empty = run_decode_experiment(edge, f.inputs, false);
    for (const auto& c : empty.policy_captions) CHECK(c.text.empty());
    CHECK(empty.policy_report.chair_s == 0.0);
    CHECK(empty.policy_report.amber_cover == 0.0);
    halmetrics::take_warnings();

    auto dyn = f.config;
    dyn.preset = "llavanext";
    const auto a = run_decode_experiment(dyn, f.inputs, false);
    const auto b = run_decode_experiment(dyn, f.inputs, false);
    CHECK(a.policy_report.to_json() == b.policy_report.to_json());
    for (const auto& t : a.policy_traces) {
        for (const auto& s : t.steps) CHECK(s.swapped == (s.probe_argmax != s.injected_argmax));
    }

    auto autoalpha = f.config;
    autoalpha.policy_flags.mode = InjectionMode::Static;
    autoalpha.policy_flags.alpha_auto = true;
    const auto resolved = run_decode_experiment(autoalpha, f.inputs, false);
    auto as_dynamic = f.config;
    const auto dynamic_run = run_decode_experiment(as_dynamic, f.inputs, false);
    CHECK(resolved.policy.alpha == doctest::Approx(mean_effective_alpha(dynamic_run.policy_traces)).epsilon(1e-15));
}

TEST_CASE("align experiment") {
    const auto& f = trained_fixture();
    auto config = f.config;
    config.output_dir = test::scratch_dir("align_a");
    const auto a = run_align_experiment(config, f.inputs);
    const auto first = read_file(config.output_dir / "alignment_report.json");
    config.output_dir = test::scratch_dir("align_b");
    run_align_experiment(config, f.inputs);
    CHECK(first == read_file(config.output_dir / "alignment_report.json"));
    CHECK(a.report.truthful_count + a.report.hallucinatory_count == static_cast<int>(a.samples.size()));
    CHECK(fs::exists(config.output_dir / "alignment_box.csv"));
}

TEST_CASE("branch experiment") {
    const auto& f = trained_fixture();
    auto config = f.config;
    config.output_dir = test::scratch_dir("branch");
    config.policy_flags.alpha_max = 1.0;
    config.policy_flags.beta = 1.0;
    config.probe_k = 1;
    const auto r = run_branch(config, f.inputs);
    auto plain = config;
    plain.output_dir = test::scratch_dir("branch_plain");
    const auto d = run_decode_experiment(plain, f.inputs, false);
    REQUIRE(r.size() == d.policy_traces.size());
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i].trace.tokens == d.policy_traces[i].tokens);
    CHECK(fs::exists(config.output_dir / "branches.jsonl"));
}

TEST_CASE("sweep grid structure") {
    ExperimentConfig config;
    config.output_dir = test::scratch_dir("sweep");
    config.seed = 4;
    config.max_new_tokens = 16;
    auto options = default_sweep_options();
    options.world.num_scenes = 12;
    options.train.max_scenes = 8;
    options.train.epochs = 5;
    const auto cells = run_sweep(config, options);
    CHECK(cells.size() == 9);
    const auto lines = lines_of(read_file(config.output_dir / kSweepGridFile));
    REQUIRE(lines.size() == 2 + 9);
    std::size_t row = 2;
    for (double a : {0.15, 0.17, 0.20}) {
        for (double b : {0.25, 0.35, 0.45}) {
            const auto cells_in_row = split_csv(lines[row++]);
            REQUIRE(cells_in_row.size() == 7);
            CHECK(std::stod(cells_in_row[0]) == a);
            CHECK(std::stod(cells_in_row[1]) == b);
        }
    }
    for (const char* name : {"model.ceiw", "sweep.json", "train_loss.csv", "world/world.json"}) {
        CHECK(fs::exists(config.output_dir / name));
    }
    const std::vector<fs::path> dirs{config.output_dir};
    const auto collected = collect_artifacts(dirs);
    REQUIRE(collected.sweep.size() == 9);
    CHECK(sweep_grid_csv(collected.sweep) == read_file(config.output_dir / kSweepGridFile));
}

TEST_CASE("atomic writes and json lines") {
    const auto dir = test::scratch_dir("io");
    write_file_atomic(dir / "a" / "b.txt", "hello");
    CHECK(read_file(dir / "a" / "b.txt") == "hello");
    CHECK_FALSE(fs::exists(dir / "a" / "b.txt.tmp"));
    const std::vector<nlohmann::json> rows{{{"x", 1}}, {{"x", 2}}};
    write_file_atomic(dir / "rows.jsonl", to_jsonl(rows));
    CHECK(read_jsonl(dir / "rows.jsonl") == rows);
    write_file_atomic(dir / "broken.json", "{");
    CHECK_THROWS_AS(read_json(dir / "broken.json"), FormatError);
    CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("degenerate alignment words are skipped with a warning") {
    LabeledToken t;
    t.scene_id = "s1";
    t.word = "cat";
    t.label = TokenLabel::truthful;
    const Vector mu{{0.5, -1.0}};
    std::vector<std::string> warnings;
    CHECK_FALSE(alignment_sample_or_skip(Vector{{1.0, 0.0}}, WordVector{"cat", mu, 1}, mu, t, warnings).has_value());
    CHECK_FALSE(alignment_sample_or_skip(mu, WordVector{"cat", Vector{{1.0, 0.0}}, 1}, mu, t, warnings).has_value());
    REQUIRE(warnings.size() == 2);
    CHECK(warnings[0].find("'cat' in scene s1") != std::string::npos);
    const auto ok = alignment_sample_or_skip(Vector{{1.0, 0.0}}, WordVector{"cat", Vector{{0.0, 1.0}}, 1}, mu, t, warnings);
    REQUIRE(ok.has_value());
    CHECK(ok->label == TokenLabel::truthful);
    CHECK(warnings.size() == 2);
}

TEST_CASE("plot data collected from run directories matches the runs") {
    const auto& f = trained_fixture();
    auto config = f.config;
    const auto probe_dir = test::scratch_dir("collect_probe");
    config.output_dir = probe_dir;
    run_probe_experiment(config, f.inputs);
    const auto align_dir = test::scratch_dir("collect_align");
    config.output_dir = align_dir;
    run_align_experiment(config, f.inputs);

    const std::vector<fs::path> dirs{probe_dir, align_dir};
    const auto artifacts = collect_artifacts(dirs);
    REQUIRE(artifacts.commitment.has_value());
    REQUIRE(artifacts.alignment.has_value());
    const auto out = test::scratch_dir("collect_out");
    emit_plot_data(artifacts, out);
    CHECK(read_file(out / kCommitmentCurvesFile) == read_file(dirs[0] / kCommitmentCurvesFile));
    CHECK(read_file(out / kMassHistogramsFile) == read_file(dirs[0] / kMassHistogramsFile));
    CHECK(read_file(out / kAlignmentBoxFile) == read_file(align_dir / kAlignmentBoxFile));
}
