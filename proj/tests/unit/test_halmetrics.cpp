// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/error.hpp"
#include "cei/halmetrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

using namespace cei;
using namespace cei::halmetrics;

namespace {

const std::filesystem::path kCorpus = std::filesystem::path(CEI_FIXTURE_DIR) / "corpus12";

nlohmann::json load(const std::filesystem::path& p) {
    std::ifstream f(p);
    return nlohmann::json::parse(f);
}

std::vector<nlohmann::json> load_lines(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::vector<nlohmann::json> out;
    for (std::string line; std::getline(f, line);) {
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    }
    return out;
}

struct Corpus {
    Ontology ontology;
    std::vector<GroundTruth> truth;
    std::vector<CaptionRecord> captions;
    std::vector<double> mmhal;
    nlohmann::json expected;
};

Corpus corpus() {
    Corpus c;
    c.ontology = Ontology::from_json(load(kCorpus / "ontology.json"));
    for (const auto& j : load_lines(kCorpus / "ground_truth.jsonl")) c.truth.push_back(GroundTruth::from_json(j));
    for (const auto& j : load_lines(kCorpus / "captions.jsonl")) c.captions.push_back(CaptionRecord::from_json(j));
    for (const auto& j : load_lines(kCorpus / "mmhal.jsonl")) c.mmhal.push_back(j.at("score").get<double>());
    c.expected = load(kCorpus / "expected.json");
    return c;
}

double fraction(const nlohmann::json& j) { return j[0].get<double>() / j[1].get<double>(); }

Ontology animals() {
    return Ontology({"dog", "cat", "hot dog", "tree", "unicorn"}, {{"puppy", "dog"}}, {{"dogs", "dog"}, {"cats", "cat"}});
}

GroundTruthIndex truth_of(std::vector<std::pair<std::string, std::set<std::string>>> entries) {
    std::vector<GroundTruth> gts;
    for (auto& [id, present] : entries) {
        GroundTruth g;
        g.image_id = id;
        g.present_objects = present;
        gts.push_back(g);
    }
    return index_ground_truth(gts);
}

}  // namespace

TEST_CASE("extract_mentions") {
    const auto o = animals();
    CHECK(extract_mentions("Two dogs and a cat.", o).objects == std::set<std::string>{"dog", "cat"});
    CHECK(extract_mentions("", o).mentions.empty());
    const auto hot = extract_mentions("a hot dog", o);
    CHECK(hot.objects == std::set<std::string>{"hot dog"});
    REQUIRE(hot.mentions.size() == 1);
    CHECK(hot.mentions[0].begin == 2);
    CHECK(hot.mentions[0].end == 9);

    const std::string text = "A PUPPY, two Dogs; one dog!";
    const auto m = extract_mentions(text, o);
    CHECK(m.mentions.size() == 3);
    CHECK(m.objects == std::set<std::string>{"dog"});
    for (const auto& x : m.mentions) {
        CHECK(x.end <= text.size());
        CHECK(x.begin < x.end);
        CHECK(o.is_object(x.object));
    }
    CHECK(text.substr(m.mentions[0].begin, m.mentions[0].end - m.mentions[0].begin) == "PUPPY");
}

TEST_CASE("ontology validation") {
    CHECK_THROWS_AS(Ontology({"dog"}, {{"kitten", "cat"}}, {}), InputError);
    CHECK_THROWS_AS(Ontology::from_json(nlohmann::json{{"synonyms", nlohmann::json::object()}}), FormatError);
    const auto o = animals();
    CHECK(o.canonical("Puppy") == "dog");
    CHECK(o.canonical("dog") == "dog");
    CHECK_FALSE(o.canonical("horse").has_value());
    CHECK(o.max_phrase_words() == 2);
    const auto back = Ontology::from_json(o.to_json());
    CHECK(back.objects() == o.objects());
    CHECK(back.synonyms() == o.synonyms());
    CHECK(back.lemmas() == o.lemmas());

    nlohmann::json bad{{"image_id", "x"}, {"present_objects", {"dog"}}, {"hallucination_targets", {"dog"}}};
    CHECK_THROWS_AS(GroundTruth::from_json(bad), FormatError);
    GroundTruth g;
    g.image_id = "a";
    const std::vector<GroundTruth> dup{g, g};
    CHECK_THROWS_AS(index_ground_truth(dup), InputError);
}

TEST_CASE("chair_scores examples") {
    const auto o = animals();
    const auto gt = truth_of({{"a", {"dog"}}, {"b", {"dog", "tree"}}});
    const std::vector<CaptionRecord> one{{"a", "a dog and a cat"}};
    auto s = chair_scores(one, gt, o);
    CHECK(s.chair_i == 0.5);
    CHECK(s.chair_s == 1.0);

    const std::vector<CaptionRecord> clean{{"b", "a dog by a tree"}};
    s = chair_scores(clean, gt, o);
    CHECK(s.chair_i == 0.0);
    CHECK(s.chair_s == 0.0);

    const std::vector<CaptionRecord> two{{"b", "a dog by a tree"}, {"a", "a dog and a unicorn"}};
    CHECK(chair_scores(two, gt, o).chair_s == 0.5);

    const std::vector<CaptionRecord> unknown{{"zzz", "a dog"}};
    CHECK_THROWS_AS(chair_scores(unknown, gt, o), InputError);

    take_warnings();
    const std::vector<CaptionRecord> empty{{"a", "nothing here"}};
    s = chair_scores(empty, gt, o);
    CHECK(s.chair_i == 0.0);
    CHECK(s.chair_s == 0.0);
    CHECK(take_warnings().size() == 1);
}

TEST_CASE("amber_scores examples") {
    const auto o = animals();
    const auto gt = truth_of({{"a", {"dog", "tree"}}, {"b", {"cat"}}});
    const std::vector<CaptionRecord> r{{"a", "a dog and a unicorn"}};
    auto s = amber_scores(r, gt, o);
    CHECK(s.chair == 0.5);
    CHECK(s.hal == 1.0);
    CHECK(s.cover == 0.5);

    const std::vector<CaptionRecord> exact{{"a", "a tree and a dog"}};
    s = amber_scores(exact, gt, o);
    CHECK(s.chair == 0.0);
    CHECK(s.hal == 0.0);
    CHECK(s.cover == 1.0);

    const std::vector<CaptionRecord> halves{{"b", "a cat"}, {"b", "nothing"}};
    CHECK(amber_scores(halves, gt, o).cover == 0.5);
}

TEST_CASE("mmhal_aggregate") {
    const std::vector<double> fives{5, 5, 5};
    auto m = mmhal_aggregate(fives);
    CHECK(m.score == 5.0);
    CHECK(m.halrate == 0.0);
    const std::vector<double> mixed{2, 3, 4, 1};
    m = mmhal_aggregate(mixed);
    CHECK(m.score == 2.5);
    CHECK(m.halrate == 0.5);
    const std::vector<double> out_of_range{0, 6};
    CHECK_THROWS_AS(mmhal_aggregate(out_of_range), InputError);
    CHECK_THROWS_AS(mmhal_aggregate(std::vector<double>{}), InputError);
    const std::vector<double> nan{std::nan("")};
    CHECK_THROWS_AS(mmhal_aggregate(nan), InputError);
}

TEST_CASE("frozen twelve-caption corpus") {
    const auto c = corpus();
    const auto index = index_ground_truth(c.truth);

    // Mention sets were enumerated by hand in expected.json.
    for (const auto& rec : c.captions) {
        const auto got = extract_mentions(rec.text, c.ontology, rec.image_id).objects;
        const auto want = c.expected["mentions"][rec.image_id].get<std::set<std::string>>();
        CHECK_MESSAGE(got == want, rec.image_id);
    }

    // Brute-force recount from the hand-listed sets, independent of the library.
    int mentions = 0, halluc = 0, bad_captions = 0;
    double chair_sum = 0, cover_sum = 0;
    for (const auto& rec : c.captions) {
        const auto set = c.expected["mentions"][rec.image_id].get<std::set<std::string>>();
        const auto& present = index.at(rec.image_id).present_objects;
        int h = 0, hit = 0;
        for (const auto& o : set) (present.contains(o) ? hit : h) += 1;
        mentions += static_cast<int>(set.size());
        halluc += h;
        bad_captions += h > 0;
        chair_sum += set.empty() ? 0.0 : static_cast<double>(h) / static_cast<double>(set.size());
        cover_sum += static_cast<double>(hit) / static_cast<double>(present.size());
    }
    const double n = static_cast<double>(c.captions.size());
    CHECK(mentions == 25);
    CHECK(halluc == 7);
    CHECK(std::abs(chair_sum / n - fraction(c.expected["amber_chair"])) < 1e-12);
    CHECK(std::abs(cover_sum / n - fraction(c.expected["amber_cover"])) < 1e-12);
    CHECK(std::abs(bad_captions / n - fraction(c.expected["chair_s"])) < 1e-12);

    const auto r = evaluate(c.captions, index, c.ontology, c.mmhal);
    CHECK(std::abs(r.chair_i - fraction(c.expected["chair_i"])) < 1e-12);
    CHECK(std::abs(r.chair_s - fraction(c.expected["chair_s"])) < 1e-12);
    CHECK(std::abs(r.amber_chair - fraction(c.expected["amber_chair"])) < 1e-12);
    CHECK(std::abs(r.amber_hal - fraction(c.expected["amber_hal"])) < 1e-12);
    CHECK(std::abs(r.amber_cover - fraction(c.expected["amber_cover"])) < 1e-12);
    REQUIRE(r.mmhal_score.has_value());
    CHECK(std::abs(*r.mmhal_score - fraction(c.expected["mmhal_score"])) < 1e-12);
    CHECK(std::abs(*r.mmhal_halrate - fraction(c.expected["mmhal_halrate"])) < 1e-12);
    CHECK(r.mentions == 25);
    CHECK(r.hallucinated_mentions == 7);

    const auto j = r.to_json();
    CHECK(j.at("schema_version") == 1);
    CHECK(j.at("counts").at("captions") == 12);
}

TEST_CASE("metric properties on shuffled corpora") {
    const auto c = corpus();
    const auto index = index_ground_truth(c.truth);
    const auto base = evaluate(c.captions, index, c.ontology);
    CHECK_FALSE(base.mmhal_score.has_value());
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 30; ++rep) {
        auto shuffled = c.captions;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto r = evaluate(shuffled, index, c.ontology);
        CHECK(r.chair_i == doctest::Approx(base.chair_i).epsilon(1e-15));
        CHECK(r.chair_s == doctest::Approx(base.chair_s).epsilon(1e-15));
        CHECK(r.amber_chair == doctest::Approx(base.amber_chair).epsilon(1e-12));
        CHECK(r.amber_hal == doctest::Approx(base.amber_hal).epsilon(1e-15));
        CHECK(r.amber_cover == doctest::Approx(base.amber_cover).epsilon(1e-12));

        // Random sub-corpora keep rates in range and chair_i = 0 iff chair_s = 0.
        std::vector<CaptionRecord> sub(shuffled.begin(), shuffled.begin() + 1 + rep % 12);
        const auto s = evaluate(sub, index, c.ontology);
        for (double v : {s.chair_i, s.chair_s, s.amber_chair, s.amber_hal, s.amber_cover}) CHECK((v >= 0.0 && v <= 1.0));
        if (s.mentions > 0) CHECK((s.chair_i == 0.0) == (s.chair_s == 0.0));
    }
    take_warnings();
}

TEST_CASE("response cover plus missed fraction is one") {
    const auto c = corpus();
    const auto index = index_ground_truth(c.truth);
    for (const auto& rec : c.captions) {
        const auto m = extract_mentions(rec.text, c.ontology, rec.image_id);
        const auto& gt = index.at(rec.image_id);
        int missed = 0;
        for (const auto& o : gt.present_objects) missed += m.objects.contains(o) ? 0 : 1;
        CHECK(response_cover(m, gt) + static_cast<double>(missed) / static_cast<double>(gt.present_objects.size()) == 1.0);
    }
}
