// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/harness/world.hpp"

#include "cei/error.hpp"
#include "cei/harness/file_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <map>
#include <set>

namespace cei::harness {
namespace {

namespace fs = std::filesystem;

constexpr std::array<std::string_view, 128> kNouns = {
    "person",   "dog",       "cat",        "car",        "cup",       "couch",     "bicycle",  "television",
    "motorcycle", "bird",    "horse",      "sheep",      "cow",       "elephant",  "bear",     "zebra",
    "giraffe",  "backpack",  "umbrella",   "handbag",    "tie",       "suitcase",  "frisbee",  "ski",
    "snowboard", "ball",     "kite",       "bat",        "glove",     "skateboard", "surfboard", "racket",
    "bottle",   "glass",     "fork",       "knife",      "spoon",     "bowl",      "banana",   "apple",
    "sandwich", "orange",    "broccoli",   "carrot",     "pizza",     "donut",     "cake",     "chair",
    "plant",    "bed",       "table",      "toilet",     "laptop",    "mouse",     "remote",   "keyboard",
    "phone",    "microwave", "oven",       "toaster",    "sink",      "refrigerator", "book",  "clock",
    "vase",     "stapler",   "hairdryer",  "toothbrush", "truck",     "bus",       "train",    "boat",
    "airplane", "bench",     "hydrant",    "sign",       "meter",     "lamp",      "window",   "door",
    "tree",     "flower",    "fence",      "rock",       "cloud",     "mountain",  "river",    "beach",
    "road",     "building",  "bridge",     "tower",      "pillow",    "blanket",   "curtain",  "shelf",
    "desk",     "mirror",    "rug",        "basket",     "box",       "bag",       "hat",      "shirt",
    "shoe",     "jacket",    "scarf",      "wallet",     "camera",    "guitar",    "piano",    "drum",
    "violin",   "candle",    "plate",      "pot",        "pan",       "kettle",    "jar",      "lemon",
    "grape",    "cherry",    "peach",      "pear",       "tomato",    "potato",    "onion",    "pepper",
};

const std::map<std::string_view, std::string_view> kSynonyms = {
    {"person", "man"},        {"dog", "puppy"},  {"car", "automobile"}, {"cup", "mug"},
    {"couch", "sofa"},        {"bicycle", "bike"}, {"television", "tv"}, {"motorcycle", "motorbike"},
    {"airplane", "jet"},      {"rug", "carpet"},
};

constexpr std::array<std::string_view, 5> kCaptionWords = {"a", "photo", "of", "and", ","};

std::string plural_of(const std::string& word) {
    auto ends = [&](std::string_view s) { return word.ends_with(s); };
    if (ends("s") || ends("x") || ends("ch") || ends("sh")) return word + "es";
    if (ends("y") && word.size() > 1 && std::string_view("aeiou").find(word[word.size() - 2]) == std::string_view::npos) {
        return word.substr(0, word.size() - 1) + "ies";
    }
    if (ends("f") && !ends("ff")) return word.substr(0, word.size() - 1) + "ves";
    if (ends("fe") && !ends("ffe")) return word.substr(0, word.size() - 2) + "ves";
    return word + "s";
}

bool split_candidate(const std::string& name, std::size_t index) { return name.size() >= 7 && index % 4 == 1; }

std::vector<std::string> fixed_tokens() {
    std::vector<std::string> out{std::string(kPadToken), std::string(kEosToken), std::string(kUnkToken)};
    for (const auto& w : {"describe", "this", "image", "in", "detail", ":"}) out.emplace_back(w);
    for (auto w : kCaptionWords) out.emplace_back(w);
    out.emplace_back(".");
    return out;
}

void validate(const WorldParams& p) {
    if (p.ontology_size < 1) throw ConfigError("ontology_size must be at least 1");
    if (p.ontology_size > static_cast<int>(kNouns.size())) {
        throw ConfigError(fmt::format("ontology_size {} exceeds the {} available object names", p.ontology_size, kNouns.size()));
    }
    if (p.ontology_size > p.vocab_size / 2) {
        throw ConfigError(fmt::format("ontology_size {} exceeds half the vocabulary ({})", p.ontology_size, p.vocab_size));
    }
    if (p.num_scenes < 1) throw ConfigError("num_scenes must be at least 1");
    if (p.dim < 1) throw ConfigError("dim must be positive");
    if (!(p.noise_scale >= 0.0) || !std::isfinite(p.noise_scale)) throw ConfigError("noise_scale must be finite and >= 0");
}

void write_table(const fs::path& path, const Matrix& table) {
    std::string bytes = "CEIT";
    auto put_u32 = [&](std::uint32_t v) {
        char buf[4];
        std::memcpy(buf, &v, 4);
        bytes.append(buf, 4);
    };
    put_u32(static_cast<std::uint32_t>(table.rows()));
    put_u32(static_cast<std::uint32_t>(table.cols()));
    const auto* data = reinterpret_cast<const char*>(table.data());
    bytes.append(data, static_cast<std::size_t>(table.size()) * sizeof(double));
    write_file_atomic(path, bytes);
}

Matrix read_table(const fs::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 12 || bytes.compare(0, 4, "CEIT") != 0) throw FormatError(path.string() + ": not an object table");
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::memcpy(&rows, bytes.data() + 4, 4);
    std::memcpy(&cols, bytes.data() + 8, 4);
    const std::size_t expected = 12 + static_cast<std::size_t>(rows) * cols * sizeof(double);
    if (bytes.size() != expected) throw FormatError(path.string() + ": object table size mismatch");
    Matrix table(rows, cols);
    std::memcpy(table.data(), bytes.data() + 12, expected - 12);
    if (!all_finite(table)) throw FormatError(path.string() + ": non-finite object table entry");
    return table;
}

nlohmann::json scene_to_json(const SceneSpec& s, const World& w) {
    return nlohmann::json{{"scene_id", s.scene_id},
                          {"object_ids", s.object_ids},
                          {"objects", w.object_names(s)},
                          {"noise_seed", s.noise_seed}};
}

}  // namespace

nlohmann::json WorldParams::to_json() const {
    return nlohmann::json{{"ontology_size", ontology_size}, {"num_scenes", num_scenes}, {"seed", seed},
                          {"vocab_size", vocab_size},       {"dim", dim},               {"noise_scale", noise_scale}};
}

WorldParams WorldParams::from_json(const nlohmann::json& j) {
    WorldParams p;
    p.ontology_size = j.value("ontology_size", p.ontology_size);
    p.num_scenes = j.value("num_scenes", p.num_scenes);
    p.seed = j.value("seed", p.seed);
    p.vocab_size = j.value("vocab_size", p.vocab_size);
    p.dim = j.value("dim", p.dim);
    p.noise_scale = j.value("noise_scale", p.noise_scale);
    return p;
}

std::vector<std::string> World::object_names(const SceneSpec& scene) const {
    std::vector<std::string> out;
    for (int id : scene.object_ids) out.push_back(objects.at(static_cast<std::size_t>(id)).name);
    return out;
}

const SceneSpec& World::scene(const std::string& scene_id) const {
    for (const auto& s : scenes) {
        if (s.scene_id == scene_id) return s;
    }
    throw InputError("unknown scene '" + scene_id + "'");
}

World synth_world(const WorldParams& params) {
    validate(params);
    std::mt19937_64 rng(params.seed);

    std::vector<std::string> names(kNouns.begin(), kNouns.end());
    std::shuffle(names.begin(), names.end(), rng);
    names.resize(static_cast<std::size_t>(params.ontology_size));
    std::sort(names.begin(), names.end());

    std::vector<std::string> vocab = fixed_tokens();
    std::set<std::string> taken(vocab.begin(), vocab.end());
    if (vocab.size() + names.size() > static_cast<std::size_t>(params.vocab_size)) {
        throw ConfigError(fmt::format("vocabulary of {} cannot hold {} function tokens and {} objects", params.vocab_size,
                                      vocab.size(), names.size()));
    }
    auto budget = [&] { return static_cast<std::size_t>(params.vocab_size) - vocab.size(); };

    // Whole-word tokens are reserved first; split words and surface variants
    // are added while room remains.
    std::vector<bool> split(names.size(), false);
    std::size_t reserved = names.size();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (split_candidate(names[i], i) && budget() > reserved) {
            split[i] = true;
            ++reserved;
        }
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& n = names[i];
        if (!split[i]) {
            if (taken.insert(n).second) vocab.push_back(n);
            continue;
        }
        const std::size_t cut = n.size() / 2;
        const std::string stem = n.substr(0, cut);
        const std::string rest = std::string(kContinuation) + n.substr(cut);
        for (const auto& piece : {stem, rest}) {
            if (taken.insert(piece).second) vocab.push_back(piece);
        }
    }

    World world;
    world.params = params;
    std::map<std::string, std::string> synonyms;
    std::map<std::string, std::string> lemmas;
    for (const auto& n : names) world.objects.push_back(ObjectEntry{n, std::nullopt, std::nullopt});
    for (auto& entry : world.objects) {
        auto it = kSynonyms.find(entry.name);
        if (it == kSynonyms.end() || budget() == 0) continue;
        const std::string syn(it->second);
        if (!taken.insert(syn).second) continue;
        vocab.push_back(syn);
        entry.synonym = syn;
        synonyms[syn] = entry.name;
    }
    for (std::size_t i = 0; i < world.objects.size(); ++i) {
        auto& entry = world.objects[i];
        if (i % 3 != 0 || budget() == 0) continue;
        const std::string pl = plural_of(entry.name);
        if (!taken.insert(pl).second) continue;
        vocab.push_back(pl);
        entry.plural = pl;
        lemmas[pl] = entry.name;
    }
    for (int u = 0; budget() > 0; ++u) vocab.push_back(fmt::format("<unused_{}>", u));

    world.tokenizer = Tokenizer(std::move(vocab));
    for (const auto& entry : world.objects) {
        for (const auto* form : {&entry.name, entry.synonym ? &*entry.synonym : nullptr, entry.plural ? &*entry.plural : nullptr}) {
            if (form == nullptr) continue;
            const auto ids = world.tokenizer.encode_word(*form);
            if (world.tokenizer.decode(ids) != *form) {
                throw ConfigError("object form '" + *form + "' does not round-trip through the tokenizer");
            }
        }
    }
    world.ontology = halmetrics::Ontology(std::set<std::string>(names.begin(), names.end()), synonyms, lemmas);

    const int n_obj = params.ontology_size;
    const int max_objects = std::min(5, n_obj);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(params.dim)));
    world.object_table.resize(n_obj, params.dim);
    for (Eigen::Index i = 0; i < world.object_table.size(); ++i) world.object_table.data()[i] = gauss(rng);

    std::vector<int> all(static_cast<std::size_t>(n_obj));
    for (int i = 0; i < n_obj; ++i) all[static_cast<std::size_t>(i)] = i;
    std::uniform_int_distribution<int> count_dist(1, max_objects);
    for (int s = 0; s < params.num_scenes; ++s) {
        SceneSpec spec;
        spec.scene_id = fmt::format("scene-{:04d}", s);
        const int k = count_dist(rng);
        std::vector<int> pool = all;
        std::shuffle(pool.begin(), pool.end(), rng);
        spec.object_ids.assign(pool.begin(), pool.begin() + k);
        std::sort(spec.object_ids.begin(), spec.object_ids.end());
        spec.noise_seed = rng();

        halmetrics::GroundTruth gt;
        gt.image_id = spec.scene_id;
        for (int id : spec.object_ids) gt.present_objects.insert(names[static_cast<std::size_t>(id)]);
        gt.salient_objects = gt.present_objects;
        const int n_targets = std::min(3, n_obj - k);
        for (int t = 0; t < n_targets; ++t) gt.hallucination_targets.insert(names[static_cast<std::size_t>(pool[static_cast<std::size_t>(k + t)])]);
        world.scenes.push_back(std::move(spec));
        world.ground_truth.push_back(std::move(gt));
    }
    return world;
}

Matrix render_scene(const SceneSpec& spec, const Matrix& embedding_table, double noise_scale) {
    if (!(noise_scale >= 0.0)) throw InputError("noise_scale must be >= 0");
    Matrix out(static_cast<Eigen::Index>(spec.object_ids.size()), embedding_table.cols());
    std::mt19937_64 rng(spec.noise_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t r = 0; r < spec.object_ids.size(); ++r) {
        const int id = spec.object_ids[r];
        if (id < 0 || id >= embedding_table.rows()) {
            throw InputError(fmt::format("scene {} references unknown object {}", spec.scene_id, id));
        }
        const auto row = static_cast<Eigen::Index>(r);
        out.row(row) = embedding_table.row(id);
        if (noise_scale > 0.0) {
            for (Eigen::Index c = 0; c < out.cols(); ++c) out(row, c) += noise_scale * gauss(rng);
        }
    }
    return out;
}

std::vector<TokenId> caption_tokens(const World& world, const SceneSpec& scene, std::mt19937_64& rng) {
    std::vector<int> order = scene.object_ids;
    std::shuffle(order.begin(), order.end(), rng);
    const Tokenizer& tok = world.tokenizer;
    std::vector<TokenId> out = tok.encode("a photo of");
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0) out.push_back(tok.id(i + 1 == order.size() ? "and" : ","));
        const ObjectEntry& e = world.objects.at(static_cast<std::size_t>(order[i]));
        std::vector<const std::string*> forms{&e.name};
        if (e.synonym) forms.push_back(&*e.synonym);
        if (e.plural) forms.push_back(&*e.plural);
        std::uniform_int_distribution<std::size_t> pick(0, forms.size() - 1);
        const auto ids = tok.encode_word(*forms[pick(rng)]);
        out.insert(out.end(), ids.begin(), ids.end());
    }
    out.push_back(tok.id("."));
    out.push_back(tok.eos());
    return out;
}

std::vector<SceneSpec> read_scenes(const fs::path& path, int num_objects) {
    std::vector<SceneSpec> scenes;
    try {
        for (const auto& j : read_jsonl(path)) {
            SceneSpec s;
            s.scene_id = j.at("scene_id").get<std::string>();
            s.object_ids = j.at("object_ids").get<std::vector<int>>();
            s.noise_seed = j.at("noise_seed").get<std::uint64_t>();
            for (int id : s.object_ids) {
                if (id < 0 || id >= num_objects) {
                    throw FormatError("scene " + s.scene_id + " references unknown object " + std::to_string(id));
                }
            }
            if (s.object_ids.empty() || s.object_ids.size() > static_cast<std::size_t>(num_objects)) {
                throw FormatError("scene " + s.scene_id + " has an invalid object count");
            }
            scenes.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": malformed scene: " + e.what());
    }
    return scenes;
}

std::vector<halmetrics::GroundTruth> read_ground_truth(const fs::path& path) {
    std::vector<halmetrics::GroundTruth> out;
    for (const auto& j : read_jsonl(path)) out.push_back(halmetrics::GroundTruth::from_json(j));
    return out;
}

void save_world(const World& world, const fs::path& dir) {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : world.objects) {
        objects.push_back({{"name", o.name},
                           {"synonym", o.synonym ? nlohmann::json(*o.synonym) : nlohmann::json()},
                           {"plural", o.plural ? nlohmann::json(*o.plural) : nlohmann::json()}});
    }
    write_json(dir / "world.json",
               nlohmann::json{{"schema_version", 1}, {"params", world.params.to_json()}, {"objects", objects}});
    write_json(dir / "vocab.json", world.tokenizer.to_json());
    write_json(dir / "ontology.json", world.ontology.to_json());
    std::vector<nlohmann::json> scenes;
    std::vector<nlohmann::json> truth;
    for (const auto& s : world.scenes) scenes.push_back(scene_to_json(s, world));
    for (const auto& g : world.ground_truth) truth.push_back(g.to_json());
    write_file_atomic(dir / "scenes.jsonl", to_jsonl(scenes));
    write_file_atomic(dir / "ground_truth.jsonl", to_jsonl(truth));
    write_table(dir / "object_embeddings.bin", world.object_table);
}

World load_world(const fs::path& dir) {
    World world;
    const auto meta = read_json(dir / "world.json");
    try {
        if (meta.at("schema_version").get<int>() != 1) throw FormatError("unsupported world schema version");
        world.params = WorldParams::from_json(meta.at("params"));
        for (const auto& o : meta.at("objects")) {
            ObjectEntry e{o.at("name").get<std::string>(), std::nullopt, std::nullopt};
            if (!o.at("synonym").is_null()) e.synonym = o.at("synonym").get<std::string>();
            if (!o.at("plural").is_null()) e.plural = o.at("plural").get<std::string>();
            world.objects.push_back(std::move(e));
        }
        world.tokenizer = Tokenizer::from_json(read_json(dir / "vocab.json"));
        world.ontology = halmetrics::Ontology::from_json(read_json(dir / "ontology.json"));
        world.scenes = read_scenes(dir / "scenes.jsonl", static_cast<int>(world.objects.size()));
        world.ground_truth = read_ground_truth(dir / "ground_truth.jsonl");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(dir.string() + ": malformed world: " + e.what());
    }
    if (world.ground_truth.size() != world.scenes.size()) throw FormatError("scene and ground-truth counts differ");
    world.object_table = read_table(dir / "object_embeddings.bin");
    if (world.object_table.rows() != static_cast<Eigen::Index>(world.objects.size())) {
        throw FormatError("object table rows do not match the ontology");
    }
    return world;
}

}  // namespace cei::harness
