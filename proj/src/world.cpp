// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/world.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace celab {

namespace {

struct ConceptWords {
    const char* word;
    std::array<const char*, 3> syns;
};

// Fixed word inventory; build_world takes a prefix of it.
constexpr ConceptWords kConcepts[] = {
    {"circle", {"disc", "ring", "orb"}},
    {"square", {"box", "block", "tile"}},
    {"triangle", {"wedge", "arrow", "prism"}},
    {"star", {"spark", "nova", "comet"}},
    {"moon", {"crescent", "lunar", "glow"}},
    {"flower", {"bloom", "petal", "rose"}},
    {"house", {"cabin", "hut", "lodge"}},
    {"fish", {"trout", "carp", "minnow"}},
    {"bird", {"crow", "finch", "wren"}},
    {"cloud", {"mist", "fog", "haze"}},
    {"tree", {"oak", "pine", "birch"}},
    {"boat", {"canoe", "raft", "skiff"}},
};
constexpr int kMaxConcepts = static_cast<int>(sizeof(kConcepts) / sizeof(kConcepts[0]));

constexpr const char* kStyles[] = {"vangogh_style", "monet_style", "sketch_style", "pixel_style"};
constexpr int kMaxStyles = 4;

constexpr const char* kTemplates[] = {
    "a photo of [C]",
    "an artwork depicting [C]",
    "a bright [C]",
    "[C] on display",
    "a painting of [C]",
    "the big [C]",
    "a small [C] outside",
    "one [C] at night",
    "a clear view of [C]",
    "[C] in the dark",
    "a drawing of [C]",
    "the old [C]",
    "a scene with [C]",
    "[C] under soft light",
    "a simple [C] image",
    "the famous [C]",
};

constexpr double kOrthogonalityBudget = 0.3;

// Gram-Schmidt: n orthonormal vectors of dimension dim.
std::vector<Tensor> orthonormal_fields(Rng& rng, int n, int dim) {
    std::vector<Tensor> basis;
    int attempts = 0;
    while (static_cast<int>(basis.size()) < n) {
        if (++attempts > 16 * n)
            throw OrthogonalityBudgetExceeded(std::to_string(n) + " patterns in dim " + std::to_string(dim));
        Tensor v = rng.normal_tensor({dim});
        for (const Tensor& b : basis) v.axpy_(-dot_flat(v, b), b);
        double nrm = norm2(v);
        if (nrm < 1e-6) continue;  // degenerate draw, retry
        v.scale_(1.0 / nrm);
        basis.push_back(std::move(v));
    }
    return basis;
}

Tensor reshape_to_latent(const Tensor& flat, int hw) {
    Tensor out({1, hw, hw});
    for (int64_t i = 0; i < flat.size(); ++i) out[i] = flat[i];
    return out;
}

}  // namespace

std::string TemplateLibrary::instantiate(size_t idx, const std::string& word) const {
    const std::string& tpl = templates.at(idx);
    size_t pos = tpl.find("[C]");
    if (pos == std::string::npos) throw Error("template has no [C] slot: " + tpl);
    return tpl.substr(0, pos) + word + tpl.substr(pos + 3);
}

const std::string& ConceptBank::canonical(const std::string& w) const {
    auto it = word_to_concept.find(w);
    if (it == word_to_concept.end()) throw UnknownConcept(w);
    return it->second;
}

const Tensor& ConceptBank::pattern_for_word(const std::string& w) const { return patterns.at(canonical(w)); }

Tensor StyleBank::apply(const std::string& style, const Tensor& img) const {
    auto it = transforms.find(style);
    if (it == transforms.end()) throw UnknownConcept(style);
    const Tensor& m = it->second;
    int n = m.dim(0);
    Tensor out(img.shape());
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += m.at(i, j) * img[j];
        out[i] = s;
    }
    return out;
}

World build_world(uint64_t seed, int n_concepts, int n_styles, int seq_len, int latent_hw) {
    if (n_concepts < 2) throw ConfigError("need at least 2 concepts (a target plus retain concepts)");
    if (n_concepts > kMaxConcepts) throw ConfigError("at most " + std::to_string(kMaxConcepts) + " concepts");
    if (n_styles > kMaxStyles) throw ConfigError("at most " + std::to_string(kMaxStyles) + " styles");

    World w;
    w.seed = seed;
    w.n_concepts = n_concepts;
    w.n_styles = n_styles;
    w.seq_len = seq_len;
    w.latent_hw = latent_hw;

    for (const char* tpl : kTemplates) w.templates.templates.push_back(tpl);

    // Template words first, then the style grammar word, then styles, then
    // concept words. Registration order fixes the id assignment.
    for (const char* tpl : kTemplates)
        for (const std::string& word : split_words(tpl))
            if (word != "[C]") w.vocab.add(word);
    w.vocab.add("in");
    for (int s = 0; s < n_styles; ++s) {
        w.styles.styles.push_back(kStyles[s]);
        w.vocab.add(kStyles[s]);
    }
    for (int c = 0; c < n_concepts; ++c) {
        const ConceptWords& cw = kConcepts[c];
        w.vocab.add(cw.word);
        w.concepts.concepts.push_back(cw.word);
        w.concepts.word_to_concept[cw.word] = cw.word;
        std::vector<std::string> syns;
        for (const char* s : cw.syns) {
            w.vocab.add(s);
            syns.push_back(s);
            w.concepts.word_to_concept[s] = cw.word;
        }
        w.concepts.synonyms[cw.word] = std::move(syns);
    }

    int dim = latent_hw * latent_hw;
    Rng pattern_rng(derive_seed(seed, "world.patterns", 0));
    std::vector<Tensor> fields = orthonormal_fields(pattern_rng, n_concepts, dim);
    for (int c = 0; c < n_concepts; ++c)
        w.concepts.patterns[w.concepts.concepts[static_cast<size_t>(c)]] =
            reshape_to_latent(fields[static_cast<size_t>(c)], latent_hw);

    // Budget check (Gram-Schmidt gives ~0 cosines; guard anyway).
    for (int a = 0; a < n_concepts; ++a)
        for (int b = a + 1; b < n_concepts; ++b) {
            double cs = std::abs(cosine(w.concepts.patterns.at(w.concepts.concepts[static_cast<size_t>(a)]),
                                        w.concepts.patterns.at(w.concepts.concepts[static_cast<size_t>(b)])));
            if (cs >= kOrthogonalityBudget)
                throw OrthogonalityBudgetExceeded(w.concepts.concepts[static_cast<size_t>(a)] + " vs " +
                                                  w.concepts.concepts[static_cast<size_t>(b)]);
        }

    // Style transforms: random orthogonal matrices.
    for (int s = 0; s < n_styles; ++s) {
        Rng style_rng(derive_seed(seed, "world.style", static_cast<uint64_t>(s)));
        std::vector<Tensor> cols = orthonormal_fields(style_rng, dim, dim);
        Tensor m({dim, dim});
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) m.at(i, j) = cols[static_cast<size_t>(j)][i];
        w.styles.transforms[kStyles[s]] = std::move(m);
    }
    return w;
}

RetainSet build_retain_set(const World& world, const std::string& target_word) {
    const std::string& target = world.concepts.canonical(target_word);
    RetainSet rs;
    for (const std::string& c : world.concepts.concepts) {
        if (c == target) continue;
        std::vector<std::string> surfaces = {c};
        const auto& syns = world.concepts.synonyms.at(c);
        surfaces.insert(surfaces.end(), syns.begin(), syns.end());
        for (const std::string& s : surfaces) {
            std::string prompt = "a photo of " + s;
            rs.tokenized.push_back(tokenize(prompt, world.vocab, world.seq_len));
            rs.prompts.push_back(std::move(prompt));
        }
    }
    return rs;
}

Tensor render_target(const std::string& prompt, const World& world, Rng& rng, double sigma) {
    std::string object, style;
    for (const std::string& word : split_words(prompt)) {
        if (object.empty() && world.concepts.knows_word(word)) object = word;
        if (style.empty() && world.styles.knows(word)) style = word;
    }
    if (object.empty()) throw UnknownToken("no concept word in prompt: " + prompt);
    Tensor img = world.concepts.pattern_for_word(object);
    if (!style.empty()) img = world.styles.apply(style, img);
    // Noise field with a fixed L2 amplitude: rendered targets stay within a
    // few degrees of their template, which keeps the detector margin wide.
    Tensor g = rng.normal_tensor(img.shape());
    double n = norm2(g);
    if (n > 0.0) img.axpy_(sigma / n, g);
    return img;
}

Corpus build_corpus(const World& world, int n_samples, uint64_t seed) {
    if (n_samples < world.n_concepts) throw ConfigError("corpus smaller than concept count");
    struct Combo {
        std::string surface;
        size_t tpl;
    };
    std::vector<Combo> combos;
    for (const std::string& c : world.concepts.concepts) {
        std::vector<std::string> surfaces = {c};
        const auto& syns = world.concepts.synonyms.at(c);
        surfaces.insert(surfaces.end(), syns.begin(), syns.end());
        for (const std::string& s : surfaces)
            for (size_t t = 0; t < world.templates.size(); ++t) combos.push_back({s, t});
    }
    Corpus corpus;
    corpus.reserve(static_cast<size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        const Combo& cb = combos[static_cast<size_t>(i) % combos.size()];
        CorpusEntry e;
        e.prompt = world.templates.instantiate(cb.tpl, cb.surface);
        e.toks = tokenize(e.prompt, world.vocab, world.seq_len);
        Rng noise(derive_seed(seed, "corpus.noise", static_cast<uint64_t>(i)));
        e.latent = render_target(e.prompt, world, noise);
        corpus.push_back(std::move(e));
    }
    return corpus;
}

namespace {
uint64_t world_fingerprint(const World& w) {
    uint64_t h = 1469598103934665603ull;
    for (const std::string& c : w.concepts.concepts) {
        h ^= checksum_bytes(w.concepts.patterns.at(c));
        h *= 1099511628211ull;
    }
    return h;
}
}  // namespace

void save_world(const World& world, const std::string& path) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["seed"] = world.seed;
    j["n_concepts"] = world.n_concepts;
    j["n_styles"] = world.n_styles;
    j["seq_len"] = world.seq_len;
    j["latent_hw"] = world.latent_hw;
    j["fingerprint"] = world_fingerprint(world);
    std::ofstream out(path);
    if (!out) throw Error("cannot write world archive: " + path);
    out << j.dump(2) << "\n";
}

World load_world(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("world archive not found: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("schema_version").get<int>() != 1)
        throw SchemaVersionMismatch("world archive version " + j.at("schema_version").dump());
    World w = build_world(j.at("seed").get<uint64_t>(), j.at("n_concepts").get<int>(), j.at("n_styles").get<int>(),
                          j.at("seq_len").get<int>(), j.at("latent_hw").get<int>());
    if (world_fingerprint(w) != j.at("fingerprint").get<uint64_t>())
        throw Error("world archive fingerprint mismatch (generator drift?)");
    return w;
}

}  // namespace celab
