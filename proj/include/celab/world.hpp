// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "celab/rng.hpp"
#include "celab/tensor.hpp"
#include "celab/vocab.hpp"

namespace celab {

// Prompt templates with exactly one [C] slot for the concept word.
struct TemplateLibrary {
    std::vector<std::string> templates;

    size_t size() const { return templates.size(); }
    std::string instantiate(size_t idx, const std::string& word) const;
};

// Concept -> unit-norm latent pattern. Patterns are Gram-Schmidt
// orthogonalized random fields, so detector cross-talk stays far below the
// 0.6 threshold. Synonym words map to the same pattern, giving the toy
// world its "concealed prompt" class.
struct ConceptBank {
    std::vector<std::string> concepts;  // canonical words, ordered
    std::map<std::string, Tensor> patterns;
    std::map<std::string, std::vector<std::string>> synonyms;
    std::map<std::string, std::string> word_to_concept;  // canonical or synonym -> canonical

    bool knows_word(const std::string& w) const { return word_to_concept.count(w) > 0; }
    const std::string& canonical(const std::string& w) const;
    const Tensor& pattern_for_word(const std::string& w) const;
};

// Style -> orthogonal global transform of the flattened latent. Orthogonal
// maps keep patterns unit-norm and are injective on the pattern set.
struct StyleBank {
    std::vector<std::string> styles;
    std::map<std::string, Tensor> transforms;  // (HW,HW)

    bool knows(const std::string& s) const { return transforms.count(s) > 0; }
    Tensor apply(const std::string& style, const Tensor& img) const;
};

// Retain prompts "a photo of [object]" over every non-target surface word.
struct RetainSet {
    std::vector<std::string> prompts;
    std::vector<Tokenized> tokenized;
};

struct World {
    uint64_t seed = 0;
    int n_concepts = 8;
    int n_styles = 2;
    int seq_len = 8;
    int latent_hw = 8;
    Vocabulary vocab;
    ConceptBank concepts;
    StyleBank styles;
    TemplateLibrary templates;
};

// Deterministic world generation. Throws OrthogonalityBudgetExceeded when
// the pattern bank cannot satisfy the pairwise-cosine budget.
World build_world(uint64_t seed, int n_concepts, int n_styles, int seq_len = 8, int latent_hw = 8);

RetainSet build_retain_set(const World& world, const std::string& target_word);

// Pattern (styled when the prompt names a style) plus a seeded noise field
// of L2 amplitude sigma.
Tensor render_target(const std::string& prompt, const World& world, Rng& rng, double sigma = 0.05);

struct CorpusEntry {
    std::string prompt;
    Tokenized toks;
    Tensor latent;
};
using Corpus = std::vector<CorpusEntry>;

// Round-robin over every (surface word x template) combination.
Corpus build_corpus(const World& world, int n_samples, uint64_t seed);

// World archive: worlds are pure functions of their inputs, so the archive
// records the inputs plus a content fingerprint that load verifies.
void save_world(const World& world, const std::string& path);
World load_world(const std::string& path);

}  // namespace celab
