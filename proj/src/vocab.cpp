// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#include "celab/vocab.hpp"

#include <sstream>

namespace celab {

Vocabulary::Vocabulary() {
    add("<pad>");
    add("<bos>");
    add("<eos>");
}

int Vocabulary::add(const std::string& word) {
    auto it = index_.find(word);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(word);
    index_.emplace(word, id);
    return id;
}

int Vocabulary::id(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) throw UnknownToken(word);
    return it->second;
}

bool Vocabulary::contains(const std::string& word) const { return index_.count(word) > 0; }

const std::string& Vocabulary::word(int token_id) const { return tokens_[static_cast<size_t>(token_id)]; }

std::vector<std::string> split_words(const std::string& prompt) {
    std::vector<std::string> words;
    std::istringstream in(prompt);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

Tokenized tokenize(const std::string& prompt, const Vocabulary& vocab, int seq_len) {
    std::vector<std::string> words = split_words(prompt);
    if (static_cast<int>(words.size()) > seq_len - 2)
        throw PromptTooLong(prompt + " (" + std::to_string(words.size()) + " words, limit " +
                            std::to_string(seq_len - 2) + ")");
    Tokenized out;
    out.ids.reserve(static_cast<size_t>(seq_len));
    out.ids.push_back(Vocabulary::kBos);
    for (const std::string& w : words) out.ids.push_back(vocab.id(w));
    out.eos_pos = static_cast<int>(out.ids.size());
    out.ids.push_back(Vocabulary::kEos);
    while (static_cast<int>(out.ids.size()) < seq_len) out.ids.push_back(Vocabulary::kPad);
    return out;
}

}  // namespace celab
