// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "celab/errors.hpp"

namespace celab {

// Closed whitespace-token vocabulary. Ids are dense; PAD/BOS/EOS are fixed
// at 0/1/2.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;

    Vocabulary();

    // Registers a word if new; returns its id either way.
    int add(const std::string& word);

    int id(const std::string& word) const;  // throws UnknownToken
    bool contains(const std::string& word) const;
    const std::string& word(int token_id) const;
    int size() const { return static_cast<int>(tokens_.size()); }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

struct Tokenized {
    std::vector<int> ids;  // length L: BOS, content..., EOS, PAD...
    int eos_pos = 0;
};

std::vector<std::string> split_words(const std::string& prompt);

// BOS-prefixed, EOS-terminated, PAD-padded id sequence of fixed length.
// Throws UnknownToken / PromptTooLong.
Tokenized tokenize(const std::string& prompt, const Vocabulary& vocab, int seq_len);

}  // namespace celab
