// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "celab/errors.hpp"

namespace celab {

// Flat key=value run configuration with a fixed, documented key table.
// Precedence: command-line override > config file > default. Unknown keys
// are rejected. The config hash covers the resolved values of every key,
// so identical effective configs hash identically regardless of source.
class RunConfig {
public:
    RunConfig();  // defaults

    struct KeyInfo {
        std::string key;
        std::string def;
        std::string doc;
    };
    static const std::vector<KeyInfo>& key_table();

    void load_file(const std::string& path);                  // throws ConfigError / MissingInput
    void set(const std::string& key, const std::string& val);  // throws ConfigError on unknown key
    void apply_override(const std::string& key_eq_value);      // "key=value"

    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::string hash() const;  // FNV-1a over sorted key=value lines, hex

    std::string dump() const;  // canonical serialization

private:
    std::map<std::string, std::string> values_;
};

}  // namespace celab
