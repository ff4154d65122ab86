// Copyright (c) 2026 the celab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace celab {

// Base class for all domain errors so the CLI can map them to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownToken : Error {
    explicit UnknownToken(const std::string& word) : Error("unknown token: " + word) {}
};

struct PromptTooLong : Error {
    explicit PromptTooLong(const std::string& msg) : Error("prompt too long: " + msg) {}
};

struct NonFiniteActivation : Error {
    explicit NonFiniteActivation(const std::string& where) : Error("non-finite activation in " + where) {}
};

struct ZeroVector : Error {
    explicit ZeroVector(const std::string& where) : Error("zero vector in " + where) {}
};

struct DivergedTraining : Error {
    explicit DivergedTraining(const std::string& msg) : Error("training diverged: " + msg) {}
};

struct DegenerateH1 : Error {
    DegenerateH1() : Error("attack similarity H1 is degenerate (|H1| < 1e-6)") {}
};

struct MissingAttack : Error {
    MissingAttack() : Error("iteration is past warm-up but no attack prompt was supplied") {}
};

struct BatchTooLarge : Error {
    explicit BatchTooLarge(const std::string& msg) : Error("batch too large: " + msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error("shape mismatch: " + msg) {}
};

struct ZeroBaseline : Error {
    explicit ZeroBaseline(const std::string& msg) : Error("zero baseline: " + msg) {}
};

struct ZeroDenominator : Error {
    explicit ZeroDenominator(const std::string& msg) : Error("zero denominator: " + msg) {}
};

struct UnknownConcept : Error {
    explicit UnknownConcept(const std::string& concept_word) : Error("unknown concept: " + concept_word) {}
};

struct SchemaVersionMismatch : Error {
    explicit SchemaVersionMismatch(const std::string& msg) : Error("checkpoint schema mismatch: " + msg) {}
};

struct ConfigHashMismatch : Error {
    explicit ConfigHashMismatch(const std::string& msg) : Error("config hash mismatch: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

struct MissingInput : Error {
    explicit MissingInput(const std::string& msg) : Error("missing input: " + msg) {}
};

struct OrthogonalityBudgetExceeded : Error {
    explicit OrthogonalityBudgetExceeded(const std::string& msg)
        : Error("concept pattern orthogonality budget exceeded: " + msg) {}
};

}  // namespace celab
