#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fhevec/ir.hpp"

namespace fhevec {

// Reference interpreter over integer slots mod t. This is the soundness
// oracle for every rewrite: it knows nothing about rules or costs.

constexpr uint64_t kDefaultModulus = 65537;  // standard BFV plaintext prime

struct Value {
    bool vector = false;
    std::vector<uint64_t> slots;  // residues in [0, t); size 1 when scalar

    uint64_t scalar() const { return slots[0]; }
    bool operator==(const Value&) const = default;
};

struct Binding {
    std::unordered_map<std::string, int64_t> values;
    uint64_t modulus = kDefaultModulus;
};

Value eval(const Expr& e, const Binding& b);
Value eval(const Program& p, const Binding& b);  // checks all inputs are bound

struct Counterexample {
    Binding binding;
    int slot = 0;
    uint64_t lhs = 0, rhs = 0;
};

struct PrefixCheck {
    bool equivalent = true;
    std::optional<Counterexample> counterexample;
};

// Randomized prefix-equivalence: the first k slots must agree on `trials`
// uniformly sampled bindings. The rules are polynomial identities mod t, so
// by Schwartz-Zippel a handful of trials makes false positives vanishingly
// rare. Deterministic given seed.
PrefixCheck equiv_prefix(const Program& a, const Program& b, int k, int trials = 20,
                         uint64_t seed = 1, uint64_t modulus = kDefaultModulus);

}  // namespace fhevec
