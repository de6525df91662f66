#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fhevec/ir.hpp"
#include "fhevec/rng.hpp"

namespace fhevec {

// Equivalence contract of a rewrite: Full preserves every slot; Prefix
// preserves the first width(matched node) slots and may widen the result,
// leaving garbage in the trailing slots. Prefix rules only apply at the
// program root, where the extra width has no parent to retype.
enum class Equivalence { Full, Prefix };

struct Rule {
    std::string name;
    int index = -1;  // stable catalog position; policy weights depend on it
    Equivalence contract = Equivalence::Full;
    bool root_only = false;
    std::function<bool(const Expr&)> matches;
    std::function<Expr(const Expr&)> build;
    // Random expression containing at least one match; drives the soundness
    // property suite.
    std::function<Expr(Rng&)> sample;
};

struct Catalog {
    std::string version;
    std::vector<Rule> rules;

    const Rule& at(size_t i) const { return rules[i]; }
    size_t size() const { return rules.size(); }
    const Rule* find(const std::string& name) const;
};

// The fixed rule catalog. Immutable, shared, indices stable across runs.
const Catalog& catalog();

struct Site {
    std::vector<int> path;  // child indices from the root
    int ordinal = 0;        // dense pre-order match index for (rule, expr)
};

// Matches in pre-order: root first, then children left to right.
std::vector<Site> match_sites(const Rule& r, const Expr& e);

// Replaces the subtree at s with the rule's build output; everything off the
// path is shared untouched. Throws InvalidSite if s does not address a match.
Expr apply(const Rule& r, const Expr& e, const Site& s);

struct RuleCheckResult {
    std::string rule;
    int instances = 0;
    int failures = 0;
    std::string first_failure;
};

// Soundness property suite: per rule, `instances` random matching expressions,
// each rewritten at a random site and compared against the original with the
// slot-semantics oracle on `bindings` random inputs.
std::vector<RuleCheckResult> check_rules(int instances, int bindings, uint64_t seed,
                                         uint64_t modulus = 65537);

}  // namespace fhevec
