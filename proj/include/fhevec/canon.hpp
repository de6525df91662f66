#pragma once

#include <string>
#include <vector>

#include "fhevec/ir.hpp"

namespace fhevec {

// Canonical token sequence: identifiers renamed v0,v1,... and constants
// c0,c1,... in first-occurrence order of a single left-to-right pass; the
// literals 0 and 1 are kept as-is (they drive identity rules). Equal constants
// share a c# token. Rotation steps are structural and stay literal.
struct TokenSeq {
    std::vector<std::string> tokens;
    bool operator==(const TokenSeq&) const = default;
};

TokenSeq canon_tokens(const Program& p);
TokenSeq canon_tokens(const Expr& e);

// Stable space-joined key; equal iff the token sequences are equal.
std::string canon_key(const Program& p);
std::string canon_key(const Expr& e);

}  // namespace fhevec
