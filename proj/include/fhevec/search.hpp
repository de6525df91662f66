#pragma once

#include <vector>

#include "fhevec/env.hpp"

namespace fhevec {

struct SearchConfig {
    EnvConfig env;
    int beam_width = 8;
    // Children kept per state per level, best immediate improvement first.
    int expand_cap = 64;
    // Beam stops after this many levels without improving the best seen state.
    int patience = 16;
    uint64_t seed = 0;   // random rollouts
    int samples = 16;    // random rollout episode count
    double end_prob = 0.05;
};

struct OptResult {
    Program program;
    std::vector<StepRecord> trace;  // actions leading to the returned program
    double initial_cost = 0;
    double final_cost = 0;
    int steps = 0;
};

// Applies the best immediate (rule, site) while it strictly improves cost;
// ties break on (rule index, site ordinal).
OptResult greedy_optimize(const Program& p, const SearchConfig& cfg);

// Cost-sorted beam with canon-key dedup and a best-seen guard, so exploring
// cost-increasing states never worsens the returned program.
OptResult beam_optimize(const Program& p, const SearchConfig& cfg);

// Uniform random legal rollouts; returns the best state seen across samples.
OptResult random_optimize(const Program& p, const SearchConfig& cfg);

}  // namespace fhevec
