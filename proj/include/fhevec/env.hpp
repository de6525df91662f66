#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fhevec/cost.hpp"
#include "fhevec/ir.hpp"
#include "fhevec/rewrite.hpp"

namespace fhevec {

struct EnvConfig {
    CostTable table;
    Weights weights;
    int max_steps = 75;
};

// Hierarchical action: a (rule, site ordinal) rewrite or END.
struct Action {
    int rule = -1;  // catalog index; -1 is END
    int site = 0;

    bool is_end() const { return rule < 0; }
    static Action end() { return {}; }
    static Action rewrite(int rule, int site) { return {rule, site}; }
};

struct StepRecord {
    int step = 0;  // 1-based
    std::string rule;
    int site = 0;
    double reward = 0;
    double cost_after = 0;
};

// One optimization episode over a program. Rewards:
//   R_step  = (C_t - C_{t+1}) / C_t            (0 when C_t = 0)
//   R_final = 100 * (C_init - C_final) / C_init (0 when C_init = 0)
// R_final is granted on END and, summed into the step reward, when the step
// limit truncates the episode.
class Env {
public:
    Env(Program p, EnvConfig cfg);

    void reset(Program p);

    const Program& program() const { return current_; }
    const EnvConfig& config() const { return cfg_; }
    double initial_cost() const { return initial_cost_; }
    double last_cost() const { return last_cost_; }
    int step_count() const { return step_count_; }
    bool done() const { return done_; }
    const std::vector<StepRecord>& trace() const { return trace_; }

    // Match count per catalog rule; a rule with count 0 is masked. END is
    // always legal. Throws EpisodeDone after the episode ended.
    std::vector<int> action_mask() const;

    // Returns (reward, done). Throws IllegalAction / EpisodeDone.
    std::pair<double, bool> step(const Action& a);

private:
    double final_reward() const;

    EnvConfig cfg_;
    Program current_;
    double initial_cost_ = 0;
    double last_cost_ = 0;
    int step_count_ = 0;
    bool done_ = false;
    std::vector<StepRecord> trace_;
};

}  // namespace fhevec
