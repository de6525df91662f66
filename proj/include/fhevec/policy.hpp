#pragma once

#include <string>
#include <vector>

#include "fhevec/env.hpp"
#include "fhevec/rng.hpp"
#include "fhevec/search.hpp"

namespace fhevec {

// Linear softmax heads over hand-crafted program features. The rule head
// scores every catalog rule plus END; the location head scores the first
// kLocationCap match sites of the chosen rule, conditioned on the rule via a
// one-hot block in the site features.
constexpr int kLocationCap = 32;

class Policy {
public:
    Policy();  // zero weights: uniform over legal actions

    int num_rules() const { return num_rules_; }
    int num_actions() const { return num_rules_ + 1; }  // + END
    int feature_dim() const { return feature_dim_; }
    int site_feature_dim() const { return site_feature_dim_; }

    double rule_weight(int action, int f) const {
        return rule_w_[static_cast<size_t>(action) * static_cast<size_t>(feature_dim_) +
                       static_cast<size_t>(f)];
    }
    std::vector<double>& rule_weights() { return rule_w_; }
    const std::vector<double>& rule_weights() const { return rule_w_; }
    std::vector<double>& site_weights() { return site_w_; }
    const std::vector<double>& site_weights() const { return site_w_; }
    const std::string& catalog_version() const { return catalog_version_; }

    std::vector<double> rule_logits(const std::vector<double>& features) const;
    double site_score(const std::vector<double>& site_features) const;

    void save(const std::string& path) const;
    static Policy load(const std::string& path);

private:
    int num_rules_;
    int feature_dim_;
    int site_feature_dim_;
    std::string catalog_version_;
    std::vector<double> rule_w_;  // (num_rules+1) x feature_dim, row-major
    std::vector<double> site_w_;  // site_feature_dim
};

struct TrainConfig {
    double learning_rate = 1e-4;
    double gamma = 0.99;
    int episodes = 2000;
    int parallel_envs = 8;  // episodes per update batch
    double baseline_decay = 0.99;
    double entropy_bonus = 0.01;
    uint64_t seed = 0;
    EnvConfig env;
    bool use_ppo_clip = false;  // PPO-style clipped surrogate instead of REINFORCE
    double clip_epsilon = 0.2;
    int ppo_epochs = 4;
    int checkpoint_every = 0;  // snapshot the policy every N episodes (0 = off)
};

struct EpisodeStep {
    std::vector<double> state_features;
    std::vector<uint8_t> legal;  // per action, END last
    int action = 0;              // action index; num_rules = END
    std::vector<std::vector<double>> site_features;  // candidates of the chosen rule
    int site = -1;
    double reward = 0;
};

struct Episode {
    std::vector<EpisodeStep> steps;
    double total_final_reward = 0;  // R_final component observed
    Program final_program;
    Program best_program;  // cheapest state visited
    double best_cost = 0;
    double initial_cost = 0;
};

// Feature extraction, exposed for the trainer and tests.
std::vector<double> state_features(const Program& p, const std::vector<int>& mask, int step_count,
                                   const EnvConfig& cfg);
std::vector<double> site_features(const Program& p, int rule_index, const Site& site,
                                  const EnvConfig& cfg);

// Masked softmax; illegal actions get probability exactly 0.
std::vector<double> masked_softmax(const std::vector<double>& logits,
                                   const std::vector<uint8_t>& legal);

Episode sample_episode(const Program& p, const Policy& pol, Rng& rng, const EnvConfig& cfg);

struct TrainResult {
    Policy policy;
    std::vector<double> final_rewards;  // R_final per episode, in order
    std::vector<Policy> checkpoints;
};

TrainResult train(const std::vector<Program>& corpus, const TrainConfig& cfg);

// REINFORCE objective over a fixed batch: L = -sum A_t log pi(a_t) - beta*H.
// Returns L and accumulates dL/dtheta; used by training and the
// finite-difference gradient check.
double reinforce_loss(const Policy& pol, const std::vector<Episode>& batch,
                      const TrainConfig& cfg, double baseline, std::vector<double>* grad_rule,
                      std::vector<double>* grad_site);

enum class DecodeMode { Greedy, SampleK };

OptResult policy_optimize(const Program& p, const Policy& pol, DecodeMode mode,
                          const EnvConfig& cfg, int samples = 16, uint64_t seed = 0,
                          bool best_seen_guard = true);

}  // namespace fhevec
