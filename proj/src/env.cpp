#include "fhevec/env.hpp"

namespace fhevec {

Env::Env(Program p, EnvConfig cfg) : cfg_(cfg) { reset(std::move(p)); }

void Env::reset(Program p) {
    current_ = std::move(p);
    initial_cost_ = total_cost(current_, cfg_.table, cfg_.weights);
    last_cost_ = initial_cost_;
    step_count_ = 0;
    done_ = false;
    trace_.clear();
}

std::vector<int> Env::action_mask() const {
    if (done_) throw EpisodeDone("episode is over");
    const Catalog& cat = catalog();
    std::vector<int> counts(cat.size(), 0);
    for (size_t i = 0; i < cat.size(); ++i)
        counts[i] = static_cast<int>(match_sites(cat.at(i), current_.body()).size());
    return counts;
}

double Env::final_reward() const {
    if (initial_cost_ <= 0) return 0;
    return 100.0 * (initial_cost_ - last_cost_) / initial_cost_;
}

std::pair<double, bool> Env::step(const Action& a) {
    if (done_) throw EpisodeDone("episode is over");
    if (a.is_end()) {
        done_ = true;
        double reward = final_reward();
        trace_.push_back({step_count_ + 1, "END", 0, reward, last_cost_});
        return {reward, true};
    }
    const Catalog& cat = catalog();
    if (a.rule < 0 || static_cast<size_t>(a.rule) >= cat.size())
        throw IllegalAction("rule index out of range");
    const Rule& rule = cat.at(static_cast<size_t>(a.rule));
    std::vector<Site> sites = match_sites(rule, current_.body());
    if (sites.empty()) throw IllegalAction("rule '" + rule.name + "' has no match");
    if (a.site < 0 || static_cast<size_t>(a.site) >= sites.size())
        throw IllegalAction("site ordinal out of range for rule '" + rule.name + "'");

    Expr next = apply(rule, current_.body(), sites[static_cast<size_t>(a.site)]);
    current_ = current_.with_body(std::move(next));
    double cost_before = last_cost_;
    last_cost_ = total_cost(current_, cfg_.table, cfg_.weights);
    double reward = cost_before > 0 ? (cost_before - last_cost_) / cost_before : 0.0;
    ++step_count_;
    if (step_count_ >= cfg_.max_steps) {
        done_ = true;
        reward += final_reward();
    }
    trace_.push_back({step_count_, rule.name, a.site, reward, last_cost_});
    return {reward, done_};
}

}  // namespace fhevec
