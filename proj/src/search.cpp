#include "fhevec/search.hpp"

#include <algorithm>
#include <unordered_set>

#include "fhevec/canon.hpp"
#include "fhevec/rng.hpp"

namespace fhevec {

namespace {

// Dedup key for search states. canon_key is the contract; the hash fallback
// guards against pathological trees whose token stream would be huge.
std::string state_key(const Program& p) {
    if (p.body().tree_size() <= (1u << 16)) return canon_key(p);
    return "#" + std::to_string(p.body().hash()) + ":" + std::to_string(p.width());
}

struct Candidate {
    int rule;
    int site;
    Expr body;
    double cost;
};

// All single-step rewrites of p, cheapest first, capped.
std::vector<Candidate> expand(const Program& p, const SearchConfig& cfg) {
    const Catalog& cat = catalog();
    std::vector<Candidate> out;
    for (size_t r = 0; r < cat.size(); ++r) {
        const Rule& rule = cat.at(r);
        std::vector<Site> sites = match_sites(rule, p.body());
        for (const Site& s : sites) {
            Expr next = apply(rule, p.body(), s);
            double c = total_cost(next, cfg.env.table, cfg.env.weights);
            out.push_back({static_cast<int>(r), s.ordinal, std::move(next), c});
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Candidate& a, const Candidate& b) { return a.cost < b.cost; });
    if (static_cast<int>(out.size()) > cfg.expand_cap) out.resize(static_cast<size_t>(cfg.expand_cap));
    return out;
}

StepRecord record_for(int step, const Candidate& c, double cost_before) {
    double reward = cost_before > 0 ? (cost_before - c.cost) / cost_before : 0.0;
    return {step, catalog().at(static_cast<size_t>(c.rule)).name, c.site, reward, c.cost};
}

}  // namespace

OptResult greedy_optimize(const Program& p, const SearchConfig& cfg) {
    OptResult res;
    res.program = p;
    res.initial_cost = total_cost(p, cfg.env.table, cfg.env.weights);
    res.final_cost = res.initial_cost;

    const Catalog& cat = catalog();
    Program cur = p;
    double cur_cost = res.initial_cost;
    for (int step = 1; step <= cfg.env.max_steps; ++step) {
        int best_rule = -1, best_site = 0;
        double best_cost = cur_cost;
        Expr best_body;
        for (size_t r = 0; r < cat.size(); ++r) {
            const Rule& rule = cat.at(r);
            for (const Site& s : match_sites(rule, cur.body())) {
                Expr next = apply(rule, cur.body(), s);
                double c = total_cost(next, cfg.env.table, cfg.env.weights);
                if (c < best_cost) {  // strict: ties keep the earliest (rule, site)
                    best_cost = c;
                    best_rule = static_cast<int>(r);
                    best_site = s.ordinal;
                    best_body = std::move(next);
                }
            }
        }
        if (best_rule < 0) break;
        double reward = cur_cost > 0 ? (cur_cost - best_cost) / cur_cost : 0.0;
        cur = cur.with_body(best_body);
        cur_cost = best_cost;
        res.trace.push_back({step, cat.at(static_cast<size_t>(best_rule)).name, best_site, reward,
                             cur_cost});
    }
    res.program = cur;
    res.final_cost = cur_cost;
    res.steps = static_cast<int>(res.trace.size());
    return res;
}

OptResult beam_optimize(const Program& p, const SearchConfig& cfg) {
    struct State {
        Program prog;
        double cost;
        std::vector<StepRecord> trace;
    };

    double init_cost = total_cost(p, cfg.env.table, cfg.env.weights);
    State best{p, init_cost, {}};
    std::vector<State> frontier{best};
    std::unordered_set<std::string> visited{state_key(p)};

    int width = std::max(1, cfg.beam_width);
    int stale_levels = 0;
    for (int level = 1; level <= cfg.env.max_steps; ++level) {
        std::vector<State> pool;
        for (const State& st : frontier) {
            for (Candidate& c : expand(st.prog, cfg)) {
                Program next = st.prog.with_body(std::move(c.body));
                std::string key = state_key(next);
                if (!visited.insert(std::move(key)).second) continue;
                State child{std::move(next), c.cost, st.trace};
                child.trace.push_back(record_for(level, c, st.cost));
                pool.push_back(std::move(child));
            }
        }
        if (pool.empty()) break;
        std::stable_sort(pool.begin(), pool.end(),
                         [](const State& a, const State& b) { return a.cost < b.cost; });
        if (static_cast<int>(pool.size()) > width) pool.resize(static_cast<size_t>(width));
        if (pool.front().cost < best.cost) {
            best = pool.front();
            stale_levels = 0;
        } else if (++stale_levels >= cfg.patience) {
            break;
        }
        frontier = std::move(pool);
    }

    OptResult res;
    res.program = std::move(best.prog);
    res.trace = std::move(best.trace);
    res.initial_cost = init_cost;
    res.final_cost = best.cost;
    res.steps = static_cast<int>(res.trace.size());
    return res;
}

OptResult random_optimize(const Program& p, const SearchConfig& cfg) {
    const Catalog& cat = catalog();
    double init_cost = total_cost(p, cfg.env.table, cfg.env.weights);

    OptResult best;
    best.program = p;
    best.initial_cost = init_cost;
    best.final_cost = init_cost;

    Rng rng(cfg.seed);
    for (int ep = 0; ep < cfg.samples; ++ep) {
        Program cur = p;
        double cur_cost = init_cost;
        std::vector<StepRecord> trace;
        for (int step = 1; step <= cfg.env.max_steps; ++step) {
            if (rng.chance(cfg.end_prob)) break;
            std::vector<std::pair<int, std::vector<Site>>> options;
            size_t total = 0;
            for (size_t r = 0; r < cat.size(); ++r) {
                std::vector<Site> sites = match_sites(cat.at(r), cur.body());
                if (!sites.empty()) {
                    total += sites.size();
                    options.emplace_back(static_cast<int>(r), std::move(sites));
                }
            }
            if (total == 0) break;
            size_t pick = rng.below(total);
            for (auto& [r, sites] : options) {
                if (pick >= sites.size()) {
                    pick -= sites.size();
                    continue;
                }
                const Rule& rule = cat.at(static_cast<size_t>(r));
                Expr next = apply(rule, cur.body(), sites[pick]);
                double c = total_cost(next, cfg.env.table, cfg.env.weights);
                double reward = cur_cost > 0 ? (cur_cost - c) / cur_cost : 0.0;
                cur = cur.with_body(std::move(next));
                trace.push_back({step, rule.name, static_cast<int>(pick), reward, c});
                cur_cost = c;
                break;
            }
            if (cur_cost < best.final_cost) {
                best.program = cur;
                best.final_cost = cur_cost;
                best.trace = trace;
            }
        }
    }
    best.steps = static_cast<int>(best.trace.size());
    return best;
}

}  // namespace fhevec
