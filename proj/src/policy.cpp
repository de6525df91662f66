#include "fhevec/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace fhevec {

namespace {

constexpr int kOpClasses = 12;

int op_class(Op op) {
    switch (op) {
        case Op::Var: return 0;
        case Op::Const: return 1;
        case Op::Neg: return 2;
        case Op::Add: return 3;
        case Op::Sub: return 4;
        case Op::Mul: return 5;
        case Op::Vec: return 6;
        case Op::VecNeg: return 7;
        case Op::VecAdd: return 8;
        case Op::VecSub: return 9;
        case Op::VecMul: return 10;
        case Op::RotL: return 11;
    }
    return 0;
}

void histogram(const Expr& e, std::unordered_set<const void*>& seen, std::vector<int>& counts) {
    if (!seen.insert(e.id()).second) return;
    counts[static_cast<size_t>(op_class(e.op()))]++;
    for (const Expr& c : e.children()) histogram(c, seen, counts);
}

int state_feature_dim(int num_rules) { return kOpClasses + 4 + num_rules + 2; }
int site_feature_dim_for(int num_rules) { return 4 + num_rules; }

}  // namespace

Policy::Policy() {
    const Catalog& cat = catalog();
    num_rules_ = static_cast<int>(cat.size());
    feature_dim_ = state_feature_dim(num_rules_);
    site_feature_dim_ = site_feature_dim_for(num_rules_);
    catalog_version_ = cat.version;
    rule_w_.assign(static_cast<size_t>(num_actions()) * static_cast<size_t>(feature_dim_), 0.0);
    site_w_.assign(static_cast<size_t>(site_feature_dim_), 0.0);
}

std::vector<double> Policy::rule_logits(const std::vector<double>& features) const {
    std::vector<double> logits(static_cast<size_t>(num_actions()), 0.0);
    for (int a = 0; a < num_actions(); ++a) {
        const double* row = rule_w_.data() + static_cast<size_t>(a) * static_cast<size_t>(feature_dim_);
        double z = 0;
        for (int f = 0; f < feature_dim_; ++f) z += row[f] * features[static_cast<size_t>(f)];
        logits[static_cast<size_t>(a)] = z;
    }
    return logits;
}

double Policy::site_score(const std::vector<double>& sf) const {
    double z = 0;
    for (int f = 0; f < site_feature_dim_; ++f) z += site_w_[static_cast<size_t>(f)] * sf[static_cast<size_t>(f)];
    return z;
}

void Policy::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw FileUnreadable("cannot write policy file: " + path);
    out << "fhevec-policy v1\n";
    out << "catalog " << catalog_version_ << "\n";
    out << "rules " << num_rules_ << "\n";
    out << "feature_dim " << feature_dim_ << "\n";
    out << "site_feature_dim " << site_feature_dim_ << "\n";
    out << std::setprecision(17);
    out << "rule_w\n";
    for (int a = 0; a < num_actions(); ++a) {
        for (int f = 0; f < feature_dim_; ++f) {
            if (f) out << ' ';
            out << rule_weight(a, f);
        }
        out << '\n';
    }
    out << "site_w\n";
    for (int f = 0; f < site_feature_dim_; ++f) {
        if (f) out << ' ';
        out << site_w_[static_cast<size_t>(f)];
    }
    out << '\n';
}

Policy Policy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileUnreadable("cannot read policy file: " + path);
    std::string line;
    auto expect_line = [&](const std::string& what) {
        if (!std::getline(in, line)) throw Error("policy file truncated before " + what);
        return line;
    };
    if (expect_line("magic") != "fhevec-policy v1") throw Error("not a fhevec policy file");
    Policy pol;
    std::string tag;
    {
        std::istringstream is(expect_line("catalog"));
        std::string version;
        is >> tag >> version;
        if (tag != "catalog" || version != pol.catalog_version_)
            throw Error("policy was trained against catalog '" + version + "', current is '" +
                        pol.catalog_version_ + "'");
    }
    auto read_int = [&](const char* key) {
        std::istringstream is(expect_line(key));
        int v = 0;
        is >> tag >> v;
        if (tag != key) throw Error(std::string("expected '") + key + "' in policy file");
        return v;
    };
    if (read_int("rules") != pol.num_rules_) throw Error("policy rule count mismatch");
    if (read_int("feature_dim") != pol.feature_dim_) throw Error("policy feature_dim mismatch");
    if (read_int("site_feature_dim") != pol.site_feature_dim_)
        throw Error("policy site_feature_dim mismatch");
    if (expect_line("rule_w header") != "rule_w") throw Error("expected rule_w section");
    for (int a = 0; a < pol.num_actions(); ++a) {
        std::istringstream is(expect_line("rule_w row"));
        for (int f = 0; f < pol.feature_dim_; ++f)
            if (!(is >> pol.rule_w_[static_cast<size_t>(a) * static_cast<size_t>(pol.feature_dim_) +
                                    static_cast<size_t>(f)]))
                throw Error("short rule_w row in policy file");
    }
    if (expect_line("site_w header") != "site_w") throw Error("expected site_w section");
    {
        std::istringstream is(expect_line("site_w row"));
        for (int f = 0; f < pol.site_feature_dim_; ++f)
            if (!(is >> pol.site_w_[static_cast<size_t>(f)])) throw Error("short site_w row");
    }
    return pol;
}

std::vector<double> state_features(const Program& p, const std::vector<int>& mask, int step_count,
                                   const EnvConfig& cfg) {
    int num_rules = static_cast<int>(catalog().size());
    std::vector<double> x;
    x.reserve(static_cast<size_t>(state_feature_dim(num_rules)));

    std::vector<int> counts(kOpClasses, 0);
    std::unordered_set<const void*> seen;
    histogram(p.body(), seen, counts);
    double total = 0;
    for (int c : counts) total += c;
    for (int c : counts) x.push_back(total > 0 ? c / total : 0.0);

    x.push_back(std::log1p(total) / 8.0);
    x.push_back(depth(p.body()) / 20.0);
    x.push_back(mult_depth(p.body()) / 10.0);
    x.push_back(std::log1p(std::max(0.0, total_cost(p, cfg.table, cfg.weights))) / 15.0);
    for (int i = 0; i < num_rules; ++i)
        x.push_back(std::min(mask[static_cast<size_t>(i)], 8) / 8.0);
    x.push_back(cfg.max_steps > 0 ? static_cast<double>(step_count) / cfg.max_steps : 0.0);
    x.push_back(1.0);  // bias
    return x;
}

std::vector<double> site_features(const Program& p, int rule_index, const Site& site,
                                  const EnvConfig& cfg) {
    const Catalog& cat = catalog();
    const Rule& rule = cat.at(static_cast<size_t>(rule_index));
    const Expr* node = &p.body();
    for (int idx : site.path) node = &node->child(static_cast<size_t>(idx));

    double cost_before = total_cost(p, cfg.table, cfg.weights);
    Expr after = apply(rule, p.body(), site);
    double cost_after = total_cost(after, cfg.table, cfg.weights);
    double r_step = cost_before > 0 ? (cost_before - cost_after) / cost_before : 0.0;

    std::vector<double> sf;
    sf.reserve(static_cast<size_t>(site_feature_dim_for(static_cast<int>(cat.size()))));
    sf.push_back(std::log1p(static_cast<double>(node->tree_size())) / 10.0);
    sf.push_back(depth(*node) / 10.0);
    sf.push_back(std::clamp(r_step, -2.0, 2.0) / 2.0);
    sf.push_back(1.0);  // bias
    for (size_t i = 0; i < cat.size(); ++i) sf.push_back(i == static_cast<size_t>(rule_index) ? 1.0 : 0.0);
    return sf;
}

std::vector<double> masked_softmax(const std::vector<double>& logits,
                                   const std::vector<uint8_t>& legal) {
    std::vector<double> probs(logits.size(), 0.0);
    double mx = -1e300;
    for (size_t i = 0; i < logits.size(); ++i)
        if (legal[i]) mx = std::max(mx, logits[i]);
    double z = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        if (legal[i]) {
            probs[i] = std::exp(logits[i] - mx);
            z += probs[i];
        }
    }
    for (double& v : probs) v /= z;
    return probs;
}

namespace {

size_t sample_index(const std::vector<double>& probs, Rng& rng) {
    double r = rng.unit();
    double acc = 0;
    size_t last_legal = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0) continue;
        last_legal = i;
        acc += probs[i];
        if (r < acc) return i;
    }
    return last_legal;
}

std::vector<uint8_t> legal_flags(const std::vector<int>& mask, int num_actions) {
    std::vector<uint8_t> legal(static_cast<size_t>(num_actions), 0);
    for (size_t i = 0; i + 1 < legal.size(); ++i) legal[i] = mask[i] > 0;
    legal.back() = 1;  // END
    return legal;
}

}  // namespace

Episode sample_episode(const Program& p, const Policy& pol, Rng& rng, const EnvConfig& cfg) {
    Env env(p, cfg);
    Episode ep;
    ep.initial_cost = env.initial_cost();
    ep.best_program = p;
    ep.best_cost = env.initial_cost();
    int steps_to_best = 0;

    while (!env.done()) {
        EpisodeStep st;
        std::vector<int> mask = env.action_mask();
        st.state_features = state_features(env.program(), mask, env.step_count(), cfg);
        st.legal = legal_flags(mask, pol.num_actions());
        std::vector<double> probs = masked_softmax(pol.rule_logits(st.state_features), st.legal);
        st.action = static_cast<int>(sample_index(probs, rng));

        if (st.action == pol.num_rules()) {
            auto [reward, done] = env.step(Action::end());
            st.reward = reward;
            ep.steps.push_back(std::move(st));
            break;
        }
        std::vector<Site> sites = match_sites(catalog().at(static_cast<size_t>(st.action)),
                                              env.program().body());
        size_t n_sites = std::min(sites.size(), static_cast<size_t>(kLocationCap));
        st.site_features.reserve(n_sites);
        for (size_t s = 0; s < n_sites; ++s)
            st.site_features.push_back(site_features(env.program(), st.action, sites[s], cfg));
        std::vector<double> scores(n_sites);
        for (size_t s = 0; s < n_sites; ++s) scores[s] = pol.site_score(st.site_features[s]);
        std::vector<double> site_probs =
            masked_softmax(scores, std::vector<uint8_t>(n_sites, 1));
        st.site = static_cast<int>(sample_index(site_probs, rng));

        auto [reward, done] = env.step(Action::rewrite(st.action, st.site));
        st.reward = reward;
        ep.steps.push_back(std::move(st));
        if (env.last_cost() < ep.best_cost) {
            ep.best_cost = env.last_cost();
            ep.best_program = env.program();
            steps_to_best = env.step_count();
        }
    }
    ep.final_program = env.program();
    ep.total_final_reward =
        env.initial_cost() > 0
            ? 100.0 * (env.initial_cost() - env.last_cost()) / env.initial_cost()
            : 0.0;
    (void)steps_to_best;
    return ep;
}

double reinforce_loss(const Policy& pol, const std::vector<Episode>& batch, const TrainConfig& cfg,
                      double baseline, std::vector<double>* grad_rule,
                      std::vector<double>* grad_site) {
    const int F = pol.feature_dim();
    const int A = pol.num_actions();
    double loss = 0;
    for (const Episode& ep : batch) {
        // Discounted returns, terminal reward included in the last step reward.
        std::vector<double> returns(ep.steps.size());
        double g = 0;
        for (size_t t = ep.steps.size(); t-- > 0;) {
            g = ep.steps[t].reward + cfg.gamma * g;
            returns[t] = g;
        }
        for (size_t t = 0; t < ep.steps.size(); ++t) {
            const EpisodeStep& st = ep.steps[t];
            double adv = returns[t] - baseline;
            std::vector<double> probs = masked_softmax(pol.rule_logits(st.state_features), st.legal);
            double p_a = std::max(probs[static_cast<size_t>(st.action)], 1e-300);
            loss -= adv * std::log(p_a);

            double entropy = 0;
            for (int a = 0; a < A; ++a)
                if (probs[static_cast<size_t>(a)] > 0)
                    entropy -= probs[static_cast<size_t>(a)] * std::log(probs[static_cast<size_t>(a)]);
            loss -= cfg.entropy_bonus * entropy;

            if (grad_rule) {
                for (int a = 0; a < A; ++a) {
                    double pa = probs[static_cast<size_t>(a)];
                    if (!st.legal[static_cast<size_t>(a)]) continue;
                    double d_logp = (a == st.action ? 1.0 : 0.0) - pa;
                    // dH/dz_a = -p_a (log p_a + H)
                    double d_ent = pa > 0 ? -pa * (std::log(pa) + entropy) : 0.0;
                    double coeff = -adv * d_logp - cfg.entropy_bonus * d_ent;
                    if (coeff == 0) continue;
                    double* row = grad_rule->data() + static_cast<size_t>(a) * static_cast<size_t>(F);
                    for (int f = 0; f < F; ++f)
                        row[f] += coeff * st.state_features[static_cast<size_t>(f)];
                }
            }

            if (st.site >= 0 && !st.site_features.empty()) {
                std::vector<double> scores(st.site_features.size());
                for (size_t s = 0; s < scores.size(); ++s)
                    scores[s] = pol.site_score(st.site_features[s]);
                std::vector<double> sp =
                    masked_softmax(scores, std::vector<uint8_t>(scores.size(), 1));
                double p_s = std::max(sp[static_cast<size_t>(st.site)], 1e-300);
                loss -= adv * std::log(p_s);
                if (grad_site) {
                    for (size_t s = 0; s < sp.size(); ++s) {
                        double d = (static_cast<int>(s) == st.site ? 1.0 : 0.0) - sp[s];
                        double coeff = -adv * d;
                        for (int f = 0; f < pol.site_feature_dim(); ++f)
                            (*grad_site)[static_cast<size_t>(f)] +=
                                coeff * st.site_features[s][static_cast<size_t>(f)];
                    }
                }
            }
        }
    }
    return loss;
}

namespace {

// PPO-style clipped surrogate on the joint (rule, site) ratio.
void ppo_update(Policy& pol, const std::vector<Episode>& batch, const TrainConfig& cfg,
                double baseline, const std::vector<std::vector<double>>& old_logps) {
    const int F = pol.feature_dim();
    for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
        std::vector<double> grad_rule(pol.rule_weights().size(), 0.0);
        std::vector<double> grad_site(pol.site_weights().size(), 0.0);
        for (size_t e = 0; e < batch.size(); ++e) {
            const Episode& ep = batch[e];
            std::vector<double> returns(ep.steps.size());
            double g = 0;
            for (size_t t = ep.steps.size(); t-- > 0;) {
                g = ep.steps[t].reward + cfg.gamma * g;
                returns[t] = g;
            }
            for (size_t t = 0; t < ep.steps.size(); ++t) {
                const EpisodeStep& st = ep.steps[t];
                double adv = returns[t] - baseline;
                std::vector<double> probs =
                    masked_softmax(pol.rule_logits(st.state_features), st.legal);
                double logp = std::log(std::max(probs[static_cast<size_t>(st.action)], 1e-300));
                std::vector<double> sp;
                if (st.site >= 0 && !st.site_features.empty()) {
                    std::vector<double> scores(st.site_features.size());
                    for (size_t s = 0; s < scores.size(); ++s)
                        scores[s] = pol.site_score(st.site_features[s]);
                    sp = masked_softmax(scores, std::vector<uint8_t>(scores.size(), 1));
                    logp += std::log(std::max(sp[static_cast<size_t>(st.site)], 1e-300));
                }
                double ratio = std::exp(logp - old_logps[e][t]);
                bool clipped = (adv >= 0 && ratio > 1 + cfg.clip_epsilon) ||
                               (adv < 0 && ratio < 1 - cfg.clip_epsilon);
                if (clipped) continue;
                double coeff_base = -adv * ratio;
                for (int a = 0; a < pol.num_actions(); ++a) {
                    if (!st.legal[static_cast<size_t>(a)]) continue;
                    double d = (a == st.action ? 1.0 : 0.0) - probs[static_cast<size_t>(a)];
                    double coeff = coeff_base * d;
                    if (coeff == 0) continue;
                    double* row = grad_rule.data() + static_cast<size_t>(a) * static_cast<size_t>(F);
                    for (int f = 0; f < F; ++f)
                        row[f] += coeff * st.state_features[static_cast<size_t>(f)];
                }
                if (!sp.empty()) {
                    for (size_t s = 0; s < sp.size(); ++s) {
                        double d = (static_cast<int>(s) == st.site ? 1.0 : 0.0) - sp[s];
                        double coeff = coeff_base * d;
                        for (int f = 0; f < pol.site_feature_dim(); ++f)
                            grad_site[static_cast<size_t>(f)] +=
                                coeff * st.site_features[s][static_cast<size_t>(f)];
                    }
                }
            }
        }
        for (size_t i = 0; i < pol.rule_weights().size(); ++i)
            pol.rule_weights()[i] -= cfg.learning_rate * grad_rule[i];
        for (size_t i = 0; i < pol.site_weights().size(); ++i)
            pol.site_weights()[i] -= cfg.learning_rate * grad_site[i];
    }
}

double joint_logp(const Policy& pol, const EpisodeStep& st) {
    std::vector<double> probs = masked_softmax(pol.rule_logits(st.state_features), st.legal);
    double logp = std::log(std::max(probs[static_cast<size_t>(st.action)], 1e-300));
    if (st.site >= 0 && !st.site_features.empty()) {
        std::vector<double> scores(st.site_features.size());
        for (size_t s = 0; s < scores.size(); ++s) scores[s] = pol.site_score(st.site_features[s]);
        std::vector<double> sp = masked_softmax(scores, std::vector<uint8_t>(scores.size(), 1));
        logp += std::log(std::max(sp[static_cast<size_t>(st.site)], 1e-300));
    }
    return logp;
}

}  // namespace

TrainResult train(const std::vector<Program>& corpus, const TrainConfig& cfg) {
    if (corpus.empty()) throw EmptyCorpus("training corpus is empty");
    TrainResult result;
    Policy& pol = result.policy;
    Rng rng(cfg.seed);
    double baseline = 0;
    bool baseline_init = false;
    int done = 0;
    while (done < cfg.episodes) {
        int batch_n = std::min(cfg.parallel_envs, cfg.episodes - done);
        std::vector<Episode> batch;
        batch.reserve(static_cast<size_t>(batch_n));
        for (int i = 0; i < batch_n; ++i) {
            const Program& p = corpus[rng.below(corpus.size())];
            batch.push_back(sample_episode(p, pol, rng, cfg.env));
            result.final_rewards.push_back(batch.back().total_final_reward);
        }
        if (cfg.use_ppo_clip) {
            std::vector<std::vector<double>> old_logps(batch.size());
            for (size_t e = 0; e < batch.size(); ++e) {
                old_logps[e].reserve(batch[e].steps.size());
                for (const EpisodeStep& st : batch[e].steps)
                    old_logps[e].push_back(joint_logp(pol, st));
            }
            ppo_update(pol, batch, cfg, baseline, old_logps);
        } else {
            std::vector<double> grad_rule(pol.rule_weights().size(), 0.0);
            std::vector<double> grad_site(pol.site_weights().size(), 0.0);
            reinforce_loss(pol, batch, cfg, baseline, &grad_rule, &grad_site);
            for (size_t i = 0; i < pol.rule_weights().size(); ++i)
                pol.rule_weights()[i] -= cfg.learning_rate * grad_rule[i];
            for (size_t i = 0; i < pol.site_weights().size(); ++i)
                pol.site_weights()[i] -= cfg.learning_rate * grad_site[i];
        }
        for (const Episode& ep : batch) {
            double g = 0;
            for (size_t t = ep.steps.size(); t-- > 0;) g = ep.steps[t].reward + cfg.gamma * g;
            if (!baseline_init) {
                baseline = g;
                baseline_init = true;
            } else {
                baseline = cfg.baseline_decay * baseline + (1 - cfg.baseline_decay) * g;
            }
        }
        int before = done;
        done += batch_n;
        if (cfg.checkpoint_every > 0 &&
            before / cfg.checkpoint_every != done / cfg.checkpoint_every)
            result.checkpoints.push_back(pol);
    }
    return result;
}

OptResult policy_optimize(const Program& p, const Policy& pol, DecodeMode mode,
                          const EnvConfig& cfg, int samples, uint64_t seed,
                          bool best_seen_guard) {
    OptResult res;
    res.initial_cost = total_cost(p, cfg.table, cfg.weights);
    if (mode == DecodeMode::Greedy) {
        Env env(p, cfg);
        Program best = p;
        double best_cost = env.initial_cost();
        size_t best_len = 0;
        while (!env.done()) {
            std::vector<int> mask = env.action_mask();
            std::vector<double> x = state_features(env.program(), mask, env.step_count(), cfg);
            std::vector<uint8_t> legal = legal_flags(mask, pol.num_actions());
            std::vector<double> probs = masked_softmax(pol.rule_logits(x), legal);
            int action = 0;
            double best_p = -1;
            for (int a = 0; a < pol.num_actions(); ++a) {
                if (probs[static_cast<size_t>(a)] > best_p) {
                    best_p = probs[static_cast<size_t>(a)];
                    action = a;
                }
            }
            if (action == pol.num_rules()) {
                env.step(Action::end());
                break;
            }
            std::vector<Site> sites =
                match_sites(catalog().at(static_cast<size_t>(action)), env.program().body());
            size_t n_sites = std::min(sites.size(), static_cast<size_t>(kLocationCap));
            int site = 0;
            double best_s = -1e300;
            for (size_t s = 0; s < n_sites; ++s) {
                double sc = pol.site_score(site_features(env.program(), action, sites[s], cfg));
                if (sc > best_s) {
                    best_s = sc;
                    site = static_cast<int>(s);
                }
            }
            env.step(Action::rewrite(action, site));
            if (env.last_cost() < best_cost) {
                best_cost = env.last_cost();
                best = env.program();
                best_len = env.trace().size();
            }
        }
        if (best_seen_guard) {
            res.program = std::move(best);
            res.final_cost = best_cost;
            res.trace.assign(env.trace().begin(), env.trace().begin() + static_cast<long>(best_len));
        } else {
            res.program = env.program();
            res.final_cost = env.last_cost();
            res.trace = env.trace();
        }
    } else {
        Rng rng(seed);
        res.program = p;
        res.final_cost = res.initial_cost;
        for (int k = 0; k < samples; ++k) {
            Episode ep = sample_episode(p, pol, rng, cfg);
            const Program& cand = best_seen_guard ? ep.best_program : ep.final_program;
            double c = best_seen_guard ? ep.best_cost : total_cost(ep.final_program, cfg.table, cfg.weights);
            if (c < res.final_cost) {
                res.final_cost = c;
                res.program = cand;
            }
        }
    }
    res.steps = static_cast<int>(res.trace.size());
    return res;
}

}  // namespace fhevec
