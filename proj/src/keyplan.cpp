#include "fhevec/keyplan.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace fhevec {

std::vector<int64_t> naf_components(int64_t s) {
    if (s < 1) throw NonPositiveStep("rotation step must be >= 1, got " + std::to_string(s));
    std::vector<int64_t> comps;
    int64_t pow = 1;
    while (s != 0) {
        if (s & 1) {
            int64_t digit = 2 - (s & 3);  // +1 if s ≡ 1 (mod 4), -1 if s ≡ 3
            comps.push_back(digit * pow);
            s -= digit;
        }
        s >>= 1;
        pow <<= 1;
    }
    return comps;
}

namespace {

// Rotations are cyclic in n slots, so components reduce mod n; a component
// that reduces to 0 is the identity rotation and is dropped.
std::vector<int64_t> reduced_gamma(int64_t s, int64_t n) {
    std::vector<int64_t> out;
    for (int64_t c : naf_components(s)) {
        int64_t mag = (c < 0 ? -c : c) % n;
        if (mag == 0) continue;
        out.push_back(c < 0 ? -mag : mag);
    }
    return out;
}

std::vector<int64_t> sorted_unique(std::vector<int64_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

KeyPlan assemble(std::vector<int64_t> chi, int64_t n, int beta, std::set<int64_t> omega) {
    KeyPlan plan;
    plan.chi = chi;
    plan.slots = n;
    plan.beta = beta;
    std::set<int64_t> keys, gamma_tot;
    for (int64_t s : chi) {
        plan.gamma[s] = reduced_gamma(s, n);
        if (omega.count(s)) {
            plan.omega.push_back(s);
            for (int64_t c : plan.gamma[s]) gamma_tot.insert(c);
        } else {
            plan.chi_f.push_back(s);
            keys.insert(s);
        }
    }
    keys.insert(gamma_tot.begin(), gamma_tot.end());
    plan.gamma_tot.assign(gamma_tot.begin(), gamma_tot.end());
    plan.keys.assign(keys.begin(), keys.end());
    for (int64_t s : chi)
        plan.realization[s] = omega.count(s) ? plan.gamma[s] : std::vector<int64_t>{s};
    return plan;
}

}  // namespace

KeyPlan plan_keys(std::vector<int64_t> chi, int64_t n, int beta) {
    if (n < 2) throw Error("slot count must be >= 2");
    if (beta < 1) throw BudgetInfeasible("budget must be >= 1");
    chi = sorted_unique(std::move(chi));
    for (int64_t s : chi) {
        if (s < 1) throw NonPositiveStep("rotation step must be >= 1, got " + std::to_string(s));
        if (s >= n) throw Error("rotation step " + std::to_string(s) + " outside [1, n-1]");
    }

    std::set<int64_t> chi_f(chi.begin(), chi.end());
    std::set<int64_t> omega;
    std::set<int64_t> gamma_tot;
    std::map<int64_t, std::vector<int64_t>> gamma;
    for (int64_t s : chi) gamma[s] = reduced_gamma(s, n);

    auto key_count = [&](const std::set<int64_t>& kept, const std::set<int64_t>& comps) {
        std::set<int64_t> u = kept;
        u.insert(comps.begin(), comps.end());
        return u.size();
    };

    while (key_count(chi_f, gamma_tot) > static_cast<size_t>(beta)) {
        if (chi_f.empty())
            throw BudgetInfeasible("needs " + std::to_string(gamma_tot.size()) +
                                   " keys, budget is " + std::to_string(beta));
        int64_t best_step = 0;
        size_t best_size = SIZE_MAX;
        for (int64_t s : chi_f) {
            std::set<int64_t> kept = chi_f;
            kept.erase(s);
            std::set<int64_t> comps = gamma_tot;
            comps.insert(gamma[s].begin(), gamma[s].end());
            size_t sz = key_count(kept, comps);
            if (sz < best_size || (sz == best_size && s > best_step)) {
                best_size = sz;
                best_step = s;
            }
        }
        chi_f.erase(best_step);
        omega.insert(best_step);
        gamma_tot.insert(gamma[best_step].begin(), gamma[best_step].end());
    }
    return assemble(std::move(chi), n, beta, std::move(omega));
}

KeyPlan plan_with_omega(std::vector<int64_t> chi, int64_t n, int beta,
                        const std::vector<int64_t>& omega) {
    if (n < 2) throw Error("slot count must be >= 2");
    chi = sorted_unique(std::move(chi));
    std::set<int64_t> chi_set(chi.begin(), chi.end());
    std::set<int64_t> omega_set;
    for (int64_t s : omega) {
        if (!chi_set.count(s))
            throw UnknownStep("omega step " + std::to_string(s) + " is not in chi");
        omega_set.insert(s);
    }
    KeyPlan plan = assemble(std::move(chi), n, beta, std::move(omega_set));
    if (plan.keys.size() > static_cast<size_t>(beta))
        throw BudgetInfeasible("omega yields " + std::to_string(plan.keys.size()) +
                               " keys, budget is " + std::to_string(beta));
    return plan;
}

int realization_cost(const KeyPlan& plan, int64_t s) {
    if (!plan.realization.count(s))
        throw UnknownStep("step " + std::to_string(s) + " is not in the plan");
    if (std::binary_search(plan.keys.begin(), plan.keys.end(), s)) return 1;
    return static_cast<int>(plan.gamma.at(s).size());
}

}  // namespace fhevec
