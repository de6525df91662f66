#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "fhevec/errors.hpp"

namespace fhevec {

// Rotation-key budgeting. Each rotation step needs its own key; steps chosen
// for decomposition are realized as a sequence of signed power-of-two
// rotations taken from their non-adjacent-form digits. Negative components
// are right rotations and are distinct key identities.

// Raw NAF of s as signed powers of two, ascending magnitude. NonPositiveStep
// for s < 1.
std::vector<int64_t> naf_components(int64_t s);

struct KeyPlan {
    std::vector<int64_t> chi;  // requested steps, sorted unique
    int64_t slots = 0;         // n
    int beta = 0;
    std::vector<int64_t> omega;  // steps realized via their decomposition
    std::vector<int64_t> chi_f;  // steps kept whole
    std::map<int64_t, std::vector<int64_t>> gamma;  // step -> components (reduced mod n)
    std::vector<int64_t> gamma_tot;                 // union of gamma over omega
    std::vector<int64_t> keys;                      // chi_f ∪ gamma_tot
    std::map<int64_t, std::vector<int64_t>> realization;  // step -> rotations executed
};

// Greedy: while over budget, decompose the step whose NAF components shrink
// the key set the most (ties: larger step first). Identity plan when |chi|
// already fits. BudgetInfeasible when even Omega = chi does not fit.
KeyPlan plan_keys(std::vector<int64_t> chi, int64_t n, int beta);

// Same plan construction but with a caller-chosen Omega (used to encode
// reference decompositions); validates the budget.
KeyPlan plan_with_omega(std::vector<int64_t> chi, int64_t n, int beta,
                        const std::vector<int64_t>& omega);

// Rotations executed to realize step s: 1 if s has its own key, else the size
// of its component set. UnknownStep if s was never requested.
int realization_cost(const KeyPlan& plan, int64_t s);

}  // namespace fhevec
