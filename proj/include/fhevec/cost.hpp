#pragma once

#include "fhevec/ir.hpp"

namespace fhevec {

// Per-class operator prices. Leaves and Vec packing cost 0; Neg is priced
// with add/sub of its kind. Defaults follow the relative latencies of BFV
// operations; the toy table reproduces the worked two-slot example.
struct CostTable {
    double scalar_add_sub = 250;
    double scalar_mul = 250;
    double vec_add_sub = 1;
    double vec_mul = 100;
    double rotation = 50;

    static CostTable bfv_default() { return {}; }
    static CostTable toy() { return {0.1, 1, 0.1, 1, 1}; }
};

struct Weights {
    double ops = 1;
    double depth = 1;
    double mult = 1;
};

// Longest root-to-leaf operator count; Vec packing and leaves contribute 0.
int depth(const Expr& e);
// Same, counting Mul/VecMul nodes alone.
int mult_depth(const Expr& e);

// Sum of class prices over the distinct subtrees of e (a structurally shared
// value is computed once in the circuit, so it is priced once).
double op_cost(const Expr& e, const CostTable& t = CostTable::bfv_default());

double total_cost(const Expr& e, const CostTable& t = CostTable::bfv_default(),
                  const Weights& w = Weights{});
double total_cost(const Program& p, const CostTable& t = CostTable::bfv_default(),
                  const Weights& w = Weights{});

struct CostReport {
    double c_ops = 0;
    int depth = 0;
    int mult_depth = 0;
    double total = 0;
    // Operation counts over distinct subtrees. A (Vec)Mul is ct-ct when both
    // operands contain a cipher leaf, ct-pt when exactly one does.
    int64_t vec_add = 0;
    int64_t vec_sub = 0;
    int64_t vec_neg = 0;
    int64_t ct_ct_mul = 0;
    int64_t ct_pt_mul = 0;
    int64_t rotations = 0;
    int64_t scalar_ops = 0;
};

CostReport metrics(const Program& p, const CostTable& t = CostTable::bfv_default(),
                   const Weights& w = Weights{});
CostReport metrics(const Expr& e, const CostTable& t = CostTable::bfv_default(),
                   const Weights& w = Weights{});

}  // namespace fhevec
