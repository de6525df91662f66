#include "fhevec/cost.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace fhevec {

namespace {

int depth_of(const Expr& e, bool mult_only, std::unordered_map<const void*, int>& memo) {
    auto it = memo.find(e.id());
    if (it != memo.end()) return it->second;
    int child_max = 0;
    for (const Expr& c : e.children())
        child_max = std::max(child_max, depth_of(c, mult_only, memo));
    int contrib = 0;
    switch (e.op()) {
        case Op::Var:
        case Op::Const:
        case Op::Vec: contrib = 0; break;
        case Op::Mul:
        case Op::VecMul: contrib = 1; break;
        default: contrib = mult_only ? 0 : 1; break;
    }
    int d = contrib + child_max;
    memo.emplace(e.id(), d);
    return d;
}

double class_cost(const Expr& e, const CostTable& t) {
    switch (e.op()) {
        case Op::Var:
        case Op::Const:
        case Op::Vec: return 0;
        case Op::Neg:
        case Op::Add:
        case Op::Sub: return t.scalar_add_sub;
        case Op::Mul: return t.scalar_mul;
        case Op::VecNeg:
        case Op::VecAdd:
        case Op::VecSub: return t.vec_add_sub;
        case Op::VecMul: return t.vec_mul;
        case Op::RotL: return t.rotation;
    }
    return 0;
}

// Distinct subtrees of e: pointer-memoized walk feeding a structural set, so
// both shared handles and separately built but identical trees merge.
void collect_unique(const Expr& e, std::unordered_set<const void*>& seen,
                    std::unordered_set<Expr, ExprStructHash, ExprStructEq>& uniq) {
    if (!seen.insert(e.id()).second) return;
    uniq.insert(e);
    for (const Expr& c : e.children()) collect_unique(c, seen, uniq);
}

}  // namespace

int depth(const Expr& e) {
    std::unordered_map<const void*, int> memo;
    return depth_of(e, false, memo);
}

int mult_depth(const Expr& e) {
    std::unordered_map<const void*, int> memo;
    return depth_of(e, true, memo);
}

double op_cost(const Expr& e, const CostTable& t) {
    std::unordered_set<const void*> seen;
    std::unordered_set<Expr, ExprStructHash, ExprStructEq> uniq;
    collect_unique(e, seen, uniq);
    double sum = 0;
    for (const Expr& n : uniq) sum += class_cost(n, t);
    return sum;
}

double total_cost(const Expr& e, const CostTable& t, const Weights& w) {
    return w.ops * op_cost(e, t) + w.depth * depth(e) + w.mult * mult_depth(e);
}

double total_cost(const Program& p, const CostTable& t, const Weights& w) {
    return total_cost(p.body(), t, w);
}

CostReport metrics(const Expr& e, const CostTable& t, const Weights& w) {
    CostReport r;
    std::unordered_set<const void*> seen;
    std::unordered_set<Expr, ExprStructHash, ExprStructEq> uniq;
    collect_unique(e, seen, uniq);
    for (const Expr& n : uniq) {
        r.c_ops += class_cost(n, t);
        switch (n.op()) {
            case Op::VecAdd: r.vec_add++; break;
            case Op::VecSub: r.vec_sub++; break;
            case Op::VecNeg: r.vec_neg++; break;
            case Op::RotL: r.rotations++; break;
            case Op::Neg:
            case Op::Add:
            case Op::Sub: r.scalar_ops++; break;
            default: break;
        }
        if (n.op() == Op::Mul || n.op() == Op::VecMul) {
            if (n.op() == Op::Mul) r.scalar_ops++;
            bool lc = n.child(0).has_cipher_leaf();
            bool rc = n.child(1).has_cipher_leaf();
            if (lc && rc)
                r.ct_ct_mul++;
            else if (lc != rc)
                r.ct_pt_mul++;
        }
    }
    r.depth = depth(e);
    r.mult_depth = mult_depth(e);
    r.total = w.ops * r.c_ops + w.depth * r.depth + w.mult * r.mult_depth;
    return r;
}

CostReport metrics(const Program& p, const CostTable& t, const Weights& w) {
    return metrics(p.body(), t, w);
}

}  // namespace fhevec
