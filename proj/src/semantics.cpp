#include "fhevec/semantics.hpp"

#include <algorithm>

#include "fhevec/rng.hpp"

namespace fhevec {

namespace {

uint64_t to_residue(int64_t v, uint64_t t) {
    int64_t m = v % static_cast<int64_t>(t);
    if (m < 0) m += static_cast<int64_t>(t);
    return static_cast<uint64_t>(m);
}

struct Interp {
    const Binding& b;
    uint64_t t;
    // Rewritten trees share subtrees heavily; memoize by node identity so the
    // walk is linear in distinct nodes.
    std::unordered_map<const void*, Value> memo;

    uint64_t addm(uint64_t x, uint64_t y) const { return (x + y) % t; }
    uint64_t subm(uint64_t x, uint64_t y) const { return (x + t - y) % t; }
    uint64_t mulm(uint64_t x, uint64_t y) const { return (x * y) % t; }
    uint64_t negm(uint64_t x) const { return x ? t - x : 0; }

    const Value& run(const Expr& e) {
        auto it = memo.find(e.id());
        if (it != memo.end()) return it->second;
        Value v = compute(e);
        return memo.emplace(e.id(), std::move(v)).first->second;
    }

    Value compute(const Expr& e) {
        switch (e.op()) {
            case Op::Var: {
                auto it = b.values.find(e.name());
                if (it == b.values.end()) throw UnboundVariable("unbound variable: " + e.name());
                return Value{false, {to_residue(it->second, t)}};
            }
            case Op::Const: return Value{false, {to_residue(e.value(), t)}};
            case Op::Neg: return Value{false, {negm(run(e.child(0)).scalar())}};
            case Op::Add:
                return Value{false, {addm(run(e.child(0)).scalar(), run(e.child(1)).scalar())}};
            case Op::Sub:
                return Value{false, {subm(run(e.child(0)).scalar(), run(e.child(1)).scalar())}};
            case Op::Mul:
                return Value{false, {mulm(run(e.child(0)).scalar(), run(e.child(1)).scalar())}};
            case Op::Vec: {
                Value v{true, {}};
                v.slots.reserve(e.arity());
                for (const Expr& c : e.children()) v.slots.push_back(run(c).scalar());
                return v;
            }
            case Op::VecNeg: {
                Value v = run(e.child(0));
                for (uint64_t& s : v.slots) s = negm(s);
                return v;
            }
            case Op::VecAdd:
            case Op::VecSub:
            case Op::VecMul: {
                const Value& l = run(e.child(0));
                const Value& r = run(e.child(1));
                Value v{true, std::vector<uint64_t>(l.slots.size())};
                for (size_t i = 0; i < l.slots.size(); ++i) {
                    v.slots[i] = e.op() == Op::VecAdd  ? addm(l.slots[i], r.slots[i])
                                 : e.op() == Op::VecSub ? subm(l.slots[i], r.slots[i])
                                                        : mulm(l.slots[i], r.slots[i]);
                }
                return v;
            }
            case Op::RotL: {
                const Value& c = run(e.child(0));
                size_t w = c.slots.size();
                size_t s = static_cast<size_t>(e.step()) % w;
                Value v{true, std::vector<uint64_t>(w)};
                for (size_t i = 0; i < w; ++i) v.slots[i] = c.slots[(i + s) % w];
                return v;
            }
        }
        throw Error("unreachable operator in eval");
    }
};

}  // namespace

Value eval(const Expr& e, const Binding& b) {
    Interp in{b, b.modulus, {}};
    return in.run(e);
}

Value eval(const Program& p, const Binding& b) {
    for (const InputDecl& d : p.inputs())
        if (!b.values.count(d.name)) throw UnboundVariable("unbound variable: " + d.name);
    return eval(p.body(), b);
}

PrefixCheck equiv_prefix(const Program& a, const Program& b, int k, int trials, uint64_t seed,
                         uint64_t modulus) {
    auto decl_map = [](const Program& p) {
        std::unordered_map<std::string, VarKind> m;
        for (const InputDecl& d : p.inputs()) m.emplace(d.name, d.kind);
        return m;
    };
    if (decl_map(a) != decl_map(b))
        throw IncompatibleInputs("programs do not share an input declaration");
    if (k < 1 || k > std::min(a.width(), b.width()))
        throw IncompatibleInputs("prefix width " + std::to_string(k) +
                                 " exceeds a program width");

    Rng rng(seed);
    for (int trial = 0; trial < trials; ++trial) {
        Binding bind;
        bind.modulus = modulus;
        for (const InputDecl& d : a.inputs())
            bind.values[d.name] = static_cast<int64_t>(rng.below(modulus));
        Value va = eval(a, bind);
        Value vb = eval(b, bind);
        for (int i = 0; i < k; ++i) {
            if (va.slots[i] != vb.slots[i]) {
                return {false, Counterexample{std::move(bind), i, va.slots[i], vb.slots[i]}};
            }
        }
    }
    return {};
}

}  // namespace fhevec
