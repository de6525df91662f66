#include "fhevec/rewrite.hpp"

#include <algorithm>

#include "fhevec/semantics.hpp"

namespace fhevec {

namespace {

// --- small pattern predicates -----------------------------------------------

bool is_const_val(const Expr& e, int64_t v) { return e.op() == Op::Const && e.value() == v; }

bool is_zero_vec(const Expr& e) {
    if (e.op() != Op::Vec) return false;
    for (const Expr& c : e.children())
        if (!is_const_val(c, 0)) return false;
    return true;
}

bool is_one_vec(const Expr& e) {
    if (e.op() != Op::Vec) return false;
    for (const Expr& c : e.children())
        if (!is_const_val(c, 1)) return false;
    return true;
}

bool plain_only(const Expr& e) { return !e.has_cipher_leaf(); }

Expr zero_vec(int w) { return vec(std::vector<Expr>(static_cast<size_t>(w), cst(0))); }

bool add_fits(int64_t a, int64_t b, int64_t& out) {
    return !__builtin_add_overflow(a, b, &out);
}
bool sub_fits(int64_t a, int64_t b, int64_t& out) {
    return !__builtin_sub_overflow(a, b, &out);
}
bool mul_fits(int64_t a, int64_t b, int64_t& out) {
    return !__builtin_mul_overflow(a, b, &out);
}

void flatten(const Expr& e, Op op, std::vector<Expr>& out) {
    if (e.op() == op) {
        flatten(e.child(0), op, out);
        flatten(e.child(1), op, out);
    } else {
        out.push_back(e);
    }
}

int next_pow2(int x) {
    int p = 1;
    while (p < x) p *= 2;
    return p;
}

// --- reduce family -----------------------------------------------------------
//
// A width-k Vec whose every slot is a chain of m' <= m addends (or factors)
// packs into one width k*m vector laid out addend-major: addend j of slot i
// lands in packed slot j*k+i. log2(m) rotate-and-combine stages by k*m/2,
// k*m/4, ..., k then leave slot i = combine over j, so the first k slots carry
// the original results (trailing slots are garbage: Prefix contract).

enum class ReduceMode { SumAdd, ProdAdd, ProdMul };

constexpr int kMaxPackWidth = 4096;

struct SlotChains {
    std::vector<std::vector<Expr>> per_slot;
    int max_len = 0;
};

SlotChains slot_chains(const Expr& vec_node, Op chain_op) {
    SlotChains sc;
    sc.per_slot.resize(vec_node.arity());
    for (size_t i = 0; i < vec_node.arity(); ++i) {
        flatten(vec_node.child(i), chain_op, sc.per_slot[i]);
        sc.max_len = std::max(sc.max_len, static_cast<int>(sc.per_slot[i].size()));
    }
    return sc;
}

bool reduce_matches(const Expr& e, ReduceMode mode, int m) {
    if (e.op() != Op::Vec) return false;
    int k = e.width();
    if (k * m > kMaxPackWidth) return false;
    SlotChains sc = slot_chains(e, mode == ReduceMode::ProdMul ? Op::Mul : Op::Add);
    if (sc.max_len < 2 || next_pow2(sc.max_len) != m) return false;
    if (mode == ReduceMode::ProdAdd) {
        for (const auto& chain : sc.per_slot)
            for (const Expr& a : chain)
                if (a.op() != Op::Mul) return false;
    }
    return true;
}

Expr reduce_build(const Expr& e, ReduceMode mode, int m) {
    int k = e.width();
    SlotChains sc = slot_chains(e, mode == ReduceMode::ProdMul ? Op::Mul : Op::Add);
    int w = k * m;
    Expr packed;
    if (mode == ReduceMode::ProdAdd) {
        std::vector<Expr> lhs(static_cast<size_t>(w), cst(0));
        std::vector<Expr> rhs(static_cast<size_t>(w), cst(0));
        for (int i = 0; i < k; ++i) {
            const auto& chain = sc.per_slot[static_cast<size_t>(i)];
            for (size_t j = 0; j < chain.size(); ++j) {
                lhs[j * static_cast<size_t>(k) + static_cast<size_t>(i)] = chain[j].child(0);
                rhs[j * static_cast<size_t>(k) + static_cast<size_t>(i)] = chain[j].child(1);
            }
        }
        packed = vmul(vec(std::move(lhs)), vec(std::move(rhs)));
    } else {
        Expr pad = cst(mode == ReduceMode::ProdMul ? 1 : 0);
        std::vector<Expr> slots(static_cast<size_t>(w), pad);
        for (int i = 0; i < k; ++i) {
            const auto& chain = sc.per_slot[static_cast<size_t>(i)];
            for (size_t j = 0; j < chain.size(); ++j)
                slots[j * static_cast<size_t>(k) + static_cast<size_t>(i)] = chain[j];
        }
        packed = vec(std::move(slots));
    }
    Expr acc = packed;
    for (int step = w / 2; step >= k; step /= 2) {
        Expr rotated = rot_l(acc, step);
        acc = mode == ReduceMode::ProdMul ? vmul(acc, rotated) : vadd(acc, rotated);
    }
    return acc;
}

// --- random instance generation ----------------------------------------------

const char* kCipherPool[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
const char* kPlainPool[] = {"p", "q"};

Expr rnd_leaf(Rng& rng) {
    double r = rng.unit();
    if (r < 0.15) return cst(rng.range(-3, 5));
    if (r < 0.3) return var(kPlainPool[rng.below(2)], VarKind::Plain);
    return var(kCipherPool[rng.below(8)], VarKind::Cipher);
}

Expr rnd_scalar(Rng& rng, int depth) {
    if (depth <= 0) return rnd_leaf(rng);
    switch (rng.below(5)) {
        case 0: return add(rnd_scalar(rng, depth - 1), rnd_scalar(rng, depth - 1));
        case 1: return sub(rnd_scalar(rng, depth - 1), rnd_scalar(rng, depth - 1));
        case 2: return mul(rnd_scalar(rng, depth - 1), rnd_scalar(rng, depth - 1));
        case 3: return neg(rnd_scalar(rng, depth - 1));
        default: return rnd_leaf(rng);
    }
}

Expr rnd_scalar_not(Rng& rng, int depth, Op avoid_top) {
    for (;;) {
        Expr e = rnd_scalar(rng, depth);
        if (e.op() != avoid_top) return e;
    }
}

Expr rnd_plain_scalar(Rng& rng, int depth) {
    if (depth <= 0 || rng.chance(0.5))
        return rng.chance(0.4) ? cst(rng.range(-3, 5))
                               : var(kPlainPool[rng.below(2)], VarKind::Plain);
    return rng.chance(0.5) ? add(rnd_plain_scalar(rng, depth - 1), rnd_plain_scalar(rng, depth - 1))
                           : mul(rnd_plain_scalar(rng, depth - 1),
                                 rnd_plain_scalar(rng, depth - 1));
}

Expr rnd_vector(Rng& rng, int width, int depth) {
    if (depth <= 0) {
        std::vector<Expr> slots;
        slots.reserve(static_cast<size_t>(width));
        for (int i = 0; i < width; ++i) slots.push_back(rnd_scalar(rng, static_cast<int>(rng.below(3))));
        return vec(std::move(slots));
    }
    switch (rng.below(5)) {
        case 0: return vadd(rnd_vector(rng, width, depth - 1), rnd_vector(rng, width, depth - 1));
        case 1: return vsub(rnd_vector(rng, width, depth - 1), rnd_vector(rng, width, depth - 1));
        case 2: return vmul(rnd_vector(rng, width, depth - 1), rnd_vector(rng, width, depth - 1));
        case 3: return rot_l(rnd_vector(rng, width, depth - 1), rng.range(0, width - 1));
        default: return rnd_vector(rng, width, 0);
    }
}

// Plants a scalar instance somewhere inside a vector-kinded body.
Expr embed_scalar(Rng& rng, Expr s) {
    if (rng.chance(0.3)) s = rng.chance(0.5) ? add(std::move(s), rnd_scalar(rng, 1))
                                             : mul(rnd_scalar(rng, 1), std::move(s));
    switch (rng.below(4)) {
        case 0: return vec({std::move(s)});
        case 1: return vec({std::move(s), rnd_scalar(rng, 1)});
        case 2: return vec({rnd_scalar(rng, 1), std::move(s)});
        default: {
            Expr v = vec({std::move(s), rnd_scalar(rng, 1)});
            return rng.chance(0.5) ? vadd(v, rnd_vector(rng, 2, 1)) : rot_l(v, 1);
        }
    }
}

// Wraps a vector instance in a random enclosing vector context.
Expr embed_vector(Rng& rng, Expr v) {
    int w = v.width();
    switch (rng.below(5)) {
        case 0: return v;
        case 1: return vadd(std::move(v), rnd_vector(rng, w, 1));
        case 2: return vmul(rnd_vector(rng, w, 1), std::move(v));
        case 3: return rot_l(std::move(v), rng.range(0, w - 1));
        default: return vneg(std::move(v));
    }
}

// --- catalog construction -----------------------------------------------------

using Matcher = std::function<bool(const Expr&)>;
using Builder = std::function<Expr(const Expr&)>;
using Sampler = std::function<Expr(Rng&)>;

struct CatalogBuilder {
    Catalog cat;

    void rule(std::string name, Matcher m, Builder b, Sampler s,
              Equivalence eq = Equivalence::Full, bool root_only = false) {
        Rule r;
        r.name = std::move(name);
        r.index = static_cast<int>(cat.rules.size());
        r.contract = eq;
        r.root_only = root_only;
        r.matches = std::move(m);
        r.build = std::move(b);
        r.sample = std::move(s);
        cat.rules.push_back(std::move(r));
    }
};

Op scalar_op_of(char tag) {
    switch (tag) {
        case '+': return Op::Add;
        case '-': return Op::Sub;
        case '*': return Op::Mul;
        default: return Op::Neg;
    }
}

Expr build_scalar(Op op, Expr l, Expr r) {
    switch (op) {
        case Op::Add: return add(std::move(l), std::move(r));
        case Op::Sub: return sub(std::move(l), std::move(r));
        case Op::Mul: return mul(std::move(l), std::move(r));
        default: throw Error("not a binary scalar op");
    }
}

Expr build_vector_op(Op op, Expr l, Expr r) {
    switch (op) {
        case Op::VecAdd: return vadd(std::move(l), std::move(r));
        case Op::VecSub: return vsub(std::move(l), std::move(r));
        case Op::VecMul: return vmul(std::move(l), std::move(r));
        default: throw Error("not a binary vector op");
    }
}

Op vec_op_for(Op scalar) {
    switch (scalar) {
        case Op::Add: return Op::VecAdd;
        case Op::Sub: return Op::VecSub;
        case Op::Mul: return Op::VecMul;
        default: return Op::VecNeg;
    }
}

Expr chain_left(std::vector<Expr> xs, Op op) {
    Expr acc = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) acc = build_scalar(op, std::move(acc), xs[i]);
    return acc;
}

Expr rnd_tree_over(Rng& rng, std::vector<Expr> xs, Op op) {
    while (xs.size() > 1) {
        size_t i = rng.below(xs.size() - 1);
        Expr combined = build_scalar(op, xs[i], xs[i + 1]);
        xs.erase(xs.begin() + static_cast<long>(i), xs.begin() + static_cast<long>(i) + 2);
        xs.insert(xs.begin() + static_cast<long>(i), std::move(combined));
    }
    return xs[0];
}

void add_constant_folding(CatalogBuilder& cb) {
    auto fold2 = [](Op op, bool (*fits)(int64_t, int64_t, int64_t&)) {
        return std::pair<Matcher, Builder>{
            [op, fits](const Expr& e) {
                int64_t out;
                return e.op() == op && e.child(0).op() == Op::Const &&
                       e.child(1).op() == Op::Const &&
                       fits(e.child(0).value(), e.child(1).value(), out);
            },
            [op, fits](const Expr& e) {
                int64_t out = 0;
                fits(e.child(0).value(), e.child(1).value(), out);
                return cst(out);
            }};
    };
    auto sample2 = [](Op op) {
        return [op](Rng& rng) {
            Expr folded = build_scalar(op, cst(rng.range(-9, 9)), cst(rng.range(-9, 9)));
            return embed_scalar(rng, std::move(folded));
        };
    };
    auto [ma, ba] = fold2(Op::Add, add_fits);
    cb.rule("fold-add", ma, ba, sample2(Op::Add));
    auto [ms, bs] = fold2(Op::Sub, sub_fits);
    cb.rule("fold-sub", ms, bs, sample2(Op::Sub));
    auto [mm, bm] = fold2(Op::Mul, mul_fits);
    cb.rule("fold-mul", mm, bm, sample2(Op::Mul));
    cb.rule(
        "fold-neg",
        [](const Expr& e) {
            return e.op() == Op::Neg && e.child(0).op() == Op::Const &&
                   e.child(0).value() != INT64_MIN;
        },
        [](const Expr& e) { return cst(-e.child(0).value()); },
        [](Rng& rng) { return embed_scalar(rng, neg(cst(rng.range(-9, 9)))); });
}

void add_scalar_identities(CatalogBuilder& cb) {
    struct Pat {
        const char* name;
        Op op;
        int side;      // operand index holding the identity constant, -1 = special
        int64_t unit;  // the constant
        bool to_zero;  // result collapses to 0
    };
    const Pat pats[] = {
        {"add-zero", Op::Add, 1, 0, false}, {"zero-add", Op::Add, 0, 0, false},
        {"mul-one", Op::Mul, 1, 1, false},  {"one-mul", Op::Mul, 0, 1, false},
        {"mul-zero", Op::Mul, 1, 0, true},  {"zero-mul", Op::Mul, 0, 0, true},
        {"sub-zero", Op::Sub, 1, 0, false},
    };
    for (const Pat& p : pats) {
        cb.rule(
            p.name,
            [p](const Expr& e) { return e.op() == p.op && is_const_val(e.child(p.side), p.unit); },
            [p](const Expr& e) { return p.to_zero ? cst(0) : e.child(1 - p.side); },
            [p](Rng& rng) {
                Expr x = rnd_scalar(rng, static_cast<int>(rng.below(3)));
                Expr inst = p.side == 1 ? build_scalar(p.op, std::move(x), cst(p.unit))
                                        : build_scalar(p.op, cst(p.unit), std::move(x));
                return embed_scalar(rng, std::move(inst));
            });
    }
    cb.rule(
        "sub-self",
        [](const Expr& e) {
            return e.op() == Op::Sub && structurally_equal(e.child(0), e.child(1));
        },
        [](const Expr&) { return cst(0); },
        [](Rng& rng) {
            Expr x = rnd_scalar(rng, static_cast<int>(rng.below(3)));
            return embed_scalar(rng, sub(x, x));
        });
    cb.rule(
        "neg-neg",
        [](const Expr& e) { return e.op() == Op::Neg && e.child(0).op() == Op::Neg; },
        [](const Expr& e) { return e.child(0).child(0); },
        [](Rng& rng) { return embed_scalar(rng, neg(neg(rnd_scalar(rng, 1)))); });
    // (* p (* q x)) with p,q plaintext-only regroups so folding can merge them.
    cb.rule(
        "pt-consolidate",
        [](const Expr& e) {
            return e.op() == Op::Mul && plain_only(e.child(0)) && e.child(1).op() == Op::Mul &&
                   plain_only(e.child(1).child(0));
        },
        [](const Expr& e) {
            return mul(mul(e.child(0), e.child(1).child(0)), e.child(1).child(1));
        },
        [](Rng& rng) {
            Expr inst = mul(rnd_plain_scalar(rng, 1),
                            mul(rnd_plain_scalar(rng, 1), rnd_scalar(rng, 1)));
            return embed_scalar(rng, std::move(inst));
        });
}

void add_vector_identities(CatalogBuilder& cb) {
    struct Pat {
        const char* name;
        Op op;
        int side;
        bool ones;     // identity vector is all-1 (else all-0)
        bool to_zero;  // result is the zero vector
    };
    const Pat pats[] = {
        {"vecadd-zero", Op::VecAdd, 1, false, false}, {"zero-vecadd", Op::VecAdd, 0, false, false},
        {"vecmul-one", Op::VecMul, 1, true, false},   {"one-vecmul", Op::VecMul, 0, true, false},
        {"vecmul-zero", Op::VecMul, 1, false, true},  {"zero-vecmul", Op::VecMul, 0, false, true},
        {"vecsub-zero", Op::VecSub, 1, false, false},
    };
    for (const Pat& p : pats) {
        cb.rule(
            p.name,
            [p](const Expr& e) {
                if (e.op() != p.op) return false;
                const Expr& unit = e.child(p.side);
                return p.ones ? is_one_vec(unit) : is_zero_vec(unit);
            },
            [p](const Expr& e) { return p.to_zero ? e.child(p.side) : e.child(1 - p.side); },
            [p](Rng& rng) {
                int w = static_cast<int>(rng.range(1, 4));
                Expr x = rnd_vector(rng, w, static_cast<int>(rng.below(2)));
                Expr unit = p.ones ? vec(std::vector<Expr>(static_cast<size_t>(w), cst(1)))
                                   : zero_vec(w);
                Expr inst = p.side == 1 ? build_vector_op(p.op, std::move(x), std::move(unit))
                                        : build_vector_op(p.op, std::move(unit), std::move(x));
                return embed_vector(rng, std::move(inst));
            });
    }
    cb.rule(
        "vecsub-self",
        [](const Expr& e) {
            return e.op() == Op::VecSub && structurally_equal(e.child(0), e.child(1));
        },
        [](const Expr& e) { return zero_vec(e.width()); },
        [](Rng& rng) {
            Expr x = rnd_vector(rng, static_cast<int>(rng.range(1, 4)), 1);
            return embed_vector(rng, vsub(x, x));
        });
    cb.rule(
        "vecneg-neg",
        [](const Expr& e) { return e.op() == Op::VecNeg && e.child(0).op() == Op::VecNeg; },
        [](const Expr& e) { return e.child(0).child(0); },
        [](Rng& rng) {
            return embed_vector(rng, vneg(vneg(rnd_vector(rng, static_cast<int>(rng.range(1, 4)), 1))));
        });
}

void add_rotation_simplification(CatalogBuilder& cb) {
    cb.rule(
        "rot-zero", [](const Expr& e) { return e.op() == Op::RotL && e.step() == 0; },
        [](const Expr& e) { return e.child(0); },
        [](Rng& rng) {
            return embed_vector(rng, rot_l(rnd_vector(rng, static_cast<int>(rng.range(1, 4)), 1), 0));
        });
    cb.rule(
        "rot-fuse",
        [](const Expr& e) { return e.op() == Op::RotL && e.child(0).op() == Op::RotL; },
        [](const Expr& e) {
            return rot_l(e.child(0).child(0), e.step() + e.child(0).step());
        },
        [](Rng& rng) {
            int w = static_cast<int>(rng.range(2, 6));
            Expr inner = rot_l(rnd_vector(rng, w, 1), rng.range(0, w - 1));
            return embed_vector(rng, rot_l(std::move(inner), rng.range(0, w - 1)));
        });
}

void add_iso_vectorize(CatalogBuilder& cb) {
    const char tags[] = {'+', '-', '*'};
    const char* names[] = {"add", "sub", "mul"};
    for (int t = 0; t < 3; ++t) {
        for (int w = 2; w <= 8; ++w) {
            Op sop = scalar_op_of(tags[t]);
            cb.rule(
                "iso-vectorize-" + std::string(names[t]) + "-" + std::to_string(w),
                [sop, w](const Expr& e) {
                    if (e.op() != Op::Vec || e.width() != w) return false;
                    for (const Expr& c : e.children())
                        if (c.op() != sop) return false;
                    return true;
                },
                [sop](const Expr& e) {
                    std::vector<Expr> l, r;
                    l.reserve(e.arity());
                    r.reserve(e.arity());
                    for (const Expr& c : e.children()) {
                        l.push_back(c.child(0));
                        r.push_back(c.child(1));
                    }
                    return build_vector_op(vec_op_for(sop), vec(std::move(l)), vec(std::move(r)));
                },
                [sop, w](Rng& rng) {
                    std::vector<Expr> slots;
                    for (int i = 0; i < w; ++i)
                        slots.push_back(build_scalar(sop, rnd_scalar(rng, 1), rnd_scalar(rng, 1)));
                    return embed_vector(rng, vec(std::move(slots)));
                });
        }
    }
    for (int w = 2; w <= 8; ++w) {
        cb.rule(
            "iso-vectorize-neg-" + std::to_string(w),
            [w](const Expr& e) {
                if (e.op() != Op::Vec || e.width() != w) return false;
                for (const Expr& c : e.children())
                    if (c.op() != Op::Neg) return false;
                return true;
            },
            [](const Expr& e) {
                std::vector<Expr> inner;
                inner.reserve(e.arity());
                for (const Expr& c : e.children()) inner.push_back(c.child(0));
                return vneg(vec(std::move(inner)));
            },
            [w](Rng& rng) {
                std::vector<Expr> slots;
                for (int i = 0; i < w; ++i) slots.push_back(neg(rnd_scalar(rng, 1)));
                return embed_vector(rng, vec(std::move(slots)));
            });
    }
}

void add_non_iso_vectorize(CatalogBuilder& cb) {
    const char tags[] = {'+', '-', '*'};
    const char* names[] = {"add", "sub", "mul"};
    for (int t = 0; t < 3; ++t) {
        Op sop = scalar_op_of(tags[t]);
        // Matching slots contribute their operands; other slots ride in the
        // first operand, the second padded with the op identity.
        cb.rule(
            std::string("non-iso-vectorize-") + names[t],
            [sop](const Expr& e) {
                if (e.op() != Op::Vec || e.width() < 2) return false;
                int hits = 0;
                for (const Expr& c : e.children()) hits += c.op() == sop;
                return hits >= 2;
            },
            [sop](const Expr& e) {
                Expr unit = cst(sop == Op::Mul ? 1 : 0);
                std::vector<Expr> l, r;
                l.reserve(e.arity());
                r.reserve(e.arity());
                for (const Expr& c : e.children()) {
                    if (c.op() == sop) {
                        l.push_back(c.child(0));
                        r.push_back(c.child(1));
                    } else {
                        l.push_back(c);
                        r.push_back(unit);
                    }
                }
                return build_vector_op(vec_op_for(sop), vec(std::move(l)), vec(std::move(r)));
            },
            [sop](Rng& rng) {
                int w = static_cast<int>(rng.range(2, 6));
                int hits = static_cast<int>(rng.range(2, w));
                std::vector<Expr> slots;
                for (int i = 0; i < w; ++i) {
                    if (i < hits)
                        slots.push_back(build_scalar(sop, rnd_scalar(rng, 1), rnd_scalar(rng, 1)));
                    else
                        slots.push_back(rnd_scalar_not(rng, static_cast<int>(rng.below(3)), sop));
                }
                // Shuffle so non-matching slots are not always trailing.
                for (size_t i = slots.size(); i > 1; --i)
                    std::swap(slots[i - 1], slots[rng.below(i)]);
                return embed_vector(rng, vec(std::move(slots)));
            });
    }
}

Sampler reduce_sampler(ReduceMode mode, int m) {
    return [mode, m](Rng& rng) {
        int k = static_cast<int>(rng.range(1, 2));
        Op chain_op = mode == ReduceMode::ProdMul ? Op::Mul : Op::Add;
        std::vector<Expr> slots;
        for (int i = 0; i < k; ++i) {
            // First slot always realizes the target chain length class.
            int len = i == 0 || rng.chance(0.8) ? static_cast<int>(rng.range(m / 2 + 1, m))
                                                : 1;
            std::vector<Expr> parts;
            for (int j = 0; j < len; ++j) {
                switch (mode) {
                    case ReduceMode::ProdAdd:
                        parts.push_back(mul(rnd_scalar(rng, 1), rnd_scalar(rng, 1)));
                        break;
                    case ReduceMode::SumAdd:
                        parts.push_back(rnd_scalar_not(rng, 1, Op::Add));
                        break;
                    case ReduceMode::ProdMul:
                        parts.push_back(rnd_scalar_not(rng, 1, Op::Mul));
                        break;
                }
            }
            slots.push_back(rnd_tree_over(rng, std::move(parts), chain_op));
        }
        return vec(std::move(slots));
    };
}

void add_reduces(CatalogBuilder& cb) {
    for (int m : {2, 4, 8, 16}) {
        cb.rule(
            "rotation-reduce-" + std::to_string(m),
            [m](const Expr& e) { return reduce_matches(e, ReduceMode::ProdAdd, m); },
            [m](const Expr& e) { return reduce_build(e, ReduceMode::ProdAdd, m); },
            reduce_sampler(ReduceMode::ProdAdd, m), Equivalence::Prefix, /*root_only=*/true);
    }
    for (int m : {2, 4, 8, 16}) {
        cb.rule(
            "sum-reduce-" + std::to_string(m),
            [m](const Expr& e) { return reduce_matches(e, ReduceMode::SumAdd, m); },
            [m](const Expr& e) { return reduce_build(e, ReduceMode::SumAdd, m); },
            reduce_sampler(ReduceMode::SumAdd, m), Equivalence::Prefix, /*root_only=*/true);
    }
    for (int m : {2, 4, 8, 16}) {
        cb.rule(
            "prod-reduce-" + std::to_string(m),
            [m](const Expr& e) { return reduce_matches(e, ReduceMode::ProdMul, m); },
            [m](const Expr& e) { return reduce_build(e, ReduceMode::ProdMul, m); },
            reduce_sampler(ReduceMode::ProdMul, m), Equivalence::Prefix, /*root_only=*/true);
    }
}

void add_factor_distribute(CatalogBuilder& cb) {
    cb.rule(
        "comm-factor",
        [](const Expr& e) {
            return e.op() == Op::Add && e.child(0).op() == Op::Mul && e.child(1).op() == Op::Mul &&
                   structurally_equal(e.child(0).child(0), e.child(1).child(0));
        },
        [](const Expr& e) {
            return mul(e.child(0).child(0), add(e.child(0).child(1), e.child(1).child(1)));
        },
        [](Rng& rng) {
            Expr x = rnd_scalar(rng, 1);
            Expr inst = add(mul(x, rnd_scalar(rng, 1)), mul(x, rnd_scalar(rng, 1)));
            return embed_scalar(rng, std::move(inst));
        });
    cb.rule(
        "comm-factor-right",
        [](const Expr& e) {
            return e.op() == Op::Add && e.child(0).op() == Op::Mul && e.child(1).op() == Op::Mul &&
                   structurally_equal(e.child(0).child(1), e.child(1).child(1));
        },
        [](const Expr& e) {
            return mul(add(e.child(0).child(0), e.child(1).child(0)), e.child(0).child(1));
        },
        [](Rng& rng) {
            Expr x = rnd_scalar(rng, 1);
            Expr inst = add(mul(rnd_scalar(rng, 1), x), mul(rnd_scalar(rng, 1), x));
            return embed_scalar(rng, std::move(inst));
        });
    cb.rule(
        "distribute-left",
        [](const Expr& e) { return e.op() == Op::Mul && e.child(1).op() == Op::Add; },
        [](const Expr& e) {
            return add(mul(e.child(0), e.child(1).child(0)), mul(e.child(0), e.child(1).child(1)));
        },
        [](Rng& rng) {
            Expr inst = mul(rnd_scalar(rng, 1), add(rnd_scalar(rng, 1), rnd_scalar(rng, 1)));
            return embed_scalar(rng, std::move(inst));
        });
    cb.rule(
        "distribute-right",
        [](const Expr& e) { return e.op() == Op::Mul && e.child(0).op() == Op::Add; },
        [](const Expr& e) {
            return add(mul(e.child(0).child(0), e.child(1)), mul(e.child(0).child(1), e.child(1)));
        },
        [](Rng& rng) {
            Expr inst = mul(add(rnd_scalar(rng, 1), rnd_scalar(rng, 1)), rnd_scalar(rng, 1));
            return embed_scalar(rng, std::move(inst));
        });

    cb.rule(
        "vec-comm-factor",
        [](const Expr& e) {
            return e.op() == Op::VecAdd && e.child(0).op() == Op::VecMul &&
                   e.child(1).op() == Op::VecMul &&
                   structurally_equal(e.child(0).child(0), e.child(1).child(0));
        },
        [](const Expr& e) {
            return vmul(e.child(0).child(0), vadd(e.child(0).child(1), e.child(1).child(1)));
        },
        [](Rng& rng) {
            int w = static_cast<int>(rng.range(1, 4));
            Expr x = rnd_vector(rng, w, 1);
            return embed_vector(rng, vadd(vmul(x, rnd_vector(rng, w, 1)),
                                          vmul(x, rnd_vector(rng, w, 1))));
        });
    cb.rule(
        "vec-comm-factor-right",
        [](const Expr& e) {
            return e.op() == Op::VecAdd && e.child(0).op() == Op::VecMul &&
                   e.child(1).op() == Op::VecMul &&
                   structurally_equal(e.child(0).child(1), e.child(1).child(1));
        },
        [](const Expr& e) {
            return vmul(vadd(e.child(0).child(0), e.child(1).child(0)), e.child(0).child(1));
        },
        [](Rng& rng) {
            int w = static_cast<int>(rng.range(1, 4));
            Expr x = rnd_vector(rng, w, 1);
            return embed_vector(rng, vadd(vmul(rnd_vector(rng, w, 1), x),
                                          vmul(rnd_vector(rng, w, 1), x)));
        });
    cb.rule(
        "vec-distribute-left",
        [](const Expr& e) { return e.op() == Op::VecMul && e.child(1).op() == Op::VecAdd; },
        [](const Expr& e) {
            return vadd(vmul(e.child(0), e.child(1).child(0)),
                        vmul(e.child(0), e.child(1).child(1)));
        },
        [](Rng& rng) {
            int w = static_cast<int>(rng.range(1, 4));
            return embed_vector(
                rng, vmul(rnd_vector(rng, w, 1), vadd(rnd_vector(rng, w, 1), rnd_vector(rng, w, 1))));
        });
    cb.rule(
        "vec-distribute-right",
        [](const Expr& e) { return e.op() == Op::VecMul && e.child(0).op() == Op::VecAdd; },
        [](const Expr& e) {
            return vadd(vmul(e.child(0).child(0), e.child(1)),
                        vmul(e.child(0).child(1), e.child(1)));
        },
        [](Rng& rng) {
            int w = static_cast<int>(rng.range(1, 4));
            return embed_vector(
                rng, vmul(vadd(rnd_vector(rng, w, 1), rnd_vector(rng, w, 1)), rnd_vector(rng, w, 1)));
        });
}

void add_commutativity_associativity(CatalogBuilder& cb) {
    struct CommPat {
        const char* name;
        Op op;
        bool vector;
    };
    const CommPat comms[] = {{"add-commutativity", Op::Add, false},
                             {"mul-commutativity", Op::Mul, false},
                             {"vecadd-commutativity", Op::VecAdd, true},
                             {"vecmul-commutativity", Op::VecMul, true}};
    for (const CommPat& p : comms) {
        cb.rule(
            p.name, [p](const Expr& e) { return e.op() == p.op; },
            [p](const Expr& e) {
                return p.vector ? build_vector_op(p.op, e.child(1), e.child(0))
                                : build_scalar(p.op, e.child(1), e.child(0));
            },
            [p](Rng& rng) {
                if (p.vector) {
                    int w = static_cast<int>(rng.range(1, 4));
                    return embed_vector(
                        rng, build_vector_op(p.op, rnd_vector(rng, w, 1), rnd_vector(rng, w, 1)));
                }
                return embed_scalar(rng,
                                    build_scalar(p.op, rnd_scalar(rng, 1), rnd_scalar(rng, 1)));
            });
    }
    struct AssocPat {
        const char* name;
        Op op;
        bool vector;
        bool to_left;  // x (y z) -> (x y) z
    };
    const AssocPat assocs[] = {
        {"add-assoc-left", Op::Add, false, true},      {"add-assoc-right", Op::Add, false, false},
        {"mul-assoc-left", Op::Mul, false, true},      {"mul-assoc-right", Op::Mul, false, false},
        {"vecadd-assoc-left", Op::VecAdd, true, true}, {"vecadd-assoc-right", Op::VecAdd, true, false},
        {"vecmul-assoc-left", Op::VecMul, true, true}, {"vecmul-assoc-right", Op::VecMul, true, false},
    };
    for (const AssocPat& p : assocs) {
        cb.rule(
            p.name,
            [p](const Expr& e) {
                return e.op() == p.op && e.child(p.to_left ? 1 : 0).op() == p.op;
            },
            [p](const Expr& e) {
                auto mk = [&](Expr a, Expr b) {
                    return p.vector ? build_vector_op(p.op, std::move(a), std::move(b))
                                    : build_scalar(p.op, std::move(a), std::move(b));
                };
                if (p.to_left) {
                    const Expr& yz = e.child(1);
                    return mk(mk(e.child(0), yz.child(0)), yz.child(1));
                }
                const Expr& xy = e.child(0);
                return mk(xy.child(0), mk(xy.child(1), e.child(1)));
            },
            [p](Rng& rng) {
                auto one = [&](int w) {
                    return p.vector ? rnd_vector(rng, w, 1) : rnd_scalar(rng, 1);
                };
                int w = p.vector ? static_cast<int>(rng.range(1, 4)) : 0;
                auto mk = [&](Expr a, Expr b) {
                    return p.vector ? build_vector_op(p.op, std::move(a), std::move(b))
                                    : build_scalar(p.op, std::move(a), std::move(b));
                };
                Expr inst = p.to_left ? mk(one(w), mk(one(w), one(w)))
                                      : mk(mk(one(w), one(w)), one(w));
                return p.vector ? embed_vector(rng, std::move(inst))
                                : embed_scalar(rng, std::move(inst));
            });
    }
}

void add_balancing(CatalogBuilder& cb) {
    struct Pat {
        const char* name;
        Op op;
        bool vector;
        bool left_chain;  // (((a b) c) d) vs (a (b (c d)))
    };
    const Pat pats[] = {
        {"balance-add-left", Op::Add, false, true},
        {"balance-add-right", Op::Add, false, false},
        {"balance-mul-left", Op::Mul, false, true},
        {"balance-mul-right", Op::Mul, false, false},
        {"balance-vecadd-left", Op::VecAdd, true, true},
        {"balance-vecadd-right", Op::VecAdd, true, false},
        {"balance-vecmul-left", Op::VecMul, true, true},
        {"balance-vecmul-right", Op::VecMul, true, false},
    };
    for (const Pat& p : pats) {
        cb.rule(
            p.name,
            [p](const Expr& e) {
                if (e.op() != p.op) return false;
                const Expr& c1 = e.child(p.left_chain ? 0 : 1);
                if (c1.op() != p.op) return false;
                const Expr& c2 = c1.child(p.left_chain ? 0 : 1);
                return c2.op() == p.op;
            },
            [p](const Expr& e) {
                // Extract the 4-element chain a,b,c,d then pair as (a b)(c d).
                Expr a, b, c, d;
                if (p.left_chain) {
                    const Expr& inner2 = e.child(0);
                    const Expr& inner1 = inner2.child(0);
                    a = inner1.child(0);
                    b = inner1.child(1);
                    c = inner2.child(1);
                    d = e.child(1);
                } else {
                    const Expr& inner2 = e.child(1);
                    const Expr& inner1 = inner2.child(1);
                    a = e.child(0);
                    b = inner2.child(0);
                    c = inner1.child(0);
                    d = inner1.child(1);
                }
                auto mk = [&](Expr l, Expr r) {
                    return p.vector ? build_vector_op(p.op, std::move(l), std::move(r))
                                    : build_scalar(p.op, std::move(l), std::move(r));
                };
                return mk(mk(std::move(a), std::move(b)), mk(std::move(c), std::move(d)));
            },
            [p](Rng& rng) {
                auto one = [&](int w) {
                    return p.vector ? rnd_vector(rng, w, 0) : rnd_scalar(rng, static_cast<int>(rng.below(2)));
                };
                int w = p.vector ? static_cast<int>(rng.range(1, 3)) : 0;
                auto mk = [&](Expr l, Expr r) {
                    return p.vector ? build_vector_op(p.op, std::move(l), std::move(r))
                                    : build_scalar(p.op, std::move(l), std::move(r));
                };
                Expr inst = p.left_chain
                                ? mk(mk(mk(one(w), one(w)), one(w)), one(w))
                                : mk(one(w), mk(one(w), mk(one(w), one(w))));
                return p.vector ? embed_vector(rng, std::move(inst))
                                : embed_scalar(rng, std::move(inst));
            });
    }
}

void add_rotation_distribution(CatalogBuilder& cb) {
    struct Pat {
        const char* dist_name;
        const char* gather_name;
        Op op;
    };
    const Pat pats[] = {{"rot-distribute-add", "rot-gather-add", Op::VecAdd},
                        {"rot-distribute-mul", "rot-gather-mul", Op::VecMul}};
    for (const Pat& p : pats) {
        cb.rule(
            p.dist_name,
            [p](const Expr& e) { return e.op() == Op::RotL && e.child(0).op() == p.op; },
            [p](const Expr& e) {
                const Expr& inner = e.child(0);
                return build_vector_op(p.op, rot_l(inner.child(0), e.step()),
                                       rot_l(inner.child(1), e.step()));
            },
            [p](Rng& rng) {
                int w = static_cast<int>(rng.range(2, 6));
                Expr inner =
                    build_vector_op(p.op, rnd_vector(rng, w, 1), rnd_vector(rng, w, 1));
                return embed_vector(rng, rot_l(std::move(inner), rng.range(0, w - 1)));
            });
        cb.rule(
            p.gather_name,
            [p](const Expr& e) {
                return e.op() == p.op && e.child(0).op() == Op::RotL &&
                       e.child(1).op() == Op::RotL && e.child(0).step() == e.child(1).step();
            },
            [p](const Expr& e) {
                return rot_l(build_vector_op(p.op, e.child(0).child(0), e.child(1).child(0)),
                             e.child(0).step());
            },
            [p](Rng& rng) {
                int w = static_cast<int>(rng.range(2, 6));
                int64_t s = rng.range(0, w - 1);
                Expr inst = build_vector_op(p.op, rot_l(rnd_vector(rng, w, 1), s),
                                            rot_l(rnd_vector(rng, w, 1), s));
                return embed_vector(rng, std::move(inst));
            });
    }
}

Catalog build_catalog() {
    CatalogBuilder cb;
    cb.cat.version = "fhevec-catalog-1";
    add_constant_folding(cb);
    add_scalar_identities(cb);
    add_vector_identities(cb);
    add_rotation_simplification(cb);
    add_iso_vectorize(cb);
    add_non_iso_vectorize(cb);
    add_reduces(cb);
    add_factor_distribute(cb);
    add_commutativity_associativity(cb);
    add_balancing(cb);
    add_rotation_distribution(cb);
    return std::move(cb.cat);
}

}  // namespace

const Rule* Catalog::find(const std::string& name) const {
    for (const Rule& r : rules)
        if (r.name == name) return &r;
    return nullptr;
}

const Catalog& catalog() {
    static const Catalog cat = build_catalog();
    return cat;
}

namespace {

void collect_sites(const Rule& r, const Expr& e, std::vector<int>& path, std::vector<Site>& out) {
    if (r.matches(e)) out.push_back({path, static_cast<int>(out.size())});
    if (r.root_only) return;
    for (size_t i = 0; i < e.arity(); ++i) {
        path.push_back(static_cast<int>(i));
        collect_sites(r, e.child(i), path, out);
        path.pop_back();
    }
}

Expr replace_along(const Expr& e, const std::vector<int>& path, size_t i, const Rule& r) {
    if (i == path.size()) {
        if (!r.matches(e)) throw InvalidSite("rule '" + r.name + "' does not match at site");
        return r.build(e);
    }
    int idx = path[i];
    if (idx < 0 || static_cast<size_t>(idx) >= e.arity())
        throw InvalidSite("site path leaves the tree");
    std::vector<Expr> kids = e.children();
    kids[static_cast<size_t>(idx)] = replace_along(e.child(static_cast<size_t>(idx)), path, i + 1, r);
    switch (e.op()) {
        case Op::Neg: return neg(kids[0]);
        case Op::Add: return add(kids[0], kids[1]);
        case Op::Sub: return sub(kids[0], kids[1]);
        case Op::Mul: return mul(kids[0], kids[1]);
        case Op::Vec: return vec(std::move(kids));
        case Op::VecNeg: return vneg(kids[0]);
        case Op::VecAdd: return vadd(kids[0], kids[1]);
        case Op::VecSub: return vsub(kids[0], kids[1]);
        case Op::VecMul: return vmul(kids[0], kids[1]);
        case Op::RotL: return rot_l(kids[0], e.step());
        default: throw InvalidSite("site path passes through a leaf");
    }
}

}  // namespace

std::vector<Site> match_sites(const Rule& r, const Expr& e) {
    std::vector<Site> out;
    std::vector<int> path;
    collect_sites(r, e, path, out);
    return out;
}

Expr apply(const Rule& r, const Expr& e, const Site& s) {
    if (r.root_only && !s.path.empty())
        throw InvalidSite("rule '" + r.name + "' applies at the root only");
    return replace_along(e, s.path, 0, r);
}

std::vector<RuleCheckResult> check_rules(int instances, int bindings, uint64_t seed,
                                         uint64_t modulus) {
    std::vector<RuleCheckResult> results;
    const Catalog& cat = catalog();
    for (const Rule& r : cat.rules) {
        Rng rng(seed ^ (0x517cc1b727220a95ull * static_cast<uint64_t>(r.index + 1)));
        RuleCheckResult res;
        res.rule = r.name;
        for (int i = 0; i < instances; ++i) {
            Expr e = r.sample(rng);
            std::vector<Site> sites = match_sites(r, e);
            if (sites.empty()) {
                res.failures++;
                if (res.first_failure.empty())
                    res.first_failure = "sampler produced a non-matching instance: " + print(e);
                continue;
            }
            res.instances++;
            const Site& site = sites[rng.below(sites.size())];
            Program before = wrap_program(e);
            Program after = before.with_body(apply(r, e, site));
            int k = r.contract == Equivalence::Full ? before.width() : before.output_width();
            PrefixCheck chk = equiv_prefix(before, after, k, bindings, rng.next(), modulus);
            if (!chk.equivalent) {
                res.failures++;
                if (res.first_failure.empty()) {
                    res.first_failure = "slot " + std::to_string(chk.counterexample->slot) +
                                        " differs on " + print(e);
                }
            }
        }
        results.push_back(std::move(res));
    }
    return results;
}

}  // namespace fhevec
