#include "fhevec/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <unordered_set>

#include "fhevec/canon.hpp"
#include "fhevec/rng.hpp"

namespace fhevec {

namespace {

// --- random generation ---------------------------------------------------

struct Gen {
    Rng& rng;
    const GenParams& p;
    std::vector<std::string> pool;

    Expr leaf() {
        if (rng.chance(0.15)) {
            const int64_t choices[] = {0, 1, 1, 2, 3, 5};
            return cst(choices[rng.below(6)]);
        }
        return var(pool[rng.below(pool.size())]);
    }

    Expr scalar(int d) {
        if (d <= 0) return leaf();
        double wb = 3 * p.w_binary, wn = p.w_neg;
        double r = rng.unit() * (wb + wn);
        if (r < wn) return neg(scalar(d - 1));
        Expr forced = scalar(d - 1);
        Expr other = scalar(static_cast<int>(rng.below(static_cast<uint64_t>(d))));
        if (rng.chance(0.5)) std::swap(forced, other);
        switch (rng.below(3)) {
            case 0: return add(std::move(forced), std::move(other));
            case 1: return sub(std::move(forced), std::move(other));
            default: return mul(std::move(forced), std::move(other));
        }
    }

    Expr pack(int w, int d) {
        std::vector<Expr> slots;
        slots.reserve(static_cast<size_t>(w));
        int deep_slot = static_cast<int>(rng.below(static_cast<uint64_t>(w)));
        for (int i = 0; i < w; ++i) {
            int sd = i == deep_slot ? d : static_cast<int>(rng.below(static_cast<uint64_t>(d) + 1));
            slots.push_back(scalar(sd));
        }
        return vec(std::move(slots));
    }

    Expr vector(int w, int d) {
        if (d <= 0) return pack(w, 0);
        double wb = 3 * p.w_binary, wn = p.w_neg, wr = p.w_rotate, wp = p.w_pack;
        double r = rng.unit() * (wb + wn + wr + wp);
        if (r < wp) return pack(w, d);
        r -= wp;
        if (r < wn) return vneg(vector(w, d - 1));
        r -= wn;
        if (r < wr) return rot_l(vector(w, d - 1), w > 1 ? rng.range(0, w - 1) : 0);
        Expr forced = vector(w, d - 1);
        Expr other = vector(w, static_cast<int>(rng.below(static_cast<uint64_t>(d))));
        if (rng.chance(0.5)) std::swap(forced, other);
        switch (rng.below(3)) {
            case 0: return vadd(std::move(forced), std::move(other));
            case 1: return vsub(std::move(forced), std::move(other));
            default: return vmul(std::move(forced), std::move(other));
        }
    }
};

// --- benchmark helpers ----------------------------------------------------

Expr fold_add(std::vector<Expr> terms) {
    Expr acc = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) acc = add(std::move(acc), terms[i]);
    return acc;
}

std::string idx2(const char* base, int i, int j) {
    return std::string(base) + std::to_string(i) + "_" + std::to_string(j);
}

void want_range(const BenchSpec& s, int lo, int hi) {
    if (s.n < lo || s.n > hi)
        throw UnsupportedSpec(s.kernel + " supports sizes " + std::to_string(lo) + ".." +
                              std::to_string(hi) + ", got " + std::to_string(s.n));
}

Program bench_dot(const BenchSpec& s) {
    want_range(s, 1, 64);
    std::vector<Expr> terms;
    for (int i = 0; i < s.n; ++i)
        terms.push_back(mul(var("a" + std::to_string(i)), var("b" + std::to_string(i))));
    return wrap_program(vec({fold_add(std::move(terms))}));
}

Program bench_hamming(const BenchSpec& s) {
    want_range(s, 1, 64);
    std::vector<Expr> terms;
    for (int i = 0; i < s.n; ++i) {
        Expr a = var("a" + std::to_string(i));
        Expr b = var("b" + std::to_string(i));
        // a + b - 2ab: XOR on bit inputs.
        terms.push_back(sub(add(a, b), mul(cst(2), mul(a, b))));
    }
    return wrap_program(vec({fold_add(std::move(terms))}));
}

Program bench_l2(const BenchSpec& s) {
    want_range(s, 1, 64);
    std::vector<Expr> terms;
    for (int i = 0; i < s.n; ++i) {
        Expr d = sub(var("a" + std::to_string(i)), var("b" + std::to_string(i)));
        terms.push_back(mul(d, d));
    }
    return wrap_program(vec({fold_add(std::move(terms))}));
}

Program bench_linreg(const BenchSpec& s) {
    want_range(s, 1, 64);
    Expr w = var("w"), b = var("b");
    std::vector<Expr> terms;
    for (int i = 0; i < s.n; ++i) {
        Expr x = var("x" + std::to_string(i));
        Expr y = var("y" + std::to_string(i));
        terms.push_back(mul(sub(y, add(mul(w, x), b)), x));
    }
    return wrap_program(vec({fold_add(std::move(terms))}));
}

Program bench_polyreg(const BenchSpec& s) {
    want_range(s, 1, 64);
    Expr a2 = var("a2"), a1 = var("a1"), a0 = var("a0");
    std::vector<Expr> terms;
    for (int i = 0; i < s.n; ++i) {
        Expr x = var("x" + std::to_string(i));
        Expr y = var("y" + std::to_string(i));
        Expr fit = add(add(mul(mul(a2, x), x), mul(a1, x)), a0);
        terms.push_back(mul(sub(y, fit), x));
    }
    return wrap_program(vec({fold_add(std::move(terms))}));
}

Program bench_blur(const BenchSpec& s) {
    want_range(s, 2, 8);
    int n = s.n;
    std::vector<Expr> slots;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            std::vector<Expr> terms;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    int ii = i + di, jj = j + dj;
                    if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
                    terms.push_back(var(idx2("x", ii, jj)));
                }
            slots.push_back(fold_add(std::move(terms)));
        }
    }
    return wrap_program(vec(std::move(slots)));
}

Program bench_gradient(const BenchSpec& s, bool horizontal) {
    want_range(s, 2, 8);
    int n = s.n;
    std::vector<Expr> slots;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            // Sobel: weight 2 on the center of each side, zero-padded border.
            std::vector<Expr> plus, minus;
            for (int k = -1; k <= 1; ++k) {
                int pi = horizontal ? i + k : i + 1;
                int pj = horizontal ? j + 1 : j + k;
                int mi = horizontal ? i + k : i - 1;
                int mj = horizontal ? j - 1 : j + k;
                int weight = k == 0 ? 2 : 1;
                if (pi >= 0 && pj >= 0 && pi < n && pj < n) {
                    Expr t = var(idx2("x", pi, pj));
                    plus.push_back(weight == 2 ? mul(cst(2), t) : t);
                }
                if (mi >= 0 && mj >= 0 && mi < n && mj < n) {
                    Expr t = var(idx2("x", mi, mj));
                    minus.push_back(weight == 2 ? mul(cst(2), t) : t);
                }
            }
            Expr ps = plus.empty() ? cst(0) : fold_add(std::move(plus));
            Expr ms = minus.empty() ? cst(0) : fold_add(std::move(minus));
            slots.push_back(sub(std::move(ps), std::move(ms)));
        }
    }
    return wrap_program(vec(std::move(slots)));
}

Program bench_roberts(const BenchSpec& s) {
    want_range(s, 2, 8);
    int n = s.n;
    std::vector<Expr> slots;
    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j + 1 < n; ++j) {
            Expr d1 = sub(var(idx2("x", i, j)), var(idx2("x", i + 1, j + 1)));
            Expr d2 = sub(var(idx2("x", i + 1, j)), var(idx2("x", i, j + 1)));
            slots.push_back(add(mul(d1, d1), mul(d2, d2)));
        }
    }
    return wrap_program(vec(std::move(slots)));
}

Program bench_matmul(const BenchSpec& s) {
    want_range(s, 2, 6);
    int n = s.n;
    std::vector<Expr> slots;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            std::vector<Expr> terms;
            for (int k = 0; k < n; ++k)
                terms.push_back(mul(var(idx2("a", i, k)), var(idx2("b", k, j))));
            slots.push_back(fold_add(std::move(terms)));
        }
    }
    return wrap_program(vec(std::move(slots)));
}

// max(x, y) = s*(x-y) + y with a fresh selector input s encoding x >= y.
Expr max2(Expr x, Expr y, Expr sel) { return add(mul(std::move(sel), sub(x, y)), y); }
Expr min2(Expr x, Expr y, Expr sel) { return add(mul(std::move(sel), sub(y, x)), x); }

Program bench_max(const BenchSpec& s) {
    want_range(s, 2, 16);
    Expr m = var("a0");
    for (int i = 1; i < s.n; ++i)
        m = max2(std::move(m), var("a" + std::to_string(i)), var("s" + std::to_string(i)));
    return wrap_program(vec({std::move(m)}));
}

Program bench_sort(const BenchSpec& s) {
    want_range(s, 2, 5);
    static const std::vector<std::vector<std::pair<int, int>>> networks = {
        {{0, 1}},
        {{0, 1}, {0, 2}, {1, 2}},
        {{0, 1}, {2, 3}, {0, 2}, {1, 3}, {1, 2}},
        {{0, 1}, {3, 4}, {2, 4}, {2, 3}, {1, 4}, {0, 3}, {0, 2}, {1, 3}, {1, 2}},
    };
    std::vector<Expr> e;
    for (int i = 0; i < s.n; ++i) e.push_back(var("a" + std::to_string(i)));
    int t = 0;
    for (const auto& [i, j] : networks[static_cast<size_t>(s.n - 2)]) {
        Expr sel = var("s" + std::to_string(t++));
        Expr lo = min2(e[static_cast<size_t>(i)], e[static_cast<size_t>(j)], sel);
        Expr hi = max2(e[static_cast<size_t>(i)], e[static_cast<size_t>(j)], sel);
        e[static_cast<size_t>(i)] = std::move(lo);
        e[static_cast<size_t>(j)] = std::move(hi);
    }
    return wrap_program(vec(std::move(e)));
}

Program bench_tree(const BenchSpec& s) {
    if (s.z < 1 || s.z > 12)
        throw UnsupportedSpec("tree depth must be in 1..12, got " + std::to_string(s.z));
    if (s.x < 0 || s.x > 100 || s.y < 0 || s.y > 100)
        throw UnsupportedSpec("tree fullness/homogeneity are percentages");
    Rng rng(s.seed);
    int next_leaf = 0;
    // x% chance a node is full (two internal children); y% chance of the
    // majority operator (+); otherwise an even split of * and -.
    std::function<Expr(int)> grow = [&](int d) -> Expr {
        if (d == 0) return var("t" + std::to_string(next_leaf++));
        int op = rng.chance(s.y / 100.0) ? 0 : (rng.chance(0.5) ? 1 : 2);
        Expr l, r;
        if (rng.chance(s.x / 100.0)) {
            l = grow(d - 1);
            r = grow(d - 1);
        } else {
            l = grow(d - 1);
            r = var("t" + std::to_string(next_leaf++));
            if (rng.chance(0.5)) std::swap(l, r);
        }
        switch (op) {
            case 0: return add(std::move(l), std::move(r));
            case 1: return mul(std::move(l), std::move(r));
            default: return sub(std::move(l), std::move(r));
        }
    };
    return wrap_program(vec({grow(s.z)}));
}

}  // namespace

std::vector<Program> gen_random(const GenParams& params) {
    if (params.min_depth < 0 || params.min_depth > params.max_depth || params.min_width < 1 ||
        params.min_width > params.max_width)
        throw Error("invalid generation ranges");
    Rng rng(params.seed);
    int n_depth = params.max_depth - params.min_depth + 1;
    int n_width = params.max_width - params.min_width + 1;
    std::vector<Program> out;
    out.reserve(static_cast<size_t>(params.count));
    for (int i = 0; i < params.count; ++i) {
        int combo = i % (n_depth * n_width);
        int d = params.min_depth + combo / n_width;
        int w = params.min_width + combo % n_width;
        Gen g{rng, params, {}};
        int pool_size = std::max(2, std::min(2 * w, 12));
        for (int v = 0; v < pool_size; ++v) g.pool.push_back("t" + std::to_string(v));
        out.push_back(wrap_program(g.vector(w, d)));
    }
    return out;
}

LoadResult load_dataset(const std::string& path, const std::vector<Program>& exclusion) {
    std::ifstream in(path);
    if (!in) throw FileUnreadable("cannot open dataset: " + path);
    std::unordered_set<std::string> excluded;
    for (const Program& p : exclusion) excluded.insert(canon_key(p));
    std::unordered_set<std::string> seen;
    LoadResult res;
    std::string line;
    while (std::getline(in, line)) {
        // Skip blank and comment-only lines without counting them as errors.
        size_t pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == ';') continue;
        Program p;
        try {
            p = parse(line);
        } catch (const Error&) {
            res.dropped_parse++;
            continue;
        }
        std::string key = canon_key(p);
        if (excluded.count(key)) {
            res.dropped_excluded++;
            continue;
        }
        if (!seen.insert(key).second) {
            res.dropped_duplicate++;
            continue;
        }
        res.programs.push_back(std::move(p));
    }
    return res;
}

std::string BenchSpec::id() const {
    if (kernel == "tree")
        return "tree-" + std::to_string(x) + "-" + std::to_string(y) + "-" + std::to_string(z);
    return kernel + "-" + std::to_string(n);
}

BenchSpec parse_bench_id(const std::string& id) {
    BenchSpec spec;
    if (id.rfind("tree-", 0) == 0) {
        spec.kernel = "tree";
        int x, y, z;
        if (sscanf(id.c_str(), "tree-%d-%d-%d", &x, &y, &z) != 3)
            throw UnsupportedSpec("bad tree id: " + id + " (want tree-X-Y-Z)");
        spec.x = x;
        spec.y = y;
        spec.z = z;
        return spec;
    }
    size_t dash = id.rfind('-');
    if (dash == std::string::npos || dash + 1 >= id.size())
        throw UnsupportedSpec("bad kernel id: " + id + " (want name-N)");
    spec.kernel = id.substr(0, dash);
    spec.n = std::atoi(id.c_str() + dash + 1);
    return spec;
}

Program gen_bench(const BenchSpec& spec) {
    const std::string& k = spec.kernel;
    if (k == "dot-product") return bench_dot(spec);
    if (k == "hamming-distance") return bench_hamming(spec);
    if (k == "l2-distance") return bench_l2(spec);
    if (k == "linear-regression") return bench_linreg(spec);
    if (k == "polynomial-regression") return bench_polyreg(spec);
    if (k == "box-blur") return bench_blur(spec);
    if (k == "gx") return bench_gradient(spec, true);
    if (k == "gy") return bench_gradient(spec, false);
    if (k == "roberts-cross") return bench_roberts(spec);
    if (k == "matmul") return bench_matmul(spec);
    if (k == "max") return bench_max(spec);
    if (k == "sort") return bench_sort(spec);
    if (k == "tree") return bench_tree(spec);
    throw UnsupportedSpec("unknown kernel: " + k);
}

}  // namespace fhevec
