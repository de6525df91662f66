#pragma once

#include <string>
#include <vector>

#include "fhevec/ir.hpp"

namespace fhevec {

// Program sources: the seeded random generator, the line-oriented dataset
// loader with canonical dedup / benchmark exclusion, and the benchmark
// kernel builders (naive scalar formulations, before any optimization).

struct GenParams {
    int count = 100;
    int min_depth = 1;
    int max_depth = 15;
    int min_width = 1;
    int max_width = 32;
    // Operator mix when growing a node (relative weights).
    double w_binary = 1.0;    // +,-,* (uniform among them)
    double w_neg = 0.25;
    double w_rotate = 0.5;
    double w_pack = 1.0;      // drop from vector ops to a Vec of scalars
    uint64_t seed = 0;
};

// Sampling is balanced round-robin across all (depth, width) combinations in
// range; each program hits its target depth and width exactly.
std::vector<Program> gen_random(const GenParams& params);

struct LoadResult {
    std::vector<Program> programs;
    int dropped_parse = 0;
    int dropped_duplicate = 0;
    int dropped_excluded = 0;
};

// One expression per line; unparsable lines are dropped and counted, entries
// are deduplicated by canon_key, and anything canon-equal to an exclusion
// program is removed. FileUnreadable if the file cannot be opened.
LoadResult load_dataset(const std::string& path, const std::vector<Program>& exclusion = {});

struct BenchSpec {
    std::string kernel;  // dot-product, hamming-distance, l2-distance,
                         // linear-regression, polynomial-regression, box-blur,
                         // gx, gy, roberts-cross, matmul, max, sort, tree
    int n = 4;           // size parameter (grid side for stencils/matmul)
    int x = 100, y = 100, z = 5;  // tree: fullness %, homogeneity %, depth
    uint64_t seed = 7;            // tree randomness

    std::string id() const;
};

BenchSpec parse_bench_id(const std::string& id);  // "dot-product-8", "tree-100-50-5"

// Naive formulation of the kernel; UnsupportedSpec for unknown kernels or
// out-of-range sizes.
Program gen_bench(const BenchSpec& spec);

}  // namespace fhevec
