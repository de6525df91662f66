#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "fhevec/errors.hpp"

namespace fhevec {

enum class Op : uint8_t {
    Var,     // scalar input
    Const,   // scalar integer literal
    Neg,     // scalar -
    Add,     // scalar +
    Sub,     // scalar -
    Mul,     // scalar *
    Vec,     // slot packing: scalars -> vector
    VecNeg,  // element-wise -
    VecAdd,  // element-wise +
    VecSub,  // element-wise -
    VecMul,  // element-wise *
    RotL,    // cyclic left rotation by a constant step
};

enum class VarKind : uint8_t { Cipher, Plain };

const char* op_token(Op op);
bool is_scalar_op(Op op);  // Neg/Add/Sub/Mul
bool is_vector_op(Op op);  // VecNeg/VecAdd/VecSub/VecMul

// Immutable expression tree with value semantics; copies share nodes.
// Kind, width, hash and cipher-content are derived bottom-up at construction,
// so every reachable Expr is well-typed.
class Expr {
public:
    Expr() = default;

    Op op() const { return node_->op; }
    const std::string& name() const { return node_->name; }     // Var
    VarKind var_kind() const { return node_->var_kind; }        // Var
    int64_t value() const { return node_->payload; }            // Const
    int64_t step() const { return node_->payload; }             // RotL
    const std::vector<Expr>& children() const { return node_->children; }
    const Expr& child(size_t i) const { return node_->children[i]; }
    size_t arity() const { return node_->children.size(); }

    // 0 for scalar expressions, slot count otherwise.
    int width() const { return node_->width; }
    bool is_vector() const { return node_->width > 0; }
    bool is_scalar() const { return node_->width == 0; }

    uint64_t hash() const { return node_->hash; }
    bool has_cipher_leaf() const { return node_->has_cipher; }
    // Tree node count, counting shared subtrees once per occurrence (saturating).
    uint64_t tree_size() const { return node_->tree_size; }

    bool valid() const { return node_ != nullptr; }
    const void* id() const { return node_.get(); }  // pointer identity for memo tables

    friend bool same_node(const Expr& a, const Expr& b) { return a.node_ == b.node_; }

private:
    struct Node {
        Op op;
        VarKind var_kind = VarKind::Cipher;
        int64_t payload = 0;
        std::string name;
        std::vector<Expr> children;
        int width = 0;
        bool has_cipher = false;
        uint64_t hash = 0;
        uint64_t tree_size = 1;
    };

    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;

    friend Expr make_node(Op op, VarKind vk, int64_t payload, std::string name,
                          std::vector<Expr> children);
};

// Constructors. Each validates kinds/widths and throws TypeError/ArityError,
// so ill-typed trees cannot be built.
Expr var(std::string name, VarKind kind = VarKind::Cipher);
Expr cst(int64_t value);
Expr neg(Expr e);
Expr add(Expr l, Expr r);
Expr sub(Expr l, Expr r);
Expr mul(Expr l, Expr r);
Expr vec(std::vector<Expr> elems);
Expr vneg(Expr e);
Expr vadd(Expr l, Expr r);
Expr vsub(Expr l, Expr r);
Expr vmul(Expr l, Expr r);
Expr rot_l(Expr e, int64_t step);  // step reduced mod width
Expr rot_r(Expr e, int64_t step);  // normalized to the equivalent left rotation

bool structurally_equal(const Expr& a, const Expr& b);

// Hash/equality functors over structural identity, for dedup containers.
struct ExprStructHash {
    size_t operator()(const Expr& e) const { return static_cast<size_t>(e.hash()); }
};
struct ExprStructEq {
    bool operator()(const Expr& a, const Expr& b) const { return structurally_equal(a, b); }
};

struct Kind {
    bool vector = false;
    int width = 0;  // meaningful when vector
    bool operator==(const Kind&) const = default;
};

// Re-derives the kind bottom-up, checking the cached typing; throws TypeError
// with the path to the offending node. Total on anything the parser accepts.
Kind infer(const Expr& e);

struct InputDecl {
    std::string name;
    VarKind kind = VarKind::Cipher;
    bool operator==(const InputDecl&) const = default;
};

// A program is an ordered input declaration, a vector-kinded body, and the
// number of leading slots that carry the result.
class Program {
public:
    Program() = default;
    Program(std::vector<InputDecl> inputs, Expr body, int output_width);

    const std::vector<InputDecl>& inputs() const { return inputs_; }
    const Expr& body() const { return body_; }
    int output_width() const { return output_width_; }
    int width() const { return body_.width(); }

    // Same declarations, replacement body. Width may grow but not drop below
    // output_width.
    Program with_body(Expr body) const;

private:
    std::vector<InputDecl> inputs_;
    Expr body_;
    int output_width_ = 0;
};

bool structurally_equal(const Program& a, const Program& b);

// Wraps a body in a program declaring every free variable (first-occurrence
// order) with its leaf kind; output_width = width. Scalar bodies are packed
// into a width-1 Vec.
Program wrap_program(Expr body);

// Grammar:  (program (inputs (ct a) (pt b) ...) (output-width K) <expr>)
// or a bare expression, in which case free variables default to ct and
// output-width to the full width. `;` starts a line comment.
Program parse(const std::string& text);

std::string print(const Program& p);
std::string print(const Expr& e);
std::ostream& operator<<(std::ostream& os, const Expr& e);

std::vector<std::string> free_variables(const Expr& e);  // first-occurrence order

}  // namespace fhevec
