#include "fhevec/ir.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace fhevec {

const char* op_token(Op op) {
    switch (op) {
        case Op::Var: return "<var>";
        case Op::Const: return "<const>";
        case Op::Neg: return "-";
        case Op::Add: return "+";
        case Op::Sub: return "-";
        case Op::Mul: return "*";
        case Op::Vec: return "Vec";
        case Op::VecNeg: return "VecNeg";
        case Op::VecAdd: return "VecAdd";
        case Op::VecSub: return "VecSub";
        case Op::VecMul: return "VecMul";
        case Op::RotL: return "<<";
    }
    return "?";
}

bool is_scalar_op(Op op) {
    return op == Op::Neg || op == Op::Add || op == Op::Sub || op == Op::Mul;
}

bool is_vector_op(Op op) {
    return op == Op::VecNeg || op == Op::VecAdd || op == Op::VecSub || op == Op::VecMul;
}

namespace {

uint64_t mix(uint64_t h, uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

uint64_t hash_string(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
    return h;
}

uint64_t sat_add(uint64_t a, uint64_t b) {
    uint64_t s = a + b;
    return s < a ? std::numeric_limits<uint64_t>::max() : s;
}

}  // namespace

Expr make_node(Op op, VarKind vk, int64_t payload, std::string name, std::vector<Expr> children) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->var_kind = vk;
    n->payload = payload;
    n->name = std::move(name);
    n->children = std::move(children);

    uint64_t h = mix(0, static_cast<uint64_t>(op));
    switch (op) {
        case Op::Var:
            h = mix(h, hash_string(n->name));
            h = mix(h, static_cast<uint64_t>(vk));
            n->has_cipher = (vk == VarKind::Cipher);
            n->width = 0;
            break;
        case Op::Const:
            h = mix(h, static_cast<uint64_t>(payload));
            n->width = 0;
            break;
        case Op::Vec:
            n->width = static_cast<int>(n->children.size());
            break;
        case Op::RotL:
            h = mix(h, static_cast<uint64_t>(payload));
            n->width = n->children[0].width();
            break;
        default:
            n->width = n->children.empty() ? 0 : n->children[0].width();
            break;
    }
    for (const Expr& c : n->children) {
        h = mix(h, c.hash());
        n->has_cipher = n->has_cipher || c.has_cipher_leaf();
        n->tree_size = sat_add(n->tree_size, c.tree_size());
    }
    n->hash = h;
    return Expr(std::shared_ptr<const Expr::Node>(std::move(n)));
}

namespace {

void require_scalar(const Expr& e, const char* ctx) {
    if (!e.valid()) throw TypeError(std::string(ctx) + ": missing operand");
    if (e.is_vector())
        throw TypeError(std::string(ctx) + ": expected a scalar operand, got width " +
                        std::to_string(e.width()));
}

void require_vector(const Expr& e, const char* ctx) {
    if (!e.valid()) throw TypeError(std::string(ctx) + ": missing operand");
    if (!e.is_vector()) throw TypeError(std::string(ctx) + ": expected a vector operand");
}

void require_same_width(const Expr& l, const Expr& r, const char* ctx) {
    if (l.width() != r.width())
        throw TypeError(std::string(ctx) + ": operand widths differ (" +
                        std::to_string(l.width()) + " vs " + std::to_string(r.width()) + ")");
}

}  // namespace

Expr var(std::string name, VarKind kind) {
    if (name.empty()) throw SyntaxError("variable name must be non-empty");
    return make_node(Op::Var, kind, 0, std::move(name), {});
}

Expr cst(int64_t value) { return make_node(Op::Const, VarKind::Plain, value, {}, {}); }

Expr neg(Expr e) {
    require_scalar(e, "-");
    return make_node(Op::Neg, VarKind::Cipher, 0, {}, {std::move(e)});
}

Expr add(Expr l, Expr r) {
    require_scalar(l, "+");
    require_scalar(r, "+");
    return make_node(Op::Add, VarKind::Cipher, 0, {}, {std::move(l), std::move(r)});
}

Expr sub(Expr l, Expr r) {
    require_scalar(l, "-");
    require_scalar(r, "-");
    return make_node(Op::Sub, VarKind::Cipher, 0, {}, {std::move(l), std::move(r)});
}

Expr mul(Expr l, Expr r) {
    require_scalar(l, "*");
    require_scalar(r, "*");
    return make_node(Op::Mul, VarKind::Cipher, 0, {}, {std::move(l), std::move(r)});
}

Expr vec(std::vector<Expr> elems) {
    if (elems.empty()) throw TypeError("Vec: needs at least one slot");
    for (const Expr& e : elems) {
        if (!e.valid()) throw TypeError("Vec: missing slot");
        if (e.is_vector()) throw TypeError("Vec: nested Vec is not allowed");
    }
    return make_node(Op::Vec, VarKind::Cipher, 0, {}, std::move(elems));
}

Expr vneg(Expr e) {
    require_vector(e, "VecNeg");
    return make_node(Op::VecNeg, VarKind::Cipher, 0, {}, {std::move(e)});
}

Expr vadd(Expr l, Expr r) {
    require_vector(l, "VecAdd");
    require_vector(r, "VecAdd");
    require_same_width(l, r, "VecAdd");
    return make_node(Op::VecAdd, VarKind::Cipher, 0, {}, {std::move(l), std::move(r)});
}

Expr vsub(Expr l, Expr r) {
    require_vector(l, "VecSub");
    require_vector(r, "VecSub");
    require_same_width(l, r, "VecSub");
    return make_node(Op::VecSub, VarKind::Cipher, 0, {}, {std::move(l), std::move(r)});
}

Expr vmul(Expr l, Expr r) {
    require_vector(l, "VecMul");
    require_vector(r, "VecMul");
    require_same_width(l, r, "VecMul");
    return make_node(Op::VecMul, VarKind::Cipher, 0, {}, {std::move(l), std::move(r)});
}

Expr rot_l(Expr e, int64_t step) {
    require_vector(e, "<<");
    if (step < 0) throw TypeError("<<: negative step");
    step %= e.width();
    return make_node(Op::RotL, VarKind::Cipher, step, {}, {std::move(e)});
}

Expr rot_r(Expr e, int64_t step) {
    require_vector(e, ">>");
    if (step < 0) throw TypeError(">>: negative step");
    int64_t w = e.width();
    return rot_l(std::move(e), (w - step % w) % w);
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (same_node(a, b)) return true;
    if (a.hash() != b.hash() || a.op() != b.op() || a.arity() != b.arity()) return false;
    switch (a.op()) {
        case Op::Var:
            if (a.name() != b.name() || a.var_kind() != b.var_kind()) return false;
            break;
        case Op::Const:
            if (a.value() != b.value()) return false;
            break;
        case Op::RotL:
            if (a.step() != b.step()) return false;
            break;
        default: break;
    }
    for (size_t i = 0; i < a.arity(); ++i)
        if (!structurally_equal(a.child(i), b.child(i))) return false;
    return true;
}

namespace {

Kind infer_at(const Expr& e, std::string& path) {
    auto fail = [&](const std::string& why) -> Kind {
        throw TypeError("at " + (path.empty() ? std::string("root") : path) + ": " + why);
    };
    size_t mark = path.size();
    std::vector<Kind> ks;
    ks.reserve(e.arity());
    for (size_t i = 0; i < e.arity(); ++i) {
        path += "." + std::to_string(i);
        ks.push_back(infer_at(e.child(i), path));
        path.resize(mark);
    }
    switch (e.op()) {
        case Op::Var:
        case Op::Const: return Kind{false, 0};
        case Op::Neg:
            if (ks.size() != 1) return fail("'-' expects 1 child");
            if (ks[0].vector) return fail("scalar '-' over a vector child");
            return Kind{false, 0};
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
            if (ks.size() != 2) return fail("binary scalar op expects 2 children");
            if (ks[0].vector || ks[1].vector) return fail("scalar op over a vector child");
            return Kind{false, 0};
        case Op::Vec:
            if (ks.empty()) return fail("Vec expects at least 1 child");
            for (const Kind& k : ks)
                if (k.vector) return fail("nested Vec");
            return Kind{true, static_cast<int>(ks.size())};
        case Op::VecNeg:
            if (ks.size() != 1) return fail("VecNeg expects 1 child");
            if (!ks[0].vector) return fail("VecNeg over a scalar child");
            return ks[0];
        case Op::VecAdd:
        case Op::VecSub:
        case Op::VecMul:
            if (ks.size() != 2) return fail("binary vector op expects 2 children");
            if (!ks[0].vector || !ks[1].vector) return fail("vector op over a scalar child");
            if (ks[0].width != ks[1].width)
                return fail("width mismatch (" + std::to_string(ks[0].width) + " vs " +
                            std::to_string(ks[1].width) + ")");
            return ks[0];
        case Op::RotL:
            if (ks.size() != 1) return fail("'<<' expects 1 child");
            if (!ks[0].vector) return fail("'<<' over a scalar child");
            if (e.step() < 0 || e.step() >= ks[0].width) return fail("rotation step out of range");
            return ks[0];
    }
    return fail("unknown operator");
}

}  // namespace

Kind infer(const Expr& e) {
    std::string path;
    Kind k = infer_at(e, path);
    if (k.vector != e.is_vector() || (k.vector && k.width != e.width()))
        throw TypeError("cached kind disagrees with derivation");
    return k;
}

Program::Program(std::vector<InputDecl> inputs, Expr body, int output_width)
    : inputs_(std::move(inputs)), body_(std::move(body)), output_width_(output_width) {
    if (!body_.valid() || !body_.is_vector()) throw TypeError("program body must be vector-kinded");
    if (output_width_ < 1 || output_width_ > body_.width())
        throw TypeError("output-width must be in [1, width(body)]");
    std::unordered_map<std::string, VarKind> declared;
    for (const InputDecl& d : inputs_) {
        if (!declared.emplace(d.name, d.kind).second)
            throw TypeError("duplicate input declaration: " + d.name);
    }
    for (const std::string& v : free_variables(body_))
        if (!declared.count(v)) throw TypeError("undeclared free variable: " + v);
}

Program Program::with_body(Expr body) const {
    return Program(inputs_, std::move(body), output_width_);
}

bool structurally_equal(const Program& a, const Program& b) {
    return a.inputs() == b.inputs() && a.output_width() == b.output_width() &&
           structurally_equal(a.body(), b.body());
}

namespace {

void collect_vars(const Expr& e, std::vector<std::string>& order,
                  std::unordered_map<std::string, VarKind>& kinds) {
    if (e.op() == Op::Var) {
        if (kinds.emplace(e.name(), e.var_kind()).second) order.push_back(e.name());
        return;
    }
    for (const Expr& c : e.children()) collect_vars(c, order, kinds);
}

}  // namespace

std::vector<std::string> free_variables(const Expr& e) {
    std::vector<std::string> order;
    std::unordered_map<std::string, VarKind> kinds;
    collect_vars(e, order, kinds);
    return order;
}

Program wrap_program(Expr body) {
    if (body.is_scalar()) body = vec({std::move(body)});
    std::vector<std::string> order;
    std::unordered_map<std::string, VarKind> kinds;
    collect_vars(body, order, kinds);
    std::vector<InputDecl> ins;
    ins.reserve(order.size());
    for (const std::string& nm : order) ins.push_back({nm, kinds[nm]});
    int w = body.width();
    return Program(std::move(ins), std::move(body), w);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Token {
    enum Type { LParen, RParen, Atom, End } type;
    std::string text;
    int line, col;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        skip_ws();
        int line = line_, col = col_;
        if (pos_ >= src_.size()) return {Token::End, "", line, col};
        char c = src_[pos_];
        if (c == '(') {
            advance();
            return {Token::LParen, "(", line, col};
        }
        if (c == ')') {
            advance();
            return {Token::RParen, ")", line, col};
        }
        std::string text;
        while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(src_[pos_])) &&
               src_[pos_] != '(' && src_[pos_] != ')' && src_[pos_] != ';') {
            text += src_[pos_];
            advance();
        }
        return {Token::Atom, text, line, col};
    }

private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ';') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
};

[[noreturn]] void syntax_fail(const Token& t, const std::string& why) {
    throw SyntaxError("line " + std::to_string(t.line) + ":" + std::to_string(t.col) + ": " + why);
}

bool is_integer_atom(const std::string& s) {
    size_t i = (s.size() > 1 && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
    if (i >= s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

bool is_identifier_atom(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

int64_t parse_integer(const Token& t) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(t.text.c_str(), &end, 10);
    if (errno == ERANGE || end != t.text.c_str() + t.text.size())
        syntax_fail(t, "integer literal out of 64-bit range: " + t.text);
    return v;
}

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) { cur_ = lex_.next(); }

    // Header form: body variables must come from the declaration list.
    void restrict_to(std::unordered_map<std::string, VarKind> kinds) {
        kinds_ = std::move(kinds);
        require_declared_ = true;
    }

    Expr parse_expr() {
        if (cur_.type == Token::Atom) {
            Token t = eat();
            if (is_integer_atom(t.text)) return cst(parse_integer(t));
            if (!is_identifier_atom(t.text)) syntax_fail(t, "bad atom '" + t.text + "'");
            return var(t.text, kind_of(t.text));
        }
        if (cur_.type != Token::LParen) syntax_fail(cur_, "expected '(' or atom");
        eat();
        if (cur_.type != Token::Atom) syntax_fail(cur_, "expected operator after '('");
        Token op = eat();
        std::vector<Expr> args;
        std::vector<Token> arg_toks;
        while (cur_.type != Token::RParen) {
            if (cur_.type == Token::End) syntax_fail(cur_, "unbalanced parentheses");
            arg_toks.push_back(cur_);
            args.push_back(parse_expr());
        }
        Token close = eat();
        try {
            return build(op, std::move(args), arg_toks, close);
        } catch (const TypeError& e) {
            throw TypeError("line " + std::to_string(op.line) + ":" + std::to_string(op.col) +
                            ": " + e.what());
        }
    }

    Token current() const { return cur_; }
    Token eat() {
        Token t = cur_;
        cur_ = lex_.next();
        return t;
    }

private:
    VarKind kind_of(const std::string& name) const {
        auto it = kinds_.find(name);
        if (it != kinds_.end()) return it->second;
        if (require_declared_) throw TypeError("undeclared variable '" + name + "'");
        return VarKind::Cipher;
    }

    Expr build(const Token& op, std::vector<Expr> args, const std::vector<Token>& arg_toks,
               const Token& close) {
        const std::string& s = op.text;
        auto want = [&](size_t n) {
            if (args.size() != n)
                throw ArityError("line " + std::to_string(op.line) + ":" +
                                 std::to_string(op.col) + ": '" + s + "' expects " +
                                 std::to_string(n) + " operand(s), got " +
                                 std::to_string(args.size()));
        };
        if (s == "+") {
            want(2);
            if (args[0].is_vector() || args[1].is_vector())
                throw TypeError("'+' is scalar; use VecAdd for vectors");
            return add(args[0], args[1]);
        }
        if (s == "*") {
            want(2);
            if (args[0].is_vector() || args[1].is_vector())
                throw TypeError("'*' is scalar; use VecMul for vectors");
            return mul(args[0], args[1]);
        }
        if (s == "-") {
            if (args.size() == 1) return args[0].is_vector() ? vneg(args[0]) : neg(args[0]);
            want(2);
            if (args[0].is_vector() || args[1].is_vector())
                throw TypeError("'-' on vectors is unary only; use VecSub");
            return sub(args[0], args[1]);
        }
        if (s == "Vec") {
            if (args.empty()) throw ArityError("Vec expects at least one slot");
            return vec(std::move(args));
        }
        if (s == "VecNeg") {
            want(1);
            return vneg(args[0]);
        }
        if (s == "VecAdd") {
            want(2);
            return vadd(args[0], args[1]);
        }
        if (s == "VecSub") {
            want(2);
            return vsub(args[0], args[1]);
        }
        if (s == "VecMul") {
            want(2);
            return vmul(args[0], args[1]);
        }
        if (s == "<<" || s == ">>") {
            want(2);
            const Token& st = arg_toks[1];
            if (args[1].op() != Op::Const || args[1].value() < 0)
                syntax_fail(st, "rotation step must be a non-negative integer literal");
            (void)close;
            return s == "<<" ? rot_l(args[0], args[1].value()) : rot_r(args[0], args[1].value());
        }
        syntax_fail(op, "unknown operator '" + s + "'");
    }

    Lexer lex_;
    Token cur_;
    std::unordered_map<std::string, VarKind> kinds_;
    bool require_declared_ = false;
};

}  // namespace

Program parse(const std::string& text) {
    // Peek for the (program ...) header form.
    {
        Lexer peek(text);
        Token a = peek.next();
        Token b = peek.next();
        if (a.type == Token::LParen && b.type == Token::Atom && b.text == "program") {
            Parser p(text);
            p.eat();  // (
            p.eat();  // program
            // (inputs (ct a) (pt b) ...)
            if (p.current().type != Token::LParen) syntax_fail(p.current(), "expected (inputs ...)");
            p.eat();
            Token kw = p.eat();
            if (kw.type != Token::Atom || kw.text != "inputs") syntax_fail(kw, "expected 'inputs'");
            std::vector<InputDecl> decls;
            std::unordered_map<std::string, VarKind> kinds;
            while (p.current().type == Token::LParen) {
                p.eat();
                Token k = p.eat();
                Token nm = p.eat();
                Token cl = p.eat();
                if (k.type != Token::Atom || (k.text != "ct" && k.text != "pt"))
                    syntax_fail(k, "input kind must be 'ct' or 'pt'");
                if (nm.type != Token::Atom || !is_identifier_atom(nm.text))
                    syntax_fail(nm, "expected input name");
                if (cl.type != Token::RParen) syntax_fail(cl, "expected ')' after input");
                VarKind vk = k.text == "ct" ? VarKind::Cipher : VarKind::Plain;
                if (!kinds.emplace(nm.text, vk).second)
                    throw TypeError("duplicate input declaration: " + nm.text);
                decls.push_back({nm.text, vk});
            }
            if (p.current().type != Token::RParen) syntax_fail(p.current(), "expected ')'");
            p.eat();
            // (output-width K)
            if (p.current().type != Token::LParen)
                syntax_fail(p.current(), "expected (output-width K)");
            p.eat();
            Token ow_kw = p.eat();
            if (ow_kw.type != Token::Atom || ow_kw.text != "output-width")
                syntax_fail(ow_kw, "expected 'output-width'");
            Token ow_tok = p.eat();
            if (ow_tok.type != Token::Atom || !is_integer_atom(ow_tok.text))
                syntax_fail(ow_tok, "expected an integer output width");
            int64_t ow = parse_integer(ow_tok);
            if (p.current().type != Token::RParen) syntax_fail(p.current(), "expected ')'");
            p.eat();
            p.restrict_to(std::move(kinds));
            Expr body = p.parse_expr();
            if (p.current().type != Token::RParen) syntax_fail(p.current(), "expected ')'");
            p.eat();
            if (p.current().type != Token::End) syntax_fail(p.current(), "trailing input");
            if (body.is_scalar()) body = vec({body});
            return Program(std::move(decls), std::move(body), static_cast<int>(ow));
        }
    }
    Parser p(text);
    Expr body = p.parse_expr();
    if (p.current().type != Token::End) syntax_fail(p.current(), "trailing input");
    return wrap_program(std::move(body));
}

// ---------------------------------------------------------------------------
// Printer

namespace {

void print_expr(std::ostream& os, const Expr& e) {
    switch (e.op()) {
        case Op::Var: os << e.name(); return;
        case Op::Const: os << e.value(); return;
        case Op::RotL:
            os << "(<< ";
            print_expr(os, e.child(0));
            os << ' ' << e.step() << ')';
            return;
        case Op::Neg:
        case Op::VecNeg:
            os << '(' << (e.op() == Op::Neg ? "-" : "VecNeg") << ' ';
            print_expr(os, e.child(0));
            os << ')';
            return;
        default: break;
    }
    os << '(' << op_token(e.op());
    for (const Expr& c : e.children()) {
        os << ' ';
        print_expr(os, c);
    }
    os << ')';
}

// Bare form round-trips only if the header is fully implied by the body.
bool header_implied(const Program& p) {
    if (p.output_width() != p.width()) return false;
    std::vector<std::string> order = free_variables(p.body());
    if (order.size() != p.inputs().size()) return false;
    for (size_t i = 0; i < order.size(); ++i) {
        if (p.inputs()[i].name != order[i] || p.inputs()[i].kind != VarKind::Cipher) return false;
    }
    return true;
}

}  // namespace

std::string print(const Expr& e) {
    std::ostringstream os;
    print_expr(os, e);
    return os.str();
}

std::string print(const Program& p) {
    std::ostringstream os;
    if (header_implied(p)) {
        print_expr(os, p.body());
        return os.str();
    }
    os << "(program (inputs";
    for (const InputDecl& d : p.inputs())
        os << " (" << (d.kind == VarKind::Cipher ? "ct" : "pt") << ' ' << d.name << ')';
    os << ") (output-width " << p.output_width() << ") ";
    print_expr(os, p.body());
    os << ')';
    return os.str();
}

std::ostream& operator<<(std::ostream& os, const Expr& e) {
    print_expr(os, e);
    return os;
}

}  // namespace fhevec
