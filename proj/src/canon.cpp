#include "fhevec/canon.hpp"

#include <unordered_map>

namespace fhevec {

namespace {

struct Renamer {
    std::unordered_map<std::string, int> vars;
    std::unordered_map<int64_t, int> consts;

    void walk(const Expr& e, std::vector<std::string>& out) {
        switch (e.op()) {
            case Op::Var: {
                auto [it, fresh] = vars.emplace(e.name(), static_cast<int>(vars.size()));
                (void)fresh;
                out.push_back("v" + std::to_string(it->second));
                return;
            }
            case Op::Const: {
                int64_t v = e.value();
                if (v == 0 || v == 1) {
                    out.push_back(std::to_string(v));
                    return;
                }
                auto [it, fresh] = consts.emplace(v, static_cast<int>(consts.size()));
                (void)fresh;
                out.push_back("c" + std::to_string(it->second));
                return;
            }
            case Op::RotL:
                out.push_back("(");
                out.push_back("<<");
                walk(e.child(0), out);
                out.push_back(std::to_string(e.step()));
                out.push_back(")");
                return;
            default:
                out.push_back("(");
                out.push_back(op_token(e.op()));
                for (const Expr& c : e.children()) walk(c, out);
                out.push_back(")");
                return;
        }
    }
};

}  // namespace

TokenSeq canon_tokens(const Expr& e) {
    TokenSeq seq;
    Renamer r;
    r.walk(e, seq.tokens);
    return seq;
}

TokenSeq canon_tokens(const Program& p) { return canon_tokens(p.body()); }

std::string canon_key(const Expr& e) {
    TokenSeq seq = canon_tokens(e);
    std::string key;
    for (size_t i = 0; i < seq.tokens.size(); ++i) {
        if (i) key += ' ';
        key += seq.tokens[i];
    }
    return key;
}

std::string canon_key(const Program& p) { return canon_key(p.body()); }

}  // namespace fhevec
