#pragma once

#include <toda/formula.hpp>
#include <toda/reduce.hpp>
#include <toda/sieve.hpp>

#include <cstdlib>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace toda {

struct CnfFormula {
    std::uint32_t num_vars = 0;
    std::vector<std::vector<int>> clauses;
    std::vector<std::string> comments;

    [[nodiscard]] bool is_canonical_false() const {
        return clauses.size() == 1 && clauses.front().empty();
    }
};

enum class HashCnfMode : std::uint8_t { DoNothing, TseytinHash, ParityHash };

/// CNF plus the term variables its first |scope| DIMACS variables stand for.
struct EncodedCnf {
    CnfFormula cnf;
    std::vector<Var> scope;  // DIMACS variable i is scope[i-1]; later variables are gate outputs
};

namespace detail {

class TseytinBuilder {
public:
    TseytinBuilder(std::span<const Var> scope, HashCnfMode mode) : mode_(mode) {
        for (Var v : scope) {
            if (!index_.emplace(v.id, static_cast<int>(index_.size() + 1)).second)
                throw std::invalid_argument("tseytin: scope repeats a variable");
        }
        cnf_.num_vars = static_cast<std::uint32_t>(index_.size());
    }

    CnfFormula finish(const Term& root) {
        if (root.kind() == Kind::Const) {
            if (!root.node().value) cnf_.clauses.push_back({});
            return std::move(cnf_);
        }
        cnf_.clauses.push_back({encode(root)});
        return std::move(cnf_);
    }

private:
    int fresh() { return static_cast<int>(++cnf_.num_vars); }

    int lit(Lit l) const {
        auto it = index_.find(l.var.id);
        if (it == index_.end()) throw std::invalid_argument("tseytin: x" + std::to_string(l.var.id) + " is not in scope");
        return l.negated ? -it->second : it->second;
    }

    int true_lit() {
        if (true_ == 0) {
            true_ = fresh();
            cnf_.clauses.push_back({true_});
        }
        return true_;
    }

    int gate_and(const std::vector<int>& in) {
        const int a = fresh();
        std::vector<int> big{a};
        for (int x : in) {
            cnf_.clauses.push_back({-a, x});
            big.push_back(-x);
        }
        cnf_.clauses.push_back(std::move(big));
        return a;
    }

    int gate_or(const std::vector<int>& in) {
        std::vector<int> neg;
        neg.reserve(in.size());
        for (int x : in) neg.push_back(-x);
        return -gate_and(neg);
    }

    int gate_xor(int x, int y) {
        if (mode_ == HashCnfMode::DoNothing) return gate_or({gate_and({x, -y}), gate_and({-x, y})});
        const int a = fresh();
        cnf_.clauses.push_back({-a, x, y});
        cnf_.clauses.push_back({-a, -x, -y});
        cnf_.clauses.push_back({a, -x, y});
        cnf_.clauses.push_back({a, x, -y});
        return a;
    }

    int encode(const Term& t) {
        if (auto it = memo_.find(t.id()); it != memo_.end()) return it->second;
        const Node& n = t.node();
        int out = 0;
        switch (n.kind) {
            case Kind::Const: out = n.value ? true_lit() : -true_lit(); break;
            case Kind::Literal: out = lit(n.lit); break;
            case Kind::Not: out = -encode(n.children[0]); break;
            case Kind::And:
            case Kind::Or: {
                std::vector<int> in;
                in.reserve(n.children.size());
                for (const auto& c : n.children) in.push_back(encode(c));
                out = n.kind == Kind::And ? gate_and(in) : gate_or(in);
                break;
            }
            case Kind::Xor: {
                if (n.xor_lits.empty()) {
                    out = n.value ? -true_lit() : true_lit();
                    break;
                }
                int acc = lit(n.xor_lits[0]);
                for (std::size_t i = 1; i < n.xor_lits.size(); ++i) acc = gate_xor(acc, lit(n.xor_lits[i]));
                out = n.value ? acc : -acc;
                break;
            }
        }
        memo_.emplace(t.id(), out);
        return out;
    }

    HashCnfMode mode_;
    CnfFormula cnf_;
    std::unordered_map<std::uint32_t, int> index_;
    std::unordered_map<const void*, int> memo_;
    int true_ = 0;
};

}  // namespace detail

/// Full biconditional gate encoding. Scope variables become DIMACS 1..|scope| in order;
/// every gate variable is functionally determined, so #CNF = #term over scope.
inline EncodedCnf tseytin(const Term& t, std::span<const Var> scope, HashCnfMode mode = HashCnfMode::TseytinHash) {
    detail::TseytinBuilder b(scope, mode);
    EncodedCnf out;
    out.cnf = b.finish(t);
    out.scope.assign(scope.begin(), scope.end());
    return out;
}

inline EncodedCnf tseytin(const Term& t, HashCnfMode mode = HashCnfMode::TseytinHash) {
    return tseytin(t, as_span(t.free_vars()), mode);
}

/// (C_i | -x) for F's clauses, (D_j | x) for G's.
inline CnfFormula plus_cnf(const CnfFormula& f, const CnfFormula& g, int x_new) {
    if (x_new <= 0) throw std::invalid_argument("plus_cnf: x_new must be a positive variable");
    for (const auto* c : {&f, &g})
        for (const auto& cl : c->clauses)
            for (int l : cl)
                if (std::abs(l) == x_new) throw std::invalid_argument("plus_cnf: x_new already used");
    CnfFormula out;
    out.num_vars = std::max({f.num_vars, g.num_vars, static_cast<std::uint32_t>(x_new)});
    out.clauses.reserve(f.clauses.size() + g.clauses.size());
    for (auto cl : f.clauses) {
        cl.push_back(-x_new);
        out.clauses.push_back(std::move(cl));
    }
    for (auto cl : g.clauses) {
        cl.push_back(x_new);
        out.clauses.push_back(std::move(cl));
    }
    return out;
}

// ---- parity hash -----------------------------------------------------------

struct ParityRewrite {
    Term term;
    std::vector<Var> selectors;  // must join the counting scope
};

namespace detail {

/// Two children, each an And holding a direct literal on one shared variable, opposite signs.
inline bool is_plus_shaped(const Node& n) {
    if (n.kind != Kind::Or || n.children.size() != 2) return false;
    auto lits = [](const Term& t) {
        std::vector<Lit> out;
        if (t.kind() == Kind::And)
            for (const auto& c : t.children())
                if (c.kind() == Kind::Literal) out.push_back(c.node().lit);
        return out;
    };
    for (Lit a : lits(n.children[0]))
        for (Lit b : lits(n.children[1]))
            if (a.var == b.var && a.negated != b.negated) return true;
    return false;
}

inline Term pin_false(Term t, const std::vector<Var>& vars) {
    if (vars.empty()) return t;
    std::vector<Term> cs;
    cs.reserve(vars.size() + 1);
    cs.push_back(std::move(t));
    for (Var v : vars) cs.push_back(Term::literal(v, true));
    return mk_and(std::move(cs));
}

}  // namespace detail

/// Gadget for one XOR constraint: the number of selector assignments whose leaf holds is the
/// number of true literals (plus one when rhs is 0), so its parity is the constraint's value.
inline ParityRewrite parity_gadget(const std::vector<Lit>& lits, bool rhs, VarSupply& supply) {
    if (lits.empty()) throw std::invalid_argument("parity_hash: constraint with no variables");
    std::vector<Term> leaves;
    leaves.reserve(lits.size() + 1);
    for (Lit l : lits) leaves.push_back(Term::literal(l));
    if (!rhs) leaves.push_back(Term::constant(true));
    SumResult s = sum_terms(leaves, supply);
    return ParityRewrite{std::move(s.term), std::move(s.selectors)};
}

/// Replaces every XOR node by its parity gadget. Branches of a + that lack some of the new
/// selectors get them pinned false, keeping the count of every branch intact modulo 2.
inline ParityRewrite parity_hash_rewrite(const Term& root, VarSupply& supply) {
    std::unordered_map<const void*, bool> untouched;
    auto go = [&](auto&& self, const Term& t) -> ParityRewrite {
        if (untouched.count(t.id())) return ParityRewrite{t, {}};
        const Node& n = t.node();
        ParityRewrite r;
        switch (n.kind) {
            case Kind::Const:
            case Kind::Literal: r.term = t; break;
            case Kind::Xor:
                if (n.xor_lits.empty()) r.term = Term::constant(!n.value);
                else r = parity_gadget(n.xor_lits, n.value, supply);
                break;
            case Kind::Not: {
                ParityRewrite c = self(self, n.children[0]);
                if (!c.selectors.empty()) throw std::invalid_argument("parity_hash: XOR constraint under negation");
                r.term = t;
                break;
            }
            case Kind::And:
            case Kind::Or: {
                std::vector<ParityRewrite> cs;
                cs.reserve(n.children.size());
                bool changed = false;
                for (const auto& c : n.children) {
                    cs.push_back(self(self, c));
                    changed = changed || !cs.back().selectors.empty();
                }
                if (!changed) {
                    r.term = t;
                    break;
                }
                if (n.kind == Kind::Or && !detail::is_plus_shaped(n))
                    throw std::invalid_argument("parity_hash: XOR constraint under a non-exclusive disjunction");
                for (const auto& c : cs) r.selectors.insert(r.selectors.end(), c.selectors.begin(), c.selectors.end());
                std::vector<Term> kids;
                kids.reserve(cs.size());
                for (auto& c : cs) {
                    if (n.kind == Kind::Or) {
                        std::vector<Var> missing;
                        for (Var v : r.selectors)
                            if (std::find(c.selectors.begin(), c.selectors.end(), v) == c.selectors.end())
                                missing.push_back(v);
                        kids.push_back(detail::pin_false(std::move(c.term), missing));
                    } else {
                        kids.push_back(std::move(c.term));
                    }
                }
                r.term = mk_nary(n.kind, std::move(kids));
                break;
            }
        }
        if (r.selectors.empty()) untouched.emplace(t.id(), true);
        return r;
    };
    return go(go, root);
}

/// CNF fragment for h alone, over its block (and gadget selectors in parity mode).
inline EncodedCnf hash_to_cnf(const HashFunc& h, HashCnfMode mode, VarSupply& supply) {
    std::vector<Var> scope = h.block;
    if (mode != HashCnfMode::ParityHash) return tseytin(hash_term(h), scope, mode);
    std::vector<Term> parts;
    for (const auto& g : h.constraints) {
        if (g.lits.empty()) {
            parts.push_back(Term::constant(!g.rhs));
            continue;
        }
        ParityRewrite r = parity_gadget(g.lits, g.rhs, supply);
        scope.insert(scope.end(), r.selectors.begin(), r.selectors.end());
        parts.push_back(std::move(r.term));
    }
    Term t = parts.empty() ? Term::constant(true) : parts.size() == 1 ? parts.front() : mk_and(std::move(parts));
    return tseytin(t, scope, HashCnfMode::TseytinHash);
}

/// Parity formula after the hash-mode rewrite (identity unless parity_hash).
inline ParityFormula apply_hash_mode(const ParityFormula& f, HashCnfMode mode, VarSupply& supply) {
    if (mode != HashCnfMode::ParityHash) return f;
    ParityRewrite r = parity_hash_rewrite(f.term, supply);
    ParityFormula out{std::move(r.term), f.scope};
    out.scope.insert(out.scope.end(), r.selectors.begin(), r.selectors.end());
    return out;
}

inline EncodedCnf encode(const ParityFormula& f, HashCnfMode mode, VarSupply& supply) {
    ParityFormula g = apply_hash_mode(f, mode, supply);
    return tseytin(g.term, g.scope, mode == HashCnfMode::ParityHash ? HashCnfMode::TseytinHash : mode);
}

// ---- DIMACS ----------------------------------------------------------------

inline std::string emit_dimacs(const CnfFormula& c) {
    std::string out;
    for (const auto& line : c.comments) {
        out += "c ";
        out += line;
        out += '\n';
    }
    out += "p cnf " + std::to_string(c.num_vars) + ' ' + std::to_string(c.clauses.size()) + '\n';
    for (const auto& cl : c.clauses) {
        for (int l : cl) {
            out += std::to_string(l);
            out += ' ';
        }
        out += "0\n";
    }
    return out;
}

inline CnfFormula parse_dimacs(std::string_view text) {
    CnfFormula c;
    bool header = false;
    long long declared = 0;
    std::vector<int> cur;
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;
        if (tok == "c") {
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            c.comments.push_back(rest);
            continue;
        }
        if (tok == "p") {
            std::string fmt;
            long long v = -1;
            if (header || !(ls >> fmt >> v >> declared) || fmt != "cnf" || v < 0 || declared < 0)
                throw ParseError(lineno, "malformed DIMACS header");
            c.num_vars = static_cast<std::uint32_t>(v);
            header = true;
            continue;
        }
        if (!header) throw ParseError(lineno, "clause before header");
        do {
            char* end = nullptr;
            long long x = std::strtoll(tok.c_str(), &end, 10);
            if (*end != '\0') throw ParseError(lineno, "not an integer: '" + tok + "'");
            if (x == 0) {
                c.clauses.push_back(std::move(cur));
                cur.clear();
            } else {
                if (std::llabs(x) > c.num_vars) throw ParseError(lineno, "variable out of range");
                cur.push_back(static_cast<int>(x));
            }
        } while (ls >> tok);
    }
    if (!cur.empty()) throw ParseError(lineno, "last clause not terminated by 0");
    if (header && static_cast<long long>(c.clauses.size()) != declared)
        throw ParseError(lineno, "clause count does not match header");
    return c;
}

}  // namespace toda
