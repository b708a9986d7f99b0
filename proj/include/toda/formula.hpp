#pragma once

#include <boost/container/small_vector.hpp>

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace toda {

/// A propositional variable. Ids start at 1; 0 is never issued.
struct Var {
    std::uint32_t id = 0;
    friend constexpr auto operator<=>(Var, Var) = default;
};

struct Lit {
    Var var;
    bool negated = false;
    friend constexpr bool operator==(Lit, Lit) = default;
};

/// Hands out fresh variables. Ids are strictly increasing and never reused.
class VarSupply {
public:
    explicit VarSupply(std::uint32_t first_free = 1) : next_(first_free == 0 ? 1 : first_free) {}

    Var fresh() {
        if (next_ == std::numeric_limits<std::uint32_t>::max()) throw std::overflow_error("variable ids exhausted");
        return Var{next_++};
    }

    std::vector<Var> fresh(std::size_t n) {
        std::vector<Var> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(fresh());
        return out;
    }

    [[nodiscard]] std::uint32_t peek() const noexcept { return next_; }

private:
    std::uint32_t next_;
};

enum class Kind : std::uint8_t { Const, Literal, Not, And, Or, Xor };

class Term;

/// Sorted variable set with inline storage for the common one- and two-element cases.
using VarSet = boost::container::small_vector<Var, 2>;

namespace detail {

inline std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
    return a > std::numeric_limits<std::uint64_t>::max() - b ? std::numeric_limits<std::uint64_t>::max() : a + b;
}

template <class V>
inline V sorted_unique(V v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace detail

struct Node;

/// Immutable, shared handle to a formula node.
class Term {
public:
    Term();

    static Term constant(bool value) {
        static const Term t = make_const(true);
        static const Term f = make_const(false);
        return value ? t : f;
    }

    static Term literal(Var v, bool negated = false);

    static Term literal(Lit l) { return literal(l.var, l.negated); }

    [[nodiscard]] const Node& node() const noexcept { return *node_; }
    [[nodiscard]] Kind kind() const noexcept;
    [[nodiscard]] const VarSet& free_vars() const noexcept;
    [[nodiscard]] std::uint64_t size() const noexcept;
    [[nodiscard]] const boost::container::small_vector<Term, 2>& children() const noexcept;
    [[nodiscard]] const void* id() const noexcept { return node_.get(); }
    [[nodiscard]] bool is_const(bool v) const noexcept;

    /// Wraps a fully built node; callers keep fv, size and flags consistent.
    static Term from_node(std::shared_ptr<const Node> n) { return Term(std::move(n)); }

    friend Term mk_not(Term child);
    friend Term mk_nary(Kind kind, std::vector<Term> children);
    friend Term mk_xor(std::vector<Lit> lits, bool rhs);

private:
    explicit Term(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    static Term make_const(bool value);
    std::shared_ptr<const Node> node_;
};

struct Node {
    Kind kind = Kind::Const;
    bool value = false;          // Const value, or the rhs bit of an Xor
    Lit lit{};                   // Literal
    boost::container::small_vector<Term, 2> children;  // Not / And / Or
    std::vector<Lit> xor_lits;                          // Xor
    VarSet fv;                                          // sorted free variables
    std::uint64_t size = 1;      // tree size, saturating
    bool disjoint = true;        // And/Or: children have pairwise disjoint free variables
};


inline Term::Term() : Term(constant(true)) {}
inline Kind Term::kind() const noexcept { return node_->kind; }
inline const VarSet& Term::free_vars() const noexcept { return node_->fv; }
inline std::uint64_t Term::size() const noexcept { return node_->size; }
inline const boost::container::small_vector<Term, 2>& Term::children() const noexcept { return node_->children; }
inline bool Term::is_const(bool v) const noexcept { return node_->kind == Kind::Const && node_->value == v; }

inline Term Term::make_const(bool value) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Const;
    n->value = value;
    return Term(std::move(n));
}

inline Term Term::literal(Var v, bool negated) {
    if (v.id == 0) throw std::invalid_argument("variable id 0");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Literal;
    n->lit = Lit{v, negated};
    n->fv = {v};
    n->size = negated ? 2 : 1;
    return Term(std::move(n));
}

inline std::span<const Var> as_span(const VarSet& s) noexcept { return {s.data(), s.size()}; }

inline Term mk_not(Term child) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Not;
    n->fv = child.free_vars();
    n->size = detail::sat_add(1, child.size());
    n->children.push_back(std::move(child));
    return Term(std::move(n));
}

inline Term mk_nary(Kind kind, std::vector<Term> children) {
    if (kind != Kind::And && kind != Kind::Or) throw std::invalid_argument("mk_nary expects And or Or");
    if (children.empty()) throw std::invalid_argument("And/Or need at least one child");
    auto n = std::make_shared<Node>();
    n->kind = kind;
    std::uint64_t size = 1;
    VarSet fv;
    for (const auto& c : children) {
        size = detail::sat_add(size, c.size());
        fv.insert(fv.end(), c.free_vars().begin(), c.free_vars().end());
    }
    const std::size_t total = fv.size();
    n->fv = detail::sorted_unique(std::move(fv));
    n->disjoint = n->fv.size() == total;
    n->size = size;
    n->children.assign(std::make_move_iterator(children.begin()), std::make_move_iterator(children.end()));
    return Term(std::move(n));
}

inline Term mk_and(std::vector<Term> children) { return mk_nary(Kind::And, std::move(children)); }
inline Term mk_or(std::vector<Term> children) { return mk_nary(Kind::Or, std::move(children)); }
inline Term mk_and(Term a, Term b) { return mk_and(std::vector<Term>{std::move(a), std::move(b)}); }
inline Term mk_or(Term a, Term b) { return mk_or(std::vector<Term>{std::move(a), std::move(b)}); }

/// XOR constraint: true iff lit_1 ^ ... ^ lit_k == rhs. With no literals it reads 0 == rhs.
inline Term mk_xor(std::vector<Lit> lits, bool rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Xor;
    n->value = rhs;
    std::uint64_t size = 1;
    VarSet fv;
    for (const auto& l : lits) {
        if (l.var.id == 0) throw std::invalid_argument("variable id 0");
        size += l.negated ? 2 : 1;
        fv.push_back(l.var);
    }
    n->fv = detail::sorted_unique(std::move(fv));
    if (n->fv.size() != lits.size()) throw std::invalid_argument("xor constraint repeats a variable");
    n->size = size;
    n->xor_lits = std::move(lits);
    return Term(std::move(n));
}

inline Term conj_of(std::span<const Var> vars) {
    if (vars.empty()) return Term::constant(true);
    if (vars.size() == 1) return Term::literal(vars[0]);
    std::vector<Term> ls;
    ls.reserve(vars.size());
    for (Var v : vars) ls.push_back(Term::literal(v));
    return mk_and(std::move(ls));
}

inline std::uint64_t term_size(const Term& t) noexcept { return t.size(); }

template <class A, class B>
inline bool disjoint(const A& a, const B& b) {
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j) return false;
        if (*i < *j) ++i; else ++j;
    }
    return true;
}

// ---- counting operators ----------------------------------------------------

/// [F & z] | [!z & G] with z fresh.
inline Term plus(Term f, Term g, VarSupply& supply) {
    Var z = supply.fresh();
    return mk_or(mk_and(std::move(f), Term::literal(z)), mk_and(Term::literal(z, true), std::move(g)));
}

/// F + 1 over `varset`: the all-true assignment of varset, selected by !z, adds one model.
inline Term plus_one(Term f, std::span<const Var> varset, VarSupply& supply) {
    if (varset.empty()) throw std::invalid_argument("plus_one needs a nonempty witness variable set");
    return plus(std::move(f), conj_of(varset), supply);
}

/// F & G over disjoint variable sets. Variables in `shared` may occur on both sides.
inline Term times(Term f, Term g, std::span<const Var> shared = {}) {
    std::vector<Var> sh(shared.begin(), shared.end());
    sh = detail::sorted_unique(std::move(sh));
    std::vector<Var> a, b;
    std::set_difference(f.free_vars().begin(), f.free_vars().end(), sh.begin(), sh.end(), std::back_inserter(a));
    std::set_difference(g.free_vars().begin(), g.free_vars().end(), sh.begin(), sh.end(), std::back_inserter(b));
    if (!disjoint(a, b)) throw std::invalid_argument("times: operands share variables");
    return mk_and(std::move(f), std::move(g));
}

/// Product of many operands without nesting: one And node.
inline Term times_all(std::vector<Term> fs) {
    if (fs.empty()) return Term::constant(true);
    if (fs.size() == 1) return fs.front();
    return mk_and(std::move(fs));
}

// ---- substitution ----------------------------------------------------------

using VarMap = std::unordered_map<std::uint32_t, Var>;

namespace detail {

/// Dense old-id -> new-id table; 0 means unmapped.
class DenseMap {
public:
    explicit DenseMap(const VarMap& m) {
        std::uint32_t top = 0;
        for (const auto& [k, _] : m) top = std::max(top, k);
        to_.assign(static_cast<std::size_t>(top) + 1, 0);
        for (const auto& [k, v] : m) to_[k] = v.id;
    }
    [[nodiscard]] std::uint32_t operator()(std::uint32_t id) const { return id < to_.size() ? to_[id] : 0; }
    [[nodiscard]] Lit operator()(Lit l) const {
        const std::uint32_t t = (*this)(l.var.id);
        return t ? Lit{Var{t}, l.negated} : l;
    }

private:
    std::vector<std::uint32_t> to_;
};

}  // namespace detail

/// Rebuilds `t` with variables replaced per `map` (an injective renaming onto unused ids).
/// Subterms untouched by the map are shared with the input.
inline Term substitute(const Term& t, const VarMap& map) {
    const detail::DenseMap dm(map);
    auto go = [&](auto&& self, const Term& u) -> Term {
        const Node& n = u.node();
        if (std::none_of(n.fv.begin(), n.fv.end(), [&](Var v) { return dm(v.id) != 0; })) return u;
        auto r = std::make_shared<Node>();
        r->kind = n.kind;
        r->value = n.value;
        r->size = n.size;
        r->disjoint = n.disjoint;
        r->lit = n.kind == Kind::Literal ? dm(n.lit) : n.lit;
        r->fv.reserve(n.fv.size());
        for (Var v : n.fv) {
            const std::uint32_t m = dm(v.id);
            r->fv.push_back(m ? Var{m} : v);
        }
        std::sort(r->fv.begin(), r->fv.end());
        r->fv.erase(std::unique(r->fv.begin(), r->fv.end()), r->fv.end());
        if (n.kind == Kind::Xor) {
            r->xor_lits.reserve(n.xor_lits.size());
            for (Lit l : n.xor_lits) r->xor_lits.push_back(dm(l));
        }
        r->children.reserve(n.children.size());
        for (const auto& c : n.children) r->children.push_back(self(self, c));
        return Term::from_node(std::move(r));
    };
    return go(go, t);
}

/// Replaces each variable of `vars` by a fresh one, allocated in list order.
inline std::pair<Term, VarMap> rename_fresh(const Term& f, std::span<const Var> vars, VarSupply& supply) {
    VarMap map;
    for (Var v : vars) {
        if (map.count(v.id) == 0) map.emplace(v.id, supply.fresh());
    }
    if (map.empty()) return {f, map};
    return {substitute(f, map), std::move(map)};
}

// ---- evaluation ------------------------------------------------------------

/// Assignment indexed by variable id; entries outside the vector read as false.
using Assignment = std::vector<std::uint8_t>;

inline bool lit_value(Lit l, const Assignment& a) {
    bool v = l.var.id < a.size() && a[l.var.id] != 0;
    return v != l.negated;
}

inline bool evaluate(const Term& t, const Assignment& a) {
    const Node& n = t.node();
    switch (n.kind) {
        case Kind::Const: return n.value;
        case Kind::Literal: return lit_value(n.lit, a);
        case Kind::Not: return !evaluate(n.children[0], a);
        case Kind::And:
            for (const auto& c : n.children)
                if (!evaluate(c, a)) return false;
            return true;
        case Kind::Or:
            for (const auto& c : n.children)
                if (evaluate(c, a)) return true;
            return false;
        case Kind::Xor: {
            bool x = false;
            for (Lit l : n.xor_lits) x ^= lit_value(l, a);
            return x == n.value;
        }
    }
    return false;
}

// ---- printing --------------------------------------------------------------

inline void print_term(std::ostream& os, const Term& t) {
    const Node& n = t.node();
    auto lit = [&](Lit l) { os << (l.negated ? "-" : "") << 'x' << l.var.id; };
    switch (n.kind) {
        case Kind::Const: os << (n.value ? "T" : "F"); return;
        case Kind::Literal: lit(n.lit); return;
        case Kind::Not: os << "!("; print_term(os, n.children[0]); os << ')'; return;
        case Kind::And:
        case Kind::Or: {
            os << '(';
            const char* sep = n.kind == Kind::And ? " & " : " | ";
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i) os << sep;
                print_term(os, n.children[i]);
            }
            os << ')';
            return;
        }
        case Kind::Xor:
            os << "xor(";
            for (std::size_t i = 0; i < n.xor_lits.size(); ++i) {
                if (i) os << ' ';
                lit(n.xor_lits[i]);
            }
            os << " = " << (n.value ? 1 : 0) << ')';
            return;
    }
}

inline std::string to_string(const Term& t) {
    std::ostringstream os;
    print_term(os, t);
    return os.str();
}

/// Structural equality (not semantic).
inline bool same_structure(const Term& a, const Term& b) {
    if (a.id() == b.id()) return true;
    const Node& x = a.node();
    const Node& y = b.node();
    if (x.kind != y.kind || x.value != y.value) return false;
    switch (x.kind) {
        case Kind::Const: return true;
        case Kind::Literal: return x.lit == y.lit;
        case Kind::Xor: return x.xor_lits == y.xor_lits;
        default:
            if (x.children.size() != y.children.size()) return false;
            for (std::size_t i = 0; i < x.children.size(); ++i)
                if (!same_structure(x.children[i], y.children[i])) return false;
            return true;
    }
}

}  // namespace toda
