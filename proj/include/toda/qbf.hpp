#pragma once

#include <toda/formula.hpp>

#include <cstdlib>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace toda {

enum class Quantifier : std::uint8_t { Exists, Forall };

struct Block {
    Quantifier q = Quantifier::Exists;
    std::vector<Var> vars;
    friend bool operator==(const Block&, const Block&) = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised when a reduction is asked for an open formula.
class NotASentence : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct QbfInstance {
    std::vector<Block> blocks;  // alternating after construction
    Term matrix = Term::constant(true);
    std::uint32_t num_vars = 0;   // declared variable count (ids 1..num_vars)
    std::vector<Var> free;        // declared but unquantified variables occurring in the matrix
    std::vector<std::vector<int>> clauses;  // original clauses when parsed from QDIMACS

    [[nodiscard]] std::size_t depth() const noexcept { return blocks.size(); }
    [[nodiscard]] bool is_sentence() const noexcept { return free.empty(); }

    void require_sentence() const {
        if (!free.empty())
            throw NotASentence("formula has " + std::to_string(free.size()) + " free variable(s), e.g. x" +
                               std::to_string(free.front().id));
    }

    [[nodiscard]] std::size_t quantified_count() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.vars.size();
        return n;
    }
};

/// Drops empty blocks and merges neighbours with the same quantifier.
inline std::vector<Block> merge_blocks(std::vector<Block> in) {
    std::vector<Block> out;
    for (auto& b : in) {
        if (b.vars.empty()) continue;
        if (!out.empty() && out.back().q == b.q) {
            out.back().vars.insert(out.back().vars.end(), b.vars.begin(), b.vars.end());
        } else {
            out.push_back(std::move(b));
        }
    }
    return out;
}

inline Term clauses_to_term(const std::vector<std::vector<int>>& clauses) {
    if (clauses.empty()) return Term::constant(true);
    std::vector<Term> cs;
    cs.reserve(clauses.size());
    for (const auto& c : clauses) {
        if (c.empty()) return Term::constant(false);
        std::vector<Term> ls;
        ls.reserve(c.size());
        for (int l : c) ls.push_back(Term::literal(Var{static_cast<std::uint32_t>(std::abs(l))}, l < 0));
        cs.push_back(ls.size() == 1 ? ls.front() : mk_or(std::move(ls)));
    }
    return cs.size() == 1 ? cs.front() : mk_and(std::move(cs));
}

/// Builds an instance from a prefix and a matrix; free variables are computed from the matrix.
inline QbfInstance make_instance(std::vector<Block> prefix, Term matrix, std::uint32_t num_vars = 0) {
    QbfInstance q;
    q.blocks = merge_blocks(std::move(prefix));
    q.matrix = std::move(matrix);
    std::set<Var> bound;
    std::uint32_t top = 0;
    for (const auto& b : q.blocks)
        for (Var v : b.vars) {
            if (!bound.insert(v).second) throw std::invalid_argument("variable x" + std::to_string(v.id) + " quantified twice");
            top = std::max(top, v.id);
        }
    for (Var v : q.matrix.free_vars()) {
        if (!bound.count(v)) q.free.push_back(v);
        top = std::max(top, v.id);
    }
    q.num_vars = std::max(num_vars, top);
    return q;
}

namespace detail {

inline std::vector<long long> parse_ints(std::string_view rest, std::size_t lineno) {
    std::vector<long long> out;
    std::istringstream is{std::string(rest)};
    std::string tok;
    while (is >> tok) {
        char* end = nullptr;
        long long v = std::strtoll(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0') throw ParseError(lineno, "not an integer: '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

/// Reads the QDIMACS subset: comments, `p cnf V C`, `a`/`e` lines and clause lines.
inline QbfInstance parse_qdimacs(std::string_view text) {
    std::vector<Block> prefix;
    std::vector<std::vector<int>> clauses;
    std::optional<std::pair<long long, long long>> header;
    std::set<std::uint32_t> quantified;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos) continue;
        line.remove_prefix(first);
        char c = line.front();
        if (c == 'c') continue;
        if (c == 'p') {
            if (header) throw ParseError(lineno, "duplicate header");
            std::istringstream is{std::string(line)};
            std::string p, fmt, extra;
            long long v = -1, n = -1;
            if (!(is >> p >> fmt >> v >> n) || p != "p" || fmt != "cnf" || v < 0 || n < 0 || (is >> extra))
                throw ParseError(lineno, "malformed header, expected 'p cnf <vars> <clauses>'");
            header = std::make_pair(v, n);
            continue;
        }
        if (!header) throw ParseError(lineno, "missing 'p cnf' header");
        auto check_var = [&](long long v) {
            if (v == 0) return;
            long long a = v < 0 ? -v : v;
            if (header && a > header->first) throw ParseError(lineno, "variable " + std::to_string(a) + " out of range");
            if (a > 0x7fffffffLL) throw ParseError(lineno, "variable " + std::to_string(a) + " out of range");
        };
        if (c == 'a' || c == 'e') {
            if (!clauses.empty()) throw ParseError(lineno, "quantifier line after clauses");
            if (line.size() > 1 && line[1] != ' ' && line[1] != '\t') throw ParseError(lineno, "malformed quantifier line");
            auto ints = detail::parse_ints(line.substr(1), lineno);
            if (ints.empty() || ints.back() != 0) throw ParseError(lineno, "quantifier line not terminated by 0");
            ints.pop_back();
            Block b{c == 'a' ? Quantifier::Forall : Quantifier::Exists, {}};
            for (long long v : ints) {
                if (v <= 0) throw ParseError(lineno, "quantified variables must be positive");
                check_var(v);
                if (!quantified.insert(static_cast<std::uint32_t>(v)).second)
                    throw ParseError(lineno, "variable " + std::to_string(v) + " quantified twice");
                b.vars.push_back(Var{static_cast<std::uint32_t>(v)});
            }
            prefix.push_back(std::move(b));
            continue;
        }
        auto ints = detail::parse_ints(line, lineno);
        if (ints.empty() || ints.back() != 0) throw ParseError(lineno, "clause line not terminated by 0");
        ints.pop_back();
        std::vector<int> clause;
        for (long long v : ints) {
            if (v == 0) throw ParseError(lineno, "stray 0 inside clause");
            check_var(v);
            clause.push_back(static_cast<int>(v));
        }
        clauses.push_back(std::move(clause));
    }
    if (header && static_cast<long long>(clauses.size()) != header->second)
        throw ParseError(lineno, "header declares " + std::to_string(header->second) + " clauses, found " +
                                     std::to_string(clauses.size()));
    std::uint32_t declared = header ? static_cast<std::uint32_t>(header->first) : 0;
    QbfInstance q = make_instance(std::move(prefix), clauses_to_term(clauses), declared);
    q.clauses = std::move(clauses);
    return q;
}

/// Prints a CNF-matrix instance back to QDIMACS.
inline std::string to_qdimacs(const QbfInstance& q) {
    std::ostringstream os;
    os << "p cnf " << q.num_vars << ' ' << q.clauses.size() << '\n';
    for (const auto& b : q.blocks) {
        os << (b.q == Quantifier::Forall ? 'a' : 'e');
        for (Var v : b.vars) os << ' ' << v.id;
        os << " 0\n";
    }
    for (const auto& c : q.clauses) {
        for (int l : c) os << l << ' ';
        os << "0\n";
    }
    return os.str();
}

inline std::string to_string(const QbfInstance& q) {
    std::ostringstream os;
    for (const auto& b : q.blocks) {
        os << (b.q == Quantifier::Forall ? "A" : "E");
        for (Var v : b.vars) os << " x" << v.id;
        os << ". ";
    }
    print_term(os, q.matrix);
    return os.str();
}

inline bool same_instance(const QbfInstance& a, const QbfInstance& b) {
    return a.blocks == b.blocks && a.num_vars == b.num_vars && a.free == b.free && same_structure(a.matrix, b.matrix);
}

// ---- staged formulas -------------------------------------------------------

/// One remaining outer block, always existential; `negated` marks a negation directly outside it.
struct OuterBlock {
    std::vector<Var> vars;
    bool negated = false;
};

/// [neg] E x1 [neg] E x2 ... (+) parity_vars . matrix
struct StagedFormula {
    std::vector<OuterBlock> outer;
    std::vector<Var> parity_vars;
    Term matrix = Term::constant(true);
};

}  // namespace toda
