#pragma once

// Hand-rolled random generators shared by the unit, property and acceptance suites.

#include <toda/counting.hpp>
#include <toda/qbf.hpp>
#include <toda/rng.hpp>

#include <vector>

namespace toda::testgen {

inline Lit random_lit(SeededRng& r, std::uint32_t nvars, std::uint32_t first = 1) {
    return Lit{Var{first + static_cast<std::uint32_t>(r.uniform(0, nvars - 1))}, r.bit()};
}

/// Random term over variables first..first+nvars-1 with the given node budget.
inline Term random_term(SeededRng& r, std::uint32_t nvars, int depth, std::uint32_t first = 1) {
    const auto pick = depth <= 0 ? r.uniform(0, 1) : r.uniform(0, 6);
    switch (pick) {
        case 0:
        case 1: return Term::literal(random_lit(r, nvars, first));
        case 2: return mk_not(random_term(r, nvars, depth - 1, first));
        case 3:
        case 4: {
            std::vector<Term> cs;
            const auto k = r.uniform(2, 3);
            for (std::uint64_t i = 0; i < k; ++i) cs.push_back(random_term(r, nvars, depth - 1, first));
            return pick == 3 ? mk_and(std::move(cs)) : mk_or(std::move(cs));
        }
        case 5: {
            std::vector<Lit> ls;
            for (std::uint32_t v = 0; v < nvars; ++v)
                if (r.bit()) ls.push_back(Lit{Var{first + v}, r.bit()});
            if (ls.empty()) ls.push_back(random_lit(r, nvars, first));
            return mk_xor(std::move(ls), r.bit());
        }
        default: return r.bit() ? Term::constant(r.uniform(0, 3) != 0) : Term::literal(random_lit(r, nvars, first));
    }
}

inline std::vector<Var> var_range(std::uint32_t first, std::uint32_t n) {
    std::vector<Var> v;
    for (std::uint32_t i = 0; i < n; ++i) v.push_back(Var{first + i});
    return v;
}

inline std::vector<std::vector<int>> random_cnf(SeededRng& r, std::uint32_t nvars, std::size_t nclauses, std::size_t width) {
    std::vector<std::vector<int>> cls;
    for (std::size_t c = 0; c < nclauses; ++c) {
        std::vector<int> cl;
        const auto w = r.uniform(1, width);
        for (std::uint64_t i = 0; i < w; ++i) {
            const int v = static_cast<int>(r.uniform(1, nvars));
            if (std::find(cl.begin(), cl.end(), v) != cl.end() || std::find(cl.begin(), cl.end(), -v) != cl.end()) continue;
            cl.push_back(r.bit() ? v : -v);
        }
        cls.push_back(std::move(cl));
    }
    return cls;
}

/// Random alternating QBF in QDIMACS form: d blocks, nvars variables, CNF matrix.
inline QbfInstance random_qbf(SeededRng& r, std::size_t d, std::uint32_t nvars, std::size_t nclauses,
                              std::optional<Quantifier> outer = std::nullopt) {
    std::vector<std::uint32_t> ids;
    for (std::uint32_t i = 1; i <= nvars; ++i) ids.push_back(i);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[r.uniform(0, i - 1)]);
    // cut points so that every block is nonempty
    std::vector<std::size_t> sizes(d, 1);
    for (std::uint32_t extra = static_cast<std::uint32_t>(nvars - d); extra > 0; --extra) ++sizes[r.uniform(0, d - 1)];
    Quantifier q = outer ? *outer : (r.bit() ? Quantifier::Exists : Quantifier::Forall);
    std::string text = "p cnf " + std::to_string(nvars) + " " + std::to_string(nclauses) + "\n";
    std::size_t pos = 0;
    for (std::size_t b = 0; b < d; ++b) {
        text += q == Quantifier::Exists ? "e" : "a";
        for (std::size_t i = 0; i < sizes[b]; ++i) text += " " + std::to_string(ids[pos++]);
        text += " 0\n";
        q = q == Quantifier::Exists ? Quantifier::Forall : Quantifier::Exists;
    }
    for (const auto& cl : random_cnf(r, nvars, nclauses, 3)) {
        for (int l : cl) text += std::to_string(l) + " ";
        text += "0\n";
    }
    return parse_qdimacs(text);
}

/// Random CNF over n vars that has at least one model.
inline std::vector<std::vector<int>> random_sat_cnf(SeededRng& r, std::uint32_t n, std::size_t nclauses) {
    for (;;) {
        auto cls = random_cnf(r, n, nclauses, 3);
        CnfFormula c{n, cls, {}};
        if (brute_count(c) > 0) return cls;
    }
}

}  // namespace toda::testgen
