#pragma once

// Invariant suites at reduced trial counts, shared by the `selftest` command and the tests.

#include <toda/budget.hpp>
#include <toda/cnf.hpp>
#include <toda/counting.hpp>
#include <toda/sieve.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace toda::selftest {

struct SuiteResult {
    std::string name;
    bool passed = true;
    std::size_t checks = 0;
    std::string detail;  // first failure
    double seconds = 0.0;
};

struct Options {
    std::uint64_t seed = 1;
    double scale = 1.0;  // multiplies trial counts
    MatrixProvider provider = &pair_matrices;
};

namespace detail {

inline std::size_t trials(const Options& o, std::size_t base) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(base) * o.scale)));
}

class Recorder {
public:
    explicit Recorder(std::string name) { r_.name = std::move(name); }
    void check(bool ok, const std::function<std::string()>& what) {
        ++r_.checks;
        if (!ok && r_.passed) {
            r_.passed = false;
            r_.detail = what();
        }
    }
    SuiteResult finish(std::chrono::steady_clock::time_point t0) {
        r_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r_;
    }

private:
    SuiteResult r_;
};

inline Term random_term(SeededRng& r, std::uint32_t first, std::uint32_t n, int depth) {
    const auto lit = [&] { return Term::literal(Var{first + static_cast<std::uint32_t>(r.uniform(0, n - 1))}, r.bit()); };
    if (depth <= 0) return lit();
    switch (r.uniform(0, 5)) {
        case 0: return lit();
        case 1: return mk_not(random_term(r, first, n, depth - 1));
        case 2: return mk_and(random_term(r, first, n, depth - 1), random_term(r, first, n, depth - 1));
        case 3: return mk_or(random_term(r, first, n, depth - 1), random_term(r, first, n, depth - 1));
        case 4: {
            std::vector<Lit> ls;
            for (std::uint32_t v = 0; v < n; ++v)
                if (r.bit()) ls.push_back(Lit{Var{first + v}, r.bit()});
            if (ls.empty()) ls.push_back(Lit{Var{first}, r.bit()});
            return mk_xor(std::move(ls), r.bit());
        }
        default: return mk_or(mk_and(lit(), random_term(r, first, n, depth - 1)), lit());
    }
}

inline std::vector<Var> range(std::uint32_t first, std::uint32_t n) {
    std::vector<Var> v;
    for (std::uint32_t i = 0; i < n; ++i) v.push_back(Var{first + i});
    return v;
}

inline std::vector<Var> join(std::vector<Var> a, std::span<const Var> b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline bool odd(const Term& t, std::span<const Var> scope) { return (brute_count_term(t, scope) & 1U) != 0; }

/// Parity over `inner` with the variables of `outer` fixed by bitmask `m`.
inline bool odd_fixed(const Term& t, std::span<const Var> outer, std::uint64_t m, std::span<const Var> inner) {
    std::uint32_t top = 0;
    for (Var v : outer) top = std::max(top, v.id);
    for (Var v : inner) top = std::max(top, v.id);
    Assignment a(top + 1, 0);
    for (std::size_t i = 0; i < outer.size(); ++i) a[outer[i].id] = static_cast<std::uint8_t>((m >> i) & 1U);
    bool p = false;
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << inner.size()); ++k) {
        for (std::size_t i = 0; i < inner.size(); ++i) a[inner[i].id] = static_cast<std::uint8_t>((k >> i) & 1U);
        p ^= evaluate(t, a);
    }
    return p;
}

}  // namespace detail

/// The five parity-operator identities, each checked by enumeration on random term pairs.
inline SuiteResult parity_algebra(const Options& o, std::size_t base = 500) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Recorder rec("parity_algebra");
    SeededRng r(splitmix64(o.seed ^ 0xa1));
    const std::size_t n = detail::trials(o, base);
    for (std::size_t it = 0; it < n; ++it) {
        const auto nx = static_cast<std::uint32_t>(r.uniform(1, 5));
        const auto ny = static_cast<std::uint32_t>(r.uniform(1, 5));
        const auto xs = detail::range(1, nx);
        const auto ys = detail::range(20, ny);
        const auto xy = detail::join(xs, ys);
        const Term f = detail::random_term(r, 1, nx, 3);
        const Term g = detail::random_term(r, 20, ny, 3);
        const Term fxy = mk_or(detail::random_term(r, 1, nx, 2), detail::random_term(r, 20, ny, 2));
        VarSupply s(40);
        const auto tag = [&](const char* which) { return [=] { return std::string(which) + " failed at trial " + std::to_string(it); }; };

        // 1: not parity(F) == parity(F + 1)
        {
            const Var z{s.peek()};
            const Term f1 = plus_one(f, xs, s);
            rec.check(detail::odd(f, xs) != detail::odd(f1, detail::join(xs, std::vector<Var>{z})), tag("negation"));
        }
        // 2: nested parity collapses
        {
            bool outer = false;
            for (std::uint64_t m = 0; m < (std::uint64_t{1} << nx); ++m) outer ^= detail::odd_fixed(fxy, xs, m, ys);
            rec.check(outer == detail::odd(fxy, xy), tag("nesting"));
        }
        // 3: conjunction of parities over disjoint sets
        rec.check((detail::odd(f, xs) && detail::odd(g, ys)) == detail::odd(mk_and(f, g), xy), tag("conjunction"));
        // 4: disjunction through +1 and De Morgan
        {
            const Var z1{s.peek()};
            const Term f1 = plus_one(f, xs, s);
            const Var z2{s.peek()};
            const Term g1 = plus_one(g, ys, s);
            auto scope = detail::join(xy, std::vector<Var>{z1, z2});
            const Var z3{s.peek()};
            const Term rhs = plus_one(times(f1, g1), scope, s);
            scope.push_back(z3);
            rec.check((detail::odd(f, xs) || detail::odd(g, ys)) == detail::odd(rhs, scope), tag("disjunction"));
        }
        // 5: a formula over the free variables moves under the parity
        {
            const Term gy = detail::random_term(r, 20, ny, 2);
            const Term inside = mk_and(fxy, gy);
            for (std::uint64_t m = 0; m < (std::uint64_t{1} << ny); ++m) {
                Assignment a(20 + ny, 0);
                for (std::uint32_t i = 0; i < ny; ++i) a[20 + i] = static_cast<std::uint8_t>((m >> i) & 1U);
                const bool lhs = detail::odd_fixed(fxy, ys, m, xs) && evaluate(gy, a);
                rec.check(lhs == detail::odd_fixed(inside, ys, m, xs), tag("free conjunct"));
            }
        }
    }
    return rec.finish(t0);
}

/// Tseytin and plus_cnf keep exact counts; parity_hash keeps parity.
inline SuiteResult count_preservation(const Options& o, std::size_t base = 200) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Recorder rec("count_preservation");
    SeededRng r(splitmix64(o.seed ^ 0xb2));
    const std::size_t n = detail::trials(o, base);
    for (std::size_t it = 0; it < n; ++it) {
        const auto nv = static_cast<std::uint32_t>(r.uniform(1, 6));
        const auto xs = detail::range(1, nv);
        const Term f = detail::random_term(r, 1, nv, 3);
        const std::uint64_t want = brute_count_term(f, xs);
        const auto at = [it](const char* w) { return [=] { return std::string(w) + " mismatch at trial " + std::to_string(it); }; };

        const EncodedCnf e = tseytin(f, xs);
        if (e.cnf.num_vars <= 20) rec.check(brute_count(e.cnf) == want, at("tseytin"));

        // plus_cnf on two clause sets over the same variables
        const auto clauses = [&] {
            CnfFormula c{nv, {}, {}};
            const std::size_t m = r.uniform(0, 4);
            for (std::size_t i = 0; i < m; ++i) {
                std::vector<int> cl;
                for (std::uint32_t v = 1; v <= nv; ++v)
                    if (r.uniform(0, 2) == 0) cl.push_back(r.bit() ? -static_cast<int>(v) : static_cast<int>(v));
                if (cl.empty()) cl.push_back(static_cast<int>(nv));
                c.clauses.push_back(std::move(cl));
            }
            return c;
        };
        const CnfFormula cf = clauses();
        const CnfFormula cg = clauses();
        const CnfFormula sum = plus_cnf(cf, cg, static_cast<int>(nv) + 1);
        rec.check(brute_count(sum) == brute_count(cf) + brute_count(cg), at("plus_cnf"));
        rec.check(sum.clauses.size() == cf.clauses.size() + cg.clauses.size(), at("plus_cnf clause count"));

        // sieve-shaped fragment through parity_hash
        VarSupply ps(50);
        SeededRng hr = r.child(it, 0);
        const std::size_t l = r.uniform(1, 3);
        const SieveResult sr = build_D_l(clauses_to_term(cf.clauses), xs, l, hr, ps);
        ParityFormula pf{sr.term, detail::join(xs, sr.selectors)};
        const bool want_odd = (brute_count_term(pf.term, pf.scope) & 1U) != 0;
        VarSupply es(ps.peek());
        const EncodedCnf ph = encode(pf, HashCnfMode::ParityHash, es);
        if (ph.cnf.num_vars <= 24) rec.check(((brute_count(ph.cnf, 24) & 1U) != 0) == want_odd, at("parity_hash"));
    }
    return rec.finish(t0);
}

/// Matrix-power success probabilities against the closed form.
inline SuiteResult transition_matrices(const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Recorder rec("transition_matrices");
    for (std::size_t d : {1, 2, 3, 4, 5, 6, 7, 8}) {
        for (int pi = 55; pi <= 99; pi += 4) {
            const double p = pi / 100.0;
            for (Quantifier outer : {Quantifier::Exists, Quantifier::Forall}) {
                const auto [tt, ff] = end_to_end_success(p, d, outer, innermost_of(outer, d), o.provider);
                const double closed = balanced_closed_form(p, d);
                rec.check(std::abs(std::min(tt, ff) - closed) < 1e-10, [=] {
                    return "d=" + std::to_string(d) + " p=" + std::to_string(p) + ": matrix " + std::to_string(std::min(tt, ff)) +
                           " vs closed form " + std::to_string(closed);
                });
            }
        }
    }
    return rec.finish(t0);
}

/// Exact-one-solution frequency of random hashes on satisfiable formulas.
inline SuiteResult isolation(const Options& o, std::size_t base = 4000) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Recorder rec("isolation");
    SeededRng r(splitmix64(o.seed ^ 0xc3));
    const std::size_t trials = detail::trials(o, base);
    for (std::uint32_t n = 2; n <= 6; ++n) {
        const auto xs = detail::range(1, n);
        Term f;
        do {
            f = detail::random_term(r, 1, n, 3);
        } while (brute_count_term(f, xs) == 0);
        std::size_t hits = 0;
        for (std::size_t t = 0; t < trials; ++t) {
            SeededRng hr = r.child(n, t);
            const HashFunc h = draw_hash(xs, hr);
            hits += brute_count_term(apply_hash(f, h), xs) == 1 ? 1 : 0;
        }
        const double bound = vv_lower_bound(n, VvBound::Refined);
        const double sigma = std::sqrt(bound * (1 - bound) / static_cast<double>(trials));
        const double freq = static_cast<double>(hits) / static_cast<double>(trials);
        rec.check(freq >= bound - 3 * sigma, [=] {
            return "n=" + std::to_string(n) + ": frequency " + std::to_string(freq) + " below " + std::to_string(bound);
        });
    }
    return rec.finish(t0);
}

/// Roots-of-unity residue probabilities against direct enumeration.
inline SuiteResult modular_sums(const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Recorder rec("modular_sums");
    SeededRng r(splitmix64(o.seed ^ 0xd4));
    for (std::size_t k = 2; k <= 4; ++k) {
        std::vector<double> p(k);
        double total = 0;
        for (auto& x : p) total += (x = r.unit() + 0.05);
        for (auto& x : p) x /= total;
        for (std::uint64_t n = 1; n <= 5; ++n) {
            std::vector<double> dist(k, 0.0);
            dist[0] = 1.0;
            for (std::uint64_t i = 0; i < n; ++i) {
                std::vector<double> next(k, 0.0);
                for (std::size_t a = 0; a < k; ++a)
                    for (std::size_t b = 0; b < k; ++b) next[(a + b) % k] += dist[a] * p[b];
                dist = std::move(next);
            }
            for (std::size_t t = 0; t < k; ++t) {
                const double got = mod_sum_prob(p, n, k, t);
                rec.check(std::abs(got - dist[t]) < 1e-12, [=] {
                    return "k=" + std::to_string(k) + " n=" + std::to_string(n) + " t=" + std::to_string(t);
                });
            }
        }
    }
    return rec.finish(t0);
}

/// Unsatisfiable existential instances never reduce to an odd count.
inline SuiteResult one_sided(const Options& o, std::size_t base = 50) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Recorder rec("one_sided_error");
    const QbfInstance q = parse_qdimacs("p cnf 2 3\ne 1 2 0\n1 0\n-1 2 0\n-2 0\n");
    SolveOptions so;
    so.eps = 0.3;
    const std::size_t n = detail::trials(o, base);
    for (std::size_t i = 0; i < n; ++i) {
        so.cfg.seed = splitmix64(o.seed + i);
        rec.check(!solve(q, so).verdict.value, [=] { return "reported true at run " + std::to_string(i); });
    }
    return rec.finish(t0);
}

inline std::vector<SuiteResult> run_all(const Options& o) {
    const std::vector<std::pair<const char*, std::function<SuiteResult()>>> suites{
        {"parity_algebra", [&] { return parity_algebra(o, 200); }},
        {"count_preservation", [&] { return count_preservation(o, 100); }},
        {"transition_matrices", [&] { return transition_matrices(o); }},
        {"isolation", [&] { return isolation(o, 2000); }},
        {"modular_sums", [&] { return modular_sums(o); }},
        {"one_sided_error", [&] { return one_sided(o); }},
    };
    std::vector<SuiteResult> out;
    for (const auto& [name, fn] : suites) {
        try {
            out.push_back(fn());
        } catch (const std::exception& e) {
            out.push_back(SuiteResult{name, false, 0, std::string("exception: ") + e.what(), 0.0});
        }
    }
    return out;
}

}  // namespace toda::selftest
