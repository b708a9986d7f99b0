#pragma once

#include <toda/budget.hpp>
#include <toda/formula.hpp>
#include <toda/rng.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace toda {

struct XorConstraint {
    std::vector<Lit> lits;
    bool rhs = false;
    friend bool operator==(const XorConstraint&, const XorConstraint&) = default;
};

/// A member of H_{n,m}: m XOR constraints over one variable block.
struct HashFunc {
    std::vector<Var> block;
    std::vector<XorConstraint> constraints;
    [[nodiscard]] std::size_t m() const noexcept { return constraints.size(); }
    friend bool operator==(const HashFunc&, const HashFunc&) = default;
};

inline HashFunc draw_hash(std::span<const Var> block, SeededRng& rng) {
    if (block.empty()) throw std::invalid_argument("draw_hash: empty block");
    HashFunc h;
    h.block.assign(block.begin(), block.end());
    const std::size_t n = block.size();
    const std::size_t m = static_cast<std::size_t>(rng.uniform(2, n + 1));
    h.constraints.resize(m);
    for (auto& g : h.constraints) {
        for (Var v : block) {
            const bool take = rng.bit();
            const bool neg = rng.bit();
            if (take) g.lits.push_back(Lit{v, neg});
        }
        g.rhs = rng.bit();
    }
    return h;
}

inline bool eval_hash(const HashFunc& h, const Assignment& a) {
    for (const auto& g : h.constraints) {
        bool x = false;
        for (Lit l : g.lits) x ^= lit_value(l, a);
        if (x != g.rhs) return false;
    }
    return true;
}

inline std::vector<Term> constraint_terms(const HashFunc& h) {
    std::vector<Term> out;
    out.reserve(h.m());
    for (const auto& g : h.constraints) out.push_back(mk_xor(g.lits, g.rhs));
    return out;
}

/// Conjunction of the constraints alone.
inline Term hash_term(const HashFunc& h) {
    auto gs = constraint_terms(h);
    if (gs.empty()) return Term::constant(true);
    return gs.size() == 1 ? gs.front() : mk_and(std::move(gs));
}

/// F & g_1 & ... & g_m as one And node.
inline Term apply_hash(const Term& f, const HashFunc& h) {
    std::vector<Term> cs;
    cs.reserve(h.m() + 1);
    cs.push_back(f);
    for (auto& g : constraint_terms(h)) cs.push_back(std::move(g));
    return mk_and(std::move(cs));
}

// ---- bounds and probabilities ----------------------------------------------

enum class VvBound : std::uint8_t { Standard, Tight, Refined };  // 1/8n, 3/16n, 19/64n

inline double vv_lower_bound(std::size_t n, VvBound variant) {
    if (n < 1) throw std::invalid_argument("vv_lower_bound: n must be at least 1");
    const double dn = static_cast<double>(n);
    switch (variant) {
        case VvBound::Standard: return 1.0 / (8.0 * dn);
        case VvBound::Tight: return 3.0 / (16.0 * dn);
        case VvBound::Refined:
            if (n < 2) throw std::invalid_argument("vv_lower_bound: refined bound needs n >= 2");
            return 19.0 / (64.0 * dn);
    }
    return 0.0;
}

/// Bound used inside the pipeline: the refined variant degrades to 3/16n at n = 1.
inline double pipeline_bound(std::size_t n, VvBound variant) {
    if (variant == VvBound::Refined && n < 2) return vv_lower_bound(n, VvBound::Tight);
    return vv_lower_bound(n, variant);
}

namespace detail {
inline std::complex<double> cpow(std::complex<double> b, std::uint64_t e) {
    std::complex<double> r{1.0, 0.0};
    while (e) {
        if (e & 1U) r *= b;
        b *= b;
        e >>= 1U;
    }
    return r;
}
}  // namespace detail

/// Probability that the sum of n iid residues with distribution p equals t mod k.
inline double mod_sum_prob(std::span<const double> p, std::uint64_t n, std::size_t k, std::size_t t) {
    if (k < 1 || k > 64) throw std::invalid_argument("mod_sum_prob: k must lie in [1, 64]");
    if (p.size() != k) throw std::invalid_argument("mod_sum_prob: distribution length must equal k");
    if (n < 1) throw std::invalid_argument("mod_sum_prob: n must be at least 1");
    if (t >= k) throw std::invalid_argument("mod_sum_prob: residue out of range");
    double total = 0.0;
    for (double x : p) {
        if (!(x >= 0.0) || x > 1.0) throw std::invalid_argument("mod_sum_prob: entries must lie in [0, 1]");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mod_sum_prob: distribution must sum to 1");
    const double two_pi_k = 2.0 * std::numbers::pi / static_cast<double>(k);
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t m = 0; m < k; ++m) {
        std::complex<double> inner{0.0, 0.0};
        for (std::size_t j = 0; j < k; ++j) inner += std::polar(1.0, two_pi_k * static_cast<double>((m * j) % k)) * p[j];
        acc += std::polar(1.0, -two_pi_k * static_cast<double>((m * t) % k)) * detail::cpow(inner, n);
    }
    acc /= static_cast<double>(k);
    if (std::abs(acc.imag()) >= 1e-10) throw std::runtime_error("mod_sum_prob: imaginary residue above tolerance");
    return acc.real();
}

inline double ma_success_prob(double p1, std::uint64_t l) {
    if (!(p1 > 0.0) || !(p1 < 1.0)) throw std::invalid_argument("ma_success_prob: p1 must lie in (0, 1)");
    if (l < 1) throw std::invalid_argument("ma_success_prob: l must be at least 1");
    if (p1 < 0.5) return -0.5 * std::expm1(static_cast<double>(l) * std::log1p(-2.0 * p1));
    return 0.5 * (1.0 - std::pow(1.0 - 2.0 * p1, static_cast<double>(l)));
}

// ---- modular addition sieve ------------------------------------------------

inline std::size_t ceil_log2(std::size_t x) {
    std::size_t b = 0;
    while ((std::size_t{1} << b) < x) ++b;
    return b;
}

struct SumResult {
    Term term;
    std::vector<Var> selectors;
};

/// t_1 + ... + t_l as a balanced selector tree over ceil(log2 l) shared selector bits.
/// Every root-to-leaf path fixes every selector, so the count is exact even when the
/// operands mention different variables; slots past l are empty and pruned.
inline SumResult sum_terms(std::span<const Term> ts, VarSupply& supply) {
    if (ts.empty()) throw std::invalid_argument("sum_terms: no operands");
    SumResult r;
    const std::size_t b = ceil_log2(ts.size());
    r.selectors = supply.fresh(b);
    // level `depth` decides on selectors[depth]; leaves are operands in index order
    auto build = [&](auto&& self, std::size_t lo, std::size_t width, std::size_t depth) -> Term {
        if (width == 1) return ts[lo];
        const std::size_t half = width / 2;
        const Var s = r.selectors[depth];
        Term left = self(self, lo, half, depth + 1);
        if (lo + half >= ts.size()) return mk_and(std::move(left), Term::literal(s, true));
        Term right = self(self, lo + half, half, depth + 1);
        return mk_or(mk_and(std::move(right), Term::literal(s)), mk_and(Term::literal(s, true), std::move(left)));
    };
    r.term = build(build, 0, std::size_t{1} << b, 0);
    return r;
}

struct SieveResult {
    Term term;
    std::vector<Var> selectors;
    std::vector<HashFunc> hashes;
};

/// D_l = F & (h_1 + ... + h_l). For l = 1 this is apply_hash.
inline SieveResult build_D_l(const Term& f, std::span<const Var> block, std::size_t l, SeededRng& rng,
                             VarSupply& supply) {
    if (l < 1) throw std::invalid_argument("build_D_l: l must be at least 1");
    SieveResult r;
    for (std::size_t j = 0; j < l; ++j) r.hashes.push_back(draw_hash(block, rng));
    if (l == 1) {
        r.term = apply_hash(f, r.hashes.front());
        return r;
    }
    std::vector<Term> hs;
    hs.reserve(l);
    for (const auto& h : r.hashes) hs.push_back(hash_term(h));
    SumResult s = sum_terms(hs, supply);
    r.term = mk_and(f, std::move(s.term));
    r.selectors = std::move(s.selectors);
    return r;
}

/// Expected hash size: mbar * (n/2 + 2) nodes, mbar = (n+3)/2.
inline std::uint64_t h_size_est(std::size_t n) {
    const double dn = static_cast<double>(n);
    return static_cast<std::uint64_t>(std::llround((dn + 3.0) / 2.0 * (dn / 2.0 + 2.0)));
}

struct ChooseL {
    std::size_t l = 1;
    std::vector<std::uint64_t> k;  // k[l-1]
    std::vector<BigInt> cost;      // cost[l-1]
};

inline BigInt sieve_cost(std::uint64_t k, std::uint64_t f_size, std::uint64_t h_size, std::size_t l) {
    return BigInt(k) * (BigInt(f_size) + BigInt(h_size) * l);
}

/// argmin over l in 1..L_max of k_l * (|F| + l*|h|); ties go to the smaller l.
inline ChooseL choose_l(std::uint64_t f_size, std::uint64_t h_size, std::size_t n, double eps_i, std::size_t s,
                        std::size_t l_max, VvBound variant = VvBound::Refined) {
    if (l_max < 1) throw std::invalid_argument("choose_l: L_max must be at least 1");
    ChooseL r;
    const double p1 = pipeline_bound(n, variant);
    for (std::size_t l = 1; l <= l_max; ++l) {
        const std::uint64_t k = repetitions(ma_success_prob(p1, l), eps_i, s);
        r.k.push_back(k);
        r.cost.push_back(sieve_cost(k, f_size, h_size, l));
        if (r.cost.back() < r.cost[r.l - 1]) r.l = l;
    }
    return r;
}

/// Search over the same cost that skips whole plateaus of k. The repetition count is
/// nonincreasing in l and the cost grows inside a plateau, so only plateau starts can win;
/// each start is located by bisection. Matches choose_l exactly.
inline std::size_t choose_l_ternary(std::uint64_t f_size, std::uint64_t h_size, std::size_t n, double eps_i,
                                    std::size_t s, std::size_t l_max, VvBound variant = VvBound::Refined) {
    const double p1 = pipeline_bound(n, variant);
    auto reps = [&](std::size_t l) { return repetitions(ma_success_prob(p1, l), eps_i, s); };
    std::size_t best = 1;
    BigInt best_cost = sieve_cost(reps(1), f_size, h_size, 1);
    std::size_t l = 1;
    while (l < l_max) {
        const std::uint64_t k = reps(l);
        if (reps(l_max) == k) break;
        std::size_t lo = l, hi = l_max;  // reps(lo) == k > reps(hi)
        while (hi - lo > 1) {
            const std::size_t mid = lo + (hi - lo) / 2;
            (reps(mid) == k ? lo : hi) = mid;
        }
        l = hi;
        const BigInt c = sieve_cost(reps(l), f_size, h_size, l);
        if (c < best_cost) {
            best = l;
            best_cost = c;
        }
    }
    return best;
}

}  // namespace toda
