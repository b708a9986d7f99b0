#pragma once

#include <toda/qbf.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace toda {

using BigInt = boost::multiprecision::cpp_int;

enum class Allocation : std::uint8_t { Geometric, Balanced };

/// eps[i-1] is the inner-error budget of step i (step 1 is the outermost block).
struct AllocationPlan {
    Allocation strategy = Allocation::Balanced;
    std::vector<double> eps;
    std::optional<double> p_balanced;
};

inline void check_epsilon(double eps) {
    if (!(eps > 0.0) || !(eps < 0.5)) throw std::invalid_argument("epsilon must lie in (0, 0.5)");
}

inline AllocationPlan geometric_alloc(double eps, std::size_t d) {
    check_epsilon(eps);
    if (d == 0) throw std::invalid_argument("depth must be at least 1");
    AllocationPlan plan{Allocation::Geometric, {}, std::nullopt};
    double e = eps;
    for (std::size_t i = 0; i < d; ++i) {
        e /= 2.0;
        plan.eps.push_back(e);
    }
    return plan;
}

/// (p^(2*ceil(d/2)) + p) / (p + 1)
inline double balanced_closed_form(double p, std::size_t d) {
    const double e = 2.0 * static_cast<double>((d + 1) / 2);
    return (std::pow(p, e) + p) / (p + 1.0);
}

/// Solves 1 - eps = balanced_closed_form(p, d) for p by bisection.
inline double balanced_p(double eps, std::size_t d) {
    check_epsilon(eps);
    if (d == 0) throw std::invalid_argument("depth must be at least 1");
    if ((d + 1) / 2 == 1) return 1.0 - eps;  // (p^2 + p)/(p + 1) = p
    const double target = 1.0 - eps;
    const double e = 2.0 * static_cast<double>((d + 1) / 2);
    double lo = std::max(0.5, 1.0 - 2.0 * eps);
    double hi = std::min(1.0, 1.0 - eps * std::pow(2.0, -e));
    if (balanced_closed_form(lo, d) > target) lo = 0.5;
    if (balanced_closed_form(hi, d) < target) hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        (balanced_closed_form(mid, d) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline AllocationPlan balanced_alloc(double eps, std::size_t d) {
    double p = balanced_p(eps, d);
    double ei = (d + 1) / 2 == 1 ? eps : 1.0 - p;
    return AllocationPlan{Allocation::Balanced, std::vector<double>(d, ei), p};
}

inline AllocationPlan allocate(Allocation a, double eps, std::size_t d) {
    return a == Allocation::Geometric ? geometric_alloc(eps, d) : balanced_alloc(eps, d);
}

// ---- transition matrices ---------------------------------------------------

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<Vec4, 4>;

struct TransitionMatrices {
    Mat4 m_pair{};
    Mat4 m_outer{};
    Vec4 v_init{};
};

inline Mat4 identity4() {
    Mat4 m{};
    for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
    return m;
}

inline Vec4 mul(const Mat4& m, const Vec4& v) {
    Vec4 r{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) r[i] += m[i][j] * v[j];
    return r;
}

inline TransitionMatrices pair_matrices(double p, bool outermost_existential, bool innermost_universal) {
    const double q = 1.0 - p;
    TransitionMatrices t;
    t.m_pair = Mat4{Vec4{p + q * q, q, 0, 0}, Vec4{p * q, p, 0, 0}, Vec4{0, 0, p + q * q, q}, Vec4{0, 0, p * q, p}};
    t.m_outer = outermost_existential ? Mat4{Vec4{p, 0, 0, 0}, Vec4{q, 1, 0, 0}, Vec4{0, 0, p, 0}, Vec4{0, 0, q, 1}}
                                      : identity4();
    t.v_init = innermost_universal ? Vec4{1, 0, q, p} : Vec4{1, 0, 0, 1};
    return t;
}

using MatrixProvider = TransitionMatrices (*)(double, bool, bool);

inline Quantifier innermost_of(Quantifier outermost, std::size_t d) {
    if (d % 2 == 1) return outermost;
    return outermost == Quantifier::Exists ? Quantifier::Forall : Quantifier::Exists;
}

/// (Pr(true | true), Pr(false | false)) after a full reduction with per-step success p.
inline std::pair<double, double> end_to_end_success(double p, std::size_t d, Quantifier outermost,
                                                    Quantifier innermost, MatrixProvider provider = &pair_matrices) {
    if (d == 0) throw std::invalid_argument("depth must be at least 1");
    if (innermost_of(outermost, d) != innermost)
        throw std::invalid_argument("quantifiers inconsistent with an alternating prefix of this depth");
    const bool oe = outermost == Quantifier::Exists;
    const bool iu = innermost == Quantifier::Forall;
    const TransitionMatrices t = provider(p, oe, iu);
    const std::size_t pairs = (d - (oe ? 1 : 0) - (iu ? 1 : 0)) / 2;
    Vec4 v = t.v_init;
    for (std::size_t i = 0; i < pairs; ++i) v = mul(t.m_pair, v);
    v = mul(t.m_outer, v);
    return {v[0], v[3]};
}

// ---- repetitions and sizes -------------------------------------------------

/// Smallest k with (1 - p)^k <= eps_i / 2^s.
inline std::uint64_t repetitions(double p, double eps_i, std::size_t s) {
    if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("repetitions: p must lie in (0, 1)");
    if (!(eps_i > 0.0) || !(eps_i < 1.0)) throw std::invalid_argument("repetitions: eps_i must lie in (0, 1)");
    const double x = (std::log(eps_i) - static_cast<double>(s) * std::log(2.0)) / std::log1p(-p);
    const double k = std::ceil(x - 1e-9);
    if (k >= 1.8e19) throw std::overflow_error("repetition count does not fit in 64 bits");
    return k < 1.0 ? 1 : static_cast<std::uint64_t>(k);
}

/// |F| * prod k_i
inline BigInt size_lower_bound(std::uint64_t f_size, std::span<const std::uint64_t> ks) {
    BigInt r = f_size;
    for (auto k : ks) {
        if (k == 0) throw std::invalid_argument("repetition counts must be at least 1");
        r *= k;
    }
    return r;
}

/// Probability that the majority of r independent runs is correct.
inline double majority_correct(double eps0, std::uint64_t r) {
    const double lp = std::log1p(-eps0);
    const double lq = std::log(eps0);
    const double lr = std::lgamma(static_cast<double>(r) + 1.0);
    long double sum = 0.0L;
    for (std::uint64_t i = (r + 1) / 2; i <= r; ++i) {
        const double li = lr - std::lgamma(static_cast<double>(i) + 1.0) - std::lgamma(static_cast<double>(r - i) + 1.0) +
                          static_cast<double>(i) * lp + static_cast<double>(r - i) * lq;
        sum += std::exp(static_cast<long double>(li));
    }
    return static_cast<double>(sum);
}

inline std::uint64_t majority_reps(double eps0, double target) {
    if (!(eps0 > 0.0) || !(eps0 < 0.5)) throw std::invalid_argument("majority: eps0 must lie in (0, 0.5)");
    if (!(target > 0.0) || !(target < 1.0)) throw std::invalid_argument("majority: target must lie in (0, 1)");
    if (target <= 1.0 - eps0) return 1;
    for (std::uint64_t r = 3; r < 1000001; r += 2)
        if (majority_correct(eps0, r) >= target) return r;
    throw std::overflow_error("majority: required run count exceeds 10^6");
}

}  // namespace toda
