#pragma once

#include <toda/budget.hpp>
#include <toda/qbf.hpp>
#include <toda/rng.hpp>
#include <toda/sieve.hpp>

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace toda {

enum class SieveKind : std::uint8_t { Vv, ModularAddition, ModularAdditionAuto };

struct SieveConfig {
    SieveKind kind = SieveKind::ModularAdditionAuto;
    std::size_t l = 1;       // fixed l for ModularAddition
    std::size_t l_max = 64;  // search range for ModularAdditionAuto
    VvBound bound = VvBound::Refined;
};

enum class RepInterpretation : std::uint8_t { Algorithm2, PaperExample };
enum class UniversalInnermost : std::uint8_t { NegateMatrix, FreshVarTrick };
enum class Combiner : std::uint8_t { Single, AnyOdd, AllEven };

struct ReductionConfig {
    Allocation allocation = Allocation::Balanced;
    SieveConfig sieve{};
    RepInterpretation reps = RepInterpretation::Algorithm2;
    bool multi_call = true;
    UniversalInnermost universal_innermost = UniversalInnermost::NegateMatrix;
    bool cancel_double_negation = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (sieve.kind == SieveKind::ModularAddition && sieve.l < 1) throw std::invalid_argument("sieve l must be >= 1");
        if (sieve.kind == SieveKind::ModularAdditionAuto && sieve.l_max < 1)
            throw std::invalid_argument("sieve L_max must be >= 1");
    }
};

// ---- planning --------------------------------------------------------------

/// Prefix shape after merging: quantifiers and block sizes, outermost first.
struct Shape {
    std::vector<Quantifier> quants;
    std::vector<std::size_t> sizes;
    std::uint64_t matrix_size = 1;  // after prefix normalization
    std::size_t initial_parity = 0;
};

struct StepPlan {
    std::size_t step = 0;  // 1 = outermost
    bool negated = false;
    double eps = 0.0;
    std::size_t block_size = 0;
    std::size_t parity_before = 0;  // |y_i|
    std::size_t s = 0;              // outer variable count
    std::size_t n_bound = 0;        // n fed to the isolation bound
    double p_single = 0.0;
    double p = 0.0;
    std::size_t l = 1;
    std::size_t selectors = 0;      // per copy
    std::uint64_t k = 1;
    std::uint64_t h_size = 0;
    std::vector<BigInt> cost_curve;  // filled for the auto sieve
    bool split = false;              // multi-call: copies are returned separately
    std::size_t plus_ones = 0;
    bool offset = false;
    std::size_t parity_after = 0;
    double est_size_before = 0.0;
    double est_size_after = 0.0;
};

struct ReductionPlan {
    AllocationPlan alloc;
    std::vector<StepPlan> steps;  // execution order: innermost block first
    Combiner combiner = Combiner::Single;
    bool multi_call = false;
    double success_lower_bound = 1.0;
    std::uint64_t input_size = 1;
    BigInt size_bound = 1;
};

inline bool block_negated(const std::vector<Quantifier>& q, std::size_t i) {
    const bool prev = i > 0 && q[i - 1] == Quantifier::Forall;
    return prev != (q[i] == Quantifier::Forall);
}

inline bool fresh_trick_applies(const Shape& sh, const ReductionConfig& cfg) {
    return cfg.universal_innermost == UniversalInnermost::FreshVarTrick && !sh.quants.empty() &&
           sh.quants.back() == Quantifier::Forall;
}

inline Shape shape_of(const QbfInstance& q, const ReductionConfig& cfg) {
    Shape sh;
    for (const auto& b : q.blocks) {
        sh.quants.push_back(b.q);
        sh.sizes.push_back(b.vars.size());
    }
    sh.matrix_size = q.matrix.size();
    if (!sh.quants.empty() && sh.quants.back() == Quantifier::Forall) {
        if (cfg.universal_innermost == UniversalInnermost::FreshVarTrick) {
            sh.matrix_size = detail::sat_add(sh.matrix_size, 2);
            sh.initial_parity = 1;
        } else {
            sh.matrix_size = detail::sat_add(sh.matrix_size, 1);
        }
    }
    return sh;
}

/// Deterministic per-step parameters. Both `reduce` and the analyze command use this,
/// so predicted repetition counts always match the ones actually built.
inline ReductionPlan plan_reduction(const Shape& sh, double eps, const ReductionConfig& cfg) {
    check_epsilon(eps);
    cfg.validate();
    ReductionPlan plan;
    plan.input_size = sh.matrix_size;
    const std::size_t d = sh.quants.size();
    if (d == 0) {
        plan.size_bound = sh.matrix_size;
        return plan;
    }
    plan.alloc = allocate(cfg.allocation, eps, d);
    plan.multi_call = cfg.multi_call;
    if (cfg.multi_call) plan.combiner = sh.quants.front() == Quantifier::Exists ? Combiner::AnyOdd : Combiner::AllEven;

    std::vector<std::size_t> prefix_sum(d + 1, 0);
    for (std::size_t i = 0; i < d; ++i) prefix_sum[i + 1] = prefix_sum[i] + sh.sizes[i];

    std::size_t parity = sh.initial_parity;
    double est = static_cast<double>(sh.matrix_size);
    std::vector<std::uint64_t> ks;
    for (std::size_t idx = d; idx-- > 0;) {
        StepPlan st;
        st.step = idx + 1;
        st.negated = block_negated(sh.quants, idx);
        st.eps = plan.alloc.eps[idx];
        st.block_size = sh.sizes[idx];
        st.parity_before = parity;
        st.s = prefix_sum[idx];
        st.n_bound = cfg.reps == RepInterpretation::Algorithm2 ? st.block_size + parity : st.block_size;
        st.p_single = pipeline_bound(st.n_bound, cfg.sieve.bound);
        st.h_size = h_size_est(st.block_size);
        st.est_size_before = est;
        const auto f_size = est >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(est);
        switch (cfg.sieve.kind) {
            case SieveKind::Vv: st.l = 1; break;
            case SieveKind::ModularAddition: st.l = cfg.sieve.l; break;
            case SieveKind::ModularAdditionAuto: {
                ChooseL c = choose_l(f_size, st.h_size, st.n_bound, st.eps, st.s, cfg.sieve.l_max, cfg.sieve.bound);
                st.l = c.l;
                st.cost_curve = std::move(c.cost);
                break;
            }
        }
        st.p = ma_success_prob(st.p_single, st.l);
        st.k = repetitions(st.p, st.eps, st.s);
        st.selectors = st.l > 1 ? ceil_log2(st.l) : 0;
        ks.push_back(st.k);

        const bool outermost = idx == 0;
        st.split = outermost && cfg.multi_call;
        const std::size_t copy_scope = st.block_size + parity + st.selectors;
        if (st.split) {
            st.plus_ones = 0;
        } else if (!st.negated) {
            // only the amplification +1; at the outermost block it can be deferred to the decision
            if (outermost && cfg.cancel_double_negation) st.offset = true; else st.plus_ones = 1;
        } else {
            st.plus_ones = cfg.cancel_double_negation ? 0 : 2;
        }
        const double kd = static_cast<double>(st.k);
        const double copy_size = est + static_cast<double>(st.l) * static_cast<double>(st.h_size) +
                                 6.0 * static_cast<double>(st.l) + 2.0;
        if (st.split) {
            st.parity_after = copy_scope;
            st.est_size_after = kd * copy_size;
        } else {
            std::size_t after = static_cast<std::size_t>(st.k) * (copy_scope + 1);
            double size = kd * (copy_size + 7.0 + static_cast<double>(copy_scope)) + (st.k > 1 ? 1.0 : 0.0);
            for (std::size_t j = 0; j < st.plus_ones; ++j) {
                size += 7.0 + static_cast<double>(after);
                ++after;
            }
            st.parity_after = after;
            st.est_size_after = size;
        }
        parity = st.parity_after;
        est = st.est_size_after;
        plan.steps.push_back(std::move(st));
    }
    plan.size_bound = size_lower_bound(sh.matrix_size, ks);
    if (cfg.allocation == Allocation::Balanced) {
        auto [tt, ff] = end_to_end_success(*plan.alloc.p_balanced, d, sh.quants.front(), sh.quants.back());
        plan.success_lower_bound = std::min(tt, ff);
    } else {
        double sum = 0.0;
        for (double e : plan.alloc.eps) sum += e;
        plan.success_lower_bound = 1.0 - sum;
    }
    return plan;
}

// ---- trace and output ------------------------------------------------------

struct CopyTag {
    std::size_t step = 0;
    std::uint64_t rep = 0;
    std::uint32_t first_var = 0;  // fresh ids issued for this copy lie in [first_var, last_var]
    std::uint32_t last_var = 0;
};

struct StepTrace {
    std::size_t step = 0;
    double eps = 0.0;
    std::uint64_t k = 0;
    std::size_t l = 1;
    std::size_t s = 0;
    std::size_t n_bound = 0;
    double p = 0.0;
    std::uint64_t size_before = 0;
    std::uint64_t size_after = 0;
    std::size_t parity_vars_after = 0;
    std::size_t plus_ones = 0;
    bool offset = false;
    std::vector<CopyTag> copies;
};

struct ReductionTrace {
    std::vector<StepTrace> steps;
    std::size_t total_plus_ones = 0;
    std::uint64_t input_size = 0;
    BigInt size_bound = 1;

    /// FNV-1a digest of the numeric trace, for DIMACS comments.
    [[nodiscard]] std::string digest() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&](std::uint64_t x) {
            for (int i = 0; i < 8; ++i) {
                h ^= (x >> (8 * i)) & 0xffU;
                h *= 0x100000001b3ULL;
            }
        };
        for (const auto& s : steps) {
            mix(s.step); mix(s.k); mix(s.l); mix(s.s); mix(s.size_before); mix(s.size_after);
            mix(s.parity_vars_after); mix(s.plus_ones); mix(s.offset ? 1 : 0);
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
};

/// A formula whose model-count parity, taken over `scope`, carries the answer.
struct ParityFormula {
    Term term = Term::constant(true);
    std::vector<Var> scope;
};

struct ReducedOutput {
    Combiner combiner = Combiner::Single;
    std::vector<ParityFormula> formulas;
    bool offset = false;  // single-call: flip the parity before reading the verdict
    ReductionTrace trace;
    std::uint64_t seed = 0;
    std::uint32_t next_var = 1;
};

// ---- prefix normalization --------------------------------------------------

inline StagedFormula normalize_prefix(const QbfInstance& q, const ReductionConfig& cfg, VarSupply& supply) {
    q.require_sentence();
    StagedFormula f;
    std::vector<Quantifier> qs;
    for (const auto& b : q.blocks) qs.push_back(b.q);
    for (std::size_t i = 0; i < q.blocks.size(); ++i) f.outer.push_back(OuterBlock{q.blocks[i].vars, block_negated(qs, i)});
    f.matrix = q.matrix;
    if (!qs.empty() && qs.back() == Quantifier::Forall) {
        if (cfg.universal_innermost == UniversalInnermost::FreshVarTrick) {
            // !phi has the parity of (phi | x_new) over x_new
            Var x_new = supply.fresh();
            f.matrix = mk_or(f.matrix, Term::literal(x_new));
            f.parity_vars = {x_new};
        } else {
            f.matrix = mk_not(f.matrix);
        }
    }
    return f;
}

// ---- elimination -----------------------------------------------------------

namespace detail {

struct Copies {
    std::vector<ParityFormula> formulas;
    std::vector<CopyTag> tags;
};

/// k sieved, renamed copies of the staged matrix; copy j draws from rng.child(step, j).
inline Copies sieve_copies(const StagedFormula& f, const StepPlan& st, VarSupply& supply, const SeededRng& rng) {
    const auto& block = f.outer.back().vars;
    std::vector<Var> rename;
    rename.reserve(block.size() + f.parity_vars.size());
    rename.insert(rename.end(), block.begin(), block.end());
    rename.insert(rename.end(), f.parity_vars.begin(), f.parity_vars.end());
    Copies out;
    out.formulas.reserve(st.k);
    for (std::uint64_t j = 0; j < st.k; ++j) {
        SeededRng r = rng.child(st.step, j);
        const std::uint32_t first = supply.peek();
        SieveResult sr = build_D_l(f.matrix, block, st.l, r, supply);
        auto [term, map] = rename_fresh(sr.term, rename, supply);
        ParityFormula pf;
        pf.term = std::move(term);
        pf.scope.reserve(rename.size() + sr.selectors.size());
        for (Var v : rename) pf.scope.push_back(map.at(v.id));
        pf.scope.insert(pf.scope.end(), sr.selectors.begin(), sr.selectors.end());
        out.formulas.push_back(std::move(pf));
        out.tags.push_back(CopyTag{st.step, j, first, supply.peek() - 1});
    }
    return out;
}

/// prod (F_j + 1), with its parity scope.
inline ParityFormula product_of_plus_one(std::vector<ParityFormula> copies, VarSupply& supply) {
    ParityFormula out;
    std::vector<Term> factors;
    factors.reserve(copies.size());
    for (auto& c : copies) {
        const std::uint32_t before = supply.peek();
        factors.push_back(plus_one(std::move(c.term), c.scope, supply));
        out.scope.insert(out.scope.end(), c.scope.begin(), c.scope.end());
        out.scope.push_back(Var{before});
    }
    out.term = times_all(std::move(factors));
    return out;
}

inline void add_one(ParityFormula& f, VarSupply& supply) {
    const std::uint32_t z = supply.peek();
    f.term = plus_one(std::move(f.term), f.scope, supply);
    f.scope.push_back(Var{z});
}

}  // namespace detail

/// One amplification round: [(F_1+1) x ... x (F_k+1)] + 1 over the innermost block.
inline StagedFormula amplify(const StagedFormula& f, const StepPlan& st, VarSupply& supply, const SeededRng& rng) {
    if (f.outer.empty()) throw std::invalid_argument("amplify: no outer block left");
    auto copies = detail::sieve_copies(f, st, supply, rng);
    ParityFormula p = detail::product_of_plus_one(std::move(copies.formulas), supply);
    detail::add_one(p, supply);
    StagedFormula out;
    out.outer.assign(f.outer.begin(), f.outer.end() - 1);
    out.parity_vars = std::move(p.scope);
    out.matrix = std::move(p.term);
    return out;
}

struct StepResult {
    StagedFormula staged;                // when the step was combined
    std::vector<ParityFormula> split;    // multi-call copies
    StepTrace trace;
};

/// Removes the innermost outer block according to the plan entry.
inline StepResult eliminate_step(const StagedFormula& f, const StepPlan& st, VarSupply& supply, const SeededRng& rng) {
    if (f.outer.empty()) throw std::invalid_argument("eliminate_step: no outer block left");
    StepResult r;
    r.trace.step = st.step;
    r.trace.eps = st.eps;
    r.trace.k = st.k;
    r.trace.l = st.l;
    r.trace.s = st.s;
    r.trace.n_bound = st.n_bound;
    r.trace.p = st.p;
    r.trace.size_before = f.matrix.size();
    auto copies = detail::sieve_copies(f, st, supply, rng);
    r.trace.copies = std::move(copies.tags);
    if (st.split) {
        std::uint64_t total = 0;
        for (const auto& c : copies.formulas) total = detail::sat_add(total, c.term.size());
        r.trace.size_after = total;
        r.trace.parity_vars_after = copies.formulas.empty() ? 0 : copies.formulas.front().scope.size();
        r.split = std::move(copies.formulas);
        return r;
    }
    ParityFormula p = detail::product_of_plus_one(std::move(copies.formulas), supply);
    for (std::size_t j = 0; j < st.plus_ones; ++j) detail::add_one(p, supply);
    r.trace.plus_ones = st.plus_ones;
    r.trace.offset = st.offset;
    r.trace.size_after = p.term.size();
    r.trace.parity_vars_after = p.scope.size();
    r.staged.outer.assign(f.outer.begin(), f.outer.end() - 1);
    r.staged.parity_vars = std::move(p.scope);
    r.staged.matrix = std::move(p.term);
    return r;
}

inline std::uint32_t first_free_var(const QbfInstance& q) {
    std::uint32_t top = q.num_vars;
    for (const auto& b : q.blocks)
        for (Var v : b.vars) top = std::max(top, v.id);
    for (Var v : q.matrix.free_vars()) top = std::max(top, v.id);
    return top + 1;
}

inline ReducedOutput reduce(const QbfInstance& q, double eps, const ReductionConfig& cfg) {
    check_epsilon(eps);
    q.require_sentence();
    const ReductionPlan plan = plan_reduction(shape_of(q, cfg), eps, cfg);
    VarSupply supply(first_free_var(q));
    const SeededRng rng(cfg.seed);
    StagedFormula f = normalize_prefix(q, cfg, supply);

    ReducedOutput out;
    out.seed = cfg.seed;
    out.trace.input_size = f.matrix.size();
    out.trace.size_bound = plan.size_bound;
    for (const auto& st : plan.steps) {
        StepResult r = eliminate_step(f, st, supply, rng);
        out.trace.total_plus_ones += r.trace.plus_ones;
        out.offset = out.offset != r.trace.offset;
        out.trace.steps.push_back(std::move(r.trace));
        if (st.split) {
            out.combiner = plan.combiner;
            out.formulas = std::move(r.split);
            out.next_var = supply.peek();
            return out;
        }
        f = std::move(r.staged);
    }
    out.combiner = Combiner::Single;
    out.formulas.push_back(ParityFormula{std::move(f.matrix), std::move(f.parity_vars)});
    out.next_var = supply.peek();
    return out;
}

inline const char* to_string(Combiner c) {
    switch (c) {
        case Combiner::Single: return "single";
        case Combiner::AnyOdd: return "any_odd";
        case Combiner::AllEven: return "all_even";
    }
    return "?";
}

/// Canonical text of an output; equal seeds and configs give equal text.
inline std::string fingerprint(const ReducedOutput& out) {
    std::ostringstream os;
    os << to_string(out.combiner) << ' ' << out.offset << ' ' << out.trace.digest() << '\n';
    for (const auto& f : out.formulas) {
        for (Var v : f.scope) os << v.id << ' ';
        os << '\n';
        print_term(os, f.term);
        os << '\n';
    }
    return os.str();
}

}  // namespace toda
