#include <toda/counting.hpp>
#include <toda/reduce.hpp>
#include <toda/selftest.hpp>

#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace toda;

namespace {

ReductionConfig single_call(std::uint64_t seed = 0) {
    ReductionConfig c;
    c.multi_call = false;
    c.seed = seed;
    return c;
}

bool verdict(const QbfInstance& q, double eps, const ReductionConfig& cfg) {
    return decide(reduce(q, eps, cfg), DecideOptions{}).value;
}

double lower_3sigma(double p, std::size_t n) { return p - 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n)); }

}  // namespace

// ---- prefix normalization --------------------------------------------------

TEST(NormalizePrefix, ExistentialIsUnchanged) {
    const QbfInstance q = parse_qdimacs("p cnf 2 1\ne 1 2 0\n1 -2 0\n");
    VarSupply s(3);
    const StagedFormula f = normalize_prefix(q, ReductionConfig{}, s);
    ASSERT_EQ(f.outer.size(), 1U);
    EXPECT_FALSE(f.outer[0].negated);
    EXPECT_EQ(f.matrix.id(), q.matrix.id());
    EXPECT_TRUE(f.parity_vars.empty());
}

TEST(NormalizePrefix, UniversalNegatesTheMatrix) {
    const QbfInstance q = parse_qdimacs("p cnf 1 1\na 1 0\n1 0\n");
    VarSupply s(2);
    const StagedFormula f = normalize_prefix(q, ReductionConfig{}, s);
    ASSERT_EQ(f.outer.size(), 1U);
    EXPECT_TRUE(f.outer[0].negated);
    EXPECT_EQ(f.matrix.kind(), Kind::Not);
    EXPECT_EQ(f.matrix.children()[0].id(), q.matrix.id());
}

TEST(NormalizePrefix, MarkersFollowAlternation) {
    const QbfInstance q = parse_qdimacs("p cnf 4 1\ne 1 0\na 2 0\ne 3 0\na 4 0\n1 2 3 4 0\n");
    VarSupply s(5);
    const StagedFormula f = normalize_prefix(q, ReductionConfig{}, s);
    ASSERT_EQ(f.outer.size(), 4U);
    EXPECT_FALSE(f.outer[0].negated);
    EXPECT_TRUE(f.outer[1].negated);
    EXPECT_TRUE(f.outer[2].negated);
    EXPECT_TRUE(f.outer[3].negated);
}

TEST(NormalizePrefix, FreshVariableTrickEncodesNegation) {
    SeededRng r(4);
    ReductionConfig cfg;
    cfg.universal_innermost = UniversalInnermost::FreshVarTrick;
    for (int it = 0; it < 200; ++it) {
        const auto n = static_cast<std::uint32_t>(r.uniform(1, 3));
        const QbfInstance q = testgen::random_qbf(r, 1, n, r.uniform(1, 4), Quantifier::Forall);
        VarSupply s(n + 1);
        const StagedFormula f = normalize_prefix(q, cfg, s);
        ASSERT_EQ(f.parity_vars.size(), 1U);
        EXPECT_TRUE(f.outer[0].negated);
        Assignment a(n + 2, 0);
        for (std::uint32_t m = 0; m < (1U << n); ++m) {
            for (std::uint32_t i = 0; i < n; ++i) a[i + 1] = static_cast<std::uint8_t>((m >> i) & 1U);
            bool parity = false;
            for (std::uint8_t z : {0, 1}) {
                a[f.parity_vars[0].id] = z;
                parity ^= evaluate(f.matrix, a);
            }
            a[f.parity_vars[0].id] = 0;
            EXPECT_EQ(parity, !evaluate(q.matrix, a));
        }
    }
}

TEST(NormalizePrefix, FreeVariablesAreRejected) {
    const QbfInstance q = parse_qdimacs("p cnf 2 1\ne 1 0\n1 2 0\n");
    VarSupply s(3);
    EXPECT_THROW(normalize_prefix(q, ReductionConfig{}, s), NotASentence);
    EXPECT_THROW(reduce(q, 0.3, ReductionConfig{}), NotASentence);
}

// ---- amplify and eliminate_step ---------------------------------------------

TEST(Amplify, SingleRepetitionKeepsParity) {
    const QbfInstance q = parse_qdimacs("p cnf 3 2\ne 1 2 3 0\n1 2 0\n-3 0\n");
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        VarSupply s(4);
        const StagedFormula f = normalize_prefix(q, ReductionConfig{}, s);
        StepPlan st;
        st.step = 1;
        st.k = 1;
        st.l = 1;
        const SeededRng rng(seed);
        VarSupply s2 = s;
        const auto copies = detail::sieve_copies(f, st, s2, rng);
        const bool copy_parity = structural_parity(copies.formulas[0].term, copies.formulas[0].scope);
        const StagedFormula g = amplify(f, st, s, rng);
        EXPECT_TRUE(g.outer.empty());
        EXPECT_EQ(structural_parity(g.matrix, g.parity_vars), copy_parity);
        EXPECT_EQ(brute_count_term(g.matrix, g.parity_vars) & 1U, copy_parity ? 1U : 0U);
    }
}

TEST(Amplify, OuterVariablesSharedAndCopiesDisjoint) {
    const QbfInstance q = parse_qdimacs("p cnf 4 2\ne 1 2 0\na 3 4 0\n1 3 0\n2 -4 0\n");
    VarSupply s(5);
    const StagedFormula f = normalize_prefix(q, ReductionConfig{}, s);
    StepPlan st;
    st.step = 2;
    st.k = 5;
    st.l = 3;
    const auto copies = detail::sieve_copies(f, st, s, SeededRng(7));
    std::set<std::uint32_t> seen;
    for (const auto& c : copies.formulas) {
        for (Var v : c.term.free_vars()) {
            EXPECT_NE(v.id, 3U);
            EXPECT_NE(v.id, 4U);
        }
        for (Var v : c.scope) EXPECT_TRUE(seen.insert(v.id).second) << "variable shared between copies";
        bool has_outer = false;
        for (Var v : c.term.free_vars()) has_outer = has_outer || v.id == 1 || v.id == 2;
        EXPECT_TRUE(has_outer);
    }
    for (std::size_t i = 1; i < copies.tags.size(); ++i) EXPECT_GT(copies.tags[i].first_var, copies.tags[i - 1].last_var);
}

TEST(EliminateStep, RemovesOneBlock) {
    const QbfInstance q = parse_qdimacs("p cnf 3 2\na 1 0\ne 2 0\na 3 0\n1 2 0\n-2 3 0\n");
    const ReductionConfig cfg = single_call(3);
    const ReductionPlan plan = plan_reduction(shape_of(q, cfg), 0.3, cfg);
    VarSupply s(first_free_var(q));
    StagedFormula f = normalize_prefix(q, cfg, s);
    const SeededRng rng(cfg.seed);
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const std::size_t before = f.outer.size();
        StepResult r = eliminate_step(f, plan.steps[i], s, rng);
        EXPECT_EQ(r.staged.outer.size(), before - 1);
        EXPECT_GE(r.trace.size_after, r.trace.size_before);
        f = std::move(r.staged);
    }
}

TEST(EliminateStep, PlusOneBookkeeping) {
    for (const char* text : {"p cnf 3 1\na 1 0\ne 2 0\na 3 0\n1 2 3 0\n", "p cnf 3 1\ne 1 0\na 2 0\ne 3 0\n1 2 3 0\n"}) {
        const QbfInstance q = parse_qdimacs(text);
        for (bool cancel : {true, false}) {
            ReductionConfig cfg = single_call(1);
            cfg.cancel_double_negation = cancel;
            const ReducedOutput out = reduce(q, 0.3, cfg);
            std::size_t total = 0;
            for (const auto& st : out.trace.steps) {
                const bool negated = block_negated({q.blocks[0].q, q.blocks[1].q, q.blocks[2].q}, st.step - 1);
                total += st.plus_ones;
                if (negated) {
                    EXPECT_EQ(st.plus_ones, cancel ? 0U : 2U);
                    EXPECT_FALSE(st.offset);
                } else {
                    // outermost existential block
                    EXPECT_EQ(st.step, 1U);
                    EXPECT_EQ(st.plus_ones, cancel ? 0U : 1U);
                    EXPECT_EQ(st.offset, cancel);
                }
            }
            EXPECT_EQ(out.trace.total_plus_ones, total);
        }
    }
}

TEST(EliminateStep, CancellationOnlyShiftsParityByTheOffset) {
    // same plan and draws; only the trailing +1s differ
    SeededRng r(55);
    for (int it = 0; it < 120; ++it) {
        const auto d = static_cast<std::size_t>(r.uniform(1, 3));
        const auto n = static_cast<std::uint32_t>(r.uniform(d, std::min<std::uint32_t>(8, d + 3)));
        const QbfInstance q = testgen::random_qbf(r, d, n, r.uniform(1, 6));
        const ReductionConfig cfg = single_call(r.next());
        const ReductionPlan plan = plan_reduction(shape_of(q, cfg), 0.3, cfg);
        const SeededRng rng(cfg.seed);
        VarSupply sa(first_free_var(q));
        StagedFormula fa = normalize_prefix(q, cfg, sa);
        VarSupply sb = sa;
        StagedFormula fb = fa;
        bool offset = false;
        for (const StepPlan& st : plan.steps) {
            StepPlan uncancelled = st;
            uncancelled.plus_ones = st.negated ? 2 : 1;
            uncancelled.offset = false;
            EXPECT_EQ(st.plus_ones, 0U);
            offset = offset != st.offset;
            fa = eliminate_step(fa, st, sa, rng).staged;
            fb = eliminate_step(fb, uncancelled, sb, rng).staged;
        }
        const bool pa = structural_parity(fa.matrix, fa.parity_vars);
        const bool pb = structural_parity(fb.matrix, fb.parity_vars);
        EXPECT_EQ(pa != offset, pb) << to_qdimacs(q);
    }
}

// ---- reduce ----------------------------------------------------------------

TEST(Reduce, ContradictionIsAlwaysEven) {
    const QbfInstance q = parse_qdimacs("p cnf 1 2\ne 1 0\n1 0\n-1 0\n");
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        ReductionConfig cfg;
        cfg.seed = seed;
        EXPECT_FALSE(verdict(q, 0.3, cfg));
        EXPECT_FALSE(verdict(q, 0.3, single_call(seed)));
    }
}

TEST(Reduce, SingleVariableExistential) {
    const QbfInstance q = parse_qdimacs("p cnf 1 1\ne 1 0\n1 0\n");
    const std::size_t runs = 2000;
    std::size_t ok = 0;
    for (std::uint64_t seed = 0; seed < runs; ++seed) ok += verdict(q, 0.3, single_call(seed)) ? 1 : 0;
    EXPECT_GE(static_cast<double>(ok) / runs, lower_3sigma(0.7, runs));
}

TEST(Reduce, UniversalExistentialEquivalence) {
    const QbfInstance q = parse_qdimacs("p cnf 2 2\na 1 0\ne 2 0\n1 -2 0\n-1 2 0\n");
    ASSERT_TRUE(eval_qbf_brute(q));
    const std::size_t runs = 2000;
    std::size_t ok_single = 0, ok_multi = 0;
    for (std::uint64_t seed = 0; seed < runs; ++seed) {
        ok_single += verdict(q, 0.3, single_call(seed)) ? 1 : 0;
        ReductionConfig cfg;
        cfg.seed = seed;
        ok_multi += verdict(q, 0.3, cfg) ? 1 : 0;
    }
    EXPECT_GE(static_cast<double>(ok_single) / runs, lower_3sigma(0.7, runs));
    EXPECT_GE(static_cast<double>(ok_multi) / runs, lower_3sigma(0.7, runs));
}

TEST(Reduce, ThreeVariableExistentialStep) {
    // sat and unsat instances over one block of three variables
    const QbfInstance sat = parse_qdimacs("p cnf 3 2\ne 1 2 3 0\n1 2 0\n-1 3 0\n");
    const QbfInstance unsat = parse_qdimacs("p cnf 3 4\ne 1 2 3 0\n1 2 0\n-1 0\n-2 3 0\n-3 0\n");
    ASSERT_TRUE(eval_qbf_brute(sat));
    ASSERT_FALSE(eval_qbf_brute(unsat));
    const std::size_t runs = 5000;
    std::size_t ok = 0;
    for (std::uint64_t seed = 0; seed < runs; ++seed) {
        ok += verdict(sat, 0.3, single_call(seed)) ? 1 : 0;
        EXPECT_FALSE(verdict(unsat, 0.3, single_call(seed)));
    }
    EXPECT_GE(static_cast<double>(ok) / runs, lower_3sigma(0.7, runs));
}

TEST(Reduce, FreshVariableTrickAgreesWithOracle) {
    const QbfInstance q = parse_qdimacs("p cnf 2 2\ne 1 0\na 2 0\n1 2 0\n1 -2 0\n");
    ASSERT_TRUE(eval_qbf_brute(q));
    ReductionConfig cfg = single_call();
    cfg.universal_innermost = UniversalInnermost::FreshVarTrick;
    const std::size_t runs = 1000;
    std::size_t ok = 0;
    for (std::uint64_t seed = 0; seed < runs; ++seed) {
        cfg.seed = seed;
        ok += verdict(q, 0.3, cfg) ? 1 : 0;
    }
    EXPECT_GE(static_cast<double>(ok) / runs, lower_3sigma(0.7, runs));
}

TEST(Reduce, DepthZeroKeepsTheMatrix) {
    const QbfInstance t = make_instance({}, Term::constant(true));
    const QbfInstance f = make_instance({}, Term::constant(false));
    EXPECT_TRUE(verdict(t, 0.3, ReductionConfig{}));
    EXPECT_FALSE(verdict(f, 0.3, ReductionConfig{}));
}

TEST(Reduce, RejectsBadEpsilon) {
    const QbfInstance q = parse_qdimacs("p cnf 1 1\ne 1 0\n1 0\n");
    EXPECT_THROW(reduce(q, 0.5, ReductionConfig{}), std::invalid_argument);
    EXPECT_THROW(reduce(q, 0.0, ReductionConfig{}), std::invalid_argument);
}

TEST(Reduce, SameSeedSameOutput) {
    SeededRng r(90);
    for (int it = 0; it < 30; ++it) {
        const auto d = static_cast<std::size_t>(r.uniform(1, 3));
        const QbfInstance q = testgen::random_qbf(r, d, static_cast<std::uint32_t>(r.uniform(d, 6)), r.uniform(1, 5));
        ReductionConfig cfg;
        cfg.multi_call = r.bit();
        cfg.seed = r.next();
        EXPECT_EQ(fingerprint(reduce(q, 0.3, cfg)), fingerprint(reduce(q, 0.3, cfg)));
    }
}

TEST(Reduce, MultiCallReturnsOuterRepetitions) {
    const QbfInstance q = parse_qdimacs("p cnf 4 2\ne 1 2 0\na 3 4 0\n1 3 0\n2 -4 0\n");
    ReductionConfig cfg;
    cfg.seed = 4;
    const ReducedOutput out = reduce(q, 0.3, cfg);
    const ReductionPlan plan = plan_reduction(shape_of(q, cfg), 0.3, cfg);
    EXPECT_EQ(out.combiner, Combiner::AnyOdd);
    EXPECT_EQ(out.formulas.size(), plan.steps.back().k);
    cfg.multi_call = false;
    EXPECT_EQ(reduce(q, 0.3, cfg).formulas.size(), 1U);
}

TEST(Reduce, TraceRespectsSizeLowerBound) {
    SeededRng r(91);
    for (int it = 0; it < 40; ++it) {
        const auto d = static_cast<std::size_t>(r.uniform(1, 3));
        const QbfInstance q = testgen::random_qbf(r, d, static_cast<std::uint32_t>(r.uniform(d, 6)), r.uniform(1, 5));
        ReductionConfig cfg;
        cfg.multi_call = r.bit();
        cfg.seed = r.next();
        const ReducedOutput out = reduce(q, 0.3, cfg);
        BigInt total = 0;
        for (const auto& f : out.formulas) total += f.term.size();
        EXPECT_GE(total, out.trace.size_bound);
        for (const auto& st : out.trace.steps) {
            EXPECT_GE(st.k, 1U);
            EXPECT_GE(st.size_after, st.size_before);
        }
    }
}

TEST(Reduce, PlanMatchesBuiltRepetitions) {
    SeededRng r(92);
    for (int it = 0; it < 60; ++it) {
        const auto d = static_cast<std::size_t>(r.uniform(1, 3));
        const QbfInstance q = testgen::random_qbf(r, d, static_cast<std::uint32_t>(r.uniform(d, 6)), r.uniform(1, 5));
        ReductionConfig cfg;
        cfg.allocation = r.bit() ? Allocation::Geometric : Allocation::Balanced;
        cfg.multi_call = r.bit();
        cfg.seed = r.next();
        const ReductionPlan plan = plan_reduction(shape_of(q, cfg), 0.3, cfg);
        const ReducedOutput out = reduce(q, 0.3, cfg);
        ASSERT_EQ(plan.steps.size(), out.trace.steps.size());
        for (std::size_t i = 0; i < plan.steps.size(); ++i) {
            EXPECT_EQ(plan.steps[i].k, out.trace.steps[i].k);
            EXPECT_EQ(plan.steps[i].l, out.trace.steps[i].l);
            EXPECT_EQ(plan.steps[i].parity_after, out.trace.steps[i].parity_vars_after);
        }
    }
}

// ---- parity algebra ----------------------------------------------------------

TEST(ParityAlgebra, FiveIdentitiesHoldOnRandomTerms) {
    selftest::Options o;
    o.seed = 8;
    const auto r = selftest::parity_algebra(o, 500);
    EXPECT_TRUE(r.passed) << r.detail;
    EXPECT_GT(r.checks, 2500U);
}
