#include <toda/counting.hpp>
#include <toda/qbf.hpp>

#include "support/generators.hpp"

#include <gtest/gtest.h>

using namespace toda;

TEST(ParseQdimacs, SmallestSentence) {
    const QbfInstance q = parse_qdimacs("p cnf 1 1\ne 1 0\n1 0");
    ASSERT_EQ(q.depth(), 1U);
    EXPECT_EQ(q.blocks[0].q, Quantifier::Exists);
    ASSERT_EQ(q.blocks[0].vars.size(), 1U);
    EXPECT_EQ(q.blocks[0].vars[0].id, 1U);
    EXPECT_EQ(to_string(q.matrix), "x1");
    EXPECT_TRUE(q.is_sentence());
}

TEST(ParseQdimacs, UniversalThenExistential) {
    const QbfInstance q = parse_qdimacs("p cnf 2 1\na 1 0\ne 2 0\n1 2 0\n");
    ASSERT_EQ(q.depth(), 2U);
    EXPECT_EQ(q.blocks[0].q, Quantifier::Forall);
    EXPECT_EQ(q.blocks[1].q, Quantifier::Exists);
    EXPECT_EQ(to_string(q.matrix), "(x1 | x2)");
}

TEST(ParseQdimacs, AdjacentBlocksMerge) {
    const QbfInstance q = parse_qdimacs("p cnf 2 1\ne 1 0\ne 2 0\n1 2 0\n");
    ASSERT_EQ(q.depth(), 1U);
    ASSERT_EQ(q.blocks[0].vars.size(), 2U);
    EXPECT_EQ(q.blocks[0].vars[0].id, 1U);
    EXPECT_EQ(q.blocks[0].vars[1].id, 2U);
}

TEST(ParseQdimacs, CommentsAndBlankLinesAreIgnored) {
    const QbfInstance q = parse_qdimacs("c hello\n\np cnf 2 2\nc mid\ne 1 2 0\n1 0\n-2 0\n");
    EXPECT_EQ(q.clauses.size(), 2U);
}

TEST(ParseQdimacs, UnquantifiedVariablesAreFree) {
    const QbfInstance q = parse_qdimacs("p cnf 2 1\ne 1 0\n1 2 0\n");
    ASSERT_EQ(q.free.size(), 1U);
    EXPECT_EQ(q.free[0].id, 2U);
    EXPECT_FALSE(q.is_sentence());
    EXPECT_THROW(q.require_sentence(), NotASentence);
}

TEST(ParseQdimacs, RejectsMalformedInput) {
    EXPECT_THROW(parse_qdimacs("p dnf 1 1\n1 0\n"), ParseError);
    EXPECT_THROW(parse_qdimacs("p cnf x 1\n1 0\n"), ParseError);
    EXPECT_THROW(parse_qdimacs("p cnf 1 1\np cnf 1 1\n1 0\n"), ParseError);
    EXPECT_THROW(parse_qdimacs("p cnf 1 1\ne 2 0\n1 0\n"), ParseError);
    EXPECT_THROW(parse_qdimacs("p cnf 1 1\ne 1 0\n3 0\n"), ParseError);
    EXPECT_THROW(parse_qdimacs("p cnf 1 1\ne 1\n1 0\n"), ParseError);
    EXPECT_THROW(parse_qdimacs("p cnf 1 1\ne 1 0\n1\n"), ParseError);
    EXPECT_THROW(parse_qdimacs("p cnf 1 1\n1 0\ne 1 0\n"), ParseError);
    EXPECT_THROW(parse_qdimacs("p cnf 1 2\ne 1 0\n1 0\n"), ParseError);
    EXPECT_THROW(parse_qdimacs("e 1 0\n1 0\n"), ParseError);
}

TEST(ParseQdimacs, ErrorCarriesLineNumber) {
    try {
        parse_qdimacs("p cnf 1 1\ne 1 0\n7 0\n");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3U);
    }
}

TEST(ParseQdimacs, VariableQuantifiedTwiceIsRejected) {
    EXPECT_THROW(parse_qdimacs("p cnf 2 1\ne 1 0\na 1 2 0\n1 0\n"), ParseError);
}

TEST(ParseQdimacs, EmptyClauseGivesFalseMatrix) {
    const QbfInstance q = parse_qdimacs("p cnf 1 1\ne 1 0\n0\n");
    EXPECT_TRUE(q.matrix.is_const(false));
    EXPECT_FALSE(eval_qbf_brute(q));
}

TEST(ParseQdimacs, RoundTripPreservesStructure) {
    SeededRng r(31);
    for (int i = 0; i < 200; ++i) {
        const auto d = static_cast<std::size_t>(r.uniform(1, 4));
        const auto n = static_cast<std::uint32_t>(r.uniform(d, 8));
        const QbfInstance q = testgen::random_qbf(r, d, n, r.uniform(1, 6));
        const QbfInstance back = parse_qdimacs(to_qdimacs(q));
        EXPECT_TRUE(same_instance(q, back)) << to_qdimacs(q);
    }
}

TEST(QbfOracles, KnownSentences) {
    EXPECT_TRUE(eval_qbf_brute(parse_qdimacs("p cnf 2 2\na 1 0\ne 2 0\n1 -2 0\n-1 2 0\n")));
    EXPECT_FALSE(eval_qbf_brute(parse_qdimacs("p cnf 2 2\ne 1 0\na 2 0\n1 -2 0\n-1 2 0\n")));
}

TEST(QbfOracles, TwoImplementationsAgree) {
    SeededRng r(77);
    for (int i = 0; i < 500; ++i) {
        const auto d = static_cast<std::size_t>(r.uniform(1, 4));
        const auto n = static_cast<std::uint32_t>(r.uniform(d, 10));
        const QbfInstance q = testgen::random_qbf(r, d, n, r.uniform(1, 12));
        EXPECT_EQ(eval_qbf_brute(q), eval_qbf_table(q)) << to_qdimacs(q);
    }
}

TEST(QbfOracles, CapIsEnforced) {
    std::string text = "p cnf 21 1\ne";
    for (int i = 1; i <= 21; ++i) text += " " + std::to_string(i);
    text += " 0\n1 0\n";
    EXPECT_THROW(eval_qbf_brute(parse_qdimacs(text)), CapExceeded);
}
