#include <toda/budget.hpp>
#include <toda/cnf.hpp>
#include <toda/selftest.hpp>

#include "support/dpll.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace toda;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(TODA_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (p == nullptr) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

json run_json(const std::string& args, int* code = nullptr) {
    const Run r = run(args);
    if (code != nullptr) *code = r.code;
    return json::parse(r.out);
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("toda-cli-" + std::to_string(::getpid()) + "-" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string file(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p.string();
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

const char* kUnsat = "p cnf 2 3\ne 1 2 0\n1 2 0\n-1 0\n-2 0\n";
const char* kTrue = "p cnf 1 1\ne 1 0\n1 -1 0\n";
const char* kForallExists = "p cnf 2 2\na 1 0\ne 2 0\n1 -2 0\n-1 2 0\n";
const char* kExistsForall = "p cnf 3 2\ne 1 2 0\na 3 0\n1 3 0\n2 -3 0\n";

BigInt count_file(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    const CnfFormula c = parse_dimacs(ss.str());
    return oracle::dpll_count(c.num_vars, c.clauses);
}

}  // namespace

// ---- exit codes ------------------------------------------------------------

TEST_F(Cli, ExitCodeFollowsVerdict) {
    const std::string f = file("t.qdimacs", kForallExists);
    bool saw_true = false;
    for (int seed = 1; seed <= 20; ++seed) {
        int code = 0;
        const json j = run_json("solve " + f + " --seed " + std::to_string(seed), &code);
        EXPECT_EQ(code, j["verdict"].get<bool>() ? 10 : 20);
        saw_true = saw_true || code == 10;
    }
    EXPECT_TRUE(saw_true);
    EXPECT_EQ(run("solve " + file("u.qdimacs", kUnsat) + " --seed 3").code, 20);
}

TEST_F(Cli, ErrorExitCodes) {
    EXPECT_EQ(run("solve " + file("bad.qdimacs", "p cnf 1 1\ne 1 0\n5 0\n")).code, 3);
    EXPECT_EQ(run("solve " + file("free.qdimacs", "p cnf 2 1\ne 1 0\n1 2 0\n")).code, 2);
    const std::string t = file("t.qdimacs", kTrue);
    EXPECT_EQ(run("solve " + t + " --epsilon 0.6").code, 2);
    EXPECT_EQ(run("solve " + t + " --sieve nope").code, 2);
    EXPECT_EQ(run("solve " + t + " --no-such-flag").code, 2);
    EXPECT_EQ(run("solve " + t + " --allocation sideways").code, 2);
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("analyze --shape e3,a3,e3,a3,e3,a3 --matrix-size 20 --seed 1").code, 2);
}

TEST_F(Cli, CounterFailureAndTimeout) {
    const std::string t = file("t.qdimacs", kTrue);
    const std::string fake = FAKE_COUNTER_PATH;
    EXPECT_EQ(run("solve " + t + " --seed 1 --counter '" + fake + " --exit 1'").code, 4);
    EXPECT_EQ(run("solve " + t + " --seed 1 --counter '" + fake + " --format none'").code, 4);
    EXPECT_EQ(run("solve " + t + " --seed 1 --counter '" + fake + " --sleep 20' --counter-timeout 0.5").code, 5);
}

TEST_F(Cli, ExternalCounterMatchesInternal) {
    const std::string f = file("t.qdimacs", kForallExists);
    const std::string fake = FAKE_COUNTER_PATH;
    for (int seed = 1; seed <= 5; ++seed) {
        const std::string s = " --seed " + std::to_string(seed) + " --run-all";
        const json a = run_json("solve " + f + s);
        const json b = run_json("solve " + f + s + " --counter '" + fake + " {cnf}'");
        const json c = run_json("solve " + f + s + " --counter '" + fake + " --format word' --counter-mode parity");
        EXPECT_EQ(a["verdict"], b["verdict"]);
        EXPECT_EQ(a["odd_count"], b["odd_count"]);
        EXPECT_EQ(a["odd_count"], c["odd_count"]);
    }
}

TEST_F(Cli, CounterFromEnvironment) {
    const std::string t = file("t.qdimacs", kTrue);
    const std::string cmd = "TODA_COUNTER='" + std::string(FAKE_COUNTER_PATH) + " --exit 2' ";
    const std::string full = cmd + TODA_CLI_PATH + " solve " + t + " --seed 1 >/dev/null 2>&1";
    const int status = std::system(full.c_str());
    EXPECT_EQ(WEXITSTATUS(status), 4);
}

// ---- analyze ---------------------------------------------------------------

TEST_F(Cli, AnalyzeWorkedExample) {
    const json j = run_json(
        "analyze --shape e5,a5 --allocation geometric --rep-interpretation paper_example --sieve vv --vv-bound 1_8n "
        "--epsilon 0.3 --seed 1");
    EXPECT_EQ(j["repetitions"], json::array({240, 75}));
    EXPECT_EQ(j["size_factor"], "18000");
    EXPECT_EQ(j["steps"][0]["eps"].get<double>(), 0.075);
    EXPECT_EQ(j["steps"][1]["eps"].get<double>(), 0.15);
}

TEST_F(Cli, AnalyzeBalancedDepthTwo) {
    const json j = run_json("analyze --shape e5,a5 --allocation balanced --epsilon 0.3 --seed 1");
    EXPECT_EQ(j["eps_allocation"], json::array({0.3, 0.3}));
    EXPECT_GE(j["success_lower_bound"].get<double>(), 0.7 - 1e-12);
}

TEST_F(Cli, AnalyzeFromFileMatchesShape) {
    const std::string f = file("ef.qdimacs", kExistsForall);
    const json a = run_json("analyze " + f + " --seed 1");
    EXPECT_EQ(a["block_sizes"], json::array({2, 1}));
    EXPECT_EQ(a["quantifiers"], json::array({"exists", "forall"}));
    EXPECT_EQ(a["combiner"], "any_odd");
}

TEST_F(Cli, AutoSieveChoosesTheCheapestL) {
    const json j = run_json("analyze --shape e5,a5,e5 --sieve ma:auto:12 --seed 1");
    for (const auto& st : j["steps"]) {
        ASSERT_TRUE(st.contains("cost_curve"));
        const auto& curve = st["cost_curve"];
        ASSERT_EQ(curve.size(), 12U);
        std::size_t best = 0;
        for (std::size_t i = 1; i < curve.size(); ++i)
            if (BigInt(curve[i].get<std::string>()) < BigInt(curve[best].get<std::string>())) best = i;
        EXPECT_EQ(st["l"].get<std::size_t>(), best + 1);
    }
}

// ---- determinism -----------------------------------------------------------

TEST_F(Cli, SameSeedSameReport) {
    const std::string f = file("ef.qdimacs", kExistsForall);
    for (const char* extra : {"", " --no-multicall", " --majority 0.3,0.9 -j 3"}) {
        json a = run_json("solve " + f + " --seed 42" + extra);
        json b = run_json("solve " + f + " --seed 42" + extra);
        a.erase("timing");
        b.erase("timing");
        EXPECT_EQ(a, b) << extra;
    }
}

// ---- emit ------------------------------------------------------------------

TEST_F(Cli, EmitSingleCallFile) {
    const std::string f = file("t.qdimacs", kTrue);
    for (int seed = 1; seed <= 5; ++seed) {
        const std::string s = " --seed " + std::to_string(seed) + " --no-multicall";
        const json e = run_json("emit " + f + s + " -o " + path("out"));
        ASSERT_EQ(e["files"].size(), 1U);
        EXPECT_EQ(e["files"][0]["path"], path("out") + ".cnf");
        const BigInt c = count_file(path("out.cnf"));
        const json v = run_json("solve " + f + s);
        EXPECT_EQ((c % 2 == 1) != e["offset"].get<bool>(), v["verdict"].get<bool>());
    }
}

TEST_F(Cli, EmitMultiCallFiles) {
    const std::string f = file("s.qdimacs", "p cnf 2 1\ne 1 2 0\n1 2 0\n");
    const json a = run_json("analyze " + f + " --seed 7");
    const auto k1 = a["repetitions"].back().get<std::size_t>();
    const json e = run_json("emit " + f + " --seed 7 -o " + path("m"));
    ASSERT_EQ(e["files"].size(), k1);
    EXPECT_EQ(e["combiner"], "any_odd");
    bool any_odd = false;
    for (std::size_t i = 1; i <= k1; ++i) {
        const std::string p = path("m." + std::to_string(i) + ".cnf");
        ASSERT_TRUE(fs::exists(p));
        any_odd = any_odd || count_file(p) % 2 == 1;
    }
    const json v = run_json("solve " + f + " --seed 7");
    EXPECT_EQ(any_odd, v["verdict"].get<bool>());
}

TEST_F(Cli, EmitFileCountFollowsOuterRepetitions) {
    const std::string f = file("ef.qdimacs", kExistsForall);
    for (int seed : {1, 2, 3}) {
        const std::string s = " --seed " + std::to_string(seed);
        const json a = run_json("analyze " + f + s);
        const json e = run_json("emit " + f + s + " -o " + path("m"));
        EXPECT_EQ(e["files"].size(), a["repetitions"].back().get<std::size_t>());
        const json single = run_json("emit " + f + s + " --no-multicall -o " + path("one"));
        EXPECT_EQ(single["files"].size(), 1U);
    }
}

TEST_F(Cli, EmitWritesProvenanceComments) {
    const std::string f = file("t.qdimacs", kTrue);
    run("emit " + f + " --seed 9 --no-multicall -o " + path("c"));
    std::ifstream in(path("c.cnf"));
    std::string first;
    std::getline(in, first);
    EXPECT_EQ(first, "c seed 9");
}

// ---- statistical behaviour --------------------------------------------------

TEST_F(Cli, UnsatisfiableExistentialIsAlwaysFalse) {
    const std::string f = file("u.qdimacs", kUnsat);
    for (int seed = 0; seed < 50; ++seed) EXPECT_EQ(run("solve " + f + " --seed " + std::to_string(seed)).code, 20);
}

TEST_F(Cli, TautologyIsMostlyTrue) {
    const std::string f = file("t.qdimacs", kTrue);
    int yes = 0;
    for (int seed = 0; seed < 100; ++seed) yes += run("solve " + f + " --seed " + std::to_string(seed)).code == 10 ? 1 : 0;
    EXPECT_GE(yes, 70);
}

// ---- selftest --------------------------------------------------------------

TEST_F(Cli, SelftestPasses) {
    int code = -1;
    const json j = run_json("selftest --seed 3 --scale 0.5", &code);
    EXPECT_EQ(code, 0);
    EXPECT_TRUE(j["passed"].get<bool>());
    EXPECT_EQ(j["suites"].size(), 6U);
}

TEST(SelftestMutation, CorruptedPairMatrixIsCaught) {
    selftest::Options o;
    o.provider = [](double p, bool uncancelled, bool innermost_forall) {
        TransitionMatrices t = pair_matrices(p, uncancelled, innermost_forall);
        t.m_pair[0][1] += 0.01;
        t.m_pair[1][1] -= 0.01;
        return t;
    };
    EXPECT_FALSE(selftest::transition_matrices(o).passed);
    selftest::Options clean;
    EXPECT_TRUE(selftest::transition_matrices(clean).passed);
}
