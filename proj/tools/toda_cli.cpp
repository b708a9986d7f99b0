#include <toda/budget.hpp>
#include <toda/cnf.hpp>
#include <toda/counting.hpp>
#include <toda/reduce.hpp>
#include <toda/selftest.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

using json = nlohmann::ordered_json;
using namespace toda;

namespace {

enum Exit : int {
    kInternal = 1,
    kConfig = 2,
    kParse = 3,
    kCounter = 4,
    kTimeout = 5,
    kTrue = 10,
    kFalse = 20,
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Settings {
    std::string input;
    std::string shape;
    std::uint64_t matrix_size = 1;
    double epsilon = 0.3;
    std::string allocation = "balanced";
    std::string vv_bound = "19_64n";
    std::string sieve = "ma:auto:64";
    std::string hash_cnf = "tseytin";
    bool multicall = true;
    std::string majority;
    std::string rep_interpretation = "algorithm2";
    std::string universal = "negate_matrix";
    bool cancel = true;
    std::optional<std::uint64_t> seed;
    std::string counter;
    std::string counter_mode = "count";
    double counter_timeout = 600.0;
    std::size_t parallelism = 1;
    bool run_all = false;
    std::string output;
    double selftest_scale = 1.0;
};

std::uint64_t parse_u64(const std::string& s, const char* what) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size() || s.empty()) throw ConfigError(std::string("invalid ") + what + ": '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const char* what) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size() || s.empty()) throw ConfigError(std::string("invalid ") + what + ": '" + s + "'");
    return v;
}

SieveConfig parse_sieve(const std::string& text, VvBound bound) {
    SieveConfig sc;
    sc.bound = bound;
    if (text == "vv") {
        sc.kind = SieveKind::Vv;
    } else if (text.rfind("ma:auto:", 0) == 0) {
        sc.kind = SieveKind::ModularAdditionAuto;
        sc.l_max = parse_u64(text.substr(8), "sieve L_max");
        if (sc.l_max < 1) throw ConfigError("sieve L_max must be at least 1");
    } else if (text.rfind("ma:", 0) == 0) {
        sc.kind = SieveKind::ModularAddition;
        sc.l = parse_u64(text.substr(3), "sieve l");
        if (sc.l < 1) throw ConfigError("sieve l must be at least 1");
    } else {
        throw ConfigError("unknown sieve '" + text + "' (expected vv, ma:<l> or ma:auto:<L>)");
    }
    return sc;
}

VvBound parse_bound(const std::string& s) {
    if (s == "1_8n") return VvBound::Standard;
    if (s == "3_16n") return VvBound::Tight;
    if (s == "19_64n") return VvBound::Refined;
    throw ConfigError("unknown vv bound '" + s + "' (expected 1_8n, 3_16n or 19_64n)");
}

HashCnfMode parse_hash(const std::string& s) {
    if (s == "none") return HashCnfMode::DoNothing;
    if (s == "tseytin") return HashCnfMode::TseytinHash;
    if (s == "parity") return HashCnfMode::ParityHash;
    throw ConfigError("unknown hash encoding '" + s + "' (expected none, tseytin or parity)");
}

std::optional<MajorityVote> parse_majority(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw ConfigError("majority expects '<eps0>,<target>'");
    MajorityVote m{parse_double(s.substr(0, comma), "majority eps0"), parse_double(s.substr(comma + 1), "majority target")};
    if (!(m.eps0 > 0 && m.eps0 < 0.5)) throw ConfigError("majority eps0 must lie in (0, 0.5)");
    if (!(m.target > 0.5 && m.target < 1)) throw ConfigError("majority target must lie in (0.5, 1)");
    return m;
}

CounterBackend parse_counter(const Settings& st) {
    std::string cmd = st.counter;
    if (cmd.empty())
        if (const char* env = std::getenv("TODA_COUNTER")) cmd = env;
    if (cmd.empty() || cmd == "internal") return InternalStructural{};
    if (cmd == "brute") return InternalBruteForce{};
    ExternalCounter ext;
    ext.command = cmd;
    ext.timeout_s = st.counter_timeout;
    if (st.counter_mode == "count") ext.mode = ParseMode::IntegerCount;
    else if (st.counter_mode == "parity") ext.mode = ParseMode::ParityToken;
    else throw ConfigError("unknown counter mode '" + st.counter_mode + "' (expected count or parity)");
    if (!(ext.timeout_s > 0)) throw ConfigError("counter timeout must be positive");
    return ext;
}

std::string backend_name(const CounterBackend& b) {
    if (std::holds_alternative<InternalStructural>(b)) return "internal";
    if (std::holds_alternative<InternalBruteForce>(b)) return "brute";
    return std::get<ExternalCounter>(b).command;
}

struct Resolved {
    double eps = 0.3;
    ReductionConfig cfg;
    DecideOptions decide;
    std::optional<MajorityVote> majority;
};

Resolved resolve(const Settings& st) {
    if (!(st.epsilon > 0 && st.epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
    Resolved r;
    r.eps = st.epsilon;
    if (st.allocation == "geometric") r.cfg.allocation = Allocation::Geometric;
    else if (st.allocation == "balanced") r.cfg.allocation = Allocation::Balanced;
    else throw ConfigError("unknown allocation '" + st.allocation + "'");
    r.cfg.sieve = parse_sieve(st.sieve, parse_bound(st.vv_bound));
    if (st.rep_interpretation == "algorithm2") r.cfg.reps = RepInterpretation::Algorithm2;
    else if (st.rep_interpretation == "paper_example") r.cfg.reps = RepInterpretation::PaperExample;
    else throw ConfigError("unknown repetition interpretation '" + st.rep_interpretation + "'");
    if (st.universal == "negate_matrix") r.cfg.universal_innermost = UniversalInnermost::NegateMatrix;
    else if (st.universal == "fresh_var") r.cfg.universal_innermost = UniversalInnermost::FreshVarTrick;
    else throw ConfigError("unknown universal-innermost mode '" + st.universal + "'");
    r.cfg.multi_call = st.multicall;
    r.cfg.cancel_double_negation = st.cancel;
    r.cfg.seed = *st.seed;
    r.decide.hash_mode = parse_hash(st.hash_cnf);
    r.decide.backend = parse_counter(st);
    r.decide.parallelism = std::max<std::size_t>(1, st.parallelism);
    r.decide.run_all = st.run_all;
    r.majority = parse_majority(st.majority);
    return r;
}

QbfInstance load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read input '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_qdimacs(ss.str());
}

/// "e5,a5" -> quantifiers and block sizes, outermost first.
Shape parse_shape(const std::string& text, std::uint64_t matrix_size) {
    Shape sh;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.size() < 2) throw ConfigError("bad shape block '" + part + "'");
        const char q = static_cast<char>(std::tolower(static_cast<unsigned char>(part[0])));
        if (q != 'e' && q != 'a') throw ConfigError("shape blocks start with 'e' or 'a'");
        const auto n = parse_u64(part.substr(1), "block size");
        if (n == 0) throw ConfigError("empty block in shape");
        const Quantifier qq = q == 'e' ? Quantifier::Exists : Quantifier::Forall;
        if (!sh.quants.empty() && sh.quants.back() == qq) {
            sh.sizes.back() += n;
        } else {
            sh.quants.push_back(qq);
            sh.sizes.push_back(n);
        }
    }
    if (sh.quants.empty()) throw ConfigError("empty shape");
    sh.matrix_size = matrix_size;
    return sh;
}

json config_json(const Settings& st, const Resolved& r) {
    json c;
    c["epsilon"] = r.eps;
    c["allocation"] = st.allocation;
    c["vv_bound"] = st.vv_bound;
    c["sieve"] = st.sieve;
    c["hash_cnf"] = st.hash_cnf;
    c["multicall"] = st.multicall;
    c["rep_interpretation"] = st.rep_interpretation;
    c["universal_innermost"] = st.universal;
    c["cancel_double_negation"] = st.cancel;
    c["counter"] = backend_name(r.decide.backend);
    c["parallelism"] = r.decide.parallelism;
    if (r.majority) c["majority"] = {{"eps0", r.majority->eps0}, {"target", r.majority->target}, {"runs", majority_reps(r.majority->eps0, r.majority->target)}};
    return c;
}

std::string big(const BigInt& b) { return b.str(); }

json trace_json(const ReductionTrace& t) {
    json steps = json::array();
    for (const auto& s : t.steps) {
        steps.push_back({{"step", s.step}, {"eps", s.eps}, {"k", s.k}, {"l", s.l}, {"s", s.s}, {"n", s.n_bound},
                         {"p", s.p}, {"size_before", s.size_before}, {"size_after", s.size_after},
                         {"parity_vars", s.parity_vars_after}, {"plus_ones", s.plus_ones}, {"offset", s.offset}});
    }
    return {{"steps", steps}, {"total_plus_ones", t.total_plus_ones}, {"input_size", t.input_size},
            {"size_lower_bound", big(t.size_bound)}, {"digest", t.digest()}};
}

void write_json(const Settings& st, const json& j) {
    const std::string text = j.dump(2) + "\n";
    if (!st.output.empty() && st.output != "-") {
        std::ofstream out(st.output);
        if (!out) throw ConfigError("cannot write '" + st.output + "'");
        out << text;
    } else {
        std::cout << text;
    }
}

const char* quant_name(Quantifier q) { return q == Quantifier::Exists ? "exists" : "forall"; }

int cmd_analyze(const Settings& st) {
    const Resolved r = resolve(st);
    Shape sh;
    if (!st.shape.empty()) {
        sh = parse_shape(st.shape, st.matrix_size);
    } else if (!st.input.empty()) {
        QbfInstance q = load(st.input);
        q.require_sentence();
        sh = shape_of(q, r.cfg);
    } else {
        throw ConfigError("analyze needs an input file or --shape");
    }
    const ReductionPlan plan = plan_reduction(sh, r.eps, r.cfg);

    json steps = json::array();
    std::vector<std::uint64_t> ks;
    for (const auto& s : plan.steps) {
        json js{{"step", s.step}, {"quantifier", quant_name(sh.quants[s.step - 1])}, {"negated", s.negated},
                {"eps", s.eps}, {"block_size", s.block_size}, {"s", s.s}, {"n", s.n_bound},
                {"p_single", s.p_single}, {"l", s.l}, {"p", s.p}, {"k", s.k}, {"selectors", s.selectors},
                {"plus_ones", s.plus_ones}, {"split", s.split}, {"estimated_size", s.est_size_after}};
        if (!s.cost_curve.empty()) {
            json curve = json::array();
            for (const auto& c : s.cost_curve) curve.push_back(big(c));
            js["cost_curve"] = curve;
        }
        steps.push_back(std::move(js));
        ks.push_back(s.k);
    }
    json j;
    j["command"] = "analyze";
    j["seed"] = *st.seed;
    j["config"] = config_json(st, r);
    json quants = json::array();
    for (auto q : sh.quants) quants.push_back(quant_name(q));
    j["quantifiers"] = quants;
    j["block_sizes"] = sh.sizes;
    j["eps_allocation"] = plan.alloc.eps;
    if (plan.alloc.p_balanced) j["p_balanced"] = *plan.alloc.p_balanced;
    j["steps"] = steps;
    j["repetitions"] = ks;
    j["size_factor"] = big(size_lower_bound(1, ks));
    j["input_size"] = plan.input_size;
    j["size_lower_bound"] = big(plan.size_bound);
    j["combiner"] = to_string(plan.combiner);
    j["success_lower_bound"] = plan.success_lower_bound;
    write_json(st, j);

    std::cerr << "analyze: d=" << sh.quants.size() << " k=";
    for (std::size_t i = 0; i < ks.size(); ++i) std::cerr << (i ? "," : "") << ks[i];
    std::cerr << " size factor " << big(size_lower_bound(1, ks)) << " (innermost step first), seed " << *st.seed << '\n';
    return 0;
}

int cmd_solve(const Settings& st) {
    const Resolved r = resolve(st);
    if (st.input.empty()) throw ConfigError("solve needs an input file");
    const QbfInstance q = load(st.input);
    q.require_sentence();
    SolveOptions so;
    so.eps = r.eps;
    so.cfg = r.cfg;
    so.decide = r.decide;
    so.majority = r.majority;

    json j;
    j["command"] = "solve";
    j["input"] = st.input;
    j["seed"] = *st.seed;
    j["config"] = config_json(st, r);
    try {
        const SolveResult res = solve(q, so);
        const Verdict& v = res.verdict;
        j["verdict"] = v.value;
        j["runs"] = v.runs;
        j["odd_count"] = v.odd_count;
        j["even_count"] = v.even_count;
        j["reductions"] = v.reductions;
        j["votes"] = {{"true", v.votes_true}, {"false", v.votes_false}};
        j["seeds"] = v.seeds;
        j["combiner"] = to_string(res.combiner);
        j["success_lower_bound"] = res.success_lower_bound;
        j["trace"] = trace_json(res.trace);
        j["timing"] = {{"durations", v.durations}};
        write_json(st, j);
        std::cerr << "solve: " << (v.value ? "TRUE" : "FALSE") << " (" << v.odd_count << " odd / " << v.even_count
                  << " even over " << v.runs << " counts, " << v.reductions << " reductions), success >= "
                  << res.success_lower_bound << ", seed " << *st.seed << '\n';
        return v.value ? kTrue : kFalse;
    } catch (const DecideError& e) {
        const Verdict& v = e.partial();
        j["error"] = e.what();
        j["partial"] = {{"runs", v.runs}, {"odd_count", v.odd_count}, {"even_count", v.even_count}, {"seeds", v.seeds}};
        write_json(st, j);
        std::cerr << "solve: counter failure: " << e.what() << " (seed " << *st.seed << ")\n";
        return e.counter_kind() == CounterError::Kind::Timeout ? kTimeout : kCounter;
    }
}

int cmd_emit(const Settings& st) {
    const Resolved r = resolve(st);
    if (st.input.empty()) throw ConfigError("emit needs an input file");
    if (r.majority) throw ConfigError("emit does not take --majority");
    const QbfInstance q = load(st.input);
    q.require_sentence();
    const ReducedOutput out = reduce(q, r.eps, r.cfg);

    const std::string base = st.output.empty() ? std::filesystem::path(st.input).stem().string() : st.output;
    std::ostringstream cfg_line;
    cfg_line << "eps=" << r.eps << " allocation=" << st.allocation << " sieve=" << st.sieve << " vv=" << st.vv_bound
             << " hash=" << st.hash_cnf << " reps=" << st.rep_interpretation;
    json files = json::array();
    for (std::size_t i = 0; i < out.formulas.size(); ++i) {
        VarSupply supply(out.next_var);
        EncodedCnf e = encode(out.formulas[i], r.decide.hash_mode, supply);
        e.cnf.comments = {"seed " + std::to_string(out.seed), "config " + cfg_line.str(),
                          "trace " + out.trace.digest(), "combiner " + std::string(to_string(out.combiner)),
                          "offset " + std::to_string(out.offset ? 1 : 0),
                          "part " + std::to_string(i + 1) + " of " + std::to_string(out.formulas.size())};
        const std::string path = out.formulas.size() == 1 ? base + ".cnf" : base + "." + std::to_string(i + 1) + ".cnf";
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot write '" + path + "'");
        f << emit_dimacs(e.cnf);
        files.push_back({{"path", path}, {"vars", e.cnf.num_vars}, {"clauses", e.cnf.clauses.size()}});
    }
    json j;
    j["command"] = "emit";
    j["input"] = st.input;
    j["seed"] = *st.seed;
    j["config"] = config_json(st, r);
    j["combiner"] = to_string(out.combiner);
    j["offset"] = out.offset;
    j["files"] = files;
    j["trace"] = trace_json(out.trace);
    std::cout << j.dump(2) << '\n';
    std::cerr << "emit: wrote " << files.size() << " file(s), combiner " << to_string(out.combiner) << ", seed "
              << *st.seed << '\n';
    return 0;
}

int cmd_selftest(const Settings& st) {
    selftest::Options o;
    o.seed = *st.seed;
    o.scale = st.selftest_scale;
    const auto results = selftest::run_all(o);
    json suites = json::array();
    bool ok = true;
    for (const auto& s : results) {
        ok = ok && s.passed;
        suites.push_back({{"name", s.name}, {"passed", s.passed}, {"checks", s.checks}, {"seconds", s.seconds},
                          {"detail", s.detail}});
        std::cerr << (s.passed ? "PASS " : "FAIL ") << s.name << " (" << s.checks << " checks, " << s.seconds << " s)"
                  << (s.detail.empty() ? "" : ": " + s.detail) << '\n';
    }
    json j{{"command", "selftest"}, {"seed", *st.seed}, {"passed", ok}, {"suites", suites}};
    write_json(st, j);
    return ok ? 0 : kInternal;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomized QBF decision through parity counting"};
    app.require_subcommand(1);
    Settings st;

    auto add_common = [&](CLI::App* c) {
        c->add_option("-e,--epsilon", st.epsilon, "Error bound in (0, 0.5)");
        c->add_option("--allocation", st.allocation, "geometric | balanced");
        c->add_option("--vv-bound", st.vv_bound, "1_8n | 3_16n | 19_64n");
        c->add_option("--sieve", st.sieve, "vv | ma:<l> | ma:auto:<L>");
        c->add_option("--rep-interpretation", st.rep_interpretation, "algorithm2 | paper_example");
        c->add_option("--universal-innermost", st.universal, "negate_matrix | fresh_var");
        c->add_flag("--multicall,!--no-multicall", st.multicall, "Count outermost repetitions separately");
        c->add_flag("--cancel-negations,!--no-cancel-negations", st.cancel, "Elide paired +1 operations");
        c->add_option("--seed", st.seed, "Random seed (generated and printed when omitted)");
        c->add_option("-o,--output", st.output, "Output path");
    };
    auto add_counting = [&](CLI::App* c) {
        c->add_option("--hash-cnf", st.hash_cnf, "none | tseytin | parity");
        c->add_option("--counter", st.counter, "internal | brute | external command with {cnf} (default: $TODA_COUNTER)");
        c->add_option("--counter-mode", st.counter_mode, "count | parity");
        c->add_option("--counter-timeout", st.counter_timeout, "Seconds per external call");
        c->add_option("--majority", st.majority, "<eps0>,<target>");
        c->add_option("-j,--parallelism", st.parallelism, "Concurrent counter calls");
        c->add_flag("--run-all", st.run_all, "Count every multi-call formula");
    };

    auto* solve_cmd = app.add_subcommand("solve", "Decide a QDIMACS instance");
    solve_cmd->add_option("input", st.input, "QDIMACS file")->required();
    add_common(solve_cmd);
    add_counting(solve_cmd);

    auto* emit_cmd = app.add_subcommand("emit", "Write the reduced CNF file(s) without counting");
    emit_cmd->add_option("input", st.input, "QDIMACS file")->required();
    add_common(emit_cmd);
    emit_cmd->add_option("--hash-cnf", st.hash_cnf, "none | tseytin | parity");

    auto* analyze_cmd = app.add_subcommand("analyze", "Report repetition counts and size bounds");
    analyze_cmd->add_option("input", st.input, "QDIMACS file");
    analyze_cmd->add_option("--shape", st.shape, "Prefix such as e5,a5 instead of an input file");
    analyze_cmd->add_option("--matrix-size", st.matrix_size, "Matrix size used with --shape");
    add_common(analyze_cmd);

    auto* selftest_cmd = app.add_subcommand("selftest", "Run the invariant suites");
    selftest_cmd->add_option("--seed", st.seed, "Random seed");
    selftest_cmd->add_option("--scale", st.selftest_scale, "Trial count multiplier");
    selftest_cmd->add_option("-o,--output", st.output, "Output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfig;
    }
    if (!st.seed) st.seed = std::random_device{}() ^ (static_cast<std::uint64_t>(std::random_device{}()) << 32);
    std::cerr << "seed " << *st.seed << '\n';

    try {
        if (*solve_cmd) return cmd_solve(st);
        if (*emit_cmd) return cmd_emit(st);
        if (*analyze_cmd) return cmd_analyze(st);
        return cmd_selftest(st);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kParse;
    } catch (const NotASentence& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::overflow_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}
