#pragma once

#include <toda/cnf.hpp>
#include <toda/formula.hpp>
#include <toda/qbf.hpp>
#include <toda/reduce.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <fcntl.h>
#include <future>
#include <optional>
#include <poll.h>
#include <regex>
#include <sys/wait.h>
#include <unistd.h>
#include <variant>

namespace toda {

class CapExceeded : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr unsigned kBruteForceCap = 30;

// ---- brute force over CNF --------------------------------------------------

inline std::uint64_t brute_count(const CnfFormula& c, unsigned cap = kBruteForceCap) {
    if (cap > kBruteForceCap) cap = kBruteForceCap;
    if (c.num_vars > cap)
        throw CapExceeded("brute force: " + std::to_string(c.num_vars) + " variables exceed the cap of " + std::to_string(cap));
    struct Masks { std::uint32_t pos = 0, neg = 0; };
    std::vector<Masks> cls;
    cls.reserve(c.clauses.size());
    for (const auto& cl : c.clauses) {
        Masks m;
        for (int l : cl) {
            const std::uint32_t bit = 1U << (std::abs(l) - 1);
            (l > 0 ? m.pos : m.neg) |= bit;
        }
        cls.push_back(m);
    }
    const std::uint64_t total = std::uint64_t{1} << c.num_vars;
    std::uint64_t count = 0;
    for (std::uint64_t a = 0; a < total; ++a) {
        const auto x = static_cast<std::uint32_t>(a);
        bool ok = true;
        for (const auto& m : cls) {
            if (((x & m.pos) | (~x & m.neg)) == 0) {
                ok = false;
                break;
            }
        }
        count += ok ? 1 : 0;
    }
    return count;
}

inline bool brute_parity(const CnfFormula& c, unsigned cap = kBruteForceCap) { return (brute_count(c, cap) & 1U) != 0; }

// ---- brute force over terms ------------------------------------------------

/// Models of `t` over `scope` by enumeration.
inline std::uint64_t brute_count_term(const Term& t, std::span<const Var> scope, unsigned cap = 26) {
    if (scope.size() > cap) throw CapExceeded("term enumeration: scope too large");
    std::uint32_t top = 0;
    for (Var v : scope) top = std::max(top, v.id);
    for (Var v : t.free_vars())
        if (std::find(scope.begin(), scope.end(), v) == scope.end())
            throw std::invalid_argument("term enumeration: free variable outside scope");
    Assignment a(top + 1, 0);
    std::uint64_t count = 0;
    const std::uint64_t total = std::uint64_t{1} << scope.size();
    for (std::uint64_t m = 0; m < total; ++m) {
        for (std::size_t i = 0; i < scope.size(); ++i) a[scope[i].id] = static_cast<std::uint8_t>((m >> i) & 1U);
        count += evaluate(t, a) ? 1 : 0;
    }
    return count;
}

inline std::uint64_t brute_count_term(const Term& t) { return brute_count_term(t, as_span(t.free_vars())); }

// ---- structural counter ----------------------------------------------------

struct ParityOps {
    using T = bool;
    static T zero() { return false; }
    static T one() { return true; }
    static T pow2(std::size_t u) { return u == 0; }
    static T add(T a, T b) { return a != b; }
    static T sub(T a, T b) { return a != b; }
    static T mul(T a, T b) { return a && b; }
    static bool is_zero(T a) { return !a; }
};

struct ExactOps {
    using T = BigInt;
    static T zero() { return 0; }
    static T one() { return 1; }
    static T pow2(std::size_t u) { return T(1) << u; }
    static T add(const T& a, const T& b) { return a + b; }
    static T sub(const T& a, const T& b) { return a - b; }
    static T mul(const T& a, const T& b) { return a * b; }
    static bool is_zero(const T& a) { return a == 0; }
};

/// Model counter over terms. And-nodes propagate literal and unit-XOR children; Or-nodes drop
/// dead branches; children with disjoint unassigned variables multiply; otherwise the counter
/// branches, preferring a selector literal that decides between branches of an Or.
template <class Ops>
class StructuralCounter {
public:
    using T = typename Ops::T;

    T count(const Term& t, std::span<const Var> scope) {
        std::vector<Var> sc(scope.begin(), scope.end());
        std::sort(sc.begin(), sc.end());
        if (std::adjacent_find(sc.begin(), sc.end()) != sc.end()) throw std::invalid_argument("counter: scope repeats a variable");
        if (!std::includes(sc.begin(), sc.end(), t.free_vars().begin(), t.free_vars().end()))
            throw std::invalid_argument("counter: free variable outside scope");
        std::uint32_t top = sc.empty() ? 0 : sc.back().id;
        val_.assign(top + 1, -1);
        stamp_.assign(top + 1, 0);
        freq_.assign(top + 1, 0);
        epoch_ = 0;
        trail_.clear();
        T r = go(t);
        return Ops::mul(r, Ops::pow2(sc.size() - t.free_vars().size()));
    }

private:
    std::size_t unassigned(const Node& n) const {
        std::size_t u = 0;
        for (Var v : n.fv) u += val_[v.id] < 0 ? 1 : 0;
        return u;
    }

    void assign(Var v, bool b) {
        val_[v.id] = b ? 1 : 0;
        trail_.push_back(v.id);
    }

    void undo(std::size_t mark) {
        while (trail_.size() > mark) {
            val_[trail_.back()] = -1;
            trail_.pop_back();
        }
    }

    int lit_state(Lit l) const {
        const int v = val_[l.var.id];
        return v < 0 ? -1 : ((v == 1) != l.negated ? 1 : 0);
    }

    T go(const Term& t) {
        const Node& n = t.node();
        switch (n.kind) {
            case Kind::Const: return n.value ? Ops::one() : Ops::zero();
            case Kind::Literal: return lit_state(n.lit) == 0 ? Ops::zero() : Ops::one();
            case Kind::Xor: {
                std::size_t u = 0;
                bool x = false;
                for (Lit l : n.xor_lits) {
                    const int s = lit_state(l);
                    if (s < 0) ++u; else x ^= s == 1;
                }
                if (u > 0) return Ops::pow2(u - 1);
                return x == n.value ? Ops::one() : Ops::zero();
            }
            case Kind::Not: return Ops::sub(Ops::pow2(unassigned(n)), go(n.children[0]));
            case Kind::And: return go_and(n);
            case Kind::Or: return go_or(n);
        }
        return Ops::zero();
    }

    /// Among `live`, finds the unassigned variable shared by the most children (0 if none)
    /// and stores each child's unassigned count in `u`.
    std::uint32_t most_shared(const std::vector<const Term*>& live, std::vector<std::size_t>& u) {
        ++epoch_;
        std::uint32_t best = 0;
        std::uint32_t best_freq = 1;
        u.assign(live.size(), 0);
        for (std::size_t i = 0; i < live.size(); ++i) {
            for (Var v : live[i]->free_vars()) {
                if (val_[v.id] >= 0) continue;
                ++u[i];
                if (stamp_[v.id] != epoch_) {
                    stamp_[v.id] = epoch_;
                    freq_[v.id] = 1;
                    continue;
                }
                const std::uint32_t f = ++freq_[v.id];
                if (f > best_freq || (f == best_freq && v.id < best)) {
                    best_freq = f;
                    best = v.id;
                }
            }
        }
        return best;
    }

    T branch(std::uint32_t v, T (StructuralCounter::*self)(const Node&), const Node& n) {
        const std::size_t mark = trail_.size();
        assign(Var{v}, false);
        T r0 = (this->*self)(n);
        undo(mark);
        assign(Var{v}, true);
        T r1 = (this->*self)(n);
        undo(mark);
        return Ops::add(r0, r1);
    }

    T go_and(const Node& n) {
        const std::size_t mark = trail_.size();
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& c : n.children) {
                const Node& cn = c.node();
                if (cn.kind == Kind::Const) {
                    if (!cn.value) return fail(mark);
                } else if (cn.kind == Kind::Literal) {
                    const int s = lit_state(cn.lit);
                    if (s == 0) return fail(mark);
                    if (s < 0) {
                        assign(cn.lit.var, !cn.lit.negated);
                        changed = true;
                    }
                } else if (cn.kind == Kind::Xor) {
                    std::size_t u = 0;
                    bool x = false;
                    Lit open{};
                    for (Lit l : cn.xor_lits) {
                        const int s = lit_state(l);
                        if (s < 0) {
                            ++u;
                            open = l;
                        } else {
                            x ^= s == 1;
                        }
                    }
                    if (u == 0 && x != cn.value) return fail(mark);
                    if (u == 1) {
                        const bool need = x != cn.value;  // open literal must be true iff parity is short
                        assign(open.var, need != open.negated);
                        changed = true;
                    }
                }
            }
        }
        std::vector<const Term*> live;
        for (const auto& c : n.children) {
            const Kind k = c.kind();
            if (k == Kind::Const || k == Kind::Literal) continue;
            if (k == Kind::Xor && unassigned(c.node()) == 0) continue;
            live.push_back(&c);
        }
        T r = Ops::one();
        if (live.size() == 1) {
            r = go(*live.front());
        } else if (live.size() > 1) {
            std::uint32_t v = 0;
            if (!n.disjoint) {
                std::vector<std::size_t> u;
                v = most_shared(live, u);
            }
            if (v != 0) {
                r = branch(v, &StructuralCounter::go_and, n);
            } else {
                for (const Term* c : live) {
                    r = Ops::mul(r, go(*c));
                    if (Ops::is_zero(r)) break;
                }
            }
        }
        undo(mark);
        return r;
    }

    T fail(std::size_t mark) {
        undo(mark);
        return Ops::zero();
    }

    bool dead_under(const Node& cn) const {
        if (cn.kind != Kind::And) return false;
        for (const auto& g : cn.children) {
            const Node& gn = g.node();
            if (gn.kind == Kind::Literal && lit_state(gn.lit) == 0) return true;
            if (gn.kind == Kind::Const && !gn.value) return true;
        }
        return false;
    }

    T go_or(const Node& n) {
        const std::size_t u = unassigned(n);
        std::vector<const Term*> live;
        for (const auto& c : n.children) {
            const Node& cn = c.node();
            switch (cn.kind) {
                case Kind::Const:
                    if (cn.value) return Ops::pow2(u);
                    continue;
                case Kind::Literal: {
                    const int s = lit_state(cn.lit);
                    if (s == 1) return Ops::pow2(u);
                    if (s == 0) continue;
                    break;
                }
                case Kind::Xor:
                    if (unassigned(cn) == 0) {
                        if (go(c) == Ops::one()) return Ops::pow2(u);
                        continue;
                    }
                    break;
                case Kind::And:
                    if (dead_under(cn)) continue;
                    break;
                default: break;
            }
            live.push_back(&c);
        }
        if (live.empty()) return Ops::zero();
        if (live.size() == 1) {
            const std::size_t uc = unassigned(live.front()->node());
            const T pad = Ops::pow2(u - uc);
            if (Ops::is_zero(pad)) return Ops::zero();
            return Ops::mul(go(*live.front()), pad);
        }
        // a literal that decides between branches: prefer it
        if (!n.disjoint) {
            for (const Term* c : live) {
                if (c->kind() != Kind::And) continue;
                for (const auto& g : c->children()) {
                    if (g.kind() != Kind::Literal || lit_state(g.node().lit) >= 0) continue;
                    const Var x = g.node().lit.var;
                    for (const Term* o : live)
                        if (o != c && std::binary_search(o->free_vars().begin(), o->free_vars().end(), x))
                            return branch(x.id, &StructuralCounter::go_or, n);
                }
            }
        }
        std::vector<std::size_t> us;
        const std::uint32_t v = most_shared(live, us);
        if (v != 0 && !n.disjoint) return branch(v, &StructuralCounter::go_or, n);
        std::size_t sum = 0;
        for (std::size_t x : us) sum += x;
        const T pad = Ops::pow2(u - sum);
        T neg = pad;
        for (std::size_t i = 0; i < live.size() && !Ops::is_zero(neg); ++i)
            neg = Ops::mul(neg, Ops::sub(Ops::pow2(us[i]), go(*live[i])));
        return Ops::sub(Ops::pow2(u), neg);
    }

    std::vector<std::int8_t> val_;
    std::vector<std::uint32_t> trail_;
    std::vector<std::uint32_t> stamp_;
    std::vector<std::uint32_t> freq_;
    std::uint32_t epoch_ = 0;
};

inline bool structural_parity(const Term& t, std::span<const Var> scope) {
    return StructuralCounter<ParityOps>{}.count(t, scope);
}

inline BigInt structural_count(const Term& t, std::span<const Var> scope) {
    return StructuralCounter<ExactOps>{}.count(t, scope);
}

// ---- QBF oracles -----------------------------------------------------------

inline constexpr std::size_t kQbfOracleCap = 20;

/// Recursive evaluation of the prefix.
inline bool eval_qbf_brute(const QbfInstance& q) {
    q.require_sentence();
    std::vector<std::pair<Var, Quantifier>> order;
    for (const auto& b : q.blocks)
        for (Var v : b.vars) order.emplace_back(v, b.q);
    if (order.size() > kQbfOracleCap) throw CapExceeded("QBF oracle: too many variables");
    std::uint32_t top = 0;
    for (auto& [v, _] : order) top = std::max(top, v.id);
    for (Var v : q.matrix.free_vars()) top = std::max(top, v.id);
    Assignment a(top + 1, 0);
    auto rec = [&](auto&& self, std::size_t i) -> bool {
        if (i == order.size()) return evaluate(q.matrix, a);
        const auto [v, quant] = order[i];
        a[v.id] = 0;
        const bool r0 = self(self, i + 1);
        if (quant == Quantifier::Exists && r0) return true;
        if (quant == Quantifier::Forall && !r0) return false;
        a[v.id] = 1;
        const bool r1 = self(self, i + 1);
        a[v.id] = 0;
        return r1;
    };
    return rec(rec, 0);
}

/// Second oracle: tabulate the matrix, then fold variables away innermost first.
inline bool eval_qbf_table(const QbfInstance& q) {
    q.require_sentence();
    std::vector<std::pair<Var, Quantifier>> order;
    for (const auto& b : q.blocks)
        for (Var v : b.vars) order.emplace_back(v, b.q);
    const std::size_t n = order.size();
    if (n > kQbfOracleCap) throw CapExceeded("QBF oracle: too many variables");
    std::uint32_t top = 0;
    for (auto& [v, _] : order) top = std::max(top, v.id);
    std::vector<std::uint8_t> table(std::size_t{1} << n);
    Assignment a(top + 1, 0);
    for (std::size_t m = 0; m < table.size(); ++m) {
        // bit (n-1-i) of m holds variable i, so the innermost variable is the lowest bit
        for (std::size_t i = 0; i < n; ++i) a[order[i].first.id] = static_cast<std::uint8_t>((m >> (n - 1 - i)) & 1U);
        table[m] = evaluate(q.matrix, a) ? 1 : 0;
    }
    for (std::size_t i = n; i-- > 0;) {
        std::vector<std::uint8_t> next(table.size() / 2);
        for (std::size_t m = 0; m < next.size(); ++m) {
            const bool lo = table[2 * m] != 0;
            const bool hi = table[2 * m + 1] != 0;
            next[m] = order[i].second == Quantifier::Exists ? (lo || hi) : (lo && hi);
        }
        table = std::move(next);
    }
    return table[0] != 0;
}

// ---- external counter ------------------------------------------------------

enum class ParseMode : std::uint8_t { IntegerCount, ParityToken };

struct ExternalCounter {
    std::string command;  // `{cnf}` is replaced by the DIMACS path; appended when absent
    ParseMode mode = ParseMode::IntegerCount;
    double timeout_s = 600.0;
};

class CounterError : public std::runtime_error {
public:
    enum class Kind { Launch, NonzeroExit, Unparseable, Timeout };
    CounterError(Kind k, const std::string& msg) : std::runtime_error(msg), kind_(k) {}
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct CountResult {
    bool odd = false;
    std::optional<BigInt> count;
    double seconds = 0.0;
};

/// Integer mode: the last integer on the last result line (`s ...`, `c s ...`), or a bare
/// integer as the final line. Parity mode: `odd`/`even`, or `s parity 0|1`.
inline CountResult parse_counter_output(const std::string& out, ParseMode mode) {
    std::vector<std::string> lines;
    {
        std::istringstream is(out);
        std::string l;
        while (std::getline(is, l)) {
            while (!l.empty() && (l.back() == '\r' || l.back() == ' ')) l.pop_back();
            if (!l.empty()) lines.push_back(l);
        }
    }
    CountResult r;
    if (mode == ParseMode::IntegerCount) {
        static const std::regex result_line(R"(^(s|c s)\s)");
        static const std::regex bare(R"(^\s*(\d+)\s*$)");
        static const std::regex integer(R"((^|\s)(\d+)(?=\s|$))");
        for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
            const bool last = it == lines.rbegin();
            std::smatch m;
            if (std::regex_search(*it, result_line)) {
                std::string found;
                for (std::sregex_iterator j(it->begin(), it->end(), integer), e; j != e; ++j) found = (*j)[2];
                if (found.empty()) continue;
                r.count = BigInt(found);
                r.odd = (*r.count & 1) != 0;
                return r;
            }
            if (last && std::regex_match(*it, m, bare)) {
                r.count = BigInt(m[1].str());
                r.odd = (*r.count & 1) != 0;
                return r;
            }
        }
        throw CounterError(CounterError::Kind::Unparseable, "counter output has no result line");
    }
    static const std::regex token(R"(\b(odd|even)\b)", std::regex::icase);
    static const std::regex parity(R"(^(c )?s\s+parity\s+([01])\s*$)");
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::smatch m;
        if (std::regex_match(*it, m, parity)) {
            r.odd = m[2] == "1";
            return r;
        }
        if (std::regex_search(*it, m, token)) {
            std::string w = m[1];
            r.odd = w[0] == 'o' || w[0] == 'O';
            return r;
        }
    }
    throw CounterError(CounterError::Kind::Unparseable, "counter output has no parity token");
}

inline std::string fill_template(const std::string& tmpl, const std::string& path) {
    std::string cmd = tmpl;
    const std::string key = "{cnf}";
    if (cmd.find(key) == std::string::npos) return cmd + " " + path;
    for (std::size_t p = cmd.find(key); p != std::string::npos; p = cmd.find(key, p + path.size())) cmd.replace(p, key.size(), path);
    return cmd;
}

/// Runs `sh -c <command>` on a temporary DIMACS file and parses its output.
inline CountResult external_count(const CnfFormula& c, const ExternalCounter& ext) {
    if (ext.command.empty()) throw CounterError(CounterError::Kind::Launch, "no external counter command configured");
    char path[] = "/tmp/toda-XXXXXX.cnf";
    const int fd = ::mkstemps(path, 4);
    if (fd < 0) throw CounterError(CounterError::Kind::Launch, "cannot create temporary file");
    const std::string text = emit_dimacs(c);
    std::size_t off = 0;
    while (off < text.size()) {
        const ssize_t w = ::write(fd, text.data() + off, text.size() - off);
        if (w <= 0) {
            ::close(fd);
            ::unlink(path);
            throw CounterError(CounterError::Kind::Launch, "cannot write temporary file");
        }
        off += static_cast<std::size_t>(w);
    }
    ::close(fd);
    struct Cleanup {
        const char* p;
        ~Cleanup() { ::unlink(p); }
    } cleanup{path};

    const std::string cmd = fill_template(ext.command, path);
    int pipefd[2];
    if (::pipe(pipefd) != 0) throw CounterError(CounterError::Kind::Launch, "pipe failed");
    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        throw CounterError(CounterError::Kind::Launch, "fork failed");
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(pipefd[1], STDOUT_FILENO);
        ::dup2(pipefd[1], STDERR_FILENO);
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(pipefd[1]);
    std::string out;
    bool timed_out = false;
    char buf[4096];
    for (;;) {
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double left = ext.timeout_s - elapsed;
        if (left <= 0) {
            timed_out = true;
            break;
        }
        pollfd p{pipefd[0], POLLIN, 0};
        const int pr = ::poll(&p, 1, static_cast<int>(std::min(left * 1000.0, 1e9)) + 1);
        if (pr < 0 && errno == EINTR) continue;
        if (pr == 0) continue;
        const ssize_t n = ::read(pipefd[0], buf, sizeof buf);
        if (n <= 0) break;
        out.append(buf, static_cast<std::size_t>(n));
    }
    ::close(pipefd[0]);
    if (timed_out) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        ::waitpid(pid, nullptr, 0);
        throw CounterError(CounterError::Kind::Timeout, "counter timed out after " + std::to_string(ext.timeout_s) + " s");
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        throw CounterError(CounterError::Kind::NonzeroExit, "counter exited with status " + std::to_string(code));
    }
    CountResult r = parse_counter_output(out, ext.mode);
    r.seconds = secs;
    return r;
}

// ---- decision --------------------------------------------------------------

struct InternalStructural {};
struct InternalBruteForce {
    unsigned max_vars = kBruteForceCap;
};
using CounterBackend = std::variant<InternalStructural, InternalBruteForce, ExternalCounter>;

struct DecideOptions {
    CounterBackend backend = InternalStructural{};
    HashCnfMode hash_mode = HashCnfMode::TseytinHash;
    bool run_all = false;  // multi-call: keep counting after the answer is known
    std::size_t parallelism = 1;
};

struct Verdict {
    bool value = false;
    std::uint64_t runs = 0;  // parity evaluations
    std::uint64_t odd_count = 0;
    std::uint64_t even_count = 0;
    std::vector<double> durations;
    std::vector<std::uint64_t> seeds;
    std::uint64_t reductions = 0;
    std::uint64_t votes_true = 0;
    std::uint64_t votes_false = 0;
};

class DecideError : public std::runtime_error {
public:
    DecideError(const std::string& what, Verdict partial, std::optional<CounterError::Kind> kind)
        : std::runtime_error(what), partial_(std::move(partial)), kind_(kind) {}
    [[nodiscard]] const Verdict& partial() const noexcept { return partial_; }
    [[nodiscard]] std::optional<CounterError::Kind> counter_kind() const noexcept { return kind_; }

private:
    Verdict partial_;
    std::optional<CounterError::Kind> kind_;
};

/// Parity of one reduced formula under the chosen backend.
inline bool formula_parity(const ParityFormula& f, const DecideOptions& opt, VarSupply& supply) {
    return std::visit(
        [&](const auto& b) -> bool {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, InternalStructural>) {
                ParityFormula g = apply_hash_mode(f, opt.hash_mode, supply);
                return structural_parity(g.term, g.scope);
            } else if constexpr (std::is_same_v<B, InternalBruteForce>) {
                return brute_parity(encode(f, opt.hash_mode, supply).cnf, b.max_vars);
            } else {
                return external_count(encode(f, opt.hash_mode, supply).cnf, b).odd;
            }
        },
        opt.backend);
}

/// Reads the verdict from per-call parities: odd means true, after the recorded offset.
/// Multi-call formulas are counted in batches of `parallelism`; the short-circuit is checked
/// between batches, so tallies do not depend on thread timing.
inline Verdict decide(const ReducedOutput& out, const DecideOptions& opt) {
    Verdict v;
    v.reductions = 1;
    v.seeds.push_back(out.seed);
    struct CallResult {
        bool odd = false;
        double seconds = 0.0;
        std::exception_ptr error;
    };
    auto call = [&](const ParityFormula& f) {
        CallResult r;
        VarSupply supply(out.next_var);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            r.odd = formula_parity(f, opt, supply);
        } catch (...) {
            r.error = std::current_exception();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    };
    const std::size_t width = std::max<std::size_t>(1, opt.parallelism);
    bool any_odd = false;
    for (std::size_t i = 0; i < out.formulas.size(); i += width) {
        const std::size_t end = std::min(out.formulas.size(), i + width);
        std::vector<CallResult> batch;
        if (end - i == 1) {
            batch.push_back(call(out.formulas[i]));
        } else {
            std::vector<std::future<CallResult>> fs;
            for (std::size_t j = i; j < end; ++j)
                fs.push_back(std::async(std::launch::async, call, std::cref(out.formulas[j])));
            for (auto& f : fs) batch.push_back(f.get());
        }
        for (const auto& r : batch) {
            if (r.error) {
                try {
                    std::rethrow_exception(r.error);
                } catch (const CounterError& e) {
                    throw DecideError(e.what(), v, e.kind());
                } catch (const std::exception& e) {
                    throw DecideError(e.what(), v, std::nullopt);
                }
            }
            v.durations.push_back(r.seconds);
            ++v.runs;
            ++(r.odd ? v.odd_count : v.even_count);
            any_odd = any_odd || r.odd;
        }
        if (any_odd && out.combiner != Combiner::Single && !opt.run_all) break;
    }
    switch (out.combiner) {
        case Combiner::Single: v.value = (v.odd_count == 1) != out.offset; break;
        case Combiner::AnyOdd: v.value = any_odd; break;
        case Combiner::AllEven: v.value = !any_odd; break;
    }
    ++(v.value ? v.votes_true : v.votes_false);
    return v;
}

struct MajorityVote {
    double eps0 = 0.3;
    double target = 0.9;
};

struct SolveOptions {
    double eps = 0.3;
    ReductionConfig cfg{};
    DecideOptions decide{};
    std::optional<MajorityVote> majority;
};

struct SolveResult {
    Verdict verdict;
    ReductionTrace trace;  // of the first reduction
    Combiner combiner = Combiner::Single;
    double success_lower_bound = 0.0;
};

inline std::uint64_t majority_seed(std::uint64_t seed, std::uint64_t run) {
    return run == 0 ? seed : splitmix64(seed ^ splitmix64(run));
}

/// reduce -> count -> decide, optionally repeated for a majority vote at eps0.
/// Majority runs go `decide.parallelism` at a time and are tallied in run order.
inline SolveResult solve(const QbfInstance& q, const SolveOptions& opt) {
    SolveResult res;
    const double eps = opt.majority ? opt.majority->eps0 : opt.eps;
    const std::uint64_t runs = opt.majority ? majority_reps(opt.majority->eps0, opt.majority->target) : 1;
    res.success_lower_bound = plan_reduction(shape_of(q, opt.cfg), eps, opt.cfg).success_lower_bound;

    struct RunResult {
        std::uint64_t seed = 0;
        ReductionTrace trace;
        Combiner combiner = Combiner::Single;
        Verdict verdict;
        std::optional<DecideError> error;
    };
    DecideOptions inner = opt.decide;
    if (runs > 1) inner.parallelism = 1;
    auto run = [&](std::uint64_t r) {
        RunResult rr;
        ReductionConfig cfg = opt.cfg;
        cfg.seed = rr.seed = majority_seed(opt.cfg.seed, r);
        ReducedOutput out = reduce(q, eps, cfg);
        rr.trace = std::move(out.trace);
        rr.combiner = out.combiner;
        try {
            rr.verdict = decide(out, inner);
        } catch (const DecideError& e) {
            rr.error = e;
        }
        return rr;
    };

    Verdict total;
    const std::uint64_t width = runs > 1 ? std::max<std::size_t>(1, opt.decide.parallelism) : 1;
    for (std::uint64_t i = 0; i < runs; i += width) {
        const std::uint64_t end = std::min(runs, i + width);
        std::vector<RunResult> batch;
        if (end - i == 1) {
            batch.push_back(run(i));
        } else {
            std::vector<std::future<RunResult>> fs;
            for (std::uint64_t r = i; r < end; ++r) fs.push_back(std::async(std::launch::async, run, r));
            for (auto& f : fs) batch.push_back(f.get());
        }
        for (auto& rr : batch) {
            if (total.reductions == 0) {
                res.trace = rr.trace;
                res.combiner = rr.combiner;
            }
            const Verdict& v = rr.error ? rr.error->partial() : rr.verdict;
            total.runs += v.runs;
            total.odd_count += v.odd_count;
            total.even_count += v.even_count;
            total.durations.insert(total.durations.end(), v.durations.begin(), v.durations.end());
            total.seeds.push_back(rr.seed);
            total.reductions += 1;
            if (rr.error) throw DecideError(rr.error->what(), total, rr.error->counter_kind());
            total.votes_true += v.votes_true;
            total.votes_false += v.votes_false;
        }
    }
    total.value = total.votes_true > total.votes_false;
    res.verdict = std::move(total);
    return res;
}

}  // namespace toda
