#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "picr/bisim.hpp"
#include "picr/typecheck.hpp"
#include "picr/workspace.hpp"

using json = nlohmann::json;
using namespace picr;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string workspace;
    std::string emit = "text";
    size_t jobs = 1;
};

std::string hex_hash(const std::string& s) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << std::hash<std::string>{}(s);
    return os.str();
}

json env_json(const TypeEnv& e) {
    json out = json::array();
    for (auto& a : e.items) out.push_back({{"name", a.id}, {"type", to_string(a.type)}});
    return out;
}

json pos_json(const SrcPos& p) { return {{"line", p.line}, {"col", p.col}}; }

// A process target: a workspace system name or a process file.
struct Target {
    TypedSystem sys;
    bool has_alloc = false;
    bool has_env = false;
};

Target resolve(const Common& c, const std::string& target, const std::string& env_file, const std::string& alloc) {
    Target t;
    if (!c.workspace.empty()) {
        auto ws = load_workspace(c.workspace);
        t.sys = load_system(ws, target);
        t.has_alloc = true;
        t.has_env = ws.systems.at(target).env.has_value();
    } else {
        t.sys.system.process = load_process(target);
    }
    if (!env_file.empty()) {
        t.sys.env = load_env(env_file);
        t.has_env = true;
    }
    if (!alloc.empty()) {
        auto names = parse_name_list(alloc);
        t.sys.system.resources.allocated = std::set<Name>(names.begin(), names.end());
        t.has_alloc = true;
    }
    return t;
}

void emit_json(const json& j) { std::cout << j.dump(2) << "\n"; }

// ---------------------------------------------------------------------------

int cmd_typecheck(const Common& c, const std::string& target, const std::string& env_file, const std::string& alloc) {
    auto t = resolve(c, target, env_file, alloc);
    auto v = t.has_alloc ? check_system(t.sys.env, t.sys.system.resources, t.sys.system.process)
                         : check_process(t.sys.env, t.sys.system.process);
    bool replayed = v.accepted && replay(t.sys.env, t.sys.system.process, v);
    if (c.emit == "json") {
        json j{{"schema", "picr/typecheck/v1"}, {"result", v.accepted ? "accepted" : "rejected"},
               {"replayed", replayed}};
        json d = json::array();
        for (auto& s : v.derivation) d.push_back({{"rule", s.rule}, {"detail", s.detail}, {"pos", pos_json(s.pos)}});
        json g = json::array();
        for (auto& s : v.diagnostics) g.push_back({{"rule", s.rule}, {"message", s.message}, {"pos", pos_json(s.pos)}});
        j["derivation"] = d;
        j["diagnostics"] = g;
        emit_json(j);
    } else {
        std::cout << (v.accepted ? "accepted" : "rejected") << "\n";
        if (v.accepted) {
            for (auto& s : v.derivation)
                std::cout << "  " << s.pos.line << ":" << s.pos.col << "  " << s.rule << "  " << s.detail << "\n";
        }
        for (auto& s : v.diagnostics)
            std::cout << "  error " << s.pos.line << ":" << s.pos.col << " [" << s.rule << "] " << s.message << "\n";
    }
    return v.accepted ? 0 : 1;
}

// ---------------------------------------------------------------------------

int cmd_run(const Common& c, const std::string& target, const std::string& alloc, size_t fuel,
            const std::string& policy, size_t max_traces, bool reuse, const std::string& script) {
    if (!script.empty())
        throw UsageError("run executes closed systems only; observer interaction (scripted inputs) is available "
                         "through 'picr lts' and 'picr bisim'");
    auto t = resolve(c, target, "", alloc);
    RunOptions o;
    o.fuel = fuel;
    o.max_traces = max_traces;
    o.step.reuse_dangling = reuse;
    if (policy == "one-path") o.policy = Policy::OnePath;
    else if (policy == "exhaustive") o.policy = Policy::Exhaustive;
    else throw UsageError("unknown policy '" + policy + "'");
    auto traces = run(t.sys.system, o);
    if (c.emit == "json") {
        json arr = json::array();
        for (auto& tr : traces) {
            json steps = json::array();
            for (auto& s : tr.steps)
                steps.push_back({{"rule", to_string(s.rule)},
                                 {"cost", s.cost},
                                 {"channel", s.channel},
                                 {"allocated", std::vector<Name>(s.next.resources.allocated.begin(),
                                                                 s.next.resources.allocated.end())},
                                 {"process", pretty(s.next.process)}});
            arr.push_back({{"steps", steps}, {"total_cost", tr.total_cost}, {"maximal", tr.maximal}});
        }
        emit_json({{"schema", "picr/run/v1"}, {"traces", arr}});
        return 0;
    }
    for (size_t i = 0; i < traces.size(); ++i) {
        const auto& tr = traces[i];
        std::cout << "trace " << i + 1 << (tr.maximal ? " (maximal)" : " (fuel exhausted)") << "\n";
        std::string summary;
        for (size_t k = 0; k < tr.steps.size(); ++k) {
            const auto& s = tr.steps[k];
            std::string cost = s.cost > 0 ? "+" + std::to_string(s.cost) : std::to_string(s.cost);
            std::cout << "  " << k + 1 << ". " << to_string(s.rule) << (s.channel.empty() ? "" : " " + s.channel)
                      << "  " << cost << "\n     " << pretty(s.next.process) << "\n";
            summary += to_string(s.rule) + " " + cost + "; ";
        }
        std::cout << "  " << summary << "total " << tr.total_cost << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

Configuration observed(const TypeEnv& observer, Target t) {
    if (auto d = consistency_diagnostic(observer)) throw UsageError("observer environment is inconsistent: " + *d);
    if (!t.has_alloc) {
        for (auto& a : observer.items) t.sys.system.resources.allocated.insert(a.id);
        for (auto& a : t.sys.env.items) t.sys.system.resources.allocated.insert(a.id);
    }
    auto cfg = initial_configuration(observer, t.sys);
    std::string why;
    if (!valid_configuration(cfg, &why)) throw UsageError("not a configuration: " + why);
    return cfg;
}

int cmd_lts(const Common& c, const std::string& target, const std::string& env_file, const std::string& proc_env,
            const std::string& alloc, size_t depth, const std::string& out, bool observer_moves, size_t ext_limit) {
    if (env_file.empty()) throw UsageError("--env (observer environment) is required");
    auto observer = load_env(env_file);
    auto cfg = observed(observer, resolve(c, target, proc_env, alloc));
    LtsOptions o;
    o.observer_moves = observer_moves;
    o.ext_alloc_limit = ext_limit;
    o.track_witness = true;
    Explorer ex(o);
    int root = ex.intern(cfg);
    std::vector<int> order{root};
    std::map<int, size_t> level{{root, 0}};
    json nodes = json::array(), edges = json::array();
    for (size_t i = 0; i < order.size(); ++i) {
        int id = order[i];
        const auto& st = ex.state(id);
        nodes.push_back({{"id", hex_hash(st.key)},
                         {"gamma", env_json(st.config.observer)},
                         {"allocated", st.config.resources.allocated.size()},
                         {"garbage", st.garbage},
                         {"process", pretty(st.config.process)},
                         {"depth", level[id]}});
        if (level[id] >= depth) continue;
        auto es = ex.edges(id);
        for (auto& e : es) {
            edges.push_back({{"source", hex_hash(ex.state(id).key)},
                             {"label", to_string(e.label)},
                             {"kind", e.label.kind == ActionLabel::Tau ? "tau" : e.rule},
                             {"rule", e.rule},
                             {"cost", e.cost},
                             {"target", hex_hash(ex.state(e.target).key)}});
            if (!level.count(e.target)) {
                level[e.target] = level[id] + 1;
                order.push_back(e.target);
            }
        }
    }
    json j{{"schema", "picr/lts/v1"}, {"depth", depth}, {"nodes", nodes}, {"edges", edges}};
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw UsageError("cannot write '" + out + "'");
        f << j.dump(2) << "\n";
    }
    if (c.emit == "json" && out.empty()) {
        emit_json(j);
    } else {
        std::cout << nodes.size() << " states, " << edges.size() << " transitions (depth " << depth << ")\n";
        if (out.empty())
            for (auto& e : edges)
                std::cout << "  " << e["source"].get<std::string>().substr(0, 8) << " --"
                          << e["label"].get<std::string>() << " @" << e["cost"].get<int>() << "--> "
                          << e["target"].get<std::string>().substr(0, 8) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

json trace_json(const std::vector<TraceStep>& tr) {
    json out = json::array();
    for (auto& s : tr) {
        json j{{"challenger", s.left_challenges ? "left" : "right"},
               {"label", to_string(s.label)},
               {"challenge_cost", s.challenge_cost},
               {"answered", s.answered},
               {"credit_before", s.credit_before},
               {"credit_after", s.credit_after},
               {"left", s.left_pretty},
               {"right", s.right_pretty}};
        if (s.answered) j["answer_cost"] = s.answer_cost;
        else j["answers_available"] = s.answers_available;
        out.push_back(j);
    }
    return out;
}

json verdict_json(const Verdict& v, const BisimOptions& o, std::optional<bool> replayed) {
    json j{{"result", to_string(v.result)},
           {"credit", v.credit},
           {"bounds",
            {{"credit_cap", o.credit_cap},
             {"tau_depth", o.tau_depth},
             {"state_budget", o.state_budget},
             {"ext_alloc_limit", o.ext_alloc_limit},
             {"cost_model", to_string(o.cost_model)},
             {"bounded", o.bounded ? json(*o.bounded) : json(nullptr)}}},
           {"closure_total", v.closure_total},
           {"env_rewrites_used", v.used_env_rewrites},
           {"stats", {{"states", v.stats.states}, {"positions", v.stats.positions}, {"time_ms", v.stats.millis}}}};
    if (v.min_credit) j["min_credit"] = *v.min_credit;
    if (v.result == Verdict::Holds) j["witness_size"] = v.witness.size();
    if (v.result == Verdict::Refuted) {
        j["counterexample"] = trace_json(v.counterexample);
        j["restricted_refutation"] = v.restricted_refutation;
        if (replayed) j["replayed"] = *replayed;
    }
    if (v.result == Verdict::Inconclusive) j["bound_hit"] = v.bound_hit;
    return j;
}

void print_verdict(const std::string& title, const Verdict& v, std::optional<bool> replayed) {
    std::cout << title << ": " << to_string(v.result);
    if (v.result == Verdict::Inconclusive) std::cout << " (bound hit: " << v.bound_hit << ")";
    if (v.min_credit) std::cout << ", least credit " << *v.min_credit;
    std::cout << "  [" << v.stats.states << " states, " << v.stats.positions << " positions, " << std::fixed
              << std::setprecision(1) << v.stats.millis << " ms]\n";
    if (v.result == Verdict::Holds) std::cout << "  witness: " << v.witness.size() << " related pairs\n";
    if (v.result == Verdict::Refuted) {
        std::cout << "  counterexample" << (replayed ? (*replayed ? " (replayed)" : " (REPLAY FAILED)") : "") << ":\n";
        for (auto& s : v.counterexample) {
            std::cout << "    " << (s.left_challenges ? "left " : "right") << " " << to_string(s.label) << " @"
                      << s.challenge_cost;
            if (s.answered)
                std::cout << "  answered @" << s.answer_cost << "  credit " << s.credit_before << " -> "
                          << s.credit_after << "\n";
            else if (s.answers_available)
                std::cout << "  no answer keeps the credit non-negative (best " << s.credit_after << ")\n";
            else
                std::cout << "  cannot be answered\n";
        }
    }
}

int exit_for(Verdict::Result r) { return r == Verdict::Holds ? 0 : r == Verdict::Refuted ? 1 : 2; }

int cmd_bisim(const Common& c, const std::string& left, const std::string& right, const std::string& env_file,
              const std::string& left_env, const std::string& right_env, const std::string& alloc,
              const std::string& mode, int credit, BisimOptions o) {
    if (env_file.empty()) throw UsageError("--env (observer environment) is required");
    auto observer = load_env(env_file);
    if (auto d = consistency_diagnostic(observer)) throw UsageError("observer environment is inconsistent: " + *d);
    auto lt = resolve(c, left, left_env, alloc);
    auto rt = resolve(c, right, right_env, alloc);
    auto lc = observed(observer, lt), rc = observed(observer, rt);
    TypedSystem L{{lc.resources, lc.process}, *lc.witness}, R{{rc.resources, rc.process}, *rc.witness};
    auto replay_of = [&](const Verdict& v, const TypedSystem& a, const TypedSystem& b, const BisimOptions& opts) {
        std::optional<bool> r;
        if (v.result == Verdict::Refuted) r = replay_counterexample(observer, a, b, v.credit, opts, v.counterexample);
        return r;
    };
    if (mode == "leq") {
        auto v = check_leq(observer, L, R, credit, o);
        auto r = replay_of(v, L, R, o);
        if (c.emit == "json") {
            auto j = verdict_json(v, o, r);
            j["schema"] = "picr/bisim/v1";
            j["mode"] = "leq";
            emit_json(j);
        } else {
            print_verdict(left + " <=^" + std::to_string(credit) + " " + right, v, r);
        }
        return exit_for(v.result);
    }
    if (mode == "eq") {
        auto v = check_eq(observer, L, R, o);
        auto rf = replay_of(v.forward, L, R, o), rb = replay_of(v.backward, R, L, o);
        Verdict::Result res = v.holds() ? Verdict::Holds
                              : (v.forward.result == Verdict::Refuted || v.backward.result == Verdict::Refuted)
                                  ? Verdict::Refuted
                                  : Verdict::Inconclusive;
        if (c.emit == "json") {
            emit_json({{"schema", "picr/bisim/v1"},
                       {"mode", "eq"},
                       {"result", to_string(res)},
                       {"forward", verdict_json(v.forward, o, rf)},
                       {"backward", verdict_json(v.backward, o, rb)}});
        } else {
            std::cout << left << " =~ " << right << ": " << to_string(res) << "\n";
            print_verdict("  " + left + " <= " + right, v.forward, rf);
            print_verdict("  " + right + " <= " + left, v.backward, rb);
        }
        return exit_for(res);
    }
    if (mode == "refined") {
        auto v = check_refined(observer, L, R, o);
        BisimOptions so = o, ao = o;
        so.cost_model = CostModel::Signed;
        ao.cost_model = CostModel::AllocOnly;
        auto r1 = replay_of(v.signed_forward, L, R, so), r2 = replay_of(v.signed_backward, R, L, so);
        std::optional<bool> r3;
        if (v.alloc_forward) r3 = replay_of(*v.alloc_forward, L, R, ao);
        if (c.emit == "json") {
            json j{{"schema", "picr/bisim/v1"},
                   {"mode", "refined"},
                   {"result", to_string(v.result)},
                   {"signed_forward", verdict_json(v.signed_forward, so, r1)},
                   {"signed_backward", verdict_json(v.signed_backward, so, r2)}};
            if (v.alloc_forward) j["alloc_forward"] = verdict_json(*v.alloc_forward, ao, r3);
            emit_json(j);
        } else {
            std::cout << left << " refines " << right << ": " << to_string(v.result) << "\n";
            print_verdict("  signed " + left + " <= " + right, v.signed_forward, r1);
            print_verdict("  signed " + right + " <= " + left, v.signed_backward, r2);
            if (v.alloc_forward) print_verdict("  alloc-only " + left + " <= " + right, *v.alloc_forward, r3);
        }
        return exit_for(v.result);
    }
    throw UsageError("unknown mode '" + mode + "'");
}

CostModel parse_cost_model(const std::string& s) {
    if (s == "signed") return CostModel::Signed;
    if (s == "absolute") return CostModel::Absolute;
    if (s == "alloc-only") return CostModel::AllocOnly;
    throw UsageError("unknown cost model '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"picr: typing, costed semantics and amortised bisimulation for the resource pi-calculus"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--workspace", common.workspace, "Workspace manifest; targets are then system names");
    app.add_option("--jobs", common.jobs, "Parallelism hint for exploring subcommands (currently sequential)")
        ->check(CLI::PositiveNumber);

    std::string target, env_file, alloc;

    auto* tc = app.add_subcommand("typecheck", "Typecheck a process or system");
    tc->add_option("target", target, "Process file or system name")->required();
    tc->add_option("--env", env_file, "Process typing environment");
    tc->add_option("--alloc", alloc, "Allocated names (checks the system rule)");
    tc->add_option("--emit", common.emit, "Output format")->check(CLI::IsMember({"text", "json"}));

    size_t fuel = 16, max_traces = 10000;
    std::string policy = "one-path", script;
    bool reuse = false;
    auto* rn = app.add_subcommand("run", "Run a closed system under the costed reduction semantics");
    rn->add_option("target", target, "Process file or system name")->required();
    rn->add_option("--alloc", alloc, "Allocated names");
    rn->add_option("--fuel", fuel, "Maximum number of steps per trace");
    rn->add_option("--policy", policy, "one-path or exhaustive");
    rn->add_option("--max-traces", max_traces, "Trace limit for the exhaustive policy");
    rn->add_flag("--reuse-dangling", reuse, "Let alloc re-use released names still mentioned by the process");
    rn->add_option("--script", script, "Scripted observer inputs (not supported by run)");
    rn->add_option("--emit", common.emit, "Output format")->check(CLI::IsMember({"text", "json"}));

    std::string proc_env, out;
    size_t depth = 6, ext_limit = 2;
    bool observer_moves = false;
    auto* lt = app.add_subcommand("lts", "Explore the costed transition system of a configuration");
    lt->add_option("target", target, "Process file or system name")->required();
    lt->add_option("--env", env_file, "Observer environment")->required();
    lt->add_option("--proc-env", proc_env, "Process environment witnessing the configuration");
    lt->add_option("--alloc", alloc, "Allocated names (default: both environments' names)");
    lt->add_option("--depth", depth, "Exploration depth");
    lt->add_option("--out", out, "Write the JSON dump to this path");
    lt->add_option("--ext-alloc-limit", ext_limit, "Observer allocations simultaneously held");
    lt->add_flag("--observer-moves", observer_moves, "Include observer allocation, release and rewrite moves");
    lt->add_option("--emit", common.emit, "Output format")->check(CLI::IsMember({"text", "json"}));

    std::string left, right, left_env, right_env, mode = "leq", cost_model = "signed";
    int credit = 0;
    std::optional<int> bounded;
    BisimOptions bo;
    auto* bs = app.add_subcommand("bisim", "Decide the amortised typed bisimulation preorder");
    bs->add_option("left", left, "Left process file or system name")->required();
    bs->add_option("right", right, "Right process file or system name")->required();
    bs->add_option("--env", env_file, "Observer environment")->required();
    bs->add_option("--proc-env", proc_env, "Process environment for both sides");
    bs->add_option("--left-env", left_env, "Process environment for the left side");
    bs->add_option("--right-env", right_env, "Process environment for the right side");
    bs->add_option("--alloc", alloc, "Allocated names for both sides");
    bs->add_option("--credit", credit, "Initial amortisation credit");
    bs->add_option("--credit-cap", bo.credit_cap, "Credits saturate at this value");
    bs->add_option("--bounded", bounded, "Credits must stay within 0..M");
    bs->add_option("--cost-model", cost_model, "signed, absolute or alloc-only");
    bs->add_option("--depth", bo.tau_depth, "Depth bound for silent closures");
    bs->add_option("--budget", bo.state_budget, "Game position budget");
    bs->add_option("--ext-alloc-limit", bo.ext_alloc_limit, "Observer allocations simultaneously held");
    bs->add_option("--mode", mode, "leq, eq or refined")->check(CLI::IsMember({"leq", "eq", "refined"}));
    bs->add_option("--emit", common.emit, "Output format")->check(CLI::IsMember({"text", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (tc->parsed()) return cmd_typecheck(common, target, env_file, alloc);
        if (rn->parsed()) return cmd_run(common, target, alloc, fuel, policy, max_traces, reuse, script);
        if (lt->parsed())
            return cmd_lts(common, target, env_file, proc_env, alloc, depth, out, observer_moves, ext_limit);
        if (bs->parsed()) {
            bo.cost_model = parse_cost_model(cost_model);
            bo.bounded = bounded;
            bo.jobs = common.jobs;
            if (left_env.empty()) left_env = proc_env;
            if (right_env.empty()) right_env = proc_env;
            if (bo.credit_cap < credit) throw UsageError("credit cap is below the initial credit");
            return cmd_bisim(common, left, right, env_file, left_env, right_env, alloc, mode, credit, bo);
        }
    } catch (const std::exception& e) {
        std::cerr << "picr: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
