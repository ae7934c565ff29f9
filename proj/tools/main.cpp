// Command-line front end: check | simulate | attack | explain | lattice-oracle.
//
// Exit codes: 0 = secure/ok, 1 = rejected or violation found, 2 = malformed
// input, 3 = bound exhausted without a verdict.

#include <chrono>
#include <iostream>

#include "CLI11.hpp"
#include "sessint/engine.hpp"
#include "sessint/harness.hpp"
#include "sessint/parser.hpp"
#include "sessint/report.hpp"

using namespace sessint;

namespace {

// Optional attacker override of the form web:dE | network | related:dC.
void apply_attacker_override(World& w, const std::string& spec) {
    if (spec.empty()) return;
    AttackerSpec a;
    auto colon = spec.find(':');
    std::string kind = spec.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "web") {
        a.kind = AttackerSpec::Kind::Web;
        a.domain = w.universe.domain_id(arg);
    } else if (kind == "network") {
        a.kind = AttackerSpec::Kind::Network;
    } else if (kind == "related") {
        a.kind = AttackerSpec::Kind::RelatedDomain;
        a.domain = w.universe.domain_id(arg);
    } else {
        throw ConfigError("unknown attacker override: " + spec);
    }
    w.attacker = a;
}

int cmd_check(const std::string& file, const std::string& attacker, bool json_out) {
    World w = parse_world_file(file);
    apply_attacker_override(w, attacker);
    CheckResult r = run_check(w);
    std::cout << (json_out ? render_check_json(r, w) : render_check_text(r, w));
    return r.ok() ? 0 : 1;
}

int cmd_simulate(const std::string& file, const std::string& attacker, int budget, bool monitor) {
    World w = parse_world_file(file);
    apply_attacker_override(w, attacker);
    HonestRun r = run_honest(w, budget, monitor);
    std::cout << trace_dump(r.trace, w);
    for (const auto& l : relevant_auth_labels(w)) {
        auto proj = project(r.trace, "usr", l);
        std::cout << "projection at (usr, " << to_string(l, w.universe) << "): " << proj.size()
                  << " event(s)\n";
        for (const auto& e : proj) std::cout << "  " << event_repr(e, w) << "\n";
    }
    for (const auto& m : r.monitor_violations) std::cout << "monitor: " << m << "\n";
    if (r.nondeterminism) {
        std::cout << "nondeterminism detected\n";
        return 1;
    }
    if (r.budget_exceeded) {
        std::cout << "step budget exceeded\n";
        return 3;
    }
    if (r.stuck) {
        std::cout << "stuck: no applicable rule with actions remaining\n";
        return 1;
    }
    if (r.error_event) {
        std::cout << "error event occurred\n";
        return 1;
    }
    if (!r.monitor_violations.empty()) return 1;
    std::cout << "honest run complete (" << r.trace.events.size() << " steps)\n";
    return 0;
}

int cmd_attack(const std::string& file, const std::string& attacker, const ExplorationBounds& b,
               bool json_out) {
    World w = parse_world_file(file);
    apply_attacker_override(w, attacker);
    IntegrityVerdict v = check_session_integrity(w, b);
    std::cout << (json_out ? render_attack_json(v, w) : render_attack_text(v, w));
    switch (v.status) {
        case IntegrityVerdict::Status::NoViolationWithinBound: return 0;
        case IntegrityVerdict::Status::Violation: return 1;
        case IntegrityVerdict::Status::PreconditionFailed: return 2;
        case IntegrityVerdict::Status::BoundsTooSmall: return 3;
    }
    return 2;
}

int cmd_explain(const std::string& file, const std::string& attacker,
                const std::string& endpoint) {
    World w = parse_world_file(file);
    apply_attacker_override(w, attacker);
    for (const auto& ep : w.endpoints) {
        if (w.url_name(ep.url) != endpoint) continue;
        TypeCheckOptions opts;
        opts.record_derivation = true;
        EndpointVerdict v = type_endpoint(w, ep, opts);
        std::cout << render_derivation(v, w);
        return v.ok ? 0 : 1;
    }
    std::cerr << "unknown endpoint: " << endpoint << "\n";
    return 2;
}

int cmd_lattice_oracle(int domains, int max_size);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"session-integrity workbench for a core web calculus"};
    app.require_subcommand(1);

    std::string file, attacker, endpoint;
    bool json_out = false, monitor = false;
    int budget = 20000;
    ExplorationBounds bounds = ExplorationBounds::defaults();
    int oracle_domains = 2, oracle_size = 5;

    auto* check = app.add_subcommand("check", "type-check a world against its attacker");
    check->add_option("world", file)->required();
    check->add_option("--attacker", attacker, "override: web:d | network | related:d");
    check->add_flag("--json", json_out);

    auto* simulate = app.add_subcommand("simulate", "run the honest semantics");
    simulate->add_option("world", file)->required();
    simulate->add_option("--attacker", attacker);
    simulate->add_option("--budget", budget, "step budget");
    simulate->add_flag("--monitor", monitor, "enable the runtime annotation monitor");

    std::vector<int> pool_ints;
    auto* attack = app.add_subcommand("attack", "search for session-integrity violations");
    attack->add_option("world", file)->required();
    attack->add_option("--attacker", attacker);
    attack->add_option("--depth", bounds.max_steps, "max steps per trace");
    attack->add_option("--max-msg", bounds.max_msg_fields, "max synthesized fields per message");
    attack->add_option("--branching", bounds.max_branching, "max successors per state");
    attack->add_option("--atk-moves", bounds.max_attacker_moves, "max attacker moves per trace");
    attack->add_option("--max-states", bounds.max_states, "total states expanded");
    attack->add_option("--pool", pool_ints, "extra integers for the primitive value pool");
    attack->add_flag("--json", json_out);

    auto* explain = app.add_subcommand("explain", "print a typing derivation");
    explain->add_option("world", file)->required();
    explain->add_option("endpoint", endpoint)->required();
    explain->add_option("--attacker", attacker);

    auto* oracle = app.add_subcommand("lattice-oracle",
                                      "compare the order decision procedure with the "
                                      "brute-force rule closure");
    oracle->add_option("--domains", oracle_domains, "universe size");
    oracle->add_option("--max-size", oracle_size, "max term size");

    CLI11_PARSE(app, argc, argv);

    for (int x : pool_ints) bounds.pool.push_back(Value::integer(x));

    try {
        if (check->parsed()) return cmd_check(file, attacker, json_out);
        if (simulate->parsed()) return cmd_simulate(file, attacker, budget, monitor);
        if (attack->parsed()) return cmd_attack(file, attacker, bounds, json_out);
        if (explain->parsed()) return cmd_explain(file, attacker, endpoint);
        if (oracle->parsed()) return cmd_lattice_oracle(oracle_domains, oracle_size);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

// ---- lattice oracle ------------------------------------------------------------

#include "sessint/oracle.hpp"

namespace {

int cmd_lattice_oracle(int domains, int max_size) {
    using namespace sessint::oracle;
    Universe u;
    std::vector<std::string> names;
    for (int i = 0; i < domains; ++i) names.push_back("d" + std::to_string(i + 1));
    for (const auto& n : names) u.add_related_group({n});
    TermPopulation pop = enumerate_terms(u, max_size);
    Closure cl = rule_closure(pop);
    long disagreements = 0, pairs = 0, dist_only = 0;
    for (size_t i = 0; i < pop.terms.size(); ++i) {
        for (size_t j = 0; j < pop.terms.size(); ++j) {
            ++pairs;
            bool whitman = conf_leq(pop.terms[i], pop.terms[j]);
            if (whitman != cl.leq(i, j)) ++disagreements;
            if (!whitman && conf_leq_distributive(pop.terms[i], pop.terms[j])) ++dist_only;
        }
    }
    std::cout << "terms: " << pop.terms.size() << "  pairs: " << pairs << "\n";
    std::cout << "closure vs decision procedure disagreements: " << disagreements << "\n";
    std::cout << "pairs ordered only by the distributive order: " << dist_only << "\n";
    return disagreements == 0 ? 0 : 1;
}

}  // namespace
