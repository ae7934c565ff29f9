#include "sessint/report.hpp"

#include <sstream>

#include "json.hpp"

namespace sessint {

using nlohmann::json;

CheckResult run_check(const World& w) {
    CheckResult r;
    r.wf = check_wellformed_env(w.env, w);
    r.actions = check_user_actions(w.actions, w.env, w, w.attacker_lab());
    HonestRun honest = run_honest(w);
    r.honest_clean = honest.completed && !honest.stuck && !honest.error_event &&
                     !honest.nondeterminism && !honest.budget_exceeded;
    if (honest.error_event)
        r.honest_note = "honest run produces an error event";
    else if (honest.stuck)
        r.honest_note = "honest run gets stuck before consuming all actions";
    else if (honest.nondeterminism)
        r.honest_note = "honest run is nondeterministic";
    else if (honest.budget_exceeded)
        r.honest_note = "honest run exceeds the step budget";
    else
        r.honest_note = "honest run terminates without errors";
    r.cluster = type_cluster(w);
    return r;
}

std::string render_check_text(const CheckResult& r, const World& w) {
    std::ostringstream out;
    out << "well-formedness: " << (r.wf.ok() ? "ok" : "violated") << "\n";
    for (const auto& v : r.wf.violations)
        out << "  condition " << v.condition << " at " << v.subject << ": " << v.detail << "\n";
    out << "user actions:    " << (r.actions.ok() ? "ok" : "violated") << "\n";
    for (const auto& v : r.actions.violations)
        out << "  condition " << v.condition << " at action " << v.action_index << ": " << v.detail
            << "\n";
    out << "honest run:      " << (r.honest_clean ? "ok" : "dirty") << " (" << r.honest_note
        << ")\n";
    for (const auto& ep : r.cluster.endpoints) {
        out << "endpoint " << w.url_name(ep.url) << ": "
            << (ep.ok ? "well-typed" : "REJECTED") << "\n";
        for (const auto& f : ep.failures)
            out << "  [" << branch_name(f.branch) << "] " << f.rule << " at " << f.pos.str() << ": "
                << f.message << "\n";
    }
    out << "verdict: " << (r.ok() ? "well-typed" : "rejected") << "\n";
    return out.str();
}

namespace {

json wf_json(const WellFormednessReport& wf) {
    json out = json::array();
    for (const auto& v : wf.violations)
        out.push_back({{"condition", v.condition}, {"subject", v.subject}, {"detail", v.detail}});
    return out;
}

}  // namespace

std::string render_check_json(const CheckResult& r, const World& w) {
    json out;
    out["mode"] = "check";
    out["wellformed"] = r.wf.ok();
    out["wellformedness_violations"] = wf_json(r.wf);
    json av = json::array();
    for (const auto& v : r.actions.violations)
        av.push_back(
            {{"condition", v.condition}, {"action", v.action_index}, {"detail", v.detail}});
    out["action_violations"] = av;
    out["honest_run_clean"] = r.honest_clean;
    out["honest_run_note"] = r.honest_note;
    json eps = json::array();
    for (const auto& ep : r.cluster.endpoints) {
        json e;
        e["url"] = w.url_name(ep.url);
        e["well_typed"] = ep.ok;
        json fs = json::array();
        for (const auto& f : ep.failures)
            fs.push_back({{"branch", branch_name(f.branch)},
                          {"rule", f.rule},
                          {"position", f.pos.str()},
                          {"message", f.message}});
        e["failures"] = fs;
        eps.push_back(e);
    }
    out["endpoints"] = eps;
    out["verdict"] = r.ok() ? "well-typed" : "rejected";
    return out.dump(2);
}

std::string render_attack_text(const IntegrityVerdict& v, const World& w) {
    std::ostringstream out;
    switch (v.status) {
        case IntegrityVerdict::Status::NoViolationWithinBound:
            out << "no violation within bound (" << v.states_explored << " states";
            if (v.frontier_clipped) out << ", frontier clipped";
            out << ")\n";
            break;
        case IntegrityVerdict::Status::Violation: {
            out << "VIOLATION at label " << to_string(v.violated_label, w.universe) << " ("
                << v.states_explored << " states)\n";
            out << "attacked projection:\n";
            for (const auto& e : v.attacked_projection) out << "  " << event_repr(e, w) << "\n";
            out << "honest projection:\n";
            for (const auto& e : v.honest_projection) out << "  " << event_repr(e, w) << "\n";
            out << "witness trace:\n";
            for (size_t i = 0; i < v.witness.events.size(); ++i)
                out << "  " << v.witness_keys[i] << "  " << event_repr(v.witness.events[i], w)
                    << "\n";
            break;
        }
        case IntegrityVerdict::Status::BoundsTooSmall:
            out << "bound exhausted without verdict: " << v.message << "\n";
            break;
        case IntegrityVerdict::Status::PreconditionFailed:
            out << "precondition failed: " << v.message << "\n";
            break;
    }
    return out.str();
}

std::string render_attack_json(const IntegrityVerdict& v, const World& w) {
    json out;
    out["mode"] = "attack";
    switch (v.status) {
        case IntegrityVerdict::Status::NoViolationWithinBound:
            out["status"] = "no-violation-within-bound";
            break;
        case IntegrityVerdict::Status::Violation: out["status"] = "violation"; break;
        case IntegrityVerdict::Status::BoundsTooSmall: out["status"] = "bound-exhausted"; break;
        case IntegrityVerdict::Status::PreconditionFailed:
            out["status"] = "precondition-failed";
            break;
    }
    out["message"] = v.message;
    out["states_explored"] = v.states_explored;
    out["frontier_clipped"] = v.frontier_clipped;
    if (v.status == IntegrityVerdict::Status::Violation) {
        out["label"] = to_string(v.violated_label, w.universe);
        json wt = json::array();
        for (size_t i = 0; i < v.witness.events.size(); ++i)
            wt.push_back({{"rule", v.witness_keys[i]},
                          {"event", event_repr(v.witness.events[i], w)}});
        out["witness"] = wt;
        json ap = json::array(), hp = json::array();
        for (const auto& e : v.attacked_projection) ap.push_back(event_repr(e, w));
        for (const auto& e : v.honest_projection) hp.push_back(event_repr(e, w));
        out["attacked_projection"] = ap;
        out["honest_projection"] = hp;
    }
    return out.dump(2);
}

std::string render_derivation(const EndpointVerdict& v, const World& w) {
    std::ostringstream out;
    out << "endpoint " << w.url_name(v.url) << ": " << (v.ok ? "well-typed" : "REJECTED") << "\n";
    Branch current = Branch::Hon;
    bool first = true;
    for (const auto& n : v.derivation) {
        if (first || n.branch != current) {
            out << "-- branch " << branch_name(n.branch) << " --\n";
            current = n.branch;
            first = false;
        }
        out << std::string(static_cast<size_t>(n.depth) * 2, ' ') << n.rule;
        if (n.pos.known()) out << " @ " << n.pos.str();
        if (!n.note.empty()) out << "   [" << n.note << "]";
        out << "\n";
    }
    for (const auto& f : v.failures)
        out << "[" << branch_name(f.branch) << "] fails at " << f.rule << " (" << f.pos.str()
            << "): " << f.message << "\n";
    return out.str();
}

}  // namespace sessint
