#include "sessint/env.hpp"

#include <algorithm>

namespace sessint {

namespace {

std::string leq_str(const SL& a, const SL& b, const Universe& u, bool holds, const char* ord) {
    return to_string(a, u) + " " + ord + " " + to_string(b, u) + (holds ? " holds" : " fails");
}

}  // namespace

WellFormednessReport check_wellformed_env(const TypingEnv& env, const World& world) {
    WellFormednessReport rep;
    const Universe& uni = world.universe;
    Label la = world.attacker_lab();

    // Declared endpoints must carry a type.
    for (const auto& ep : world.endpoints) {
        if (!env.urls.count(ep.url))
            rep.violations.push_back(
                {"1a", world.url_name(ep.url), "endpoint has no urltype entry"});
    }

    // Condition 1: URL type assignments.
    for (const auto& [url, ty] : env.urls) {
        Label lam = url_label(url);
        std::string name = world.url_name(url);
        if (!conf_equiv(ty.conn.conf, lam.conf))
            rep.violations.push_back({"1a", name,
                                      "C(l_u) = C(lambda(u)) fails: " +
                                          to_string(ty.conn.conf, uni) + " vs " +
                                          to_string(lam.conf, uni)});
        if (!integ_leq(lam.integ, ty.conn.integ))
            rep.violations.push_back(
                {"1a", name, leq_str(lam.integ, ty.conn.integ, uni, false, "<=_I")});
        for (size_t k = 0; k < ty.params.size(); ++k) {
            const SecType& pk = ty.params[k];
            std::string pname = name + " parameter " + std::to_string(k + 1);
            if (!conf_leq(pk.label.conf, ty.conn.conf))
                rep.violations.push_back(
                    {"1b-i", pname, leq_str(pk.label.conf, ty.conn.conf, uni, false, "<=_C")});
            if (!integ_leq(ty.conn.integ, pk.label.integ))
                rep.violations.push_back(
                    {"1b-i", pname, leq_str(ty.conn.integ, pk.label.integ, uni, false, "<=_I")});
            if (pk.cred && is_conf_low(pk.label.conf, la) && !is_integ_low(pk.label.integ, la))
                rep.violations.push_back(
                    {"1b-ii", pname, "low-confidentiality credential must have low integrity"});
        }
    }

    // Condition 2: cookie type assignments (references with cookie attributes).
    // 2b ranges over declared URL types plus synthetic URLs covering every
    // scheme/domain pair of the universe.
    std::vector<Label> url_lambdas;
    for (const auto& [url, ty] : env.urls) url_lambdas.push_back(url_label(url));
    for (int d : uni.all_domains()) {
        url_lambdas.push_back(url_label(Url{Scheme::Http, d, "*"}));
        url_lambdas.push_back(url_label(Url{Scheme::Https, d, "*"}));
    }

    for (const auto& [ref, attrs] : world.cookie_attrs) {
        auto tyit = env.globals.find(ref);
        if (tyit == env.globals.end()) {
            rep.violations.push_back({"2a", ref, "cookie has no type entry"});
            continue;
        }
        const SecType& ty = tyit->second;
        Label lam = cookie_label(attrs, uni);
        if (!conf_leq(ty.label.conf, lam.conf))
            rep.violations.push_back(
                {"2a", ref, leq_str(ty.label.conf, lam.conf, uni, false, "<=_C")});
        if (!integ_leq(lam.integ, ty.label.integ))
            rep.violations.push_back(
                {"2a", ref, leq_str(lam.integ, ty.label.integ, uni, false, "<=_I")});
        bool readable_by_low = false;
        for (const auto& ul : url_lambdas)
            if (conf_leq(lam.conf, ul.conf) && is_integ_low(ul.integ, la)) readable_by_low = true;
        if (readable_by_low && !is_conf_low(ty.label.conf, la))
            rep.violations.push_back(
                {"2b", ref, "cookie readable by a low-integrity URL must have low confidentiality"});
        if (is_integ_low(lam.integ, la) && ty.cred && !is_conf_low(ty.label.conf, la))
            rep.violations.push_back(
                {"2c", ref,
                 "credential cookie settable over a low-integrity connection must have low "
                 "confidentiality"});
        if (ty.cred && is_conf_low(ty.label.conf, la) && !is_integ_low(ty.label.integ, la))
            rep.violations.push_back(
                {"2d", ref, "low-confidentiality credential cookie must have low integrity"});
    }
    return rep;
}

UserActionReport check_user_actions(const std::vector<UserAction>& actions, const TypingEnv& env,
                                    const World& world, const Label& attacker) {
    UserActionReport rep;
    const Universe& uni = world.universe;

    // Condition 1: provided inputs respect the declared parameter types.
    for (size_t i = 0; i < actions.size(); ++i) {
        const UserAction& a = actions[i];
        if (a.kind == UserAction::Kind::Halt) continue;
        const UrlType* ty = nullptr;
        if (a.kind == UserAction::Kind::Load) {
            auto it = env.urls.find(a.url);
            if (it == env.urls.end()) {
                rep.violations.push_back({"1", i, "load target has no urltype entry"});
                continue;
            }
            ty = &it->second;
        } else {
            auto it = env.forms.find(a.form_tag);
            if (it == env.forms.end()) {
                rep.violations.push_back({"1", i, "unknown form tag " + a.form_tag});
                continue;
            }
            ty = &it->second;
        }
        bool low_page = a.kind == UserAction::Kind::Submit &&
                        is_integ_low(url_label(a.url).integ, attacker);
        for (const auto& [k, v] : a.inputs) {
            if (k < 1 || static_cast<size_t>(k) > ty->params.size()) {
                rep.violations.push_back({"1", i, "input position " + std::to_string(k) +
                                                      " beyond declared arity"});
                continue;
            }
            if (!v.ann) {
                rep.violations.push_back({"1", i, "input lacks a type annotation"});
                continue;
            }
            const SecType& expect = ty->params[static_cast<size_t>(k) - 1];
            if (!subtype(*v.ann, expect, attacker))
                rep.violations.push_back(
                    {"1", i,
                     "input " + std::to_string(k) + " : " + to_string(*v.ann, uni) +
                         " is not a subtype of " + to_string(expect, uni)});
            if (low_page && !subtype(*v.ann, SecType::plain(attacker), attacker))
                rep.violations.push_back(
                    {"1", i, "input " + std::to_string(k) +
                                 " supplied on a low-integrity page must be attacker-low"});
        }
    }

    // Condition 3: within each navigation flow, low-integrity actions only at
    // the tail.
    auto flows = navigation_flows(actions);
    for (const auto& flow : flows) {
        bool seen_low = false;
        for (size_t j = 0; j < flow.size(); ++j) {
            bool low = is_integ_low(url_label(flow[j].url).integ, attacker);
            if (seen_low && !low) {
                rep.violations.push_back(
                    {"3", j,
                     "high-integrity action follows a low-integrity one in a navigation flow "
                     "(tab " +
                         std::to_string(flow[j].tab) + ")"});
            }
            seen_low = seen_low || low;
        }
    }
    return rep;
}

}  // namespace sessint
