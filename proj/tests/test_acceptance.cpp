#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "helpers.hpp"
#include "sessint/engine.hpp"
#include "sessint/harness.hpp"
#include "sessint/oracle.hpp"
#include "sessint/report.hpp"

#include "json.hpp"

using namespace sessint;
using namespace sessint::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void verdict_line(const std::string& name, bool ok) {
    std::cout << (ok ? "PASS" : "FAIL") << " — " << name << "\n";
}

const BranchFailure* failure_of(const EndpointVerdict& v, Branch b) {
    for (const auto& f : v.failures)
        if (f.branch == b) return &f;
    return nullptr;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(SESSINT_BIN) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("corpus verdict matrix") {
    auto t0 = Clock::now();
    bool ok = true;

    // vulnerable conference management: rejected, csrf blame at the reply
    // that sets the session cookie
    {
        World w = load_corpus("hotcrp_vuln.ws");
        ClusterVerdict v = type_cluster(w);
        ok = ok && !v.ok();
        bool blame = false;
        for (const auto& ep : v.endpoints) {
            if (w.url_name(ep.url) != "login") continue;
            const BranchFailure* f = failure_of(ep, Branch::Csrf);
            blame = f && f->rule == "T-Reply" && f->message.find("sid") != std::string::npos;
        }
        CHECK(blame);
        ok = ok && blame;
    }
    // fixed conference management vs the related-domain attacker
    {
        World w = load_corpus("hotcrp_fixed.ws");
        ok = ok && w.attacker.kind == AttackerSpec::Kind::RelatedDomain;
        ok = ok && w.cookie_attrs.at("sid").prefix == CookiePrefix::Host;
        bool typed = type_cluster(w).ok();
        CHECK(typed);
        ok = ok && typed;
    }
    // vulnerable e-learning login: the forceable session cookie cannot carry
    // the password's confidentiality
    {
        World w = load_corpus("moodle_vuln.ws");
        ClusterVerdict v = type_cluster(w);
        ok = ok && !v.ok();
        bool blame = false;
        for (const auto& ep : v.endpoints) {
            const BranchFailure* f = failure_of(ep, Branch::Hon);
            if (f && (f->rule == "T-Login" || f->rule == "T-Start")) blame = true;
        }
        CHECK(blame);
        ok = ok && blame;
    }
    // fixed e-learning login (two-cookie pre-session encoding) vs web attacker
    {
        World w = load_corpus("moodle_fixed.ws");
        ok = ok && w.attacker.kind == AttackerSpec::Kind::Web;
        bool typed = type_cluster(w).ok();
        CHECK(typed);
        ok = ok && typed;
    }
    // vulnerable database administration: assertion unreachable in csrf
    {
        World w = load_corpus("phpmyadmin_vuln.ws");
        ClusterVerdict v = type_cluster(w);
        ok = ok && !v.ok();
        bool blame = false;
        for (const auto& ep : v.endpoints) {
            if (w.url_name(ep.url) != "drop") continue;
            const BranchFailure* f = failure_of(ep, Branch::Csrf);
            blame = f && f->rule == "T-Auth";
        }
        CHECK(blame);
        ok = ok && blame;
    }
    // fixed database administration
    {
        bool typed = type_cluster(load_corpus("phpmyadmin_fixed.ws")).ok();
        CHECK(typed);
        ok = ok && typed;
    }

    // the user surface agrees with the library verdicts
    ok = ok && run_cli("check " + corpus("hotcrp_vuln.ws")) == 1;
    ok = ok && run_cli("check " + corpus("hotcrp_fixed.ws")) == 0;
    ok = ok && run_cli("check " + corpus("moodle_vuln.ws")) == 1;
    ok = ok && run_cli("check " + corpus("moodle_fixed.ws")) == 0;
    ok = ok && run_cli("check " + corpus("phpmyadmin_vuln.ws")) == 1;
    ok = ok && run_cli("check " + corpus("phpmyadmin_fixed.ws")) == 0;

    double dt = seconds_since(t0);
    CHECK(dt < 5.0);
    ok = ok && dt < 5.0;
    CHECK(ok);
    verdict_line("corpus verdict matrix (exact, < 5 s)", ok);
}

TEST_CASE("attack reproduction") {
    auto t0 = Clock::now();
    bool ok = true;

    World vuln = load_corpus("hotcrp_vuln.ws");
    ExplorationBounds b = ExplorationBounds::defaults();
    b.max_steps = 60;
    IntegrityVerdict v = check_session_integrity(vuln, b);
    REQUIRE(v.status == IntegrityVerdict::Status::Violation);
    REQUIRE(v.attacked_projection.size() == 1);
    const Event& e = v.attacked_projection[0];
    bool event_ok = e.browser_identity == "usr" && e.session_identity == "atk" &&
                    e.values.size() == 2 && value_equal(e.values[0], Value::string("mypaper")) &&
                    value_equal(e.values[1], Value::string("submit")) &&
                    v.violated_label.equiv(Label{SimpleLabel::https(vuln.universe.domain_id("dC")),
                                                 SimpleLabel::https(vuln.universe.domain_id("dC"))});
    CHECK(event_ok);
    ok = ok && event_ok;

    World fixed = load_corpus("hotcrp_fixed.ws");
    IntegrityVerdict vf = check_session_integrity(fixed, b);
    CHECK(vf.status == IntegrityVerdict::Status::NoViolationWithinBound);
    ok = ok && vf.status == IntegrityVerdict::Status::NoViolationWithinBound;

    double dt = seconds_since(t0);
    CHECK(dt < 60.0);
    ok = ok && dt < 60.0;
    CHECK(ok);
    verdict_line("attack reproduction (riding witness + clean fixed world, < 60 s)", ok);
}

TEST_CASE("lattice oracle equivalence") {
    auto t0 = Clock::now();
    Universe u = two_domains();
    oracle::TermPopulation pop = oracle::enumerate_terms(u, 5);
    oracle::Closure cl = oracle::rule_closure(pop);
    long disagreements = 0;
    for (size_t i = 0; i < pop.terms.size(); ++i)
        for (size_t j = 0; j < pop.terms.size(); ++j)
            if (conf_leq(pop.terms[i], pop.terms[j]) != cl.leq(i, j)) ++disagreements;
    double dt = seconds_since(t0);
    bool ok = disagreements == 0 && pop.terms.size() == 548 && dt < 30.0;
    CHECK(disagreements == 0);
    CHECK(pop.terms.size() == 548);
    CHECK(dt < 30.0);
    verdict_line("lattice oracle equivalence on all terms of size <= 5 (< 30 s)", ok);
}

TEST_CASE("label-model table") {
    bool ok = true;
    Universe r;  // base=0, sib=1 related; ext=2 on its own
    r.add_related_group({"base", "sib"});
    r.add_related_group({"ext"});
    auto http = [](int d) { return SimpleLabel::http(d); };
    auto https = [](int d) { return SimpleLabel::https(d); };
    SL both0 = SimpleLabel::conj(http(0), https(0));
    SL both1 = SimpleLabel::conj(http(1), https(1));
    SL related_writers = SimpleLabel::conj(both0, both1);

    CookieAttrs plain;
    plain.domain = 0;
    ok = ok && cookie_label(plain, r).equiv(Label{both0, related_writers});

    CookieAttrs secure = plain;
    secure.secure = true;
    ok = ok && cookie_label(secure, r).equiv(Label{https(0), related_writers});

    CookieAttrs secpre = secure;
    secpre.prefix = CookiePrefix::Secure;
    ok = ok && cookie_label(secpre, r).equiv(
                   Label{https(0), SimpleLabel::conj(https(0), https(1))});

    CookieAttrs host = secure;
    host.prefix = CookiePrefix::Host;
    ok = ok && cookie_label(host, r).equiv(Label{https(0), https(0)});

    // Domain attribute: readable by every subdomain of the given domain
    Universe subs;
    subs.add_related_group({"ex", "a.ex", "b.ex"});
    CookieAttrs dom;
    dom.domain = subs.domain_id("a.ex");
    dom.domain_attribute = subs.domain_id("ex");
    SL sub_readers = SimpleLabel::conj(
        SimpleLabel::conj(SimpleLabel::conj(SimpleLabel::http(0), SimpleLabel::https(0)),
                          SimpleLabel::conj(SimpleLabel::http(1), SimpleLabel::https(1))),
        SimpleLabel::conj(SimpleLabel::http(2), SimpleLabel::https(2)));
    SL sub_writers = SimpleLabel::conj(
        SimpleLabel::conj(SimpleLabel::conj(SimpleLabel::http(0), SimpleLabel::https(0)),
                          SimpleLabel::conj(SimpleLabel::http(1), SimpleLabel::https(1))),
        SimpleLabel::conj(SimpleLabel::http(2), SimpleLabel::https(2)));
    ok = ok && cookie_label(dom, subs).equiv(Label{sub_readers, sub_writers});

    // HSTS on one related domain removes its plain-http write atom
    Universe hs = r;
    hs.enable_hsts(1);
    SL hsts_writers = SimpleLabel::conj(SimpleLabel::conj(http(0), https(0)), https(1));
    // fold order: non-enrolled http atoms first, then all https atoms
    Label got = cookie_label(secure, hs);
    SL expect = SimpleLabel::conj(SimpleLabel::conj(http(0), https(0)), https(1));
    ok = ok && conf_equiv(got.integ, expect) && conf_equiv(got.conf, https(0));
    (void)hsts_writers;

    // HSTS everywhere turns Secure into the prefixed label
    Universe hs2 = r;
    hs2.enable_hsts(0);
    hs2.enable_hsts(1);
    ok = ok && cookie_label(secure, hs2).equiv(cookie_label(secpre, hs2));

    // URLs and actions share the origin pair
    Url u{Scheme::Https, 0, "p"};
    ok = ok && url_label(u).equiv(Label{https(0), https(0)});

    CHECK(ok);
    verdict_line("label-model table (all cookie-label displays)", ok);
}

TEST_CASE("well-formedness of the reference environment") {
    bool ok = true;
    World w = load_corpus("hotcrp_fixed.ws");
    WellFormednessReport clean = check_wellformed_env(w.env, w);
    CHECK(clean.ok());
    ok = ok && clean.ok();

    // re-attribute sid as writable over http and type it as a
    // high-confidentiality credential: exactly one violation, at 2c
    World m = load_corpus("hotcrp_fixed.ws");
    m.cookie_attrs["sid"].prefix = CookiePrefix::None;
    m.cookie_attrs["sid"].secure = true;
    SL httpsC = SimpleLabel::https(m.universe.domain_id("dC"));
    m.env.globals["sid"] = SecType::credential({httpsC, integ_top(m.universe)});
    WellFormednessReport rep = check_wellformed_env(m.env, m);
    bool exactly = rep.violations.size() == 1 && rep.violations[0].condition == "2c" &&
                   rep.violations[0].subject == "sid";
    CHECK(exactly);
    ok = ok && exactly;
    CHECK(ok);
    verdict_line("well-formedness: reference env clean; forced-credential mutation hits 2c", ok);
}

TEST_CASE("property suites") {
    bool ok = true;
    Universe u = two_domains();
    Label la = attacker_label({AttackerSpec::Kind::Web, 1, {}}, u);

    {  // preorder laws: 1000 reflexivity cases and 1000 transitive triples
        Rng rng(1);
        int checked = 0;
        for (int i = 0; i < 1000; ++i) {
            SL t = random_term(rng, u, 3);
            if (!conf_leq(t, t)) ok = false;
        }
        while (checked < 1000) {
            SL a = random_term(rng, u, 2), b = random_term(rng, u, 2), c = random_term(rng, u, 2);
            if (conf_leq(a, b) && conf_leq(b, c)) {
                ++checked;
                if (!conf_leq(a, c)) ok = false;
            }
        }
        CHECK(ok);
    }
    {  // contravariance
        Rng rng(2);
        for (int i = 0; i < 1000; ++i) {
            SL a = random_term(rng, u, 3), b = random_term(rng, u, 3);
            if (integ_leq(a, b) != conf_leq(b, a)) ok = false;
        }
        CHECK(ok);
    }
    {  // subtype reflexivity, transitivity, and the no-credential-upcast law
        Rng rng(3);
        int transitive_checked = 0;
        for (int i = 0; i < 1000; ++i) {
            SecType t = random_type(rng, u);
            if (!subtype(t, t, la)) ok = false;
        }
        while (transitive_checked < 1000) {
            SecType a = random_type(rng, u), b = random_type(rng, u), c = random_type(rng, u);
            if (subtype(a, b, la) && subtype(b, c, la)) {
                ++transitive_checked;
                if (!subtype(a, c, la)) ok = false;
            }
        }
        Rng rng2(4);
        for (int i = 0; i < 1000; ++i) {
            SecType a = random_type(rng2, u);
            SecType b = random_type(rng2, u);
            a.cred = true;
            b.cred = false;
            if (is_conf_high(a.label.conf, la) && subtype(a, b, la)) ok = false;
        }
        CHECK(ok);
    }
    {  // cookie filter monotonicity: bigger jars yield bigger request sets,
       // and updates preserve existing entries
        World w = load_corpus("hotcrp_fixed.ws");
        Rng rng(5);
        std::vector<std::string> refs{"sid", "pre"};
        for (int i = 0; i < 1000; ++i) {
            Memory small, large;
            for (const auto& r : refs) {
                if (rng.coin()) {
                    small[r] = Value::integer(rng.below(4));
                    large[r] = small[r];
                } else if (rng.coin()) {
                    large[r] = Value::integer(rng.below(4));
                }
            }
            Url target{rng.coin() ? Scheme::Http : Scheme::Https,
                       rng.below(w.universe.domain_count()), "p"};
            Memory req_small = cookies_for_request(w, small, target);
            Memory req_large = cookies_for_request(w, large, target);
            for (const auto& [r, v] : req_small)
                if (!req_large.count(r)) ok = false;
            Memory ck{{refs[static_cast<size_t>(rng.below(2))], Value::integer(1)}};
            Memory upd = update_jar(w, small, target, ck);
            for (const auto& [r, v] : small)
                if (!upd.count(r)) ok = false;
        }
        CHECK(ok);
    }
    {  // knowledge monotonicity along 1000 random attacked walks
        World w = load_corpus("hotcrp_vuln.ws");
        Rng rng(6);
        for (int run = 0; run < 1000; ++run) {
            SystemState s = initial_state(w);
            auto k = s.knowledge;
            for (int i = 0; i < 10; ++i) {
                auto cs = enumerate_steps(w, s, StepMode::Full);
                if (cs.empty()) break;
                StepChoice& c = cs[static_cast<size_t>(rng.below(static_cast<int>(cs.size())))];
                for (NameId n : k)
                    if (!c.next.knowledge.count(n)) ok = false;
                k = c.next.knowledge;
                s = std::move(c.next);
            }
        }
        CHECK(ok);
    }
    {  // honest-run determinism: 1000 replays across the corpus
        const char* names[] = {"hotcrp_fixed.ws", "hotcrp_vuln.ws", "moodle_fixed.ws",
                               "moodle_vuln.ws", "phpmyadmin_fixed.ws"};
        for (const char* name : names) {
            World w = load_corpus(name);
            HonestRun base = run_honest(w);
            for (int i = 0; i < 200; ++i) {
                HonestRun again = run_honest(w);
                if (trace_dump(base.trace, w) != trace_dump(again.trace, w)) ok = false;
            }
        }
        CHECK(ok);
    }
    {  // witness replay: the real witness plus 1000 random replayed walks
        World w = load_corpus("hotcrp_vuln.ws");
        ExplorationBounds b = ExplorationBounds::defaults();
        IntegrityVerdict v = check_session_integrity(w, b);
        if (v.status != IntegrityVerdict::Status::Violation) ok = false;
        auto replayed = replay_witness(w, v.witness_keys, b);
        if (!replayed || trace_dump(*replayed, w) != trace_dump(v.witness, w)) ok = false;
        Rng rng(7);
        for (int run = 0; run < 1000; ++run) {
            SystemState s = initial_state(w);
            std::vector<std::string> keys;
            Trace t;
            int atk = 0;
            for (int i = 0; i < 10; ++i) {
                auto cs = enumerate_steps(w, s, StepMode::Full);
                if (atk < b.max_attacker_moves) {
                    auto syn = synthesize_messages(w, s, b);
                    for (auto& c : syn) cs.push_back(std::move(c));
                }
                if (cs.empty()) break;
                StepChoice& c = cs[static_cast<size_t>(rng.below(static_cast<int>(cs.size())))];
                if (c.rule.rfind("A-Atk", 0) == 0 || c.rule == "A-BroAtk" || c.rule == "A-SerAtk")
                    ++atk;
                keys.push_back(c.rule + "#" + c.key);
                t.events.push_back(c.event);
                s = std::move(c.next);
            }
            auto rp = replay_witness(w, keys, b);
            if (!rp || trace_dump(*rp, w) != trace_dump(t, w)) ok = false;
        }
        CHECK(ok);
    }
    CHECK(ok);
    verdict_line("property suites (>= 1000 generated cases each)", ok);
}

TEST_CASE("runtime monitor on accepted worlds") {
    bool ok = true;
    for (const char* name : {"hotcrp_fixed.ws", "moodle_fixed.ws", "phpmyadmin_fixed.ws"}) {
        World w = load_corpus(name);
        if (!type_cluster(w).ok()) ok = false;
        HonestRun r = run_honest(w, 20000, true);
        if (!r.completed || r.error_event || !r.monitor_violations.empty()) ok = false;
        if (r.stuck || r.nondeterminism) ok = false;
    }
    CHECK(ok);
    verdict_line("runtime monitor silent and error-free on accepted worlds", ok);
}

TEST_CASE("structured and text reports agree") {
    bool ok = true;
    for (const char* name : {"hotcrp_vuln.ws", "hotcrp_fixed.ws"}) {
        std::string cmd = std::string(SESSINT_BIN) + " check " + corpus(name) + " --json 2>/dev/null";
        FILE* p = popen(cmd.c_str(), "r");
        REQUIRE(p != nullptr);
        std::string out;
        char buf[4096];
        size_t n;
        while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
        pclose(p);
        auto j = nlohmann::json::parse(out, nullptr, false);
        if (j.is_discarded()) {
            ok = false;
            continue;
        }
        // schema fields and verdict agreement with the exit-code contract
        for (const char* key : {"mode", "wellformed", "endpoints", "verdict", "honest_run_clean"})
            if (!j.contains(key)) ok = false;
        bool rejected = std::string(name).find("vuln") != std::string::npos;
        if (j["verdict"] != (rejected ? "rejected" : "well-typed")) ok = false;
        for (const auto& ep : j["endpoints"])
            for (const char* key : {"url", "well_typed", "failures"})
                if (!ep.contains(key)) ok = false;
    }
    CHECK(ok);
    verdict_line("structured reports match the schema and the text verdicts", ok);
}

TEST_CASE("cli exit-code contract follows the corpus manifest") {
    bool ok = true;
    std::ifstream mf(corpus("manifest.json"));
    REQUIRE(mf.good());
    nlohmann::json manifest = nlohmann::json::parse(mf);
    for (const auto& entry : manifest["worlds"]) {
        std::string file = entry["file"];
        int expect = entry["check_exit"];
        int got = run_cli("check " + corpus(file));
        CAPTURE(file);
        CHECK(got == expect);
        ok = ok && got == expect;
        if (entry.contains("attack_exit")) {
            int agot = run_cli("attack " + corpus(file) + " --depth 60");
            CHECK(agot == entry["attack_exit"]);
            ok = ok && agot == entry["attack_exit"];
        }
    }
    ok = ok && run_cli("attack " + corpus("hotcrp_vuln.ws") + " --depth 0") == 3;
    ok = ok && run_cli("check " + corpus("nosuch.ws")) == 2;
    ok = ok && run_cli("simulate " + corpus("hotcrp_fixed.ws") + " --monitor") == 0;
    ok = ok && run_cli("explain " + corpus("hotcrp_fixed.ws") + " login") == 0;
    ok = ok && run_cli("lattice-oracle --domains 2 --max-size 4") == 0;
    CHECK(ok);
    verdict_line("cli exit codes match the corpus manifest", ok);
}
