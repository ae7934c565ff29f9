#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "helpers.hpp"
#include "sessint/harness.hpp"

using namespace sessint;
using namespace sessint::testing;

namespace {

Label label_C(const World& w, const char* dom) {
    SL h = SimpleLabel::https(w.universe.domain_id(dom));
    return {h, h};
}

Event auth_event(std::vector<Value> vals, std::string ib, std::string is, Label l) {
    Event e;
    e.kind = Event::Kind::Auth;
    e.values = std::move(vals);
    e.browser_identity = std::move(ib);
    e.session_identity = std::move(is);
    e.label = std::move(l);
    return e;
}

}  // namespace

TEST_CASE("projection keeps only matching auth events, in order") {
    World w = load_corpus("hotcrp_vuln.ws");
    Label lC = label_C(w, "dC");
    Label other{SimpleLabel::http(0), SimpleLabel::http(0)};

    Trace t;
    CHECK(project(t, "usr", lC).empty());

    t.events.push_back(Event::silent());
    t.events.push_back(auth_event({Value::integer(1)}, "usr", "atk", lC));
    t.events.push_back(auth_event({Value::integer(2)}, "atk", "atk", lC));
    t.events.push_back(auth_event({Value::integer(3)}, "usr", "usr", other));
    t.events.push_back(auth_event({Value::integer(4)}, "atk", "usr", lC));

    auto proj = project(t, "usr", lC);
    REQUIRE(proj.size() == 2);  // events at other labels or foreign ids drop out
    CHECK(value_equal(proj[0].values[0], Value::integer(1)));
    CHECK(value_equal(proj[1].values[0], Value::integer(4)));
}

TEST_CASE("canonical projections are invariant under name renaming") {
    World w = load_corpus("hotcrp_vuln.ws");
    Label lC = label_C(w, "dC");
    Rng rng(0xabc);
    SecType ann = SecType::credential(bottom_label(w.universe));
    for (int i = 0; i < 1000; ++i) {
        // a random projected list over a handful of names
        std::vector<NameId> names{10, 11, 12, 13};
        std::vector<Event> base;
        int n = 1 + rng.below(5);
        for (int k = 0; k < n; ++k) {
            std::vector<Value> vals;
            int m = 1 + rng.below(3);
            for (int j = 0; j < m; ++j) {
                if (rng.coin())
                    vals.push_back(Value::name_value(names[static_cast<size_t>(rng.below(4))], ann));
                else
                    vals.push_back(Value::integer(rng.below(3)));
            }
            base.push_back(auth_event(vals, "usr", rng.coin() ? "usr" : "atk", lC));
        }
        // apply a random bijection on the name ids
        std::vector<NameId> perm = names;
        for (int k = 3; k > 0; --k) std::swap(perm[static_cast<size_t>(k)],
                                              perm[static_cast<size_t>(rng.below(k + 1))]);
        std::vector<Event> renamed = base;
        for (auto& e : renamed)
            for (auto& v : e.values)
                if (v.is_name())
                    for (size_t j = 0; j < names.size(); ++j)
                        if (v.name == names[j]) {
                            v.name = perm[j] + 100;  // fresh targets keep it injective
                            break;
                        }
        CHECK(canonical_projection(base, w) == canonical_projection(renamed, w));
    }
}

TEST_CASE("synthesis respects the knowledge side conditions") {
    World w = load_corpus("hotcrp_vuln.ws");
    ExplorationBounds b = ExplorationBounds::defaults();

    // with nothing intercepted there are no responses, only requests
    SystemState s0 = initial_state(w);
    auto moves = synthesize_messages(w, s0, b);
    for (const auto& m : moves) CHECK(m.rule == "A-AtkSer");

    // every synthesized move only uses names from the knowledge set
    for (const auto& m : moves) {
        CHECK(m.key.find("usrpwd") == std::string::npos);
    }
}

TEST_CASE("the riding attack is reproduced and its witness replays") {
    World w = load_corpus("hotcrp_vuln.ws");
    ExplorationBounds b = ExplorationBounds::defaults();
    IntegrityVerdict v = check_session_integrity(w, b);
    REQUIRE(v.status == IntegrityVerdict::Status::Violation);
    CHECK(v.violated_label.equiv(label_C(w, "dC")));
    REQUIRE(v.attacked_projection.size() == 1);
    const Event& e = v.attacked_projection[0];
    CHECK(e.browser_identity == "usr");
    CHECK(e.session_identity == "atk");
    REQUIRE(e.values.size() == 2);
    CHECK(value_equal(e.values[0], Value::string("mypaper")));
    CHECK(value_equal(e.values[1], Value::string("submit")));
    REQUIRE(v.honest_projection.size() == 1);
    CHECK(v.honest_projection[0].session_identity == "usr");

    // the witness replays to the identical event list
    auto replayed = replay_witness(w, v.witness_keys, b);
    REQUIRE(replayed.has_value());
    REQUIRE(replayed->events.size() == v.witness.events.size());
    CHECK(trace_dump(*replayed, w) == trace_dump(v.witness, w));
}

TEST_CASE("random attacked walks replay by their rule keys") {
    World w = load_corpus("hotcrp_vuln.ws");
    ExplorationBounds b = ExplorationBounds::defaults();
    Rng rng(0x7e57);
    for (int run = 0; run < 1000; ++run) {
        SystemState s = initial_state(w);
        std::vector<std::string> keys;
        Trace t;
        int atk = 0;
        for (int i = 0; i < 14; ++i) {
            auto cs = enumerate_steps(w, s, StepMode::Full);
            if (atk < b.max_attacker_moves) {
                auto syn = synthesize_messages(w, s, b);
                for (auto& c : syn) cs.push_back(std::move(c));
            }
            if (cs.empty()) break;
            StepChoice& c = cs[static_cast<size_t>(rng.below(static_cast<int>(cs.size())))];
            if (c.rule == "A-AtkSer" || c.rule == "A-AtkBro" || c.rule == "A-BroAtk" ||
                c.rule == "A-SerAtk")
                ++atk;
            keys.push_back(c.rule + "#" + c.key);
            t.events.push_back(c.event);
            s = std::move(c.next);
            if (atk > b.max_attacker_moves) break;
        }
        auto replayed = replay_witness(w, keys, b);
        REQUIRE(replayed.has_value());
        CHECK(trace_dump(*replayed, w) == trace_dump(t, w));
    }
}

TEST_CASE("a network attacker intercepting http traffic can replay its names") {
    World w = parse_world(R"(
domains { dH; dE }
attacker network { identities { atk } }
url a = http(dH);
urltype a : ((HTTP(dH);HTTP(dH)), [], HTTP(dH));
cookie ck @ dH : (BOT;TOP);
global g : cred((BOT;TOP));
server {
  listen(a)[ck]() {
    @glob g := fresh()^cred((BOT;TOP));
    reply({}){ skip }{ ck -> x } with x = @glob g
  }
}
actions { load(1, a) {}; load(1, a) {} }
)");
    // run honestly until the second request (carrying the cookie) is queued
    SystemState s = initial_state(w);
    for (int i = 0; i < 100; ++i) {
        if (s.browser.queue && !s.browser.queue->cookies.empty()) break;
        auto cs = enumerate_steps(w, s, StepMode::Honest);
        REQUIRE_FALSE(cs.empty());
        s = std::move(cs[0].next);
    }
    REQUIRE(s.browser.queue);
    REQUIRE(s.browser.queue->cookies.count("ck") == 1);
    NameId cookie_name = s.browser.queue->cookies.at("ck").name;

    // the interception gains the request contents and the connection id
    auto cs = enumerate_steps(w, s, StepMode::Full);
    const StepChoice* intercept = nullptr;
    for (const auto& c : cs)
        if (c.rule == "A-BroAtk") intercept = &c;
    REQUIRE(intercept != nullptr);
    CHECK(intercept->next.knowledge.count(cookie_name) == 1);

    // which enables a forged request replaying the stolen cookie
    ReqMsg forged;
    forged.browser_identity = "atk";
    forged.url = w.url_aliases.at("a");
    forged.cookies["ck"] = Value::name_value(
        cookie_name, SecType::credential(bottom_label(w.universe)));
    // passive reading of the http response already disclosed the name, so
    // the replay is possible even before active interception
    CHECK(attacker_request(w, initial_state(w), forged).has_value() == false);
    CHECK(attacker_request(w, s, forged).has_value());
    CHECK(attacker_request(w, intercept->next, forged).has_value());
}

TEST_CASE("the fixed world admits no violation under the same bounds") {
    World w = load_corpus("hotcrp_fixed.ws");
    ExplorationBounds b = ExplorationBounds::defaults();
    IntegrityVerdict v = check_session_integrity(w, b);
    CHECK(v.status == IntegrityVerdict::Status::NoViolationWithinBound);
}

TEST_CASE("the honest trace itself is never a violation") {
    for (const char* name : {"hotcrp_vuln.ws", "hotcrp_fixed.ws", "phpmyadmin_vuln.ws"}) {
        CAPTURE(name);
        World w = load_corpus(name);
        HonestRun honest = run_honest(w);
        REQUIRE(honest.completed);
        for (const auto& l : relevant_auth_labels(w)) {
            auto proj = project(honest.trace, "usr", l);
            // the projection of the honest trace is trivially a prefix of itself
            CHECK(canonical_projection(proj, w) == canonical_projection(proj, w));
        }
        // exploration restricted to zero attacker moves finds nothing
        ExplorationBounds b = ExplorationBounds::defaults();
        b.max_attacker_moves = 0;
        IntegrityVerdict v = check_session_integrity(w, b);
        CHECK(v.status == IntegrityVerdict::Status::NoViolationWithinBound);
    }
}

TEST_CASE("monotonicity: enlarging bounds never loses the violation") {
    World w = load_corpus("hotcrp_vuln.ws");
    ExplorationBounds small = ExplorationBounds::defaults();
    IntegrityVerdict v1 = check_session_integrity(w, small);
    REQUIRE(v1.status == IntegrityVerdict::Status::Violation);
    ExplorationBounds big = small;
    big.max_steps += 10;
    big.max_branching += 16;
    IntegrityVerdict v2 = check_session_integrity(w, big);
    CHECK(v2.status == IntegrityVerdict::Status::Violation);
}

TEST_CASE("degenerate bounds report exhaustion, not safety") {
    World w = load_corpus("hotcrp_vuln.ws");
    ExplorationBounds b = ExplorationBounds::defaults();
    b.max_steps = 0;
    IntegrityVerdict v = check_session_integrity(w, b);
    CHECK(v.status == IntegrityVerdict::Status::BoundsTooSmall);
}

TEST_CASE("attackers below every assertion make the property vacuous") {
    World w = load_corpus("hotcrp_vuln.ws");
    // a custom attacker that can write at the assertion label has no
    // relevant labels to protect
    SL httpsC = SimpleLabel::https(w.universe.domain_id("dC"));
    w.attacker.kind = AttackerSpec::Kind::Custom;
    w.attacker.custom = Label{conf_top(w.universe), conf_top(w.universe)};
    (void)httpsC;
    CHECK(relevant_auth_labels(w).empty());
}
