#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "sessint/engine.hpp"
#include "sessint/typecheck.hpp"

using namespace sessint;
using namespace sessint::testing;

TEST_CASE("server expression evaluation") {
    ServerState srv;
    srv.globals[1] = {{"sid", Value::integer(7)}};
    srv.sessions[2] = {{"user", Value::identity("usr")}};
    NameId names = 10;

    auto lit = eval_server_expr(srv, 1, 2, se_val(Value::integer(7)), names);
    REQUIRE(lit);
    CHECK(value_equal(*lit, Value::integer(7)));

    // absent references read as the blank value
    auto blank = eval_server_expr(srv, 1, 2, se_global("nope"), names);
    REQUIRE(blank);
    CHECK(blank->is_undef());

    // two fresh draws in one run are distinct
    Universe u = two_domains();
    SecType cred = SecType::credential(bottom_label(u));
    auto f1 = eval_server_expr(srv, 1, 2, se_fresh(cred), names);
    auto f2 = eval_server_expr(srv, 1, 2, se_fresh(cred), names);
    REQUIRE(f1);
    REQUIRE(f2);
    CHECK(f1->name != f2->name);

    // a session read without a session has no rule
    CHECK_FALSE(eval_server_expr(srv, 1, std::nullopt, se_session("user"), names).has_value());

    // blank operands undefine everything except equality
    auto undef_add = eval_server_expr(
        srv, 1, 2, se_binop(ServerExpr::Op::Add, se_val(Value::undef()), se_val(Value::integer(1))),
        names);
    REQUIRE(undef_add);
    CHECK(undef_add->is_undef());
    auto undef_eq = eval_server_expr(
        srv, 1, 2, se_binop(ServerExpr::Op::Eq, se_val(Value::undef()), se_val(Value::undef())),
        names);
    REQUIRE(undef_eq);
    CHECK(undef_eq->b);
}

TEST_CASE("cookie filtering") {
    World w = load_corpus("hotcrp_fixed.ws");
    Url login = w.url_aliases.at("login");
    CHECK(cookies_for_request(w, {}, login).empty());

    // a host-prefixed cookie is not attached to plain-http requests
    Memory jar{{"sid", Value::integer(1)}};
    Url http_login{Scheme::Http, login.domain, "login"};
    CHECK(cookies_for_request(w, jar, http_login).empty());
    CHECK(cookies_for_request(w, jar, login).size() == 1);

    // an http response from a related domain can set a plain cookie of the
    // target but not a prefixed one
    World rel = parse_world(R"(
domains { {base, sib} }
attacker network {}
url b = https(base);
urltype b : ((HTTPS(base);HTTPS(base)), [], HTTPS(base));
cookie plainck @ base : (BOT;TOP);
cookie secck @ base : cred((HTTPS(base);TOP)) attrs { secure_prefix };
server {}
)");
    Url sib_http{Scheme::Http, rel.universe.domain_id("sib"), "x"};
    Memory set{{"plainck", Value::integer(1)}, {"secck", Value::integer(2)}};
    Memory out = update_jar(rel, {}, sib_http, set);
    CHECK(out.count("plainck") == 1);
    CHECK(out.count("secck") == 0);

    // jar updates never remove cookies and only add writable ones
    Rng rng(0x11);
    for (int i = 0; i < 1000; ++i) {
        Memory jar2;
        if (rng.coin()) jar2["plainck"] = Value::integer(rng.below(5));
        if (rng.coin()) jar2["secck"] = Value::integer(rng.below(5));
        Memory ck;
        if (rng.coin()) ck["plainck"] = Value::integer(rng.below(5));
        if (rng.coin()) ck["secck"] = Value::integer(rng.below(5));
        Url from{rng.coin() ? Scheme::Http : Scheme::Https,
                 rng.below(rel.universe.domain_count()), "p"};
        Memory upd = update_jar(rel, jar2, from, ck);
        for (const auto& [r, v] : jar2) CHECK(upd.count(r) == 1);
        for (const auto& [r, v] : upd) {
            bool was = jar2.count(r) != 0;
            bool writable = integ_leq(url_label(from).integ, rel.cookie_lambda(r)->integ);
            CHECK((was || writable));
        }
    }
}

TEST_CASE("stuck browser states have no successors") {
    // a halt action is consumed by no rule
    World w = parse_world(R"(
domains { d1; d2 }
attacker web(d2) {}
url a = https(d1);
urltype a : ((HTTPS(d1);HTTPS(d1)), [], HTTPS(d1));
server { listen(a)[]() { reply({}){ skip }{} } }
actions { halt }
)");
    SystemState s = initial_state(w);
    CHECK(enumerate_steps(w, s, StepMode::Honest).empty());
    CHECK(enumerate_steps(w, s, StepMode::Full).empty());
}

TEST_CASE("loads to HSTS domains over http have no successor") {
    World w = parse_world(R"(
domains { d1; d2 }
hsts { d1 }
attacker web(d2) {}
url a = http(d1);
urltype a : ((HTTP(d1);HTTP(d1)), [], HTTP(d1));
server { listen(a)[]() { reply({}){ skip }{} } }
actions { load(1, a) {} }
)");
    SystemState s = initial_state(w);
    CHECK(enumerate_steps(w, s, StepMode::Honest).empty());
}

TEST_CASE("honest runs") {
    SUBCASE("no actions give the empty trace") {
        World w = parse_world(R"(
domains { d1; d2 }
attacker web(d2) {}
server {}
)");
        HonestRun r = run_honest(w);
        CHECK(r.completed);
        CHECK(r.trace.events.empty());
    }

    SUBCASE("the fixed conference-management world authenticates the user") {
        World w = load_corpus("hotcrp_fixed.ws");
        HonestRun r = run_honest(w, 20000, true);
        CHECK(r.completed);
        CHECK_FALSE(r.stuck);
        CHECK_FALSE(r.error_event);
        CHECK_FALSE(r.nondeterminism);
        CHECK(r.monitor_violations.empty());
        Label lC{SimpleLabel::https(w.universe.domain_id("dC")),
                 SimpleLabel::https(w.universe.domain_id("dC"))};
        auto proj = project(r.trace, "usr", lC);
        REQUIRE(proj.size() == 1);
        CHECK(proj[0].browser_identity == "usr");
        CHECK(proj[0].session_identity == "usr");
        REQUIRE(proj[0].values.size() == 2);
        CHECK(value_equal(proj[0].values[0], Value::string("mypaper")));
        CHECK(value_equal(proj[0].values[1], Value::string("submit")));
    }

    SUBCASE("the vulnerable database-administration world fires its assertion") {
        World w = load_corpus("phpmyadmin_vuln.ws");
        HonestRun r = run_honest(w);
        CHECK(r.completed);
        Label lP{SimpleLabel::https(w.universe.domain_id("dP")),
                 SimpleLabel::https(w.universe.domain_id("dP"))};
        auto proj = project(r.trace, "usr", lP);
        REQUIRE(proj.size() == 1);
        CHECK(value_equal(proj[0].values[2], Value::string("testdb")));
    }

    SUBCASE("honest runs replay identically") {
        for (const char* name : {"hotcrp_fixed.ws", "hotcrp_vuln.ws", "moodle_fixed.ws",
                                 "phpmyadmin_fixed.ws", "phpmyadmin_vuln.ws"}) {
            World w = load_corpus(name);
            HonestRun a = run_honest(w);
            for (int i = 0; i < 200; ++i) {
                HonestRun b = run_honest(w);
                REQUIRE(a.trace.events.size() == b.trace.events.size());
                CHECK(trace_dump(a.trace, w) == trace_dump(b.trace, w));
            }
        }
    }
}

TEST_CASE("knowledge only grows along attacked steps") {
    World w = load_corpus("hotcrp_vuln.ws");
    Rng rng(0x99);
    for (int run = 0; run < 1000; ++run) {
        SystemState s = initial_state(w);
        std::set<NameId> k = s.knowledge;
        for (int i = 0; i < 12; ++i) {
            auto cs = enumerate_steps(w, s, StepMode::Full);
            if (cs.empty()) break;
            StepChoice& c = cs[static_cast<size_t>(rng.below(static_cast<int>(cs.size())))];
            for (NameId n : k) CHECK(c.next.knowledge.count(n) == 1);
            k = c.next.knowledge;
            s = std::move(c.next);
        }
    }
}

TEST_CASE("fresh names are never reused within a run") {
    World w = load_corpus("hotcrp_fixed.ws");
    HonestRun r = run_honest(w);
    std::set<NameId> seen;
    for (const auto& [dom, srv] : r.final_state.servers) {
        for (const auto& [id, mem] : srv.globals) {
            CHECK(seen.insert(id).second);
            CHECK(id < r.final_state.next_name);
        }
        for (const auto& [id, mem] : srv.sessions) {
            CHECK(seen.insert(id).second);
            CHECK(id < r.final_state.next_name);
        }
    }
}

TEST_CASE("requests to unserved urls always time out rather than deadlock") {
    World w = parse_world(R"(
domains { d1; d2 }
attacker web(d2) {}
url a = https(d1);
url ghost = https(d1)/nowhere;
urltype a : ((HTTPS(d1);HTTPS(d1)), [], HTTPS(d1));
urltype ghost : ((HTTPS(d1);HTTPS(d1)), [], HTTPS(d1));
server { listen(a)[]() { reply({}){ skip }{} } }
actions { load(1, ghost) {}; load(1, a) {} }
)");
    HonestRun r = run_honest(w);
    CHECK(r.completed);
    CHECK_FALSE(r.stuck);
}

TEST_CASE("a failed token check raises the error event and halts the user") {
    World w = parse_world(R"(
domains { d1; d2 }
attacker web(d2) {}
url a = https(d1);
urltype a : ((HTTPS(d1);HTTPS(d1)), [cred((HTTPS(d1);TOP))], HTTPS(d1));
session tok : cred((HTTPS(d1);TOP));
global g : cred((HTTPS(d1);TOP));
server {
  listen(a)[](t) {
    @glob g := fresh()^cred((HTTPS(d1);TOP));
    start(@glob g);
    @sess tok := fresh()^cred((HTTPS(d1);TOP));
    tokenchk(t, @sess tok) { reply({}){ skip }{} }
  }
}
actions { load(1, a) {} }
)");
    HonestRun r = run_honest(w);
    CHECK(r.error_event);
    CHECK(r.final_state.browser.halted);
}

TEST_CASE("the annotation monitor accepts every accepted corpus world") {
    for (const char* name : {"hotcrp_fixed.ws", "moodle_fixed.ws", "phpmyadmin_fixed.ws"}) {
        CAPTURE(name);
        World w = load_corpus(name);
        REQUIRE(type_cluster(w).ok());
        HonestRun r = run_honest(w, 20000, true);
        CHECK(r.completed);
        CHECK_FALSE(r.error_event);
        CHECK(r.monitor_violations.empty());
    }
}

TEST_CASE("trace dumps are stable and unattacked") {
    World w = load_corpus("moodle_fixed.ws");
    HonestRun r = run_honest(w);
    std::string dump = trace_dump(r.trace, w);
    CHECK(dump.find("error") == std::string::npos);
    CHECK(dump.find("atk") == std::string::npos);
    CHECK(r.trace.unattacked());
}
