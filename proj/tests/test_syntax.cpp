#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "helpers.hpp"
#include "sessint/ast.hpp"
#include "sessint/parser.hpp"

using namespace sessint;
using namespace sessint::testing;

namespace {

int command_count(const CommandPtr& c) {
    if (!c) return 0;
    int n = 1;
    n += command_count(c->first);
    n += command_count(c->second);
    n += command_count(c->body);
    return n;
}

}  // namespace

TEST_CASE("the fixed login endpoint parses to the expected shape") {
    World w = load_corpus("hotcrp_fixed.ws");
    const Endpoint* login = w.find_endpoint(w.url_aliases.at("login"));
    REQUIRE(login != nullptr);
    CHECK(login->cookies == std::vector<std::string>{"pre"});
    CHECK(login->params == std::vector<std::string>{"uid", "pwd", "token"});
    // one conditional with a pre-session arm and a token-checked login arm
    CHECK(login->body->kind == Command::Kind::If);
    CHECK(command_count(login->body) >= 12);

    // the auth command carries its label annotation
    const Endpoint* manage = w.find_endpoint(w.url_aliases.at("manage"));
    REQUIRE(manage != nullptr);
    std::function<const Command*(const CommandPtr&)> find_auth =
        [&](const CommandPtr& c) -> const Command* {
        if (!c) return nullptr;
        if (c->kind == Command::Kind::Auth) return c.get();
        for (const auto& sub : {c->first, c->second, c->body})
            if (const Command* r = find_auth(sub)) return r;
        return nullptr;
    };
    const Command* auth = find_auth(manage->body);
    REQUIRE(auth != nullptr);
    Label lC{SimpleLabel::https(0), SimpleLabel::https(0)};
    CHECK(auth->auth_label.equiv(lC));
}

TEST_CASE("an empty server block is a valid world") {
    World w = parse_world(R"(
domains { d1 }
attacker web(d1) {}
server {}
)");
    CHECK(w.endpoints.empty());
}

TEST_CASE("load errors carry positions and causes") {
    CHECK_THROWS_AS(parse_world("server {}"), ParseError);  // domains must come first
    CHECK_THROWS_AS(parse_world(R"(
domains { d1 }
attacker web(d1) {}
url a = https(d1);
urltype a : ((HTTPS(d1);HTTPS(d1)), [], HTTPS(d1));
server {
  listen(a)[](x) { skip }
  listen(a)[](x) { skip }
}
)"),
                    ParseError);  // duplicate endpoint
    CHECK_THROWS_AS(parse_world(R"(
domains { d1 }
attacker web(d1) {}
url a = https(d2);
)"),
                    ParseError);  // unknown domain
    CHECK_THROWS_AS(parse_world(R"(
domains { d1 }
attacker web(d1) {}
url a = https(d1);
urltype a : ((HTTPS(d1);HTTPS(d1)), [(BOT;TOP)], HTTPS(d1));
server { listen(a)[](x) { @glob g := y } }
)"),
                    ParseError);  // unbound variable
    CHECK_THROWS_AS(parse_world(R"(
domains { d1 }
attacker web(d1) {}
cookie c @ d1 : cred((HTTPS(d1);HTTPS(d1))) attrs { host_prefix, domain(d1) };
)"),
                    ParseError);  // __Host- forbids the Domain attribute
}

TEST_CASE("parse of print is identity on the corpus") {
    for (const char* name :
         {"hotcrp_vuln.ws", "hotcrp_fixed.ws", "moodle_vuln.ws", "moodle_fixed.ws",
          "phpmyadmin_vuln.ws", "phpmyadmin_fixed.ws"}) {
        CAPTURE(name);
        World w = load_corpus(name);
        std::string printed = print_world(w);
        World back = parse_world(printed);
        CHECK(print_world(back) == printed);
        CHECK(back.endpoints.size() == w.endpoints.size());
        CHECK(back.actions.size() == w.actions.size());
        for (size_t i = 0; i < w.endpoints.size(); ++i)
            CHECK(print_command(back.endpoints[i].body, back) ==
                  print_command(w.endpoints[i].body, w));
    }
}

TEST_CASE("substitution") {
    World w = load_corpus("hotcrp_vuln.ws");
    Subst sigma{{"x", Value::undef()}};

    CHECK(print_command(substitute(cmd_skip(), sigma), w) == "skip");

    // partial application leaves other variables free
    ServerExprPtr guard = se_binop(ServerExpr::Op::And,
                                   se_binop(ServerExpr::Op::Eq, se_var("x"), se_val(Value::undef())),
                                   se_binop(ServerExpr::Op::Eq, se_var("y"), se_val(Value::undef())));
    ServerExprPtr after = substitute(guard, sigma);
    CHECK(print_server_expr(after, w) == "((undef = undef) and (y = undef))");

    // substitution is idempotent when the range has no variables
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        Subst s2{{"uid", Value::identity("usr")}, {"pwd", Value::integer(rng.below(100))}};
        const Endpoint* login = w.find_endpoint(w.url_aliases.at("login"));
        CommandPtr once = substitute(login->body, s2);
        CommandPtr twice = substitute(once, s2);
        CHECK(print_command(once, w) == print_command(twice, w));
    }

    // binder-bound variables are not replaced inside their scope
    World w2 = parse_world(R"(
domains { d1 }
attacker web(d1) {}
url a = https(d1);
urltype a : ((HTTPS(d1);HTTPS(d1)), [(BOT;HTTPS(d1))], HTTPS(d1));
server { listen(a)[](p) { reply({}){ skip }{ } with p = p + 1 } }
)");
    const Endpoint* ep = w2.find_endpoint(w2.url_aliases.at("a"));
    Subst s3{{"p", Value::integer(5)}};
    CommandPtr sub = substitute(ep->body, s3);
    // the binder expression sees the outer value, the binder name stays
    CHECK(print_command(sub, w2).find("with p = (5 + 1)") != std::string::npos);
}

TEST_CASE("missing parameters substitute to the blank value at receive time") {
    // applying the receive substitution by hand to the vulnerable login
    World w = load_corpus("hotcrp_vuln.ws");
    const Endpoint* login = w.find_endpoint(w.url_aliases.at("login"));
    Subst sigma;
    sigma["uid"] = Value::identity("usr");
    sigma["pwd"] = w.passwords.at({"usr", w.url_aliases.at("login")});
    CommandPtr body = substitute(login->body, sigma);
    std::string s = print_command(body, w);
    CHECK(s.find("login(id(usr)") != std::string::npos);
    CHECK(s.find("uid") == std::string::npos);
}

TEST_CASE("navigation flows") {
    CHECK(navigation_flows({}).empty());

    World w = load_corpus("hotcrp_vuln.ws");
    auto flows = navigation_flows(w.actions);
    REQUIRE(flows.size() == 2);
    // tab 1: the load plus all three submits; tab 2: the attacker page alone
    CHECK(flows[0].size() == 4);
    CHECK(flows[0][0].kind == UserAction::Kind::Load);
    CHECK(flows[0][1].form_tag == "auth");
    CHECK(flows[0][2].form_tag == "link");
    CHECK(flows[0][3].form_tag == "add");
    CHECK(flows[1].size() == 1);
    CHECK(flows[1][0].tab == 2);

    // two loads on one tab give two singleton flows
    UserAction l1{UserAction::Kind::Load, 1, w.url_aliases.at("login"), "", {}};
    UserAction l2{UserAction::Kind::Load, 1, w.url_aliases.at("manage"), "", {}};
    auto two = navigation_flows({l1, l2});
    REQUIRE(two.size() == 2);
    CHECK(two[0].size() == 1);
    CHECK(two[1].size() == 1);

    // flows partition the load/submit actions; halt belongs to no flow
    Rng rng(0xf10e5);
    for (int i = 0; i < 1000; ++i) {
        std::vector<UserAction> acts;
        int n = 1 + rng.below(8);
        for (int k = 0; k < n; ++k) {
            UserAction a;
            int kind = rng.below(3);
            a.kind = kind == 0   ? UserAction::Kind::Halt
                     : kind == 1 ? UserAction::Kind::Load
                                 : UserAction::Kind::Submit;
            a.tab = rng.below(3);
            a.url = w.url_aliases.at("login");
            acts.push_back(a);
        }
        auto fl = navigation_flows(acts);
        size_t in_flows = 0;
        for (const auto& f : fl) in_flows += f.size();
        size_t loads = 0, submits_after_load = 0;
        std::set<int> seen_tabs;
        for (const auto& a : acts) {
            if (a.kind == UserAction::Kind::Load) {
                ++loads;
                seen_tabs.insert(a.tab);
            } else if (a.kind == UserAction::Kind::Submit && seen_tabs.count(a.tab)) {
                ++submits_after_load;
            }
        }
        CHECK(in_flows == loads + submits_after_load);
    }
}

TEST_CASE("free names") {
    World w = load_corpus("hotcrp_vuln.ws");
    std::set<NameId> out;
    free_names(Value::undef(), out);
    CHECK(out.empty());

    Value sid = Value::name_value(42, SecType::credential(bottom_label(w.universe)));
    std::map<std::string, Value> ck{{"sid", sid}};
    free_names(ck, out);
    CHECK(out == std::set<NameId>{42});

    // in the credential submit, only the password is a name
    out.clear();
    const UserAction& submit = w.actions[1];
    free_names(submit.inputs, out);
    REQUIRE(out.size() == 1);
    CHECK(*out.begin() == w.passwords.at({"usr", w.url_aliases.at("login")}).name);
}
