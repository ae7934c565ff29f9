#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "sessint/labels.hpp"
#include "sessint/oracle.hpp"

using namespace sessint;
using namespace sessint::testing;

namespace {

SL http(int d) { return SimpleLabel::http(d); }
SL https(int d) { return SimpleLabel::https(d); }

}  // namespace

TEST_CASE("confidentiality order basics") {
    SL a = http(0), b = https(0);
    CHECK(conf_leq(a, a));
    CHECK(conf_leq(a, SimpleLabel::disj(a, b)));
    CHECK(conf_leq(SimpleLabel::conj(a, b), a));
    CHECK_FALSE(conf_leq(a, b));
    CHECK_FALSE(conf_leq(a, http(1)));
}

TEST_CASE("the order is the free-lattice order, not the distributive one") {
    // a /\ (b \/ c) vs (a /\ b) \/ (a /\ c): only the expansion direction
    // holds in the free lattice, while the distributive order equates them.
    SL a = http(0), b = https(0), c = http(1);
    SL lhs = SimpleLabel::conj(a, SimpleLabel::disj(b, c));
    SL rhs = SimpleLabel::disj(SimpleLabel::conj(a, b), SimpleLabel::conj(a, c));
    CHECK(conf_leq(rhs, lhs));
    CHECK_FALSE(conf_leq(lhs, rhs));
    CHECK(conf_leq_distributive(lhs, rhs));
    CHECK(conf_leq_distributive(rhs, lhs));
}

TEST_CASE("decision procedure agrees with the rule closure on small terms") {
    Universe u = two_domains();
    oracle::TermPopulation pop = oracle::enumerate_terms(u, 3);
    oracle::Closure cl = oracle::rule_closure(pop);
    for (size_t i = 0; i < pop.terms.size(); ++i)
        for (size_t j = 0; j < pop.terms.size(); ++j)
            CHECK(conf_leq(pop.terms[i], pop.terms[j]) == cl.leq(i, j));
}

TEST_CASE("preorder laws on random terms") {
    Universe u = two_domains();
    Rng rng(0x5e551);
    std::vector<SL> terms;
    for (int i = 0; i < 60; ++i) terms.push_back(random_term(rng, u, 3));
    for (const auto& t : terms) CHECK(conf_leq(t, t));
    int cases = 0;
    for (const auto& a : terms)
        for (const auto& b : terms)
            for (const auto& c : terms) {
                if (++cases > 40000) return;
                if (conf_leq(a, b) && conf_leq(b, c)) CHECK(conf_leq(a, c));
            }
}

TEST_CASE("confidentiality and integrity are contravariant") {
    Universe u = two_domains();
    Rng rng(0xc0ffee);
    for (int i = 0; i < 1200; ++i) {
        SL a = random_term(rng, u, 3), b = random_term(rng, u, 3);
        CHECK(integ_leq(a, b) == conf_leq(b, a));
    }
}

TEST_CASE("bounds and lattice operators") {
    Universe u = two_domains();
    SL bot = conf_bottom(u), top = conf_top(u);
    Rng rng(0xb0b);
    for (int i = 0; i < 1000; ++i) {
        SL t = random_term(rng, u, 3);
        CHECK(conf_leq(bot, t));
        CHECK(conf_leq(t, top));
        SL s = random_term(rng, u, 3);
        SL j = conf_join(t, s);
        CHECK(conf_leq(t, j));
        CHECK(conf_leq(s, j));
        SL m = conf_meet(t, s);
        CHECK(conf_leq(m, t));
        CHECK(conf_leq(m, s));
    }
    // join is below every upper bound, meet above every lower bound
    for (int i = 0; i < 400; ++i) {
        SL t = random_term(rng, u, 2), s = random_term(rng, u, 2), c = random_term(rng, u, 3);
        if (conf_leq(t, c) && conf_leq(s, c)) CHECK(conf_leq(conf_join(t, s), c));
        if (conf_leq(c, t) && conf_leq(c, s)) CHECK(conf_leq(c, conf_meet(t, s)));
    }
    // the integrity bounds are the flipped confidentiality bounds
    CHECK(conf_equiv(integ_top(u), conf_bottom(u)));
    CHECK(conf_equiv(integ_bottom(u), conf_top(u)));
    CHECK(conf_equiv(conf_join(http(0), bot), http(0)));

    // for universe {d1,d2}: http(d1)/\https(d1) sits strictly above bottom
    SL pair0 = SimpleLabel::conj(http(0), https(0));
    CHECK(conf_leq(bot, pair0));
    CHECK_FALSE(conf_leq(pair0, bot));

    Universe empty;
    CHECK_THROWS_AS(conf_bottom(empty), ConfigError);
}

TEST_CASE("attacker labels") {
    Universe u = two_domains();  // d1 = 0, d2 = 1
    AttackerSpec web{AttackerSpec::Kind::Web, 1, {}};
    Label lw = attacker_label(web, u);
    CHECK(conf_equiv(lw.conf, SimpleLabel::disj(http(1), https(1))));
    CHECK(conf_equiv(lw.integ, lw.conf));

    AttackerSpec net{AttackerSpec::Kind::Network, -1, {}};
    Label ln = attacker_label(net, u);
    CHECK(conf_equiv(ln.conf, SimpleLabel::disj(http(0), http(1))));

    // a two-element related class: the related-domain attacker at base is the
    // web attacker at the sibling
    Universe r = related_universe();
    AttackerSpec rel{AttackerSpec::Kind::RelatedDomain, 0, {}};
    Label lr = attacker_label(rel, r);
    AttackerSpec sib{AttackerSpec::Kind::Web, 1, {}};
    CHECK(lr.equiv(attacker_label(sib, r)));

    AttackerSpec lonely{AttackerSpec::Kind::RelatedDomain, 2, {}};
    CHECK_THROWS_AS(attacker_label(lonely, r), ConfigError);
}

TEST_CASE("classification against the attacker") {
    Universe u = two_domains();
    Label la = attacker_label({AttackerSpec::Kind::Web, 1, {}}, u);
    CHECK(classify(la.conf, la, OrderKind::Conf) == Level::Low);
    CHECK(classify(https(0), la, OrderKind::Conf) == Level::High);
    // the network attacker reads anything attached to plain http
    Label net = attacker_label({AttackerSpec::Kind::Network, -1, {}}, u);
    CHECK(classify(SimpleLabel::conj(http(0), https(0)), net, OrderKind::Conf) == Level::Low);
    // attacker-controlled integrity is the integrity top
    CHECK(is_integ_low(integ_top(u), la));
    CHECK(is_integ_high(integ_bottom(u), la));
    CHECK(is_integ_low(la.integ, la));
    CHECK(is_integ_high(https(0), la));
}

TEST_CASE("subtyping") {
    Universe u = two_domains();
    Label la = attacker_label({AttackerSpec::Kind::Web, 1, {}}, u);
    Label lC{https(0), https(0)};
    Label bot = bottom_label(u);

    CHECK(subtype(SecType::plain(lC), SecType::plain(lC), la));
    CHECK(subtype(SecType::plain(bot), SecType::plain(lC), la));
    CHECK_FALSE(subtype(SecType::plain(bot), SecType::credential(lC), la));
    // low credentials and low plain values collapse
    Label atk_low{http(1), integ_top(u)};
    CHECK(subtype(SecType::credential(atk_low), SecType::plain({conf_bottom(u), integ_top(u)}),
                  la));
    // credentials never upcast when confidential
    CHECK_FALSE(subtype(SecType::credential(lC), SecType::plain(lC), la));
}

TEST_CASE("subtype laws on random types") {
    Universe u = two_domains();
    Label la = attacker_label({AttackerSpec::Kind::Web, 1, {}}, u);
    Rng rng(0xdead);
    std::vector<SecType> types;
    for (int i = 0; i < 40; ++i) types.push_back(random_type(rng, u));
    for (const auto& t : types) CHECK(subtype(t, t, la));
    int cases = 0;
    bool more = true;
    for (const auto& a : types)
        for (const auto& b : types)
            for (const auto& c : types) {
                if (!more) break;
                if (++cases > 30000) more = false;
                if (subtype(a, b, la) && subtype(b, c, la)) CHECK(subtype(a, c, la));
            }
    // no high-confidentiality credential is a subtype of a plain type
    for (const auto& a : types)
        for (const auto& b : types) {
            if (a.cred && !b.cred && is_conf_high(a.label.conf, la))
                CHECK_FALSE(subtype(a, b, la));
        }
}

TEST_CASE("url and cookie labels") {
    Universe r = related_universe();  // base=0, sib=1 related; ext=2
    int base = 0;

    Url u{Scheme::Https, base, "p"};
    CHECK(conf_equiv(url_label(u).conf, https(base)));

    // plain cookie: read over both schemes, written by all related domains
    CookieAttrs plain;
    plain.domain = base;
    Label lp = cookie_label(plain, r);
    CHECK(conf_equiv(lp.conf, SimpleLabel::conj(http(base), https(base))));
    SL writers = SimpleLabel::conj(SimpleLabel::conj(http(0), https(0)),
                                   SimpleLabel::conj(http(1), https(1)));
    CHECK(conf_equiv(lp.integ, writers));

    // Secure: https-only read, integrity unchanged
    CookieAttrs sec = plain;
    sec.secure = true;
    Label ls = cookie_label(sec, r);
    CHECK(conf_equiv(ls.conf, https(base)));
    CHECK(conf_equiv(ls.integ, lp.integ));

    // __Secure-: https-only writes by related domains
    CookieAttrs sp = plain;
    sp.secure = true;
    sp.prefix = CookiePrefix::Secure;
    Label lsp = cookie_label(sp, r);
    CHECK(conf_equiv(lsp.integ, SimpleLabel::conj(https(0), https(1))));

    // __Host-: exactly the cookie's https origin, equal to its URL label
    CookieAttrs hp = plain;
    hp.secure = true;
    hp.prefix = CookiePrefix::Host;
    Label lhp = cookie_label(hp, r);
    CHECK(lhp.equiv(url_label(Url{Scheme::Https, base, "x"})));

    // Domain attribute widens readers to subdomains
    Universe subs;
    subs.add_related_group({"example", "a.example", "b.example"});
    CookieAttrs dom;
    dom.domain = subs.domain_id("a.example");
    dom.domain_attribute = subs.domain_id("example");
    Label ld = cookie_label(dom, subs);
    SL all = SimpleLabel::conj(SimpleLabel::conj(SimpleLabel::conj(http(0), https(0)),
                                                 SimpleLabel::conj(http(1), https(1))),
                               SimpleLabel::conj(http(2), https(2)));
    CHECK(conf_equiv(ld.conf, all));

    // Secure cookie with HSTS everywhere matches the __Secure- label
    Universe hs = related_universe();
    hs.enable_hsts(0);
    hs.enable_hsts(1);
    CHECK(cookie_label(sec, hs).equiv(cookie_label(sp, hs)));

    // __Host- plus a Domain attribute is rejected
    CookieAttrs bad = hp;
    bad.domain_attribute = 1;
    CHECK_THROWS_AS(validate_cookie_attrs(bad), ConfigError);
}

TEST_CASE("hsts monotonicity: enrolling domains never weakens cookie integrity") {
    Rng rng(0x5151);
    for (int i = 0; i < 1000; ++i) {
        Universe a = related_universe();
        Universe b = related_universe();
        // b enrols a superset of a's domains
        for (int d = 0; d < 3; ++d) {
            bool in_a = rng.coin();
            if (in_a) {
                a.enable_hsts(d);
                b.enable_hsts(d);
            } else if (rng.coin()) {
                b.enable_hsts(d);
            }
        }
        CookieAttrs c;
        c.domain = rng.below(3);
        c.secure = rng.coin();
        if (c.secure && rng.coin()) c.prefix = CookiePrefix::Secure;
        CHECK(integ_leq(cookie_label(c, b).integ, cookie_label(c, a).integ));
    }
}

TEST_CASE("session capping") {
    Universe u = two_domains();
    Label lC{https(0), https(0)};
    Label neutral{conf_top(u), integ_bottom(u)};
    // capping at the neutral session label changes nothing
    SecType t = SecType::plain(lC);
    CHECK(cap_session(t, neutral).label.equiv(lC));
    CHECK(cap_session(SecType::credential(lC), neutral).cred);
    // an attacker-grade session taints both components
    Label atk_sess{conf_bottom(u), integ_top(u)};
    SecType capped = cap_session(SecType::plain(lC), atk_sess);
    CHECK(capped.label.equiv(atk_sess));
    // a high-integrity session does not lift a low-integrity reference
    SecType low_ref = SecType::credential({https(0), integ_top(u)});
    CHECK(conf_equiv(cap_session(low_ref, lC).label.integ, integ_top(u)));
}
