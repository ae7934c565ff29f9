#include "sessint/labels.hpp"

#include <algorithm>
#include <functional>

namespace sessint {

// ---- Universe -------------------------------------------------------------

int Universe::add_related_group(const std::vector<std::string>& names) {
    int cls = class_of_.empty() ? 0 : *std::max_element(class_of_.begin(), class_of_.end()) + 1;
    for (const auto& n : names) {
        if (has_domain(n)) throw ConfigError("domain declared twice: " + n);
        domains_.push_back(n);
        class_of_.push_back(cls);
    }
    return cls;
}

int Universe::index_of(const std::string& name) const {
    for (size_t i = 0; i < domains_.size(); ++i)
        if (domains_[i] == name) return static_cast<int>(i);
    return -1;
}

int Universe::domain_id(const std::string& name) const {
    int i = index_of(name);
    if (i < 0) throw ConfigError("unknown domain: " + name);
    return i;
}

bool Universe::subdomain_of(int d1, int d2) const {
    if (d1 == d2) return true;
    const std::string& a = domains_.at(d1);
    const std::string& b = domains_.at(d2);
    return a.size() > b.size() + 1 && a.compare(a.size() - b.size() - 1, b.size() + 1, "." + b) == 0;
}

std::vector<int> Universe::related_class(int d) const {
    std::vector<int> out;
    for (int i = 0; i < domain_count(); ++i)
        if (related(i, d)) out.push_back(i);
    return out;
}

std::vector<int> Universe::all_domains() const {
    std::vector<int> out(domains_.size());
    for (size_t i = 0; i < domains_.size(); ++i) out[i] = static_cast<int>(i);
    return out;
}

// ---- SimpleLabel constructors ----------------------------------------------

SL SimpleLabel::http(int domain) {
    return std::make_shared<const SimpleLabel>(Kind::Http, domain, nullptr, nullptr);
}
SL SimpleLabel::https(int domain) {
    return std::make_shared<const SimpleLabel>(Kind::Https, domain, nullptr, nullptr);
}
SL SimpleLabel::disj(Ptr a, Ptr b) {
    return std::make_shared<const SimpleLabel>(Kind::Or, -1, std::move(a), std::move(b));
}
SL SimpleLabel::conj(Ptr a, Ptr b) {
    return std::make_shared<const SimpleLabel>(Kind::And, -1, std::move(a), std::move(b));
}

int SimpleLabel::size() const {
    if (is_atom()) return 1;
    return 1 + left_->size() + right_->size();
}

bool same_atom(const SL& a, const SL& b) {
    return a->is_atom() && a->kind() == b->kind() && a->domain() == b->domain();
}

bool structurally_equal(const SL& a, const SL& b) {
    if (a.get() == b.get()) return true;
    if (a->kind() != b->kind()) return false;
    if (a->is_atom()) return a->domain() == b->domain();
    return structurally_equal(a->left(), b->left()) && structurally_equal(a->right(), b->right());
}

// ---- the order --------------------------------------------------------------

// Whitman's condition. Joins on the left and meets on the right decompose
// completely; the mixed meet-below-join case needs the four-way disjunction.
bool conf_leq(const SL& a, const SL& b) {
    if (a->kind() == SimpleLabel::Kind::Or)
        return conf_leq(a->left(), b) && conf_leq(a->right(), b);
    if (b->kind() == SimpleLabel::Kind::And)
        return conf_leq(a, b->left()) && conf_leq(a, b->right());
    if (a->is_atom() && b->is_atom()) return same_atom(a, b);
    if (a->is_atom())  // b is Or
        return conf_leq(a, b->left()) || conf_leq(a, b->right());
    if (b->is_atom())  // a is And
        return conf_leq(a->left(), b) || conf_leq(a->right(), b);
    // a is And, b is Or
    return conf_leq(a->left(), b) || conf_leq(a->right(), b) ||
           conf_leq(a, b->left()) || conf_leq(a, b->right());
}

namespace {

void collect_atoms(const SL& l, std::set<std::pair<int, int>>& out) {
    if (l->is_atom()) {
        out.insert({static_cast<int>(l->kind()), l->domain()});
        return;
    }
    collect_atoms(l->left(), out);
    collect_atoms(l->right(), out);
}

bool eval_bool(const SL& l, const std::set<std::pair<int, int>>& truthy) {
    switch (l->kind()) {
        case SimpleLabel::Kind::Http:
        case SimpleLabel::Kind::Https:
            return truthy.count({static_cast<int>(l->kind()), l->domain()}) != 0;
        case SimpleLabel::Kind::Or:
            return eval_bool(l->left(), truthy) || eval_bool(l->right(), truthy);
        case SimpleLabel::Kind::And:
            return eval_bool(l->left(), truthy) && eval_bool(l->right(), truthy);
    }
    return false;
}

}  // namespace

bool conf_leq_distributive(const SL& a, const SL& b) {
    std::set<std::pair<int, int>> atoms;
    collect_atoms(a, atoms);
    collect_atoms(b, atoms);
    std::vector<std::pair<int, int>> v(atoms.begin(), atoms.end());
    size_t n = v.size();
    for (uint64_t mask = 0; mask < (uint64_t{1} << n); ++mask) {
        std::set<std::pair<int, int>> truthy;
        for (size_t i = 0; i < n; ++i)
            if (mask & (uint64_t{1} << i)) truthy.insert(v[i]);
        if (eval_bool(a, truthy) && !eval_bool(b, truthy)) return false;
    }
    return true;
}

SL conf_join(const SL& a, const SL& b) {
    if (conf_leq(a, b)) return b;
    if (conf_leq(b, a)) return a;
    return SimpleLabel::disj(a, b);
}

SL conf_meet(const SL& a, const SL& b) {
    if (conf_leq(a, b)) return a;
    if (conf_leq(b, a)) return b;
    return SimpleLabel::conj(a, b);
}

SL conf_bottom(const Universe& u) {
    if (u.domain_count() == 0) throw ConfigError("empty domain universe");
    SL acc;
    for (int d : u.all_domains()) {
        SL pair = SimpleLabel::conj(SimpleLabel::http(d), SimpleLabel::https(d));
        acc = acc ? SimpleLabel::conj(acc, pair) : pair;
    }
    return acc;
}

SL conf_top(const Universe& u) {
    if (u.domain_count() == 0) throw ConfigError("empty domain universe");
    SL acc;
    for (int d : u.all_domains()) {
        SL pair = SimpleLabel::disj(SimpleLabel::http(d), SimpleLabel::https(d));
        acc = acc ? SimpleLabel::disj(acc, pair) : pair;
    }
    return acc;
}

// ---- classification ---------------------------------------------------------

bool is_conf_low(const SL& l, const Label& attacker) { return conf_leq(l, attacker.conf); }

// The attacker can write at l when her integrity capability covers it, the
// side condition A-BroAtk places on intercepted URLs: I(la) <=_I l.
bool is_integ_low(const SL& l, const Label& attacker) { return conf_leq(l, attacker.integ); }

Level classify(const SL& l, const Label& attacker, OrderKind kind) {
    bool low = kind == OrderKind::Conf ? is_conf_low(l, attacker) : is_integ_low(l, attacker);
    return low ? Level::Low : Level::High;
}

// ---- subtyping ---------------------------------------------------------------

bool subtype(const SecType& t, const SecType& t2, const Label& attacker) {
    // Plain labels inherit the label order; credentials only coincide.
    if (!t.cred && !t2.cred && t.label.leq(t2.label)) return true;
    if (t.cred && t2.cred && t.label.equiv(t2.label)) return true;
    // The attacker-collapse rule, closed under the label order: everything
    // that can be weakened into an attacker-grade type on the left, and
    // everything an attacker-grade type flows into on the right. For plain
    // types the integrity (resp. confidentiality) side is free, since the
    // label order can always move it to the attacker's end first.
    bool from = t.cred ? is_conf_low(t.label.conf, attacker) && is_integ_low(t.label.integ, attacker)
                       : is_conf_low(t.label.conf, attacker);
    bool into = t2.cred ? is_conf_low(t2.label.conf, attacker) && is_integ_low(t2.label.integ, attacker)
                        : is_integ_low(t2.label.integ, attacker);
    return from && into;
}

SecType cap_session(const SecType& t, const Label& session) {
    Label capped{conf_meet(t.label.conf, session.conf), integ_join(t.label.integ, session.integ)};
    return {t.cred, std::move(capped)};
}

// ---- lambda ------------------------------------------------------------------

SL origin_of(const Url& u) {
    return u.scheme == Scheme::Http ? SimpleLabel::http(u.domain) : SimpleLabel::https(u.domain);
}

Label url_label(const Url& u) {
    SL o = origin_of(u);
    return {o, o};
}

void validate_cookie_attrs(const CookieAttrs& c) {
    if (c.prefix == CookiePrefix::Host && c.domain_attribute.has_value())
        throw ConfigError("__Host- cookie must not carry a Domain attribute");
    if ((c.prefix == CookiePrefix::Host || c.prefix == CookiePrefix::Secure) && !c.secure)
        throw ConfigError("prefixed cookie must set Secure");
}

namespace {

SL meet_fold(const std::vector<SL>& xs) {
    SL acc;
    for (const auto& x : xs) acc = acc ? SimpleLabel::conj(acc, x) : x;
    return acc;
}

}  // namespace

Label cookie_label(const CookieAttrs& c, const Universe& u) {
    validate_cookie_attrs(c);
    int d = c.domain;

    // Read component: which URLs the cookie is attached to.
    SL conf;
    bool https_only = c.secure || c.prefix != CookiePrefix::None;
    if (c.prefix == CookiePrefix::Host) {
        conf = SimpleLabel::https(d);
    } else if (c.domain_attribute) {
        std::vector<SL> parts;
        for (int sub : u.all_domains()) {
            if (!u.subdomain_of(sub, *c.domain_attribute)) continue;
            parts.push_back(https_only
                                ? SimpleLabel::https(sub)
                                : SL(SimpleLabel::conj(SimpleLabel::http(sub), SimpleLabel::https(sub))));
        }
        if (parts.empty()) throw ConfigError("Domain attribute matches no declared domain");
        conf = meet_fold(parts);
    } else {
        conf = https_only ? SimpleLabel::https(d)
                          : SimpleLabel::conj(SimpleLabel::http(d), SimpleLabel::https(d));
    }

    // Write component: who may set the cookie. __Host- restricts to the exact
    // origin; otherwise every related domain can write, over HTTPS always and
    // over HTTP unless the writer is HSTS-protected or the prefix forbids it.
    SL integ;
    if (c.prefix == CookiePrefix::Host) {
        integ = SimpleLabel::https(d);
    } else {
        std::vector<SL> parts;
        bool http_writable = c.prefix == CookiePrefix::None;
        if (http_writable)
            for (int rel : u.related_class(d))
                if (!u.hsts(rel)) parts.push_back(SimpleLabel::http(rel));
        for (int rel : u.related_class(d)) parts.push_back(SimpleLabel::https(rel));
        integ = meet_fold(parts);
    }
    return {conf, integ};
}

Label attacker_label(const AttackerSpec& spec, const Universe& u) {
    auto site = [](int d) {
        return SimpleLabel::disj(SimpleLabel::http(d), SimpleLabel::https(d));
    };
    switch (spec.kind) {
        case AttackerSpec::Kind::Web: {
            SL l = site(spec.domain);
            return {l, l};
        }
        case AttackerSpec::Kind::Network: {
            SL acc;
            for (int d : u.all_domains()) {
                SL h = SimpleLabel::http(d);
                acc = acc ? SimpleLabel::disj(acc, h) : h;
            }
            if (!acc) throw ConfigError("empty domain universe");
            return {acc, acc};
        }
        case AttackerSpec::Kind::RelatedDomain: {
            SL acc;
            for (int rel : u.related_class(spec.domain)) {
                if (rel == spec.domain) continue;
                SL s = site(rel);
                acc = acc ? SimpleLabel::disj(acc, s) : s;
            }
            if (!acc)
                throw ConfigError("related-domain attacker needs a sibling of " +
                                  u.domain_name(spec.domain));
            return {acc, acc};
        }
        case AttackerSpec::Kind::Custom:
            if (!spec.custom) throw ConfigError("custom attacker without a label");
            return *spec.custom;
    }
    throw ConfigError("bad attacker spec");
}

// ---- printing ----------------------------------------------------------------

std::string to_string(const SL& l, const Universe& u) {
    switch (l->kind()) {
        case SimpleLabel::Kind::Http:
            return "HTTP(" + u.domain_name(l->domain()) + ")";
        case SimpleLabel::Kind::Https:
            return "HTTPS(" + u.domain_name(l->domain()) + ")";
        case SimpleLabel::Kind::Or:
            return "(" + to_string(l->left(), u) + " \\/ " + to_string(l->right(), u) + ")";
        case SimpleLabel::Kind::And:
            return "(" + to_string(l->left(), u) + " /\\ " + to_string(l->right(), u) + ")";
    }
    return "?";
}

std::string to_string(const Label& l, const Universe& u) {
    return "(" + to_string(l.conf, u) + "; " + to_string(l.integ, u) + ")";
}

std::string to_string(const SecType& t, const Universe& u) {
    return t.cred ? "cred(" + to_string(t.label, u) + ")" : to_string(t.label, u);
}

std::string to_string(const Url& url, const Universe& uni) {
    std::string s = url.scheme == Scheme::Http ? "http" : "https";
    return s + "(" + uni.domain_name(url.domain) + ")/" + url.path;
}

}  // namespace sessint
