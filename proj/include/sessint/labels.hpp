#pragma once

// Security labels over http(d)/https(d) atoms: the free-lattice preorders,
// label pairs, security types, attacker-parametric subtyping and the
// labeling of URLs, cookies and user actions.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sessint {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Declared domain universe with the related-domain partition (groups sharing
// a base domain) and the set of domains where HSTS is enabled.
class Universe {
  public:
    Universe() = default;

    // Adds a group of mutually related domains. Returns the class id.
    int add_related_group(const std::vector<std::string>& names);

    bool has_domain(const std::string& name) const { return index_of(name) >= 0; }
    int domain_id(const std::string& name) const;
    const std::string& domain_name(int id) const { return domains_.at(id); }
    int domain_count() const { return static_cast<int>(domains_.size()); }

    bool related(int d1, int d2) const { return class_of_.at(d1) == class_of_.at(d2); }
    // d1 is d2 itself or a dot-subdomain of d2.
    bool subdomain_of(int d1, int d2) const;

    void enable_hsts(int d) { hsts_.insert(d); }
    bool hsts(int d) const { return hsts_.count(d) != 0; }
    const std::set<int>& hsts_set() const { return hsts_; }

    std::vector<int> related_class(int d) const;
    std::vector<int> all_domains() const;

  private:
    int index_of(const std::string& name) const;
    std::vector<std::string> domains_;
    std::vector<int> class_of_;
    std::set<int> hsts_;
};

// A term of the simple-label grammar: http(d) | https(d) | l \/ l | l /\ l.
// Terms are immutable and shared.
class SimpleLabel {
  public:
    enum class Kind : uint8_t { Http, Https, Or, And };

    using Ptr = std::shared_ptr<const SimpleLabel>;

    static Ptr http(int domain);
    static Ptr https(int domain);
    static Ptr disj(Ptr a, Ptr b);  // disjunction
    static Ptr conj(Ptr a, Ptr b);  // conjunction

    Kind kind() const { return kind_; }
    bool is_atom() const { return kind_ == Kind::Http || kind_ == Kind::Https; }
    int domain() const { return domain_; }
    const Ptr& left() const { return left_; }
    const Ptr& right() const { return right_; }

    int size() const;  // node count

    SimpleLabel(Kind k, int dom, Ptr l, Ptr r) : kind_(k), domain_(dom), left_(std::move(l)), right_(std::move(r)) {}

  private:
    Kind kind_;
    int domain_ = -1;
    Ptr left_, right_;
};

using SL = SimpleLabel::Ptr;

bool same_atom(const SL& a, const SL& b);
bool structurally_equal(const SL& a, const SL& b);

// Decides the smallest preorder closed under the four label rules, i.e. the
// free-lattice word problem, by Whitman's recursive condition.
bool conf_leq(const SL& a, const SL& b);
inline bool integ_leq(const SL& a, const SL& b) { return conf_leq(b, a); }
inline bool conf_equiv(const SL& a, const SL& b) { return conf_leq(a, b) && conf_leq(b, a); }

// The free-distributive (monotone boolean implication) order; used only as a
// diagnostic to surface pairs where it disagrees with conf_leq.
bool conf_leq_distributive(const SL& a, const SL& b);

enum class OrderKind { Conf, Integ };
inline bool leq(const SL& a, const SL& b, OrderKind k) {
    return k == OrderKind::Conf ? conf_leq(a, b) : integ_leq(a, b);
}

// Joins and meets are the syntactic constructors with comparable operands
// absorbed. The integrity operators are the confidentiality duals.
SL conf_join(const SL& a, const SL& b);
SL conf_meet(const SL& a, const SL& b);
inline SL integ_join(const SL& a, const SL& b) { return conf_meet(a, b); }
inline SL integ_meet(const SL& a, const SL& b) { return conf_join(a, b); }

SL conf_bottom(const Universe& u);  // /\_d (http(d) /\ https(d))
SL conf_top(const Universe& u);     // \/_d (http(d) \/ https(d))
inline SL integ_bottom(const Universe& u) { return conf_top(u); }
inline SL integ_top(const Universe& u) { return conf_bottom(u); }

// A label is a pair of simple labels (confidentiality, integrity).
struct Label {
    SL conf;
    SL integ;

    bool leq(const Label& o) const { return conf_leq(conf, o.conf) && integ_leq(integ, o.integ); }
    bool equiv(const Label& o) const { return conf_equiv(conf, o.conf) && conf_equiv(integ, o.integ); }
};

inline Label bottom_label(const Universe& u) { return {conf_bottom(u), integ_bottom(u)}; }
inline Label top_label(const Universe& u) { return {conf_top(u), integ_top(u)}; }

// Security types: a plain label or a credential type over a label.
struct SecType {
    bool cred = false;
    Label label;

    static SecType plain(Label l) { return {false, std::move(l)}; }
    static SecType credential(Label l) { return {true, std::move(l)}; }

    bool equiv(const SecType& o) const { return cred == o.cred && label.equiv(o.label); }
};

// Reference types carry the type of the cell they name.
using RefType = SecType;

// Classification of a simple label against an attacker label. Low
// confidentiality means the attacker can read at l; low integrity means the
// attacker can write at l (the A-BroAtk capability check).
bool is_conf_low(const SL& l, const Label& attacker);
bool is_integ_low(const SL& l, const Label& attacker);
inline bool is_conf_high(const SL& l, const Label& a) { return !is_conf_low(l, a); }
inline bool is_integ_high(const SL& l, const Label& a) { return !is_integ_low(l, a); }

enum class Level { Low, High };
Level classify(const SL& l, const Label& attacker, OrderKind kind);

// Attacker-parametric subtyping on security types.
bool subtype(const SecType& t, const SecType& t2, const Label& attacker);

// Caps a session-reference type at the session label: confidentiality meet,
// integrity taint-join. Credential-ness is preserved.
SecType cap_session(const SecType& t, const Label& session);

// ---- labeling of URLs, cookies and actions -------------------------------

enum class Scheme : uint8_t { Http, Https };

struct Url {
    Scheme scheme = Scheme::Https;
    int domain = -1;
    std::string path;

    bool operator==(const Url& o) const {
        return scheme == o.scheme && domain == o.domain && path == o.path;
    }
    bool operator<(const Url& o) const {
        if (scheme != o.scheme) return scheme < o.scheme;
        if (domain != o.domain) return domain < o.domain;
        return path < o.path;
    }
};

SL origin_of(const Url& u);
Label url_label(const Url& u);

enum class CookiePrefix : uint8_t { None, Secure, Host };

struct CookieAttrs {
    int domain = -1;                     // host domain of the cookie
    bool secure = false;                 // Secure attribute
    std::optional<int> domain_attribute; // Domain attribute, if set
    CookiePrefix prefix = CookiePrefix::None;
};

// Validates the prefix constraints (__Host- implies Secure and no Domain
// attribute). Throws ConfigError on violation.
void validate_cookie_attrs(const CookieAttrs& c);

Label cookie_label(const CookieAttrs& c, const Universe& u);

struct AttackerSpec {
    enum class Kind : uint8_t { Web, Network, RelatedDomain, Custom } kind = Kind::Web;
    int domain = -1;  // Web / RelatedDomain target
    std::optional<Label> custom;
};

Label attacker_label(const AttackerSpec& spec, const Universe& u);

std::string to_string(const SL& l, const Universe& u);
std::string to_string(const Label& l, const Universe& u);
std::string to_string(const SecType& t, const Universe& u);
std::string to_string(const Url& u, const Universe& uni);

}  // namespace sessint
