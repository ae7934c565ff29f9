#pragma once

// Abstract syntax of the web calculus: values, server expressions and
// commands, browser expressions and scripts, pages, endpoints, user actions
// and whole worlds, plus syntactic utilities (substitution, free names,
// navigation flows).

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sessint/labels.hpp"

namespace sessint {

struct Pos {
    int line = 0;
    int col = 0;
    bool known() const { return line > 0; }
    std::string str() const { return std::to_string(line) + ":" + std::to_string(col); }
};

// ---- values -----------------------------------------------------------------

using NameId = uint32_t;

// Every value carries a security-type annotation; only name annotations are
// meaningful (credential types), everything else defaults to Plain(bottom).
struct Value {
    enum class Kind : uint8_t { Undef, Bool, Int, Str, Identity, UrlV, Name } kind = Kind::Undef;
    bool b = false;
    int64_t i = 0;
    std::string s;      // Str / Identity
    Url url;            // UrlV
    NameId name = 0;    // Name
    std::optional<SecType> ann;

    static Value undef() { return {}; }
    static Value boolean(bool v);
    static Value integer(int64_t v);
    static Value string(std::string v);
    static Value identity(std::string who);
    static Value url_value(Url u);
    static Value name_value(NameId id, SecType annotation);

    bool is_name() const { return kind == Kind::Name; }
    bool is_undef() const { return kind == Kind::Undef; }
};

// Annotation-blind equality: names compare by id, everything else by payload.
bool value_equal(const Value& a, const Value& b);
std::string value_repr(const Value& v, const Universe& u);

// ---- server expressions -------------------------------------------------------

struct ServerExpr;
using ServerExprPtr = std::shared_ptr<const ServerExpr>;

struct ServerExpr {
    enum class Kind : uint8_t { Var, GlobalRef, SessionRef, Val, Fresh, BinOp } kind = Kind::Val;
    enum class Op : uint8_t { Eq, And, Or, Add } op = Op::Eq;
    std::string name;   // Var / GlobalRef / SessionRef
    Value value;        // Val
    SecType fresh_ann;  // Fresh (always a credential type)
    ServerExprPtr lhs, rhs;
    Pos pos;
};

ServerExprPtr se_var(std::string n, Pos p = {});
ServerExprPtr se_global(std::string r, Pos p = {});
ServerExprPtr se_session(std::string r, Pos p = {});
ServerExprPtr se_val(Value v, Pos p = {});
ServerExprPtr se_fresh(SecType ann, Pos p = {});
ServerExprPtr se_binop(ServerExpr::Op op, ServerExprPtr a, ServerExprPtr b, Pos p = {});

// ---- browser expressions and scripts ------------------------------------------

struct BrowserExpr;
using BrowserExprPtr = std::shared_ptr<const BrowserExpr>;

struct BrowserExpr {
    enum class Kind : uint8_t { Var, CookieRef, Val, Dom, BinOp } kind = Kind::Val;
    ServerExpr::Op op = ServerExpr::Op::Eq;
    std::string name;
    Value value;
    BrowserExprPtr lhs, rhs;  // Dom: lhs = form tag, rhs = index
    Pos pos;
};

BrowserExprPtr be_var(std::string n, Pos p = {});
BrowserExprPtr be_cookie(std::string r, Pos p = {});
BrowserExprPtr be_val(Value v, Pos p = {});
BrowserExprPtr be_dom(BrowserExprPtr tag, BrowserExprPtr idx, Pos p = {});
BrowserExprPtr be_binop(ServerExpr::Op op, BrowserExprPtr a, BrowserExprPtr b, Pos p = {});

struct Script;
using ScriptPtr = std::shared_ptr<const Script>;

struct Script {
    enum class Kind : uint8_t { Skip, Seq, Assign, Include, SetDom } kind = Kind::Skip;
    ScriptPtr first, second;          // Seq
    std::string ref;                  // Assign target (cookie)
    BrowserExprPtr expr;              // Assign rhs / SetDom tag
    Url url;                          // Include / SetDom target
    std::vector<BrowserExprPtr> args; // Include / SetDom parameters
    Pos pos;
};

ScriptPtr script_skip(Pos p = {});
ScriptPtr script_seq(ScriptPtr a, ScriptPtr b, Pos p = {});
ScriptPtr script_assign(std::string ref, BrowserExprPtr e, Pos p = {});
ScriptPtr script_include(Url u, std::vector<BrowserExprPtr> args, Pos p = {});
ScriptPtr script_setdom(BrowserExprPtr tag, Url u, std::vector<BrowserExprPtr> args, Pos p = {});

// ---- pages ---------------------------------------------------------------------

// A form parameter is a value or a binder variable.
struct FormParam {
    bool is_var = false;
    std::string var;
    Value value;
};

struct Form {
    Url target;
    std::vector<FormParam> params;
};

// error page or a tag -> form map (kept ordered for deterministic output).
struct Page {
    bool error = false;
    std::map<std::string, Form> forms;

    static Page error_page() { return {true, {}}; }
    static Page empty() { return {false, {}}; }
};

// ---- commands -------------------------------------------------------------------

struct Command;
using CommandPtr = std::shared_ptr<const Command>;

struct Binder {
    std::string var;
    ServerExprPtr expr;
};

struct Command {
    enum class Kind : uint8_t {
        Skip, Halt, Seq, SetGlobal, SetSession, If, Login, Start, Auth,
        TokenChk, OriginChk, Reply, Redirect
    } kind = Kind::Skip;

    CommandPtr first, second;            // Seq; If: first=then, second=else
    std::string ref;                     // SetGlobal / SetSession target
    ServerExprPtr expr;                  // Set rhs / If guard / Start arg / TokenChk lhs
    ServerExprPtr expr2, expr3;          // Login (user, password, session-id); TokenChk rhs = expr2
    std::vector<ServerExprPtr> auth_args;
    Label auth_label;                    // Auth annotation
    std::vector<SL> origins;             // OriginChk whitelist
    CommandPtr body;                     // TokenChk / OriginChk continuation
    Page page;                           // Reply
    ScriptPtr script;                    // Reply
    std::map<std::string, std::string> cookies;  // reply/redirect: cookie -> value-or-binder var name
    std::map<std::string, Value> cookie_consts;  // entries whose payload is a literal value
    Url redirect_target;                 // Redirect
    std::vector<FormParam> redirect_params;
    std::vector<Binder> binders;         // Reply / Redirect
    Pos pos;
};

CommandPtr cmd_skip(Pos p = {});
CommandPtr cmd_halt(Pos p = {});
CommandPtr cmd_seq(CommandPtr a, CommandPtr b, Pos p = {});
CommandPtr cmd_set_global(std::string r, ServerExprPtr e, Pos p = {});
CommandPtr cmd_set_session(std::string r, ServerExprPtr e, Pos p = {});
CommandPtr cmd_if(ServerExprPtr guard, CommandPtr thn, CommandPtr els, Pos p = {});
CommandPtr cmd_login(ServerExprPtr user, ServerExprPtr pw, ServerExprPtr sid, Pos p = {});
CommandPtr cmd_start(ServerExprPtr e, Pos p = {});
CommandPtr cmd_auth(std::vector<ServerExprPtr> args, Label l, Pos p = {});
CommandPtr cmd_tokenchk(ServerExprPtr x, ServerExprPtr r, CommandPtr body, Pos p = {});
CommandPtr cmd_originchk(std::vector<SL> origins, CommandPtr body, Pos p = {});
CommandPtr cmd_reply(Page page, ScriptPtr s, std::map<std::string, std::string> cookies,
                     std::map<std::string, Value> cookie_consts, std::vector<Binder> binders,
                     Pos p = {});
CommandPtr cmd_redirect(Url target, std::vector<FormParam> params,
                        std::map<std::string, std::string> cookies,
                        std::map<std::string, Value> cookie_consts, std::vector<Binder> binders,
                        Pos p = {});

// ---- endpoints, actions, world ---------------------------------------------------

struct Endpoint {
    Url url;
    std::vector<std::string> cookies;  // expected cookie refs
    std::vector<std::string> params;   // parameter variables
    CommandPtr body;
    Pos pos;
};

struct UserAction {
    enum class Kind : uint8_t { Halt, Load, Submit } kind = Kind::Halt;
    int tab = 0;
    Url url;                       // Load: target; Submit: the containing page's URL
    std::string form_tag;          // Submit
    std::map<int, Value> inputs;   // 1-based positions; values carry annotations
};

// URL -> (connection label, parameter types, reply integrity)
struct UrlType {
    Label conn;
    std::vector<SecType> params;
    SL reply_integ;
};

struct TypingEnv {
    std::map<Url, UrlType> urls;                 // Gamma_U
    std::map<std::string, SecType> vars;         // Gamma_X (built per endpoint)
    std::map<std::string, RefType> globals;      // Gamma_@ (cookies and globals)
    std::map<std::string, RefType> sessions;     // Gamma_$
    std::map<std::string, UrlType> forms;        // Gamma_V
};

struct World {
    Universe universe;
    std::vector<Endpoint> endpoints;
    std::vector<UserAction> actions;
    AttackerSpec attacker;
    std::vector<std::string> attacker_identities;           // non-usr identities
    std::vector<std::pair<NameId, SecType>> attacker_knowledge;
    std::map<std::string, CookieAttrs> cookie_attrs;        // cookie ref -> attributes
    std::map<std::pair<std::string, Url>, Value> passwords; // (identity, url) -> name value
    std::map<std::string, Url> url_aliases;                 // alias -> url (for printing)
    std::vector<Url> protected_urls;                        // origin-check protected set
    TypingEnv env;
    NameId first_runtime_name = 1;  // config names occupy ids below this
    std::map<NameId, std::string> config_names;             // declared name ids, for printing

    const Endpoint* find_endpoint(const Url& u) const;
    bool is_protected(const Url& u) const;
    std::optional<Label> cookie_lambda(const std::string& ref) const;
    Label attacker_lab() const { return attacker_label(attacker, universe); }
    std::string url_name(const Url& u) const;
};

// ---- syntactic utilities -----------------------------------------------------------

using Subst = std::map<std::string, Value>;

ServerExprPtr substitute(const ServerExprPtr& e, const Subst& sigma);
CommandPtr substitute(const CommandPtr& c, const Subst& sigma);
ScriptPtr substitute(const ScriptPtr& s, const Subst& sigma);
BrowserExprPtr substitute(const BrowserExprPtr& e, const Subst& sigma);
Page substitute(const Page& p, const Subst& sigma);

void free_names(const Value& v, std::set<NameId>& out);
void free_names(const Page& p, std::set<NameId>& out);
void free_names(const ScriptPtr& s, std::set<NameId>& out);
void free_names(const std::map<std::string, Value>& m, std::set<NameId>& out);
void free_names(const std::map<int, Value>& m, std::set<NameId>& out);

// Splits an action list into navigation flows: each load on a tab starts a
// flow holding that load and every later submit on the same tab up to the
// next load there. Halt actions belong to no flow.
std::vector<std::vector<UserAction>> navigation_flows(const std::vector<UserAction>& actions);

// Structural scan for command kinds occurring anywhere under c.
bool contains_output_or_check(const CommandPtr& c);

}  // namespace sessint
