#include "sessint/ast.hpp"

#include <set>

namespace sessint {

// ---- values -----------------------------------------------------------------

Value Value::boolean(bool v) {
    Value x;
    x.kind = Kind::Bool;
    x.b = v;
    return x;
}
Value Value::integer(int64_t v) {
    Value x;
    x.kind = Kind::Int;
    x.i = v;
    return x;
}
Value Value::string(std::string v) {
    Value x;
    x.kind = Kind::Str;
    x.s = std::move(v);
    return x;
}
Value Value::identity(std::string who) {
    Value x;
    x.kind = Kind::Identity;
    x.s = std::move(who);
    return x;
}
Value Value::url_value(Url u) {
    Value x;
    x.kind = Kind::UrlV;
    x.url = u;
    return x;
}
Value Value::name_value(NameId id, SecType annotation) {
    Value x;
    x.kind = Kind::Name;
    x.name = id;
    x.ann = std::move(annotation);
    return x;
}

bool value_equal(const Value& a, const Value& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Value::Kind::Undef: return true;
        case Value::Kind::Bool: return a.b == b.b;
        case Value::Kind::Int: return a.i == b.i;
        case Value::Kind::Str:
        case Value::Kind::Identity: return a.s == b.s;
        case Value::Kind::UrlV: return a.url == b.url;
        case Value::Kind::Name: return a.name == b.name;
    }
    return false;
}

std::string value_repr(const Value& v, const Universe& u) {
    switch (v.kind) {
        case Value::Kind::Undef: return "undef";
        case Value::Kind::Bool: return v.b ? "true" : "false";
        case Value::Kind::Int: return std::to_string(v.i);
        case Value::Kind::Str: return "\"" + v.s + "\"";
        case Value::Kind::Identity: return v.s;
        case Value::Kind::UrlV: return to_string(v.url, u);
        case Value::Kind::Name: return "#" + std::to_string(v.name);
    }
    return "?";
}

// ---- constructors ------------------------------------------------------------

ServerExprPtr se_var(std::string n, Pos p) {
    auto e = std::make_shared<ServerExpr>();
    e->kind = ServerExpr::Kind::Var;
    e->name = std::move(n);
    e->pos = p;
    return e;
}
ServerExprPtr se_global(std::string r, Pos p) {
    auto e = std::make_shared<ServerExpr>();
    e->kind = ServerExpr::Kind::GlobalRef;
    e->name = std::move(r);
    e->pos = p;
    return e;
}
ServerExprPtr se_session(std::string r, Pos p) {
    auto e = std::make_shared<ServerExpr>();
    e->kind = ServerExpr::Kind::SessionRef;
    e->name = std::move(r);
    e->pos = p;
    return e;
}
ServerExprPtr se_val(Value v, Pos p) {
    auto e = std::make_shared<ServerExpr>();
    e->kind = ServerExpr::Kind::Val;
    e->value = std::move(v);
    e->pos = p;
    return e;
}
ServerExprPtr se_fresh(SecType ann, Pos p) {
    auto e = std::make_shared<ServerExpr>();
    e->kind = ServerExpr::Kind::Fresh;
    e->fresh_ann = std::move(ann);
    e->pos = p;
    return e;
}
ServerExprPtr se_binop(ServerExpr::Op op, ServerExprPtr a, ServerExprPtr b, Pos p) {
    auto e = std::make_shared<ServerExpr>();
    e->kind = ServerExpr::Kind::BinOp;
    e->op = op;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    e->pos = p;
    return e;
}

BrowserExprPtr be_var(std::string n, Pos p) {
    auto e = std::make_shared<BrowserExpr>();
    e->kind = BrowserExpr::Kind::Var;
    e->name = std::move(n);
    e->pos = p;
    return e;
}
BrowserExprPtr be_cookie(std::string r, Pos p) {
    auto e = std::make_shared<BrowserExpr>();
    e->kind = BrowserExpr::Kind::CookieRef;
    e->name = std::move(r);
    e->pos = p;
    return e;
}
BrowserExprPtr be_val(Value v, Pos p) {
    auto e = std::make_shared<BrowserExpr>();
    e->kind = BrowserExpr::Kind::Val;
    e->value = std::move(v);
    e->pos = p;
    return e;
}
BrowserExprPtr be_dom(BrowserExprPtr tag, BrowserExprPtr idx, Pos p) {
    auto e = std::make_shared<BrowserExpr>();
    e->kind = BrowserExpr::Kind::Dom;
    e->lhs = std::move(tag);
    e->rhs = std::move(idx);
    e->pos = p;
    return e;
}
BrowserExprPtr be_binop(ServerExpr::Op op, BrowserExprPtr a, BrowserExprPtr b, Pos p) {
    auto e = std::make_shared<BrowserExpr>();
    e->kind = BrowserExpr::Kind::BinOp;
    e->op = op;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    e->pos = p;
    return e;
}

ScriptPtr script_skip(Pos p) {
    auto s = std::make_shared<Script>();
    s->pos = p;
    return s;
}
ScriptPtr script_seq(ScriptPtr a, ScriptPtr b, Pos p) {
    auto s = std::make_shared<Script>();
    s->kind = Script::Kind::Seq;
    s->first = std::move(a);
    s->second = std::move(b);
    s->pos = p;
    return s;
}
ScriptPtr script_assign(std::string ref, BrowserExprPtr e, Pos p) {
    auto s = std::make_shared<Script>();
    s->kind = Script::Kind::Assign;
    s->ref = std::move(ref);
    s->expr = std::move(e);
    s->pos = p;
    return s;
}
ScriptPtr script_include(Url u, std::vector<BrowserExprPtr> args, Pos p) {
    auto s = std::make_shared<Script>();
    s->kind = Script::Kind::Include;
    s->url = u;
    s->args = std::move(args);
    s->pos = p;
    return s;
}
ScriptPtr script_setdom(BrowserExprPtr tag, Url u, std::vector<BrowserExprPtr> args, Pos p) {
    auto s = std::make_shared<Script>();
    s->kind = Script::Kind::SetDom;
    s->expr = std::move(tag);
    s->url = u;
    s->args = std::move(args);
    s->pos = p;
    return s;
}

namespace {
std::shared_ptr<Command> mk(Command::Kind k, Pos p) {
    auto c = std::make_shared<Command>();
    c->kind = k;
    c->pos = p;
    return c;
}
}  // namespace

CommandPtr cmd_skip(Pos p) { return mk(Command::Kind::Skip, p); }
CommandPtr cmd_halt(Pos p) { return mk(Command::Kind::Halt, p); }
CommandPtr cmd_seq(CommandPtr a, CommandPtr b, Pos p) {
    auto c = mk(Command::Kind::Seq, p);
    c->first = std::move(a);
    c->second = std::move(b);
    return c;
}
CommandPtr cmd_set_global(std::string r, ServerExprPtr e, Pos p) {
    auto c = mk(Command::Kind::SetGlobal, p);
    c->ref = std::move(r);
    c->expr = std::move(e);
    return c;
}
CommandPtr cmd_set_session(std::string r, ServerExprPtr e, Pos p) {
    auto c = mk(Command::Kind::SetSession, p);
    c->ref = std::move(r);
    c->expr = std::move(e);
    return c;
}
CommandPtr cmd_if(ServerExprPtr guard, CommandPtr thn, CommandPtr els, Pos p) {
    auto c = mk(Command::Kind::If, p);
    c->expr = std::move(guard);
    c->first = std::move(thn);
    c->second = std::move(els);
    return c;
}
CommandPtr cmd_login(ServerExprPtr user, ServerExprPtr pw, ServerExprPtr sid, Pos p) {
    auto c = mk(Command::Kind::Login, p);
    c->expr = std::move(user);
    c->expr2 = std::move(pw);
    c->expr3 = std::move(sid);
    return c;
}
CommandPtr cmd_start(ServerExprPtr e, Pos p) {
    auto c = mk(Command::Kind::Start, p);
    c->expr = std::move(e);
    return c;
}
CommandPtr cmd_auth(std::vector<ServerExprPtr> args, Label l, Pos p) {
    auto c = mk(Command::Kind::Auth, p);
    c->auth_args = std::move(args);
    c->auth_label = std::move(l);
    return c;
}
CommandPtr cmd_tokenchk(ServerExprPtr x, ServerExprPtr r, CommandPtr body, Pos p) {
    auto c = mk(Command::Kind::TokenChk, p);
    c->expr = std::move(x);
    c->expr2 = std::move(r);
    c->body = std::move(body);
    return c;
}
CommandPtr cmd_originchk(std::vector<SL> origins, CommandPtr body, Pos p) {
    auto c = mk(Command::Kind::OriginChk, p);
    c->origins = std::move(origins);
    c->body = std::move(body);
    return c;
}
CommandPtr cmd_reply(Page page, ScriptPtr s, std::map<std::string, std::string> cookies,
                     std::map<std::string, Value> cookie_consts, std::vector<Binder> binders, Pos p) {
    auto c = mk(Command::Kind::Reply, p);
    c->page = std::move(page);
    c->script = std::move(s);
    c->cookies = std::move(cookies);
    c->cookie_consts = std::move(cookie_consts);
    c->binders = std::move(binders);
    return c;
}
CommandPtr cmd_redirect(Url target, std::vector<FormParam> params,
                        std::map<std::string, std::string> cookies,
                        std::map<std::string, Value> cookie_consts, std::vector<Binder> binders,
                        Pos p) {
    auto c = mk(Command::Kind::Redirect, p);
    c->redirect_target = target;
    c->redirect_params = std::move(params);
    c->cookies = std::move(cookies);
    c->cookie_consts = std::move(cookie_consts);
    c->binders = std::move(binders);
    return c;
}

// ---- world helpers ------------------------------------------------------------

const Endpoint* World::find_endpoint(const Url& u) const {
    for (const auto& ep : endpoints)
        if (ep.url == u) return &ep;
    return nullptr;
}

bool World::is_protected(const Url& u) const {
    for (const auto& p : protected_urls)
        if (p == u) return true;
    return false;
}

std::optional<Label> World::cookie_lambda(const std::string& ref) const {
    auto it = cookie_attrs.find(ref);
    if (it == cookie_attrs.end()) return std::nullopt;
    return cookie_label(it->second, universe);
}

std::string World::url_name(const Url& u) const {
    for (const auto& [alias, url] : url_aliases)
        if (url == u) return alias;
    return to_string(u, universe);
}

// ---- substitution ---------------------------------------------------------------

ServerExprPtr substitute(const ServerExprPtr& e, const Subst& sigma) {
    if (!e) return e;
    switch (e->kind) {
        case ServerExpr::Kind::Var: {
            auto it = sigma.find(e->name);
            return it == sigma.end() ? e : se_val(it->second, e->pos);
        }
        case ServerExpr::Kind::BinOp:
            return se_binop(e->op, substitute(e->lhs, sigma), substitute(e->rhs, sigma), e->pos);
        default:
            return e;
    }
}

BrowserExprPtr substitute(const BrowserExprPtr& e, const Subst& sigma) {
    if (!e) return e;
    switch (e->kind) {
        case BrowserExpr::Kind::Var: {
            auto it = sigma.find(e->name);
            return it == sigma.end() ? e : be_val(it->second, e->pos);
        }
        case BrowserExpr::Kind::Dom:
            return be_dom(substitute(e->lhs, sigma), substitute(e->rhs, sigma), e->pos);
        case BrowserExpr::Kind::BinOp:
            return be_binop(e->op, substitute(e->lhs, sigma), substitute(e->rhs, sigma), e->pos);
        default:
            return e;
    }
}

ScriptPtr substitute(const ScriptPtr& s, const Subst& sigma) {
    if (!s) return s;
    switch (s->kind) {
        case Script::Kind::Skip: return s;
        case Script::Kind::Seq:
            return script_seq(substitute(s->first, sigma), substitute(s->second, sigma), s->pos);
        case Script::Kind::Assign:
            return script_assign(s->ref, substitute(s->expr, sigma), s->pos);
        case Script::Kind::Include: {
            std::vector<BrowserExprPtr> args;
            for (const auto& a : s->args) args.push_back(substitute(a, sigma));
            return script_include(s->url, std::move(args), s->pos);
        }
        case Script::Kind::SetDom: {
            std::vector<BrowserExprPtr> args;
            for (const auto& a : s->args) args.push_back(substitute(a, sigma));
            return script_setdom(substitute(s->expr, sigma), s->url, std::move(args), s->pos);
        }
    }
    return s;
}

Page substitute(const Page& p, const Subst& sigma) {
    if (p.error) return p;
    Page out = Page::empty();
    for (const auto& [tag, form] : p.forms) {
        Form f;
        f.target = form.target;
        for (const auto& fp : form.params) {
            if (fp.is_var) {
                auto it = sigma.find(fp.var);
                if (it != sigma.end())
                    f.params.push_back({false, "", it->second});
                else
                    f.params.push_back(fp);
            } else {
                f.params.push_back(fp);
            }
        }
        out.forms.emplace(tag, std::move(f));
    }
    return out;
}

CommandPtr substitute(const CommandPtr& c, const Subst& sigma) {
    if (!c || sigma.empty()) return c;
    switch (c->kind) {
        case Command::Kind::Skip:
        case Command::Kind::Halt:
            return c;
        case Command::Kind::Seq:
            return cmd_seq(substitute(c->first, sigma), substitute(c->second, sigma), c->pos);
        case Command::Kind::SetGlobal:
            return cmd_set_global(c->ref, substitute(c->expr, sigma), c->pos);
        case Command::Kind::SetSession:
            return cmd_set_session(c->ref, substitute(c->expr, sigma), c->pos);
        case Command::Kind::If:
            return cmd_if(substitute(c->expr, sigma), substitute(c->first, sigma),
                          substitute(c->second, sigma), c->pos);
        case Command::Kind::Login:
            return cmd_login(substitute(c->expr, sigma), substitute(c->expr2, sigma),
                             substitute(c->expr3, sigma), c->pos);
        case Command::Kind::Start:
            return cmd_start(substitute(c->expr, sigma), c->pos);
        case Command::Kind::Auth: {
            std::vector<ServerExprPtr> args;
            for (const auto& a : c->auth_args) args.push_back(substitute(a, sigma));
            return cmd_auth(std::move(args), c->auth_label, c->pos);
        }
        case Command::Kind::TokenChk:
            return cmd_tokenchk(substitute(c->expr, sigma), substitute(c->expr2, sigma),
                                substitute(c->body, sigma), c->pos);
        case Command::Kind::OriginChk:
            return cmd_originchk(c->origins, substitute(c->body, sigma), c->pos);
        case Command::Kind::Reply: {
            // The reply binders shadow outer bindings inside page/script/cookies.
            Subst inner = sigma;
            for (const auto& b : c->binders) inner.erase(b.var);
            std::vector<Binder> binders;
            for (const auto& b : c->binders) binders.push_back({b.var, substitute(b.expr, sigma)});
            std::map<std::string, std::string> ck = c->cookies;
            std::map<std::string, Value> consts = c->cookie_consts;
            for (auto it = ck.begin(); it != ck.end();) {
                auto hit = inner.find(it->second);
                if (hit != inner.end()) {
                    consts[it->first] = hit->second;
                    it = ck.erase(it);
                } else {
                    ++it;
                }
            }
            return cmd_reply(substitute(c->page, inner), substitute(c->script, inner), std::move(ck),
                             std::move(consts), std::move(binders), c->pos);
        }
        case Command::Kind::Redirect: {
            Subst inner = sigma;
            for (const auto& b : c->binders) inner.erase(b.var);
            std::vector<Binder> binders;
            for (const auto& b : c->binders) binders.push_back({b.var, substitute(b.expr, sigma)});
            std::vector<FormParam> params;
            for (const auto& fp : c->redirect_params) {
                if (fp.is_var) {
                    auto hit = inner.find(fp.var);
                    params.push_back(hit != inner.end() ? FormParam{false, "", hit->second} : fp);
                } else {
                    params.push_back(fp);
                }
            }
            std::map<std::string, std::string> ck = c->cookies;
            std::map<std::string, Value> consts = c->cookie_consts;
            for (auto it = ck.begin(); it != ck.end();) {
                auto hit = inner.find(it->second);
                if (hit != inner.end()) {
                    consts[it->first] = hit->second;
                    it = ck.erase(it);
                } else {
                    ++it;
                }
            }
            return cmd_redirect(c->redirect_target, std::move(params), std::move(ck),
                                std::move(consts), std::move(binders), c->pos);
        }
    }
    return c;
}

// ---- free names ---------------------------------------------------------------------

void free_names(const Value& v, std::set<NameId>& out) {
    if (v.is_name()) out.insert(v.name);
}

void free_names(const Page& p, std::set<NameId>& out) {
    for (const auto& [tag, form] : p.forms)
        for (const auto& fp : form.params)
            if (!fp.is_var) free_names(fp.value, out);
}

namespace {
void free_names_be(const BrowserExprPtr& e, std::set<NameId>& out) {
    if (!e) return;
    if (e->kind == BrowserExpr::Kind::Val) free_names(e->value, out);
    free_names_be(e->lhs, out);
    free_names_be(e->rhs, out);
}
}  // namespace

void free_names(const ScriptPtr& s, std::set<NameId>& out) {
    if (!s) return;
    switch (s->kind) {
        case Script::Kind::Skip: return;
        case Script::Kind::Seq:
            free_names(s->first, out);
            free_names(s->second, out);
            return;
        case Script::Kind::Assign:
            free_names_be(s->expr, out);
            return;
        case Script::Kind::Include:
        case Script::Kind::SetDom:
            free_names_be(s->expr, out);
            for (const auto& a : s->args) free_names_be(a, out);
            return;
    }
}

void free_names(const std::map<std::string, Value>& m, std::set<NameId>& out) {
    for (const auto& [k, v] : m) free_names(v, out);
}
void free_names(const std::map<int, Value>& m, std::set<NameId>& out) {
    for (const auto& [k, v] : m) free_names(v, out);
}

// ---- navigation flows -----------------------------------------------------------------

std::vector<std::vector<UserAction>> navigation_flows(const std::vector<UserAction>& actions) {
    std::vector<std::vector<UserAction>> flows;
    for (size_t k = 0; k < actions.size(); ++k) {
        if (actions[k].kind != UserAction::Kind::Load) continue;
        std::vector<UserAction> flow{actions[k]};
        int tab = actions[k].tab;
        for (size_t j = k + 1; j < actions.size(); ++j) {
            const auto& a = actions[j];
            if (a.kind == UserAction::Kind::Load && a.tab == tab) break;
            if (a.kind == UserAction::Kind::Submit && a.tab == tab) flow.push_back(a);
        }
        flows.push_back(std::move(flow));
    }
    return flows;
}

bool contains_output_or_check(const CommandPtr& c) {
    if (!c) return false;
    switch (c->kind) {
        case Command::Kind::Reply:
        case Command::Kind::Redirect:
        case Command::Kind::TokenChk:
        case Command::Kind::OriginChk:
            return true;
        case Command::Kind::Seq:
        case Command::Kind::If:
            return contains_output_or_check(c->first) || contains_output_or_check(c->second);
        default:
            return false;
    }
}

}  // namespace sessint
