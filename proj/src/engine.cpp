#include "sessint/engine.hpp"

#include <algorithm>
#include <sstream>

#include "sessint/parser.hpp"

namespace sessint {

namespace {

Value undef_v() { return Value::undef(); }

bool hsts_blocks(const World& w, const Url& u) {
    return u.scheme == Scheme::Http && w.universe.hsts(u.domain);
}

SecType effective_ann(const Value& v, const Universe& uni) {
    if (v.ann) return *v.ann;
    return SecType::plain(bottom_label(uni));
}

}  // namespace

// ---- cookies --------------------------------------------------------------------

Memory cookies_for_request(const World& w, const Memory& jar, const Url& u) {
    Memory out;
    Label target = url_label(u);
    for (const auto& [ref, v] : jar) {
        auto lam = w.cookie_lambda(ref);
        if (!lam) continue;
        if (conf_leq(lam->conf, target.conf)) out[ref] = v;
    }
    return out;
}

Memory update_jar(const World& w, const Memory& jar, const Url& u, const Memory& ck) {
    Memory out = jar;
    Label source = url_label(u);
    for (const auto& [ref, v] : ck) {
        auto lam = w.cookie_lambda(ref);
        if (!lam) continue;
        if (integ_leq(source.integ, lam->integ)) out[ref] = v;
    }
    return out;
}

// ---- fnames ---------------------------------------------------------------------

std::set<NameId> fnames_of(const ReqMsg& m) {
    std::set<NameId> out;
    free_names(m.params, out);
    free_names(m.cookies, out);
    return out;
}

std::set<NameId> fnames_of(const RespMsg& m) {
    std::set<NameId> out;
    free_names(m.cookies, out);
    free_names(m.page, out);
    free_names(m.script, out);
    for (const auto& v : m.redirect_params) free_names(v, out);
    return out;
}

// ---- expression evaluation ---------------------------------------------------------

std::optional<Value> eval_server_expr(const ServerState& server, NameId global_mem,
                                      std::optional<NameId> session_mem, const ServerExprPtr& e,
                                      NameId& name_counter) {
    switch (e->kind) {
        case ServerExpr::Kind::Var:
            return std::nullopt;  // free variable: no rule applies
        case ServerExpr::Kind::Val:
            return e->value;
        case ServerExpr::Kind::GlobalRef: {
            auto mem = server.globals.find(global_mem);
            if (mem == server.globals.end()) return std::nullopt;
            auto it = mem->second.find(e->name);
            return it == mem->second.end() ? undef_v() : it->second;
        }
        case ServerExpr::Kind::SessionRef: {
            if (!session_mem) return std::nullopt;
            auto mem = server.sessions.find(*session_mem);
            if (mem == server.sessions.end()) return std::nullopt;
            auto it = mem->second.find(e->name);
            return it == mem->second.end() ? undef_v() : it->second;
        }
        case ServerExpr::Kind::Fresh:
            return Value::name_value(name_counter++, e->fresh_ann);
        case ServerExpr::Kind::BinOp: {
            auto a = eval_server_expr(server, global_mem, session_mem, e->lhs, name_counter);
            if (!a) return std::nullopt;
            auto b = eval_server_expr(server, global_mem, session_mem, e->rhs, name_counter);
            if (!b) return std::nullopt;
            switch (e->op) {
                case ServerExpr::Op::Eq:
                    return Value::boolean(value_equal(*a, *b));
                case ServerExpr::Op::And:
                    if (a->kind == Value::Kind::Bool && b->kind == Value::Kind::Bool)
                        return Value::boolean(a->b && b->b);
                    return undef_v();
                case ServerExpr::Op::Or:
                    if (a->kind == Value::Kind::Bool && b->kind == Value::Kind::Bool)
                        return Value::boolean(a->b || b->b);
                    return undef_v();
                case ServerExpr::Op::Add:
                    if (a->kind == Value::Kind::Int && b->kind == Value::Kind::Int)
                        return Value::integer(a->i + b->i);
                    return undef_v();
            }
            return undef_v();
        }
    }
    return std::nullopt;
}

namespace {

// ---- server thread stepping ------------------------------------------------------

struct ThreadStep {
    Event event;
    bool emits = false;  // reply/redirect produced a response message
    RespMsg response;

    explicit ThreadStep(Event e) : event(std::move(e)) {}
};

// Steps the head command of a running thread in place. Returns nullopt when
// no rule applies (the thread is stuck or finished).
std::optional<ThreadStep> step_thread(const World& w, ServerState& server, ServerThread& th,
                                      NameId& names) {
    CommandPtr c = th.cmd;
    // Sequencing: drop completed heads, otherwise step inside.
    if (c->kind == Command::Kind::Seq) {
        if (c->first->kind == Command::Kind::Skip) {  // S-Skip
            th.cmd = c->second;
            return ThreadStep{Event::silent()};
        }
        ServerThread inner = th;
        inner.cmd = c->first;
        auto r = step_thread(w, server, inner, names);
        if (!r) return std::nullopt;
        th = inner;
        // a reply/redirect replaces the whole continuation with halt
        th.cmd = (r->emits || inner.cmd->kind == Command::Kind::Halt)
                     ? inner.cmd
                     : cmd_seq(inner.cmd, c->second);
        return r;
    }

    auto eval = [&](const ServerExprPtr& e) {
        return eval_server_expr(server, th.global_mem, th.session_mem, e, names);
    };

    switch (c->kind) {
        case Command::Kind::Skip:
        case Command::Kind::Halt:
            return std::nullopt;  // nothing to do
        case Command::Kind::SetGlobal: {
            auto v = eval(c->expr);
            if (!v) return std::nullopt;
            server.globals[th.global_mem][c->ref] = *v;
            th.cmd = cmd_skip(c->pos);
            return ThreadStep{Event::silent()};
        }
        case Command::Kind::SetSession: {
            if (!th.session_mem) return std::nullopt;
            auto v = eval(c->expr);
            if (!v) return std::nullopt;
            server.sessions[*th.session_mem][c->ref] = *v;
            th.cmd = cmd_skip(c->pos);
            return ThreadStep{Event::silent()};
        }
        case Command::Kind::If: {
            auto v = eval(c->expr);
            if (!v || v->kind != Value::Kind::Bool) return std::nullopt;
            th.cmd = v->b ? c->first : c->second;
            return ThreadStep{Event::silent()};
        }
        case Command::Kind::Start: {
            auto v = eval(c->expr);
            if (!v || !v->is_name()) return std::nullopt;
            if (!server.sessions.count(v->name)) server.sessions[v->name] = {};
            th.session_mem = v->name;
            th.cmd = cmd_skip(c->pos);
            return ThreadStep{Event::silent()};
        }
        case Command::Kind::Login: {
            auto u = eval(c->expr);
            auto pw = eval(c->expr2);
            auto sid = eval(c->expr3);
            if (!u || !pw || !sid) return std::nullopt;
            if (u->kind != Value::Kind::Identity || !sid->is_name()) return std::nullopt;
            auto it = w.passwords.find({u->s, th.url});
            if (it == w.passwords.end() || !value_equal(*pw, it->second))
                return std::nullopt;  // failed logins have no rule
            server.trust[sid->name] = u->s;
            th.cmd = cmd_skip(c->pos);
            return ThreadStep{Event::silent()};
        }
        case Command::Kind::Auth: {
            if (!th.session_mem) return std::nullopt;
            auto trust = server.trust.find(*th.session_mem);
            if (trust == server.trust.end()) return std::nullopt;
            std::vector<Value> vals;
            for (const auto& a : c->auth_args) {
                auto v = eval(a);
                if (!v) return std::nullopt;
                vals.push_back(*v);
            }
            Event e;
            e.kind = Event::Kind::Auth;
            e.values = std::move(vals);
            e.browser_identity = th.browser_identity;
            e.session_identity = trust->second;
            e.label = c->auth_label;
            th.cmd = cmd_skip(c->pos);
            return ThreadStep{std::move(e)};
        }
        case Command::Kind::TokenChk: {
            auto a = eval(c->expr);
            auto b = eval(c->expr2);
            if (!a || !b) return std::nullopt;
            if (value_equal(*a, *b)) {
                th.cmd = c->body;
                return ThreadStep{Event::silent()};
            }
            th.cmd = cmd_reply(Page::error_page(), script_skip(c->pos), {}, {}, {}, c->pos);
            return ThreadStep{Event::error()};
        }
        case Command::Kind::OriginChk: {
            bool ok = false;
            if (th.origin)
                for (const auto& o : c->origins)
                    if (conf_equiv(*th.origin, o)) ok = true;
            if (ok) {
                th.cmd = c->body;
                return ThreadStep{Event::silent()};
            }
            th.cmd = cmd_reply(Page::error_page(), script_skip(c->pos), {}, {}, {}, c->pos);
            return ThreadStep{Event::error()};
        }
        case Command::Kind::Reply:
        case Command::Kind::Redirect: {
            // The binders are applied inside their own scope here; the
            // generic substitution deliberately leaves that scope alone.
            Subst sigma;
            for (const auto& b : c->binders) {
                auto v = eval(b.expr);
                if (!v) return std::nullopt;
                sigma[b.var] = *v;
            }
            RespMsg m;
            m.conn = th.conn;
            m.url = th.url;
            for (const auto& [ref, var] : c->cookies) {
                auto it = sigma.find(var);
                if (it == sigma.end()) return std::nullopt;
                m.cookies[ref] = it->second;
            }
            for (const auto& [ref, v] : c->cookie_consts) m.cookies[ref] = v;
            if (c->kind == Command::Kind::Reply) {
                m.page = substitute(c->page, sigma);
                m.script = substitute(c->script, sigma);
            } else {
                m.redirect = c->redirect_target;
                for (const auto& fp : c->redirect_params) {
                    if (fp.is_var) {
                        auto it = sigma.find(fp.var);
                        if (it == sigma.end()) return std::nullopt;
                        m.redirect_params.push_back(it->second);
                    } else {
                        m.redirect_params.push_back(fp.value);
                    }
                }
                m.page = Page::empty();
                m.script = script_skip(c->pos);
            }
            th.cmd = cmd_halt(c->pos);
            ThreadStep step{Event::silent()};
            step.emits = true;
            step.response = std::move(m);
            return step;
        }
        default:
            return std::nullopt;
    }
}

// ---- browser helpers ----------------------------------------------------------------

std::optional<Value> eval_browser_expr(const World& w, const BrowserState& br,
                                       const BrowserExprPtr& e, const Url& page_url,
                                       const Page& page) {
    switch (e->kind) {
        case BrowserExpr::Kind::Var:
            return std::nullopt;
        case BrowserExpr::Kind::Val:
            return e->value;
        case BrowserExpr::Kind::CookieRef: {
            auto lam = w.cookie_lambda(e->name);
            if (!lam) return std::nullopt;
            // cookie reads are gated by the page's confidentiality context
            if (!conf_leq(lam->conf, url_label(page_url).conf)) return std::nullopt;
            auto it = br.jar.find(e->name);
            return it == br.jar.end() ? undef_v() : it->second;
        }
        case BrowserExpr::Kind::Dom: {
            auto tag = eval_browser_expr(w, br, e->lhs, page_url, page);
            auto idx = eval_browser_expr(w, br, e->rhs, page_url, page);
            if (!tag || !idx || tag->kind != Value::Kind::Str || idx->kind != Value::Kind::Int)
                return std::nullopt;
            auto form = page.forms.find(tag->s);
            if (form == page.forms.end()) return std::nullopt;
            if (idx->i == 0) return Value::url_value(form->second.target);
            size_t k = static_cast<size_t>(idx->i);
            if (k < 1 || k > form->second.params.size()) return std::nullopt;
            const FormParam& fp = form->second.params[k - 1];
            if (fp.is_var) return std::nullopt;
            return fp.value;
        }
        case BrowserExpr::Kind::BinOp: {
            auto a = eval_browser_expr(w, br, e->lhs, page_url, page);
            if (!a) return std::nullopt;
            auto b = eval_browser_expr(w, br, e->rhs, page_url, page);
            if (!b) return std::nullopt;
            switch (e->op) {
                case ServerExpr::Op::Eq: return Value::boolean(value_equal(*a, *b));
                case ServerExpr::Op::And:
                    if (a->kind == Value::Kind::Bool && b->kind == Value::Kind::Bool)
                        return Value::boolean(a->b && b->b);
                    return undef_v();
                case ServerExpr::Op::Or:
                    if (a->kind == Value::Kind::Bool && b->kind == Value::Kind::Bool)
                        return Value::boolean(a->b || b->b);
                    return undef_v();
                case ServerExpr::Op::Add:
                    if (a->kind == Value::Kind::Int && b->kind == Value::Kind::Int)
                        return Value::integer(a->i + b->i);
                    return undef_v();
            }
            return undef_v();
        }
    }
    return std::nullopt;
}

bool knowledge_gains(const World& w, const Url& u) {
    return conf_leq(url_label(u).conf, w.attacker_lab().conf);
}

// Browser consumption of a response on its open connection. Returns false
// when no browser rule applies (e.g. a redirect while a script waits).
bool browser_receive(const World& w, SystemState& s, const RespMsg& m) {
    BrowserState& br = s.browser;
    if (!br.conn || br.conn->id != m.conn) return false;
    BrowserConn conn = *br.conn;

    if (m.redirect) {  // B-Redirect
        if (br.task) return false;
        if (hsts_blocks(w, *m.redirect)) return false;
        br.jar = update_jar(w, br.jar, conn.url, m.cookies);
        ReqMsg req;
        req.browser_identity = br.identity;
        req.conn = s.next_name++;
        req.url = *m.redirect;
        for (size_t k = 0; k < m.redirect_params.size(); ++k)
            req.params[static_cast<int>(k + 1)] = m.redirect_params[k];
        req.cookies = cookies_for_request(w, br.jar, *m.redirect);
        // the origin survives only when it matches the original endpoint
        if (conn.origin && conf_equiv(*conn.origin, origin_of(conn.url)))
            req.origin = conn.origin;
        br.conn = BrowserConn{req.conn, conn.tab, req.url, req.origin};
        br.queue = req;
        return true;
    }

    if (br.task) {  // B-RecvInclude: page discarded, script prepended
        br.jar = update_jar(w, br.jar, conn.url, m.cookies);
        br.task = {br.task->first, script_seq(m.script, br.task->second)};
        br.conn.reset();
        return true;
    }

    // B-RecvLoad
    br.jar = update_jar(w, br.jar, conn.url, m.cookies);
    br.pages[conn.tab] = {conn.url, m.page};
    br.task = {conn.tab, m.script};
    if (m.page.error) br.halted = true;
    br.conn.reset();
    return true;
}

std::string url_key(const World& w, const Url& u) { return w.url_name(u); }

}  // namespace

// ---- initial state --------------------------------------------------------------------

SystemState initial_state(const World& w) {
    SystemState s;
    s.next_name = w.first_runtime_name;
    for (const auto& [nid, ann] : w.attacker_knowledge) s.knowledge.insert(nid);
    for (const auto& ep : w.endpoints) s.servers[ep.url.domain];  // fresh servers
    return s;
}

// ---- step enumeration -----------------------------------------------------------------

std::vector<StepChoice> enumerate_steps(const World& w, const SystemState& s, StepMode mode) {
    std::vector<StepChoice> out;
    Label la = w.attacker_lab();

    // 1. Server-internal steps (including reply emission + delivery).
    for (const auto& [dom, server] : s.servers) {
        for (size_t i = 0; i < server.running.size(); ++i) {
            SystemState next = s;
            ServerState& srv = next.servers[dom];
            ServerThread& th = srv.running[i];
            NameId names = next.next_name;
            auto r = step_thread(w, srv, th, names);
            if (!r) continue;
            next.next_name = names;
            std::string key = "srv:" + std::to_string(dom) + ":" + std::to_string(i);
            if (!r->emits) {
                out.push_back({"S-Step", key, r->event, std::move(next)});
                continue;
            }
            const RespMsg& m = r->response;
            // A-SerBro: the browser holds the connection.
            if (s.browser.conn && s.browser.conn->id == m.conn) {
                SystemState deliv = next;
                if (browser_receive(w, deliv, m)) {
                    if (knowledge_gains(w, m.url))
                        for (NameId n : fnames_of(m)) deliv.knowledge.insert(n);
                    out.push_back({"A-SerBro", key + ":bro", Event::silent(), std::move(deliv)});
                }
            }
            // A-SerAtk: the attacker knows the connection identifier.
            if (mode == StepMode::Full && s.knowledge.count(m.conn)) {
                SystemState steal = next;
                for (NameId n : fnames_of(m)) steal.knowledge.insert(n);
                Event e;
                e.kind = Event::Kind::AtkResp;
                e.detail = "resp(" + url_key(w, m.url) + ") to attacker";
                out.push_back({"A-SerAtk", key + ":atk", std::move(e), std::move(steal)});
            }
        }
    }

    // 2. Pending timeout delivery (second half of A-Timeout).
    if (s.pending_timeout && s.browser.conn && s.browser.conn->id == s.pending_timeout->conn) {
        SystemState next = s;
        RespMsg m = *next.pending_timeout;
        next.pending_timeout.reset();
        if (browser_receive(w, next, m))
            out.push_back({"A-TimeoutRecv", "torecv", Event::silent(), std::move(next)});
    }

    // 3. Queue flush: synchronize the outgoing request.
    if (s.browser.queue) {
        const ReqMsg& req = *s.browser.queue;
        const Endpoint* ep = w.find_endpoint(req.url);
        if (ep) {  // A-BroSer + S-Recv
            SystemState next = s;
            next.browser.queue.reset();
            ServerState& srv = next.servers[req.url.domain];
            Memory mem;
            for (const auto& ckname : ep->cookies) {
                auto it = req.cookies.find(ckname);
                if (it != req.cookies.end()) mem[ckname] = it->second;
            }
            NameId gmem = next.next_name++;
            srv.globals[gmem] = std::move(mem);
            Subst sigma;
            for (size_t k = 0; k < ep->params.size(); ++k) {
                auto it = req.params.find(static_cast<int>(k + 1));
                sigma[ep->params[k]] = it == req.params.end() ? undef_v() : it->second;
            }
            ServerThread th;
            th.cmd = substitute(ep->body, sigma);
            th.conn = req.conn;
            th.url = req.url;
            th.browser_identity = req.browser_identity;
            th.origin = req.origin;
            th.global_mem = gmem;
            srv.running.push_back(std::move(th));
            if (knowledge_gains(w, req.url))
                for (NameId n : fnames_of(req)) next.knowledge.insert(n);
            out.push_back({"A-BroSer", "flush:recv", Event::silent(), std::move(next)});
        } else {  // A-Timeout (send half): no server can receive the request
            SystemState next = s;
            next.browser.queue.reset();
            RespMsg empty;
            empty.conn = req.conn;
            empty.url = req.url;
            empty.page = Page::empty();
            empty.script = script_skip({});
            next.pending_timeout = std::move(empty);
            if (knowledge_gains(w, req.url))
                for (NameId n : fnames_of(req)) next.knowledge.insert(n);
            out.push_back({"A-TimeoutSend", "flush:timeout", Event::silent(), std::move(next)});
        }
        // A-BroAtk: interception / attacker-served endpoint.
        if (mode == StepMode::Full && is_integ_low(url_label(req.url).integ, la)) {
            SystemState next = s;
            next.browser.queue.reset();
            if (knowledge_gains(w, req.url))
                for (NameId n : fnames_of(req)) next.knowledge.insert(n);
            next.knowledge.insert(req.conn);
            Event e;
            e.kind = Event::Kind::AtkReq;
            e.detail = "req(" + url_key(w, req.url) + ") intercepted";
            out.push_back({"A-BroAtk", "flush:atk", std::move(e), std::move(next)});
        }
    }

    // 4. Browser script execution (scripts run only with no open connection).
    if (!s.browser.conn && !s.browser.queue && s.browser.task) {
        const auto& [tab, sc] = *s.browser.task;
        // Unfold the left spine: sc = head; rest
        ScriptPtr head = sc;
        ScriptPtr rest;
        while (head->kind == Script::Kind::Seq) {
            rest = rest ? script_seq(head->second, rest) : head->second;
            head = head->first;
        }
        auto after = [&](SystemState& next) {
            if (rest)
                next.browser.task = {tab, rest};
            else
                next.browser.task.reset();
        };
        auto page_it = s.browser.pages.find(tab);
        Url page_url = page_it != s.browser.pages.end() ? page_it->second.first : Url{};
        const Page* page = page_it != s.browser.pages.end() ? &page_it->second.second : nullptr;

        switch (head->kind) {
            case Script::Kind::Skip: {
                SystemState next = s;
                after(next);
                out.push_back({rest ? "B-Skip" : "B-End", "script", Event::silent(),
                               std::move(next)});
                break;
            }
            case Script::Kind::Assign: {
                if (!page) break;
                auto v = eval_browser_expr(w, s.browser, head->expr, page_url, *page);
                if (!v) break;
                auto lam = w.cookie_lambda(head->ref);
                if (!lam) break;
                if (!integ_leq(url_label(page_url).integ, lam->integ)) break;
                SystemState next = s;
                next.browser.jar[head->ref] = *v;
                after(next);
                out.push_back({"B-SetReference", "script", Event::silent(), std::move(next)});
                break;
            }
            case Script::Kind::SetDom: {
                if (!page) break;
                auto tag = eval_browser_expr(w, s.browser, head->expr, page_url, *page);
                if (!tag || tag->kind != Value::Kind::Str) break;
                std::vector<Value> args;
                bool ok = true;
                for (const auto& a : head->args) {
                    auto v = eval_browser_expr(w, s.browser, a, page_url, *page);
                    if (!v) {
                        ok = false;
                        break;
                    }
                    args.push_back(*v);
                }
                if (!ok) break;
                SystemState next = s;
                Form f;
                f.target = head->url;
                for (const auto& v : args) f.params.push_back({false, "", v});
                next.browser.pages[tab].second.forms[tag->s] = std::move(f);
                after(next);
                out.push_back({"B-SetDom", "script", Event::silent(), std::move(next)});
                break;
            }
            case Script::Kind::Include: {
                if (!page) break;
                // the HSTS premise in the rule guards the page's origin
                if (page_url.scheme == Scheme::Http && w.universe.hsts(page_url.domain)) break;
                std::map<int, Value> params;
                bool ok = true;
                for (size_t k = 0; k < head->args.size(); ++k) {
                    auto v = eval_browser_expr(w, s.browser, head->args[k], page_url, *page);
                    if (!v) {
                        ok = false;
                        break;
                    }
                    params[static_cast<int>(k + 1)] = *v;
                }
                if (!ok) break;
                SystemState next = s;
                ReqMsg req;
                req.browser_identity = s.browser.identity;
                req.conn = next.next_name++;
                req.url = head->url;
                req.params = std::move(params);
                req.cookies = cookies_for_request(w, s.browser.jar, head->url);
                req.origin = origin_of(page_url);
                next.browser.conn = BrowserConn{req.conn, tab, req.url, req.origin};
                next.browser.queue = req;
                // The script pauses until the response is prepended to it.
                next.browser.task = {tab, rest ? script_seq(script_skip({}), rest)
                                               : script_skip({})};
                out.push_back({"B-Include", "script", Event::silent(), std::move(next)});
                break;
            }
            default:
                break;
        }
    }

    // 5. User actions.
    if (!s.browser.conn && !s.browser.task && !s.browser.queue && !s.browser.halted &&
        s.browser.next_action < w.actions.size()) {
        const UserAction& a = w.actions[s.browser.next_action];
        if (a.kind == UserAction::Kind::Load && !hsts_blocks(w, a.url)) {
            SystemState next = s;
            next.browser.next_action++;
            ReqMsg req;
            req.browser_identity = s.browser.identity;
            req.conn = next.next_name++;
            req.url = a.url;
            req.params = a.inputs;
            req.cookies = cookies_for_request(w, s.browser.jar, a.url);
            next.browser.conn = BrowserConn{req.conn, a.tab, a.url, std::nullopt};
            next.browser.queue = req;
            out.push_back({"B-Load", "action", Event::silent(), std::move(next)});
        } else if (a.kind == UserAction::Kind::Submit) {
            auto page_it = s.browser.pages.find(a.tab);
            if (page_it != s.browser.pages.end() && page_it->second.first == a.url) {
                auto form_it = page_it->second.second.forms.find(a.form_tag);
                if (form_it != page_it->second.second.forms.end()) {
                    const Form& f = form_it->second;
                    bool ok = !hsts_blocks(w, f.target);
                    std::map<int, Value> params;
                    for (size_t k = 0; k < f.params.size() && ok; ++k) {
                        auto user = a.inputs.find(static_cast<int>(k + 1));
                        if (user != a.inputs.end()) {
                            params[static_cast<int>(k + 1)] = user->second;
                        } else if (f.params[k].is_var) {
                            ok = false;  // an unfilled binder slot cannot be sent
                        } else {
                            params[static_cast<int>(k + 1)] = f.params[k].value;
                        }
                    }
                    if (ok) {
                        SystemState next = s;
                        next.browser.next_action++;
                        ReqMsg req;
                        req.browser_identity = s.browser.identity;
                        req.conn = next.next_name++;
                        req.url = f.target;
                        req.params = std::move(params);
                        req.cookies = cookies_for_request(w, s.browser.jar, f.target);
                        req.origin = origin_of(a.url);
                        next.browser.conn = BrowserConn{req.conn, a.tab, f.target, req.origin};
                        next.browser.queue = req;
                        out.push_back({"B-Submit", "action", Event::silent(), std::move(next)});
                    }
                }
            }
        }
        // halt and blocked actions: no successor
    }

    return out;
}

std::optional<StepChoice> attacker_respond(const World& w, const SystemState& s, const RespMsg& m) {
    Label la = w.attacker_lab();
    if (!s.browser.conn || s.browser.conn->id != m.conn) return std::nullopt;
    if (!s.knowledge.count(m.conn)) return std::nullopt;
    if (!is_integ_low(url_label(s.browser.conn->url).integ, la)) return std::nullopt;
    for (NameId n : fnames_of(m))
        if (!s.knowledge.count(n)) return std::nullopt;
    SystemState next = s;
    if (!browser_receive(w, next, m)) return std::nullopt;
    Event e;
    e.kind = Event::Kind::AtkResp;
    e.detail = "atk-resp(" + w.url_name(s.browser.conn->url) + ")";
    return StepChoice{"A-AtkBro", "atkbro", std::move(e), std::move(next)};
}

std::optional<StepChoice> attacker_request(const World& w, const SystemState& s, const ReqMsg& m) {
    if (m.browser_identity == "usr") return std::nullopt;
    for (NameId n : fnames_of(m))
        if (!s.knowledge.count(n)) return std::nullopt;
    const Endpoint* ep = w.find_endpoint(m.url);
    if (!ep) return std::nullopt;
    SystemState next = s;
    ReqMsg req = m;
    req.conn = next.next_name++;
    next.knowledge.insert(req.conn);
    ServerState& srv = next.servers[req.url.domain];
    Memory mem;
    for (const auto& ckname : ep->cookies) {
        auto it = req.cookies.find(ckname);
        if (it != req.cookies.end()) mem[ckname] = it->second;
    }
    NameId gmem = next.next_name++;
    srv.globals[gmem] = std::move(mem);
    Subst sigma;
    for (size_t k = 0; k < ep->params.size(); ++k) {
        auto it = req.params.find(static_cast<int>(k + 1));
        sigma[ep->params[k]] = it == req.params.end() ? undef_v() : it->second;
    }
    ServerThread th;
    th.cmd = substitute(ep->body, sigma);
    th.conn = req.conn;
    th.url = req.url;
    th.browser_identity = req.browser_identity;
    th.origin = req.origin;
    th.global_mem = gmem;
    srv.running.push_back(std::move(th));
    Event e;
    e.kind = Event::Kind::AtkReq;
    e.detail = "atk-req(" + w.url_name(m.url) + ")";
    return StepChoice{"A-AtkSer", "atkser", std::move(e), std::move(next)};
}

// ---- honest runs ------------------------------------------------------------------------

namespace {

// Scheduler priority classes for an honest run; within a class the first
// enumerated successor is taken, and two runnable server threads count as
// nondeterminism.
int rule_class(const StepChoice& c) {
    if (c.rule == "S-Step" || c.rule == "A-SerBro" || c.rule == "A-SerAtk") return 0;
    if (c.rule == "A-TimeoutRecv") return 1;
    if (c.rule == "A-BroSer" || c.rule == "A-TimeoutSend") return 2;
    if (c.rule.rfind("B-", 0) == 0 && c.key == "script") return 3;
    return 4;  // user actions
}

}  // namespace

HonestRun run_honest(const World& w, int budget, bool monitor) {
    HonestRun r;
    SystemState s = initial_state(w);
    Label la = w.attacker_lab();
    for (int step = 0;; ++step) {
        if (step >= budget) {
            r.budget_exceeded = true;
            break;
        }
        auto choices = enumerate_steps(w, s, StepMode::Honest);
        if (choices.empty()) {
            bool pending = s.browser.next_action < w.actions.size();
            r.completed = !pending;
            r.stuck = pending && !s.browser.halted;
            break;
        }
        std::stable_sort(choices.begin(), choices.end(),
                         [](const StepChoice& a, const StepChoice& b) {
                             return rule_class(a) < rule_class(b);
                         });
        int cls = rule_class(choices[0]);
        int same = 0;
        for (const auto& c : choices)
            if (rule_class(c) == cls) ++same;
        if (cls == 0 && same > 1) r.nondeterminism = true;
        StepChoice& chosen = choices[0];
        if (chosen.event.kind == Event::Kind::Error) r.error_event = true;
        r.trace.events.push_back(chosen.event);
        s = std::move(chosen.next);
        if (monitor) {
            for (const auto& [ref, v] : s.browser.jar) {
                auto ty = w.env.globals.find(ref);
                if (ty == w.env.globals.end()) continue;
                if (v.is_undef()) continue;  // the undefined value inhabits every type
                if (!subtype(effective_ann(v, w.universe), ty->second, la))
                    r.monitor_violations.push_back(
                        "cookie " + ref + " holds a value whose annotation is not a subtype of " +
                        to_string(ty->second, w.universe));
            }
        }
    }
    r.final_state = std::move(s);
    return r;
}

// ---- projection and canonicalization ------------------------------------------------------

std::vector<Event> project(const Trace& t, const std::string& identity, const Label& l) {
    std::vector<Event> out;
    for (const auto& e : t.events) {
        if (e.kind != Event::Kind::Auth) continue;
        if (e.browser_identity != identity && e.session_identity != identity) continue;
        if (!e.label.equiv(l)) continue;
        out.push_back(e);
    }
    return out;
}

std::string event_repr(const Event& e, const World& w) {
    switch (e.kind) {
        case Event::Kind::Silent: return ".";
        case Event::Kind::Error: return "error";
        case Event::Kind::Auth: {
            std::string out = "auth(";
            for (size_t i = 0; i < e.values.size(); ++i) {
                if (i) out += ", ";
                out += value_repr(e.values[i], w.universe);
            }
            return out + ")@(" + e.browser_identity + ", " + e.session_identity + ") " +
                   to_string(e.label, w.universe);
        }
        case Event::Kind::AtkReq: return "atk-req " + e.detail;
        case Event::Kind::AtkResp: return "atk-resp " + e.detail;
    }
    return "?";
}

std::string trace_dump(const Trace& t, const World& w) {
    std::string out;
    for (const auto& e : t.events) out += event_repr(e, w) + "\n";
    return out;
}

std::string canonical_projection(const std::vector<Event>& events, const World& w) {
    std::map<NameId, int> canon;
    auto rename = [&](const Value& v) -> std::string {
        if (!v.is_name()) return value_repr(v, w.universe);
        auto it = canon.find(v.name);
        if (it == canon.end()) {
            int idx = static_cast<int>(canon.size());
            canon[v.name] = idx;
            return "n" + std::to_string(idx);
        }
        return "n" + std::to_string(it->second);
    };
    std::string out;
    for (const auto& e : events) {
        out += "auth(";
        for (size_t i = 0; i < e.values.size(); ++i) {
            if (i) out += ",";
            out += rename(e.values[i]);
        }
        out += ")@(" + e.browser_identity + "," + e.session_identity + ")" +
               to_string(e.label, w.universe) + ";";
    }
    return out;
}

std::string canonical_state(const SystemState& s, const World& w) {
    std::map<NameId, int> canon;
    auto rn = [&](NameId n) {
        auto it = canon.find(n);
        if (it == canon.end()) {
            int idx = static_cast<int>(canon.size());
            canon[n] = idx;
            return idx;
        }
        return it->second;
    };
    std::ostringstream out;
    auto value_str = [&](const Value& v) -> std::string {
        if (v.is_name()) return "n" + std::to_string(rn(v.name));
        return value_repr(v, w.universe);
    };
    const BrowserState& b = s.browser;
    out << "act:" << b.next_action << ";halt:" << b.halted << ";";
    if (b.conn)
        out << "conn:" << rn(b.conn->id) << ":" << b.conn->tab << ":" << w.url_name(b.conn->url)
            << ";";
    for (const auto& [ref, v] : b.jar) out << "ck:" << ref << "=" << value_str(v) << ";";
    for (const auto& [tab, pv] : b.pages) {
        out << "page:" << tab << ":" << w.url_name(pv.first) << "[";
        for (const auto& [tag, f] : pv.second.forms) {
            out << tag << "->" << w.url_name(f.target) << "(";
            for (const auto& fp : f.params) out << (fp.is_var ? fp.var : value_str(fp.value)) << ",";
            out << ")";
        }
        out << "];";
    }
    if (b.task) out << "task:" << b.task->first << ":" << print_script(b.task->second, w) << ";";
    if (b.queue) {
        out << "q:" << w.url_name(b.queue->url) << "(";
        for (const auto& [k, v] : b.queue->params) out << k << "=" << value_str(v) << ",";
        out << ")[";
        for (const auto& [ref, v] : b.queue->cookies) out << ref << "=" << value_str(v) << ",";
        out << "];";
    }
    for (const auto& [dom, srv] : s.servers) {
        out << "srv" << dom << ":";
        for (const auto& [id, mem] : srv.globals) {
            out << "g" << rn(id) << "{";
            for (const auto& [k, v] : mem) out << k << "=" << value_str(v) << ",";
            out << "}";
        }
        for (const auto& [id, mem] : srv.sessions) {
            out << "s" << rn(id) << "{";
            for (const auto& [k, v] : mem) out << k << "=" << value_str(v) << ",";
            out << "}";
        }
        for (const auto& [id, who] : srv.trust) out << "t" << rn(id) << "=" << who << ";";
        for (const auto& th : srv.running)
            out << "th:" << w.url_name(th.url) << ":" << rn(th.conn) << ":g" << rn(th.global_mem)
                << (th.session_mem ? ":s" + std::to_string(rn(*th.session_mem)) : "") << "["
                << print_command(th.cmd, w) << "];";
    }
    for (NameId n : s.knowledge) out << "k" << rn(n) << ";";
    if (s.pending_timeout) out << "pt:" << rn(s.pending_timeout->conn) << ";";
    return out.str();
}

}  // namespace sessint
