#include "sessint/typecheck.hpp"

#include <set>

namespace sessint {

namespace {

// Collects the variables occurring in a script (for the csrf secrecy clause).
void script_vars(const ScriptPtr& s, std::set<std::string>& out);
void bexpr_vars(const BrowserExprPtr& e, std::set<std::string>& out) {
    if (!e) return;
    if (e->kind == BrowserExpr::Kind::Var) out.insert(e->name);
    bexpr_vars(e->lhs, out);
    bexpr_vars(e->rhs, out);
}
void script_vars(const ScriptPtr& s, std::set<std::string>& out) {
    if (!s) return;
    bexpr_vars(s->expr, out);
    for (const auto& a : s->args) bexpr_vars(a, out);
    script_vars(s->first, out);
    script_vars(s->second, out);
}

struct Synth {
    bool is_undef = false;
    SecType type;
};

class Checker {
  public:
    Checker(const World& world, TypeCheckOptions opts)
        : world_(world), env_(world.env), attacker_(world.attacker_lab()), opts_(opts) {}

    EndpointVerdict run(const Endpoint& ep) {
        EndpointVerdict v;
        v.url = ep.url;
        auto uty = env_.urls.find(ep.url);
        if (uty == env_.urls.end()) {
            v.ok = false;
            v.failures.push_back({Branch::Hon, "T-Recv", ep.pos, "endpoint has no urltype entry"});
            return v;
        }
        const UrlType& ut = uty->second;
        node(Branch::Hon, 0, "T-Recv", ep.pos, "url " + world_.url_name(ep.url));

        // Connection strength covers the expected cookies.
        for (const auto& ck : ep.cookies) {
            auto g = env_.globals.find(ck);
            if (g == env_.globals.end()) {
                record_global_failure(v, Branch::Hon, "T-Recv", ep.pos,
                                      "cookie " + ck + " has no type entry");
                return v;
            }
            if (!conf_leq(g->second.label.conf, ut.conn.conf) ||
                !integ_leq(ut.conn.integ, g->second.label.integ)) {
                record_global_failure(v, Branch::Hon, "T-Recv", ep.pos,
                                      "cookie " + ck +
                                          " type is not guaranteed by the connection label");
                return v;
            }
        }

        for (Branch b : {Branch::Hon, Branch::Csrf}) {
            failure_.reset();
            depth_ = 1;
            Ctx ctx;
            ctx.branch = b;
            ctx.current = ep.url;
            ctx.session.reset();
            if (b == Branch::Hon) {
                for (size_t i = 0; i < ep.params.size(); ++i) ctx.vars[ep.params[i]] = ut.params[i];
                ctx.pc = ut.conn.integ;
            } else {
                SecType low = SecType::plain({conf_bottom(world_.universe), integ_top(world_.universe)});
                for (const auto& p : ep.params) ctx.vars[p] = low;
                ctx.pc = integ_top(world_.universe);
            }
            command(ctx, ep.body);
            if (failure_) {
                v.ok = false;
                v.failures.push_back(*failure_);
            }
        }
        v.derivation = std::move(deriv_);
        return v;
    }

  private:
    struct Ctx {
        std::map<std::string, SecType> vars;
        std::optional<Label> session;  // nullopt = no active session
        SL pc;
        Branch branch = Branch::Hon;
        Url current;
    };

    const World& world_;
    const TypingEnv& env_;
    Label attacker_;
    TypeCheckOptions opts_;
    std::optional<BranchFailure> failure_;
    std::vector<DerivNode> deriv_;
    int depth_ = 0;

    void record_global_failure(EndpointVerdict& v, Branch b, const std::string& rule, Pos pos,
                               const std::string& msg) {
        v.ok = false;
        v.failures.push_back({b, rule, pos, msg});
    }

    bool fail(const Ctx& ctx, const std::string& rule, Pos pos, const std::string& msg) {
        if (!failure_) failure_ = BranchFailure{ctx.branch, rule, pos, msg};
        return false;
    }

    void node(Branch b, int depth, const std::string& rule, Pos pos, const std::string& note) {
        if (opts_.record_derivation) deriv_.push_back({b, depth, rule, pos, note});
    }
    void node(const Ctx& ctx, const std::string& rule, Pos pos) {
        if (!opts_.record_derivation) return;
        std::string note = "session=" + session_str(ctx.session) +
                           " pc=" + to_string(ctx.pc, world_.universe);
        deriv_.push_back({ctx.branch, depth_, rule, pos, note});
    }
    std::string session_str(const std::optional<Label>& s) const {
        return s ? to_string(*s, world_.universe) : std::string("x");
    }

    // ---- expressions ----

    SecType undef_type() const {
        return SecType::plain({conf_bottom(world_.universe), integ_bottom(world_.universe)});
    }

    std::optional<Synth> synth(const Ctx& ctx, const ServerExprPtr& e) {
        switch (e->kind) {
            case ServerExpr::Kind::Var: {
                auto it = ctx.vars.find(e->name);
                if (it == ctx.vars.end()) {
                    fail(ctx, "T-EVar", e->pos, "unbound variable " + e->name);
                    return std::nullopt;
                }
                return Synth{false, it->second};
            }
            case ServerExpr::Kind::GlobalRef: {
                auto it = env_.globals.find(e->name);
                if (it == env_.globals.end()) {
                    fail(ctx, "T-EGlobRef", e->pos, "undeclared global reference " + e->name);
                    return std::nullopt;
                }
                return Synth{false, it->second};
            }
            case ServerExpr::Kind::SessionRef: {
                if (!ctx.session) {
                    fail(ctx, "T-ESesRef", e->pos,
                         "session reference " + e->name + " used with no active session");
                    return std::nullopt;
                }
                auto it = env_.sessions.find(e->name);
                if (it == env_.sessions.end()) {
                    fail(ctx, "T-ESesRef", e->pos, "undeclared session reference " + e->name);
                    return std::nullopt;
                }
                return Synth{false, cap_session(it->second, *ctx.session)};
            }
            case ServerExpr::Kind::Val:
                if (e->value.is_undef()) return Synth{true, undef_type()};
                if (e->value.is_name()) return Synth{false, *e->value.ann};
                return Synth{false, undef_type()};  // constants: low conf, high integrity
            case ServerExpr::Kind::Fresh:
                return Synth{false, e->fresh_ann};
            case ServerExpr::Kind::BinOp: {
                auto a = synth(ctx, e->lhs);
                if (!a) return std::nullopt;
                auto b = synth(ctx, e->rhs);
                if (!b) return std::nullopt;
                if ((a->type.cred || b->type.cred) && e->op != ServerExpr::Op::Eq) {
                    fail(ctx, "T-EBinOp", e->pos,
                         "credentials admit only equality checks");
                    return std::nullopt;
                }
                Label l{conf_join(a->type.label.conf, b->type.label.conf),
                        integ_join(a->type.label.integ, b->type.label.integ)};
                return Synth{false, SecType::plain(l)};
            }
        }
        return std::nullopt;
    }

    // Use-site check: the undefined literal checks against any type.
    bool check_expr(const Ctx& ctx, const ServerExprPtr& e, const SecType& expected,
                    const std::string& rule) {
        auto s = synth(ctx, e);
        if (!s) return false;
        if (s->is_undef) return true;
        if (!subtype(s->type, expected, attacker_))
            return fail(ctx, rule, e->pos,
                        to_string(s->type, world_.universe) + " is not a subtype of " +
                            to_string(expected, world_.universe));
        return true;
    }

    // Lifts a synthesized type to a credential type when the rules allow it:
    // credentials are kept, attacker-low plain types collapse into a low
    // credential at the same label.
    std::optional<SecType> as_credential(const Ctx& ctx, const ServerExprPtr& e,
                                         const std::string& rule) {
        auto s = synth(ctx, e);
        if (!s) return std::nullopt;
        if (s->is_undef) return SecType::credential(s->type.label);
        if (s->type.cred) return s->type;
        if (is_conf_low(s->type.label.conf, attacker_) &&
            is_integ_low(s->type.label.integ, attacker_))
            return SecType::credential(s->type.label);
        fail(ctx, rule, e->pos, "expected a credential type, got " +
                                    to_string(s->type, world_.universe));
        return std::nullopt;
    }

    // The type a write into a reference must match: globals come straight
    // from the environment, session references are capped by the session.
    std::optional<SecType> ref_type(const Ctx& ctx, const ServerExprPtr& r,
                                    const std::string& rule) {
        if (r->kind == ServerExpr::Kind::GlobalRef) {
            auto it = env_.globals.find(r->name);
            if (it == env_.globals.end()) {
                fail(ctx, rule, r->pos, "undeclared global reference " + r->name);
                return std::nullopt;
            }
            return it->second;
        }
        if (r->kind == ServerExpr::Kind::SessionRef) {
            if (!ctx.session) {
                fail(ctx, rule, r->pos, "session reference with no active session");
                return std::nullopt;
            }
            auto it = env_.sessions.find(r->name);
            if (it == env_.sessions.end()) {
                fail(ctx, rule, r->pos, "undeclared session reference " + r->name);
                return std::nullopt;
            }
            return cap_session(it->second, *ctx.session);
        }
        fail(ctx, rule, r->pos, "expected a reference");
        return std::nullopt;
    }

    // ---- commands ----

    bool command(Ctx& ctx, const CommandPtr& c) {
        switch (c->kind) {
            case Command::Kind::Skip:
            case Command::Kind::Halt:
                node(ctx, "T-Skip", c->pos);
                return true;
            case Command::Kind::Seq:
                return command(ctx, c->first) && command(ctx, c->second);
            case Command::Kind::SetGlobal:
            case Command::Kind::SetSession: {
                bool global = c->kind == Command::Kind::SetGlobal;
                const char* rule = global ? "T-SetGlobal" : "T-SetSession";
                auto target = global ? se_global(c->ref, c->pos) : se_session(c->ref, c->pos);
                auto rt = ref_type(ctx, target, rule);
                if (!rt) return false;
                if (!check_expr(ctx, c->expr, *rt, rule)) return false;
                if (!integ_leq(ctx.pc, rt->label.integ))
                    return fail(ctx, rule, c->pos,
                                "write to " + c->ref + " under low-integrity pc " +
                                    to_string(ctx.pc, world_.universe));
                node(ctx, rule, c->pos);
                return true;
            }
            case Command::Kind::If: {
                auto g = synth(ctx, c->expr);
                if (!g) return false;
                SL pc_guard = integ_join(ctx.pc, g->type.label.integ);
                Ctx then_ctx = ctx;
                then_ctx.pc = pc_guard;
                Ctx else_ctx = ctx;
                else_ctx.pc = pc_guard;
                node(ctx, "T-If", c->pos);
                ++depth_;
                bool ok = command(then_ctx, c->first) && command(else_ctx, c->second);
                --depth_;
                if (!ok) return false;
                // Outputs and checks pin the branch; otherwise the pc recovers.
                bool pinned = contains_output_or_check(c->first) ||
                              contains_output_or_check(c->second);
                ctx.pc = pinned ? integ_join(then_ctx.pc, else_ctx.pc) : ctx.pc;
                bool same = (!then_ctx.session && !else_ctx.session) ||
                            (then_ctx.session && else_ctx.session &&
                             then_ctx.session->equiv(*else_ctx.session));
                if (same)
                    ctx.session = then_ctx.session;
                else
                    ctx.session.reset();
                return true;
            }
            case Command::Kind::Login: {
                auto u = synth(ctx, c->expr);
                if (!u) return false;
                auto pw = as_credential(ctx, c->expr2, "T-Login");
                if (!pw) return false;
                auto sid = as_credential(ctx, c->expr3, "T-Login");
                if (!sid) return false;
                if (!conf_leq(pw->label.conf, sid->label.conf))
                    return fail(ctx, "T-Login", c->pos,
                                "session identifier is less confidential than the password: " +
                                    to_string(pw->label.conf, world_.universe) + " <=_C " +
                                    to_string(sid->label.conf, world_.universe) + " fails");
                SL chain = integ_join(integ_join(u->type.label.integ, pw->label.integ), ctx.pc);
                if (!integ_leq(chain, sid->label.integ))
                    return fail(ctx, "T-Login", c->pos,
                                "username/password/pc integrity does not cover the session "
                                "identifier");
                node(ctx, "T-Login", c->pos);
                return true;
            }
            case Command::Kind::Start: {
                auto sid = as_credential(ctx, c->expr, "T-Start");
                if (!sid) return false;
                Label next = is_conf_low(sid->label.conf, attacker_)
                                 ? Label{conf_bottom(world_.universe), integ_top(world_.universe)}
                                 : sid->label;
                if (ctx.branch == Branch::Hon) {
                    if (ctx.session && !integ_leq(ctx.pc, ctx.session->integ))
                        return fail(ctx, "T-Start", c->pos,
                                    "cannot end a session under a low-integrity pc");
                    if (!integ_leq(ctx.pc, next.integ))
                        return fail(ctx, "T-Start", c->pos,
                                    "cannot start this session under a low-integrity pc");
                }
                ctx.session = next;
                node(ctx, "T-Start", c->pos);
                return true;
            }
            case Command::Kind::Auth: {
                if (!ctx.session)
                    return fail(ctx, "T-Auth", c->pos, "auth outside of a session");
                SL chain = integ_join(ctx.pc, ctx.session->integ);
                for (const auto& a : c->auth_args) {
                    auto s = synth(ctx, a);
                    if (!s) return false;
                    if (!s->is_undef) chain = integ_join(chain, s->type.label.integ);
                }
                if (is_integ_low(chain, attacker_) && !is_integ_low(c->auth_label.integ, attacker_))
                    return fail(ctx, "T-Auth", c->pos,
                                "attacker-influenced context cannot justify an event at " +
                                    to_string(c->auth_label, world_.universe));
                node(ctx, "T-Auth", c->pos);
                return true;
            }
            case Command::Kind::TokenChk:
                return tokenchk(ctx, c);
            case Command::Kind::OriginChk:
                return originchk(ctx, c);
            case Command::Kind::Reply:
                return reply(ctx, c);
            case Command::Kind::Redirect:
                return redirect(ctx, c);
        }
        return fail(ctx, "T-Skip", c->pos, "unknown command");
    }

    bool tokenchk(Ctx& ctx, const CommandPtr& c) {
        if (c->expr2->kind != ServerExpr::Kind::GlobalRef &&
            c->expr2->kind != ServerExpr::Kind::SessionRef)
            return fail(ctx, "T-TChk", c->pos, "token check must compare against a reference");
        auto rt = ref_type(ctx, c->expr2, "T-TChk");
        if (!rt) return false;
        if (!rt->cred)
            return fail(ctx, "T-TChk", c->pos, "token reference must hold a credential");
        if (ctx.branch == Branch::Csrf && is_conf_high(rt->label.conf, attacker_)) {
            auto x = synth(ctx, c->expr);
            if (!x) return false;
            if (!x->is_undef && !conf_equiv(x->type.label.conf, rt->label.conf)) {
                // The comparison cannot succeed: the branch is discharged.
                node(ctx, "T-PruneTChk", c->pos);
                return true;
            }
        }
        if (!check_expr(ctx, c->expr, *rt, "T-TChk")) return false;
        node(ctx, "T-TChk", c->pos);
        ++depth_;
        Ctx body_ctx = ctx;
        bool ok = command(body_ctx, c->body);
        --depth_;
        if (!ok) return false;
        ctx.session = body_ctx.session;  // pc is not changed by the check
        return true;
    }

    bool originchk(Ctx& ctx, const CommandPtr& c) {
        if (ctx.branch == Branch::Csrf && world_.is_protected(ctx.current)) {
            bool all_high = true;
            for (const auto& o : c->origins)
                if (is_integ_low(o, attacker_)) all_high = false;
            if (all_high) {
                node(ctx, "T-PruneOChk", c->pos);
                return true;
            }
        }
        node(ctx, "T-OChk", c->pos);
        ++depth_;
        Ctx body_ctx = ctx;
        bool ok = command(body_ctx, c->body);
        --depth_;
        if (!ok) return false;
        ctx.session = body_ctx.session;
        return true;
    }

    struct BinderInfo {
        std::map<std::string, SecType> vars;  // endpoint params + binders
        std::vector<std::pair<std::string, SecType>> binders;
    };

    std::optional<BinderInfo> binder_types(Ctx& ctx, const CommandPtr& c, const char* rule) {
        BinderInfo info;
        info.vars = ctx.vars;
        for (const auto& b : c->binders) {
            auto s = synth(ctx, b.expr);
            if (!s) return std::nullopt;
            SecType ty = s->is_undef ? undef_type() : s->type;
            info.vars[b.var] = ty;
            info.binders.emplace_back(b.var, ty);
        }
        (void)rule;
        return info;
    }

    // The type of a cookie payload entry (binder/param variable or constant).
    std::optional<Synth> cookie_payload(Ctx& ctx, const BinderInfo& info, const CommandPtr& c,
                                        const std::string& ref, const char* rule) {
        auto var = c->cookies.find(ref);
        if (var != c->cookies.end()) {
            auto it = info.vars.find(var->second);
            if (it == info.vars.end()) {
                fail(ctx, rule, c->pos, "unbound cookie payload variable " + var->second);
                return std::nullopt;
            }
            return Synth{false, it->second};
        }
        const Value& v = c->cookie_consts.at(ref);
        if (v.is_undef()) return Synth{true, undef_type()};
        if (v.is_name()) return Synth{false, *v.ann};
        return Synth{false, undef_type()};
    }

    bool cookie_clauses(Ctx& ctx, const BinderInfo& info, const CommandPtr& c, const SL& write_pc,
                        const char* rule) {
        std::vector<std::string> refs;
        for (const auto& [r, v] : c->cookies) refs.push_back(r);
        for (const auto& [r, v] : c->cookie_consts) refs.push_back(r);
        for (const auto& r : refs) {
            auto g = env_.globals.find(r);
            if (g == env_.globals.end())
                return fail(ctx, rule, c->pos, "cookie " + r + " has no type entry");
            auto payload = cookie_payload(ctx, info, c, r, rule);
            if (!payload) return false;
            if (!payload->is_undef && !subtype(payload->type, g->second, attacker_))
                return fail(ctx, rule, c->pos,
                            "cookie " + r + ": value type " +
                                to_string(payload->type, world_.universe) +
                                " is not a subtype of " + to_string(g->second, world_.universe));
            if (!integ_leq(write_pc, g->second.label.integ))
                return fail(ctx, rule, c->pos,
                            "cookie " + r + " set under low-integrity pc " +
                                to_string(write_pc, world_.universe));
        }
        return true;
    }

    bool reply(Ctx& ctx, const CommandPtr& c) {
        auto uty = env_.urls.find(ctx.current);
        if (uty == env_.urls.end())
            return fail(ctx, "T-Reply", c->pos, "current url has no urltype entry");
        const UrlType& ut = uty->second;
        SL pc_out = integ_join(ctx.pc, ut.reply_integ);

        auto info = binder_types(ctx, c, "T-Reply");
        if (!info) return false;

        bool conn_low = is_integ_low(ut.conn.integ, attacker_);
        for (const auto& [var, ty] : info->binders) {
            if (!conf_leq(ty.label.conf, ut.conn.conf))
                return fail(ctx, "T-Reply", c->pos,
                            "binder " + var + " leaks " + to_string(ty, world_.universe) +
                                " over the connection");
            if (conn_low && !is_conf_low(ty.label.conf, attacker_))
                return fail(ctx, "T-Reply", c->pos,
                            "binder " + var +
                                " carries a secret over a low-integrity connection");
        }

        if (!cookie_clauses(ctx, *info, c, pc_out, "T-Reply")) return false;

        if (!script(ctx, info->vars, pc_out, c->script)) return false;

        if (ctx.branch == Branch::Csrf) {
            std::set<std::string> used;
            script_vars(c->script, used);
            for (const auto& x : used) {
                auto it = info->vars.find(x);
                if (it != info->vars.end() && !is_conf_low(it->second.label.conf, attacker_))
                    return fail(ctx, "T-Reply", c->pos,
                                "script variable " + x + " is secret in the csrf branch");
            }
        }

        if (ctx.branch == Branch::Hon) {
            if (!integ_leq(ctx.pc, ut.reply_integ))
                return fail(ctx, "T-Reply", c->pos,
                            "pc " + to_string(ctx.pc, world_.universe) +
                                " does not cover the reply integrity " +
                                to_string(ut.reply_integ, world_.universe));
            if (!c->page.error) {
                Ctx form_ctx = ctx;
                form_ctx.vars = info->vars;
                for (const auto& [tag, f] : c->page.forms)
                    if (!form(form_ctx, tag, pc_out, f, c->pos)) return false;
            }
        }
        node(ctx, "T-Reply", c->pos);
        ctx.pc = pc_out;
        return true;
    }

    bool form(Ctx& ctx, const std::string& tag, const SL& pc, const Form& f, Pos pos) {
        auto vt = env_.forms.find(tag);
        if (vt == env_.forms.end())
            return fail(ctx, "T-Form", pos, "form tag " + tag + " has no type entry");
        auto ut = env_.urls.find(f.target);
        if (ut == env_.urls.end())
            return fail(ctx, "T-Form", pos, "form target has no urltype entry");
        if (!url_type_equal(vt->second, ut->second))
            return fail(ctx, "T-Form", pos,
                        "form tag " + tag + " type differs from the target url type");
        if (is_integ_low(ut->second.conn.integ, attacker_))
            return fail(ctx, "T-Form", pos, "form targets a low-integrity url");
        if (!integ_leq(pc, ut->second.conn.integ))
            return fail(ctx, "T-Form", pos, "form created under a pc too low for its target");
        if (f.params.size() != ut->second.params.size())
            return fail(ctx, "T-Form", pos, "form arity differs from the declared parameters");
        for (size_t k = 0; k < f.params.size(); ++k) {
            auto s = form_param_type(ctx, f.params[k], pos, "T-Form");
            if (!s) return false;
            if (!s->is_undef && !subtype(s->type, ut->second.params[k], attacker_))
                return fail(ctx, "T-Form", pos,
                            "form parameter " + std::to_string(k + 1) + " : " +
                                to_string(s->type, world_.universe) + " is not a subtype of " +
                                to_string(ut->second.params[k], world_.universe));
        }
        node(ctx, "T-Form", pos);
        return true;
    }

    std::optional<Synth> form_param_type(Ctx& ctx, const FormParam& fp, Pos pos,
                                         const char* rule) {
        if (fp.is_var) {
            auto it = ctx.vars.find(fp.var);
            if (it == ctx.vars.end()) {
                fail(ctx, rule, pos, "unbound variable " + fp.var);
                return std::nullopt;
            }
            return Synth{false, it->second};
        }
        if (fp.value.is_undef()) return Synth{true, undef_type()};
        if (fp.value.is_name()) return Synth{false, *fp.value.ann};
        return Synth{false, undef_type()};
    }

    bool url_type_equal(const UrlType& a, const UrlType& b) {
        if (!a.conn.equiv(b.conn)) return false;
        if (!conf_equiv(a.reply_integ, b.reply_integ)) return false;
        if (a.params.size() != b.params.size()) return false;
        for (size_t i = 0; i < a.params.size(); ++i) {
            if (a.params[i].cred != b.params[i].cred) return false;
            if (!a.params[i].label.equiv(b.params[i].label)) return false;
        }
        return true;
    }

    bool redirect(Ctx& ctx, const CommandPtr& c) {
        auto uty = env_.urls.find(ctx.current);
        if (uty == env_.urls.end())
            return fail(ctx, "T-Redir", c->pos, "current url has no urltype entry");
        const UrlType& ut = uty->second;
        auto tty = env_.urls.find(c->redirect_target);
        if (tty == env_.urls.end())
            return fail(ctx, "T-Redir", c->pos, "redirect target has no urltype entry");
        const UrlType& target = tty->second;

        auto info = binder_types(ctx, c, "T-Redir");
        if (!info) return false;

        bool conn_low = is_integ_low(ut.conn.integ, attacker_);
        for (const auto& [var, ty] : info->binders) {
            if (!conf_leq(ty.label.conf, ut.conn.conf))
                return fail(ctx, "T-Redir", c->pos,
                            "binder " + var + " leaks " + to_string(ty, world_.universe) +
                                " over the connection");
            if (conn_low && !is_conf_low(ty.label.conf, attacker_))
                return fail(ctx, "T-Redir", c->pos,
                            "binder " + var +
                                " carries a secret over a low-integrity connection");
        }
        if (!cookie_clauses(ctx, *info, c, ctx.pc, "T-Redir")) return false;

        if (ctx.branch == Branch::Csrf) {
            for (const auto& fp : c->redirect_params) {
                if (!fp.is_var) continue;
                auto it = info->vars.find(fp.var);
                if (it != info->vars.end() && !is_conf_low(it->second.label.conf, attacker_))
                    return fail(ctx, "T-Redir", c->pos,
                                "redirect parameter " + fp.var + " is secret in the csrf branch");
            }
        }
        if (world_.is_protected(c->redirect_target))
            return fail(ctx, "T-Redir", c->pos,
                        "redirect to an origin-check protected url");
        if (!conf_equiv(ut.reply_integ, target.reply_integ))
            return fail(ctx, "T-Redir", c->pos,
                        "reply integrity of the target differs from the current url");
        if (is_integ_low(target.conn.integ, attacker_))
            return fail(ctx, "T-Redir", c->pos, "redirect to a low-integrity url");

        if (ctx.branch == Branch::Hon) {
            if (!integ_leq(ctx.pc, target.conn.integ))
                return fail(ctx, "T-Redir", c->pos,
                            "redirect issued under a pc too low for its target");
            if (c->redirect_params.size() > target.params.size())
                return fail(ctx, "T-Redir", c->pos, "redirect carries too many parameters");
            Ctx pctx = ctx;
            pctx.vars = info->vars;
            for (size_t k = 0; k < c->redirect_params.size(); ++k) {
                auto s = form_param_type(pctx, c->redirect_params[k], c->pos, "T-Redir");
                if (!s) return false;
                if (!s->is_undef && !subtype(s->type, target.params[k], attacker_))
                    return fail(ctx, "T-Redir", c->pos,
                                "redirect parameter " + std::to_string(k + 1) +
                                    " does not match the target parameter type");
            }
        }
        node(ctx, "T-Redir", c->pos);
        return true;
    }

    // ---- scripts ----

    std::optional<Synth> synth_bexpr(Ctx& ctx, const std::map<std::string, SecType>& vars,
                                     const BrowserExprPtr& e) {
        switch (e->kind) {
            case BrowserExpr::Kind::Var: {
                auto it = vars.find(e->name);
                if (it == vars.end()) {
                    fail(ctx, "T-BEVar", e->pos, "unbound script variable " + e->name);
                    return std::nullopt;
                }
                return Synth{false, it->second};
            }
            case BrowserExpr::Kind::CookieRef: {
                auto it = env_.globals.find(e->name);
                if (it == env_.globals.end()) {
                    fail(ctx, "T-BERef", e->pos, "undeclared cookie " + e->name);
                    return std::nullopt;
                }
                return Synth{false, it->second};
            }
            case BrowserExpr::Kind::Val:
                if (e->value.is_undef()) return Synth{true, undef_type()};
                if (e->value.is_name()) return Synth{false, *e->value.ann};
                return Synth{false, undef_type()};
            case BrowserExpr::Kind::Dom: {
                if (ctx.branch == Branch::Hon) {
                    fail(ctx, "T-BEDom", e->pos, "DOM reads are not typable in the honest branch");
                    return std::nullopt;
                }
                return Synth{false, SecType::plain(attacker_)};
            }
            case BrowserExpr::Kind::BinOp: {
                auto a = synth_bexpr(ctx, vars, e->lhs);
                if (!a) return std::nullopt;
                auto b = synth_bexpr(ctx, vars, e->rhs);
                if (!b) return std::nullopt;
                if ((a->type.cred || b->type.cred) && e->op != ServerExpr::Op::Eq) {
                    fail(ctx, "T-BEBinOp", e->pos, "credentials admit only equality checks");
                    return std::nullopt;
                }
                Label l{conf_join(a->type.label.conf, b->type.label.conf),
                        integ_join(a->type.label.integ, b->type.label.integ)};
                return Synth{false, SecType::plain(l)};
            }
        }
        return std::nullopt;
    }

    bool script(Ctx& ctx, const std::map<std::string, SecType>& vars, const SL& pc,
                const ScriptPtr& s) {
        switch (s->kind) {
            case Script::Kind::Skip:
                node(ctx, "T-BSkip", s->pos);
                return true;
            case Script::Kind::Seq:
                return script(ctx, vars, pc, s->first) && script(ctx, vars, pc, s->second);
            case Script::Kind::Assign: {
                auto it = env_.globals.find(s->ref);
                if (it == env_.globals.end())
                    return fail(ctx, "T-BAssign", s->pos, "undeclared cookie " + s->ref);
                auto v = synth_bexpr(ctx, vars, s->expr);
                if (!v) return false;
                if (!v->is_undef && !subtype(v->type, it->second, attacker_))
                    return fail(ctx, "T-BAssign", s->pos,
                                "script writes an incompatible value into " + s->ref);
                if (!integ_leq(pc, it->second.label.integ))
                    return fail(ctx, "T-BAssign", s->pos,
                                "script writes " + s->ref + " under a low-integrity pc");
                node(ctx, "T-BAssign", s->pos);
                return true;
            }
            case Script::Kind::Include: {
                auto ut = env_.urls.find(s->url);
                if (ut == env_.urls.end())
                    return fail(ctx, "T-BInclude", s->pos, "include target has no urltype entry");
                if (s->args.size() != ut->second.params.size())
                    return fail(ctx, "T-BInclude", s->pos, "include arity mismatch");
                std::vector<Synth> args;
                for (const auto& a : s->args) {
                    auto v = synth_bexpr(ctx, vars, a);
                    if (!v) return false;
                    args.push_back(*v);
                }
                if (ctx.branch == Branch::Hon) {
                    if (is_integ_low(ut->second.conn.integ, attacker_))
                        return fail(ctx, "T-BInclude", s->pos,
                                    "honest script includes a low-integrity url");
                    if (!conf_equiv(ut->second.reply_integ, pc))
                        return fail(ctx, "T-BInclude", s->pos,
                                    "included reply integrity differs from the script pc");
                    if (!integ_leq(pc, ut->second.conn.integ))
                        return fail(ctx, "T-BInclude", s->pos,
                                    "include issued under a pc too low for its target");
                    if (world_.is_protected(s->url))
                        return fail(ctx, "T-BInclude", s->pos,
                                    "include of an origin-check protected url");
                    for (size_t k = 0; k < args.size(); ++k)
                        if (!args[k].is_undef &&
                            !subtype(args[k].type, ut->second.params[k], attacker_))
                            return fail(ctx, "T-BInclude", s->pos,
                                        "include parameter " + std::to_string(k + 1) +
                                            " type mismatch");
                } else {
                    for (size_t k = 0; k < args.size(); ++k)
                        if (!args[k].is_undef &&
                            !subtype(args[k].type, SecType::plain(attacker_), attacker_))
                            return fail(ctx, "T-BInclude", s->pos,
                                        "include parameter exceeds the attacker label");
                }
                node(ctx, "T-BInclude", s->pos);
                return true;
            }
            case Script::Kind::SetDom: {
                if (s->expr->kind != BrowserExpr::Kind::Val)
                    return fail(ctx, "T-BSetDom", s->pos, "setdom tag must be a value");
                std::string tag = s->expr->value.s;
                auto ut = env_.urls.find(s->url);
                if (ut == env_.urls.end())
                    return fail(ctx, "T-BSetDom", s->pos, "setdom target has no urltype entry");
                if (s->args.size() != ut->second.params.size())
                    return fail(ctx, "T-BSetDom", s->pos, "setdom arity mismatch");
                std::vector<Synth> args;
                for (const auto& a : s->args) {
                    auto v = synth_bexpr(ctx, vars, a);
                    if (!v) return false;
                    args.push_back(*v);
                }
                if (ctx.branch == Branch::Hon) {
                    auto vt = env_.forms.find(tag);
                    if (vt == env_.forms.end())
                        return fail(ctx, "T-BSetDom", s->pos, "setdom tag has no formtype entry");
                    if (!url_type_equal(vt->second, ut->second))
                        return fail(ctx, "T-BSetDom", s->pos,
                                    "setdom tag type differs from the target url type");
                    if (!integ_leq(pc, ut->second.conn.integ))
                        return fail(ctx, "T-BSetDom", s->pos,
                                    "setdom issued under a pc too low for its target");
                    for (size_t k = 0; k < args.size(); ++k)
                        if (!args[k].is_undef &&
                            !subtype(args[k].type, ut->second.params[k], attacker_))
                            return fail(ctx, "T-BSetDom", s->pos,
                                        "setdom parameter " + std::to_string(k + 1) +
                                            " type mismatch");
                } else {
                    for (size_t k = 0; k < args.size(); ++k)
                        if (!args[k].is_undef &&
                            !subtype(args[k].type, SecType::plain(attacker_), attacker_))
                            return fail(ctx, "T-BSetDom", s->pos,
                                        "setdom parameter exceeds the attacker label");
                }
                node(ctx, "T-BSetDom", s->pos);
                return true;
            }
        }
        return true;
    }
};

}  // namespace

EndpointVerdict type_endpoint(const World& world, const Endpoint& ep, TypeCheckOptions opts) {
    Checker c(world, opts);
    return c.run(ep);
}

ClusterVerdict type_cluster(const World& world, TypeCheckOptions opts) {
    ClusterVerdict v;
    v.wf = check_wellformed_env(world.env, world);
    v.env_ok = v.wf.ok();
    if (!v.env_ok) return v;
    for (const auto& ep : world.endpoints) v.endpoints.push_back(type_endpoint(world, ep, opts));
    return v;
}

SynthResult synth_server_expr(const World& world, const std::map<std::string, SecType>& vars,
                              const std::optional<Label>& session, const ServerExprPtr& e) {
    SynthResult r;
    switch (e->kind) {
        case ServerExpr::Kind::Val:
            if (e->value.is_undef()) {
                r.ok = true;
                r.is_undef = true;
                r.type = SecType::plain(bottom_label(world.universe));
                return r;
            }
            if (e->value.is_name()) {
                r.ok = true;
                r.type = *e->value.ann;
                return r;
            }
            r.ok = true;
            r.type = SecType::plain(bottom_label(world.universe));
            return r;
        case ServerExpr::Kind::Fresh:
            r.ok = true;
            r.type = e->fresh_ann;
            return r;
        case ServerExpr::Kind::Var: {
            auto it = vars.find(e->name);
            if (it == vars.end()) {
                r.error = "unbound variable";
                return r;
            }
            r.ok = true;
            r.type = it->second;
            return r;
        }
        case ServerExpr::Kind::GlobalRef: {
            auto it = world.env.globals.find(e->name);
            if (it == world.env.globals.end()) {
                r.error = "undeclared global";
                return r;
            }
            r.ok = true;
            r.type = it->second;
            return r;
        }
        case ServerExpr::Kind::SessionRef: {
            if (!session) {
                r.error = "no active session";
                return r;
            }
            auto it = world.env.sessions.find(e->name);
            if (it == world.env.sessions.end()) {
                r.error = "undeclared session reference";
                return r;
            }
            r.ok = true;
            r.type = cap_session(it->second, *session);
            return r;
        }
        case ServerExpr::Kind::BinOp: {
            auto a = synth_server_expr(world, vars, session, e->lhs);
            auto b = synth_server_expr(world, vars, session, e->rhs);
            if (!a.ok || !b.ok) {
                r.error = a.ok ? b.error : a.error;
                return r;
            }
            if ((a.type.cred || b.type.cred) && e->op != ServerExpr::Op::Eq) {
                r.error = "credentials admit only equality checks";
                return r;
            }
            r.ok = true;
            r.type = SecType::plain({conf_join(a.type.label.conf, b.type.label.conf),
                                     integ_join(a.type.label.integ, b.type.label.integ)});
            return r;
        }
    }
    r.error = "unsupported expression";
    return r;
}

}  // namespace sessint
