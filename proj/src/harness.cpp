#include "sessint/harness.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "sessint/env.hpp"

namespace sessint {

ExplorationBounds ExplorationBounds::defaults() {
    ExplorationBounds b;
    b.pool = {Value::boolean(true), Value::boolean(false), Value::integer(0), Value::integer(1)};
    return b;
}

namespace {

void collect_auth_labels(const CommandPtr& c, std::vector<Label>& out) {
    if (!c) return;
    if (c->kind == Command::Kind::Auth) out.push_back(c->auth_label);
    collect_auth_labels(c->first, out);
    collect_auth_labels(c->second, out);
    collect_auth_labels(c->body, out);
}

}  // namespace

std::vector<Label> relevant_auth_labels(const World& w) {
    Label la = w.attacker_lab();
    std::vector<Label> all;
    for (const auto& ep : w.endpoints) collect_auth_labels(ep.body, all);
    std::vector<Label> out;
    for (const auto& l : all) {
        if (is_integ_low(l.integ, la)) continue;  // the attacker may influence these
        bool dup = false;
        for (const auto& o : out)
            if (o.equiv(l)) dup = true;
        if (!dup) out.push_back(l);
    }
    return out;
}

// ---- message synthesis -----------------------------------------------------------

namespace {

// Candidate values for one synthesized slot, in a deterministic order:
// attacker identities, knowledge names (oldest first, capped), the blank
// value, then the pool.
std::vector<Value> slot_candidates(const World& w, const SystemState& s,
                                   const ExplorationBounds& b) {
    std::vector<Value> out;
    for (const auto& id : w.attacker_identities) out.push_back(Value::identity(id));
    SecType atk_ann = SecType::credential({conf_bottom(w.universe), integ_top(w.universe)});
    int names = 0;
    for (NameId n : s.knowledge) {
        if (names++ >= b.max_knowledge_names) break;
        out.push_back(Value::name_value(n, atk_ann));
    }
    out.push_back(Value::undef());
    for (const auto& v : b.pool) out.push_back(v);
    return out;
}

void tuples_rec(const std::vector<Value>& cands, size_t arity, std::vector<Value>& cur,
                std::vector<std::vector<Value>>& out, size_t cap) {
    if (out.size() >= cap) return;
    if (cur.size() == arity) {
        out.push_back(cur);
        return;
    }
    for (const auto& v : cands) {
        cur.push_back(v);
        tuples_rec(cands, arity, cur, out, cap);
        cur.pop_back();
        if (out.size() >= cap) return;
    }
}

std::vector<std::vector<Value>> value_tuples(const std::vector<Value>& cands, size_t arity,
                                             size_t cap) {
    std::vector<std::vector<Value>> out;
    std::vector<Value> cur;
    tuples_rec(cands, arity, cur, out, cap);
    return out;
}

}  // namespace

namespace {

std::vector<StepChoice> synthesize_impl(const World& w, const SystemState& s,
                                        const ExplorationBounds& b, bool with_requests) {
    std::vector<StepChoice> out;
    std::vector<Value> cands = slot_candidates(w, s, b);
    const size_t cap = static_cast<size_t>(b.max_branching);
    auto full = [&] { return out.size() >= cap; };

    // Responses on an intercepted browser connection (A-AtkBro).
    if (s.browser.conn && s.knowledge.count(s.browser.conn->id)) {
        NameId conn = s.browser.conn->id;
        Url here = s.browser.conn->url;
        auto push_resp = [&](RespMsg m, const std::string& what) {
            if (full()) return;
            m.conn = conn;
            m.url = here;
            if (auto c = attacker_respond(w, s, m)) {
                c->key = "atkbro:" + what;
                out.push_back(std::move(*c));
            }
        };
        // 1. a blank page
        {
            RespMsg m;
            m.page = Page::empty();
            m.script = script_skip({});
            push_resp(std::move(m), "blank");
        }
        // 2. auto-submitting scripts: include an endpoint with chosen values
        for (const auto& ep : w.endpoints) {
            if (full()) break;
            if (ep.params.size() > static_cast<size_t>(b.max_msg_fields)) continue;
            for (const auto& tup : value_tuples(cands, ep.params.size(), cap)) {
                if (full()) break;
                RespMsg m;
                m.page = Page::empty();
                std::vector<BrowserExprPtr> args;
                std::string sig;
                for (const auto& v : tup) {
                    args.push_back(be_val(v));
                    sig += value_repr(v, w.universe) + ",";
                }
                m.script = script_include(ep.url, std::move(args), {});
                push_resp(std::move(m), "include:" + w.url_name(ep.url) + ":" + sig);
            }
        }
        // 3. form injection via setdom
        for (const auto& [tag, ty] : w.env.forms) {
            if (full()) break;
            for (const auto& ep : w.endpoints) {
                if (full()) break;
                if (ep.params.size() > static_cast<size_t>(b.max_msg_fields)) continue;
                for (const auto& tup : value_tuples(cands, ep.params.size(), cap / 4)) {
                    if (full()) break;
                    RespMsg m;
                    m.page = Page::empty();
                    std::vector<BrowserExprPtr> args;
                    std::string sig;
                    for (const auto& v : tup) {
                        args.push_back(be_val(v));
                        sig += value_repr(v, w.universe) + ",";
                    }
                    m.script = script_setdom(be_val(Value::string(tag)), ep.url, std::move(args), {});
                    push_resp(std::move(m), "setdom:" + tag + ":" + w.url_name(ep.url) + ":" + sig);
                }
            }
        }
        // 4. redirects to declared endpoints
        for (const auto& ep : w.endpoints) {
            if (full()) break;
            if (ep.params.size() > static_cast<size_t>(b.max_msg_fields)) continue;
            for (const auto& tup : value_tuples(cands, ep.params.size(), cap / 4)) {
                if (full()) break;
                RespMsg m;
                m.page = Page::empty();
                m.script = script_skip({});
                m.redirect = ep.url;
                m.redirect_params = tup;
                std::string sig;
                for (const auto& v : tup) sig += value_repr(v, w.universe) + ",";
                push_resp(std::move(m), "redir:" + w.url_name(ep.url) + ":" + sig);
            }
        }
        // 5. cookie forcing: set one cookie to a known value
        for (const auto& [ref, attrs] : w.cookie_attrs) {
            if (full()) break;
            for (const auto& v : cands) {
                if (full()) break;
                if (v.kind == Value::Kind::Identity) continue;
                RespMsg m;
                m.page = Page::empty();
                m.script = script_skip({});
                m.cookies[ref] = v;
                push_resp(std::move(m), "force:" + ref + ":" + value_repr(v, w.universe));
            }
        }
    }

    // Requests to honest endpoints (A-AtkSer).
    if (!with_requests) return out;
    for (const auto& ep : w.endpoints) {
        if (full()) break;
        if (ep.params.size() > static_cast<size_t>(b.max_msg_fields)) continue;
        for (const auto& ib : w.attacker_identities) {
            if (full()) break;
            for (const auto& tup : value_tuples(cands, ep.params.size(), cap / 4)) {
                if (full()) break;
                ReqMsg m;
                m.browser_identity = ib;
                m.url = ep.url;
                std::string sig;
                for (size_t k = 0; k < tup.size(); ++k) {
                    m.params[static_cast<int>(k + 1)] = tup[k];
                    sig += value_repr(tup[k], w.universe) + ",";
                }
                if (auto c = attacker_request(w, s, m)) {
                    c->key = "atkser:" + w.url_name(ep.url) + ":" + ib + ":" + sig;
                    out.push_back(std::move(*c));
                }
                // one variant per expected cookie, set to each known name
                for (const auto& ckname : ep.cookies) {
                    if (full()) break;
                    int names = 0;
                    for (NameId n : s.knowledge) {
                        if (full() || names++ >= b.max_knowledge_names) break;
                        ReqMsg mc = m;
                        mc.cookies[ckname] = Value::name_value(
                            n, SecType::credential({conf_bottom(w.universe),
                                                    integ_top(w.universe)}));
                        if (auto c = attacker_request(w, s, mc)) {
                            c->key = "atkser:" + w.url_name(ep.url) + ":" + ib + ":" + sig +
                                     ":ck:" + ckname + "=" + std::to_string(n);
                            out.push_back(std::move(*c));
                        }
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

std::vector<StepChoice> synthesize_messages(const World& w, const SystemState& s,
                                            const ExplorationBounds& b) {
    return synthesize_impl(w, s, b, true);
}

// ---- the integrity check ----------------------------------------------------------

namespace {

struct LabelTrack {
    Label label;
    std::vector<Event> honest;       // honest projection at this label
    std::vector<size_t> positions;   // index in the honest trace of each event
};

struct SearchCtx {
    const World& w;
    const ExplorationBounds& b;
    std::vector<LabelTrack> tracks;
    IntegrityVerdict verdict;
    bool done = false;
    long explored = 0;
    bool clipped = false;
    bool with_requests = true;  // phase 2 also synthesizes direct requests
    std::unordered_map<std::string, int> memo;  // key -> best remaining depth

    std::vector<std::string> path_keys;
    std::vector<Event> path_events;
};

// Incremental prefix check: called when an auth event lands. Returns false
// on divergence and fills the verdict.
bool admit_auth(SearchCtx& ctx, std::vector<std::vector<Event>>& proj,
                std::vector<size_t>& matched, const Event& e) {
    for (size_t t = 0; t < ctx.tracks.size(); ++t) {
        LabelTrack& tr = ctx.tracks[t];
        if (e.kind != Event::Kind::Auth) continue;
        if (e.browser_identity != "usr" && e.session_identity != "usr") continue;
        if (!e.label.equiv(tr.label)) continue;
        proj[t].push_back(e);
        bool diverged = false;
        if (proj[t].size() > tr.honest.size()) {
            diverged = true;
        } else {
            std::vector<Event> hp(tr.honest.begin(), tr.honest.begin() + proj[t].size());
            if (canonical_projection(proj[t], ctx.w) != canonical_projection(hp, ctx.w))
                diverged = true;
        }
        if (!diverged) {
            matched[t] = proj[t].size();
            // Cut consistency: one honest prefix must explain every label.
            long cut = -1;
            for (size_t j = 0; j < ctx.tracks.size(); ++j)
                if (matched[j] > 0)
                    cut = std::max(cut, static_cast<long>(ctx.tracks[j].positions[matched[j] - 1]));
            for (size_t j = 0; j < ctx.tracks.size(); ++j) {
                if (matched[j] < ctx.tracks[j].honest.size() &&
                    static_cast<long>(ctx.tracks[j].positions[matched[j]]) <= cut)
                    diverged = true;  // a suppressed earlier event is required
            }
        }
        if (diverged) {
            ctx.verdict.status = IntegrityVerdict::Status::Violation;
            ctx.verdict.violated_label = tr.label;
            ctx.verdict.honest_projection = tr.honest;
            ctx.verdict.attacked_projection = proj[t];
            ctx.verdict.message = "attacked projection diverges from every honest prefix at " +
                                  to_string(tr.label, ctx.w.universe);
            return false;
        }
    }
    return true;
}

bool dfs(SearchCtx& ctx, const SystemState& s, int depth, int atk_used,
         std::vector<std::vector<Event>>& proj, std::vector<size_t>& matched) {
    if (ctx.done) return false;
    ++ctx.explored;
    if (ctx.explored > ctx.b.max_states) {
        ctx.clipped = true;
        return true;
    }
    if (depth >= ctx.b.max_steps) {
        ctx.clipped = true;
        return true;
    }
    std::string key = canonical_state(s, ctx.w) + "|m:";
    for (size_t m : matched) key += std::to_string(m) + ",";
    key += "|a:" + std::to_string(atk_used);
    auto it = ctx.memo.find(key);
    int remaining = ctx.b.max_steps - depth;
    if (it != ctx.memo.end() && it->second >= remaining) return true;
    ctx.memo[key] = remaining;

    std::vector<StepChoice> succ = enumerate_steps(ctx.w, s, StepMode::Full);
    size_t plain = succ.size();
    if (atk_used < ctx.b.max_attacker_moves) {
        auto atk = synthesize_impl(ctx.w, s, ctx.b, ctx.with_requests);
        for (auto& c : atk) succ.push_back(std::move(c));
    }
    if (succ.size() > static_cast<size_t>(ctx.b.max_branching)) {
        succ.resize(static_cast<size_t>(ctx.b.max_branching));
        ctx.clipped = true;
    }

    for (size_t i = 0; i < succ.size(); ++i) {
        StepChoice& c = succ[i];
        bool is_attacker = i >= plain || c.rule == "A-BroAtk" || c.rule == "A-SerAtk";
        int next_atk = atk_used + (is_attacker ? 1 : 0);
        if (next_atk > ctx.b.max_attacker_moves) continue;
        ctx.path_keys.push_back(c.rule + "#" + c.key);
        ctx.path_events.push_back(c.event);
        std::vector<std::vector<Event>> proj2 = proj;
        std::vector<size_t> matched2 = matched;
        bool ok = true;
        if (c.event.kind == Event::Kind::Auth) ok = admit_auth(ctx, proj2, matched2, c.event);
        if (!ok) {
            ctx.verdict.witness.events = ctx.path_events;
            ctx.verdict.witness_keys = ctx.path_keys;
            ctx.done = true;
            ctx.path_keys.pop_back();
            ctx.path_events.pop_back();
            return false;
        }
        if (!dfs(ctx, c.next, depth + 1, next_atk, proj2, matched2)) {
            ctx.path_keys.pop_back();
            ctx.path_events.pop_back();
            return false;
        }
        ctx.path_keys.pop_back();
        ctx.path_events.pop_back();
    }
    return true;
}

}  // namespace

IntegrityVerdict check_session_integrity(const World& w, const ExplorationBounds& b) {
    IntegrityVerdict v;
    Label la = w.attacker_lab();

    // Preconditions: statically well-formed actions, clean honest baseline.
    UserActionReport actions = check_user_actions(w.actions, w.env, w, la);
    if (!actions.ok()) {
        v.status = IntegrityVerdict::Status::PreconditionFailed;
        v.message = "user actions are not well-formed (condition " +
                    actions.violations.front().condition + ")";
        return v;
    }
    HonestRun honest = run_honest(w, b.max_steps);
    if (honest.budget_exceeded || (!honest.completed && honest.stuck)) {
        v.status = IntegrityVerdict::Status::BoundsTooSmall;
        v.message = honest.budget_exceeded
                        ? "the honest run does not fit within the step bound"
                        : "the honest run is stuck before consuming all actions";
        return v;
    }
    if (honest.error_event || honest.nondeterminism) {
        v.status = IntegrityVerdict::Status::PreconditionFailed;
        v.message = honest.error_event ? "the honest run produces an error event"
                                       : "the honest run is not deterministic";
        return v;
    }

    std::vector<LabelTrack> tracks;
    for (const auto& l : relevant_auth_labels(w)) {
        LabelTrack tr;
        tr.label = l;
        for (size_t i = 0; i < honest.trace.events.size(); ++i) {
            const Event& e = honest.trace.events[i];
            if (e.kind != Event::Kind::Auth) continue;
            if (e.browser_identity != "usr" && e.session_identity != "usr") continue;
            if (!e.label.equiv(l)) continue;
            tr.honest.push_back(e);
            tr.positions.push_back(i);
        }
        tracks.push_back(std::move(tr));
    }

    // Two passes: interception and response forgery first (where the classic
    // riding attacks live), then additionally the attacker's own requests.
    long explored_total = 0;
    bool clipped = false;
    for (bool with_requests : {false, true}) {
        SearchCtx ctx{w, b, tracks, {}, false, 0, false, with_requests, {}, {}, {}};
        std::vector<std::vector<Event>> proj(ctx.tracks.size());
        std::vector<size_t> matched(ctx.tracks.size(), 0);
        dfs(ctx, initial_state(w), 0, 0, proj, matched);
        explored_total += ctx.explored;
        clipped = clipped || ctx.clipped;
        if (ctx.done) {
            ctx.verdict.states_explored = explored_total;
            ctx.verdict.frontier_clipped = clipped;
            return ctx.verdict;
        }
    }
    v.status = IntegrityVerdict::Status::NoViolationWithinBound;
    v.states_explored = explored_total;
    v.frontier_clipped = clipped;
    v.message = "no violation within the exploration bounds";
    return v;
}

std::optional<Trace> replay_witness(const World& w, const std::vector<std::string>& keys,
                                    const ExplorationBounds& b) {
    SystemState s = initial_state(w);
    Trace t;
    for (const auto& key : keys) {
        std::vector<StepChoice> succ = enumerate_steps(w, s, StepMode::Full);
        auto atk = synthesize_messages(w, s, b);
        for (auto& c : atk) succ.push_back(std::move(c));
        bool found = false;
        for (auto& c : succ) {
            if (c.rule + "#" + c.key == key) {
                t.events.push_back(c.event);
                s = std::move(c.next);
                found = true;
                break;
            }
        }
        if (!found) return std::nullopt;
    }
    return t;
}

}  // namespace sessint
