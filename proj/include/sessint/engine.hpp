#pragma once

// Executable small-step semantics: browser, servers and the attacked-system
// composition, with cookie filtering, HSTS enforcement and a deterministic
// honest-run driver.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sessint/ast.hpp"

namespace sessint {

using Memory = std::map<std::string, Value>;

struct ReqMsg {
    std::string browser_identity;
    NameId conn = 0;
    Url url;
    std::map<int, Value> params;
    Memory cookies;
    std::optional<SL> origin;  // nullopt = blank origin
};

struct RespMsg {
    NameId conn = 0;
    Url url;  // the responding endpoint
    std::optional<Url> redirect;
    std::vector<Value> redirect_params;
    Memory cookies;
    Page page;
    ScriptPtr script;
};

struct Event {
    enum class Kind : uint8_t { Silent, Error, Auth, AtkReq, AtkResp } kind = Kind::Silent;
    // Auth payload
    std::vector<Value> values;
    std::string browser_identity;
    std::string session_identity;
    Label label;
    std::string detail;  // rendered form for request/response events

    static Event silent() { return {}; }
    static Event error() {
        Event e;
        e.kind = Kind::Error;
        return e;
    }
};

struct Trace {
    std::vector<Event> events;
    bool unattacked() const {
        for (const auto& e : events)
            if (e.kind == Event::Kind::AtkReq || e.kind == Event::Kind::AtkResp) return false;
        return true;
    }
};

std::string event_repr(const Event& e, const World& w);
std::string trace_dump(const Trace& t, const World& w);

// ---- runtime state -------------------------------------------------------------

struct ServerThread {
    CommandPtr cmd;
    NameId conn = 0;
    Url url;
    std::string browser_identity;
    std::optional<SL> origin;
    NameId global_mem = 0;
    std::optional<NameId> session_mem;
};

struct ServerState {
    std::map<NameId, Memory> globals;   // per-request global memories
    std::map<NameId, Memory> sessions;  // session memories
    std::map<NameId, std::string> trust;
    std::vector<ServerThread> running;
};

struct BrowserConn {
    NameId id = 0;
    int tab = 0;
    Url url;
    std::optional<SL> origin;
};

struct BrowserState {
    std::optional<BrowserConn> conn;  // at most one open connection
    Memory jar;
    std::map<int, std::pair<Url, Page>> pages;
    std::optional<std::pair<int, ScriptPtr>> task;
    std::optional<ReqMsg> queue;  // output queue of size one
    size_t next_action = 0;
    bool halted = false;  // an error page was rendered
    std::string identity = "usr";
};

struct SystemState {
    BrowserState browser;
    std::map<int, ServerState> servers;  // keyed by domain
    std::set<NameId> knowledge;
    std::optional<RespMsg> pending_timeout;
    NameId next_name = 1;
};

SystemState initial_state(const World& w);

// ---- cookie filtering ------------------------------------------------------------

// get: the cookies attached to a request to u; upd: the jar after a response
// from u sets ck (integrity-filtered, right-biased).
Memory cookies_for_request(const World& w, const Memory& jar, const Url& u);
Memory update_jar(const World& w, const Memory& jar, const Url& u, const Memory& ck);

// ---- stepping ---------------------------------------------------------------------

struct StepChoice {
    std::string rule;  // semantic rule(s) realizing the step
    std::string key;   // stable identifier for replay
    Event event;
    SystemState next;
};

enum class StepMode : uint8_t {
    Honest,  // no attacker interaction: A-Nil / A-BroSer / A-SerBro / A-Timeout
    Full     // additionally the interception rules (A-BroAtk, A-SerAtk)
};

std::vector<StepChoice> enumerate_steps(const World& w, const SystemState& s, StepMode mode);

// Attacker-synthesized messages (A-AtkBro / A-AtkSer); premises are checked
// and nullopt is returned when the rule does not apply.
std::optional<StepChoice> attacker_respond(const World& w, const SystemState& s, const RespMsg& m);
std::optional<StepChoice> attacker_request(const World& w, const SystemState& s, const ReqMsg& m);

std::set<NameId> fnames_of(const ReqMsg& m);
std::set<NameId> fnames_of(const RespMsg& m);

// Server expression evaluation (exposed for tests). Returns nothing when no
// rule applies (session read without a session, free variable).
std::optional<Value> eval_server_expr(const ServerState& server, NameId global_mem,
                                      std::optional<NameId> session_mem, const ServerExprPtr& e,
                                      NameId& name_counter);

// ---- honest runs -------------------------------------------------------------------

struct HonestRun {
    Trace trace;
    SystemState final_state;
    bool completed = false;        // all actions consumed, system quiescent
    bool stuck = false;            // no applicable rule with actions remaining
    bool nondeterminism = false;   // two non-commuting rules enabled
    bool budget_exceeded = false;
    bool error_event = false;
    std::vector<std::string> monitor_violations;  // runtime annotation monitor
};

HonestRun run_honest(const World& w, int budget = 20000, bool monitor = false);

// Projection of a trace onto the auth events of an identity at a label.
std::vector<Event> project(const Trace& t, const std::string& identity, const Label& l);

// Canonical renaming of the names in a projected event list by first
// occurrence, so traces equal up to a fresh-name bijection print identically.
std::string canonical_projection(const std::vector<Event>& events, const World& w);

// Best-effort canonical encoding of a whole state (memoization key).
std::string canonical_state(const SystemState& s, const World& w);

}  // namespace sessint
