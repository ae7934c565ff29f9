#pragma once

// Bounded exploration of attacker behaviors and the session-integrity
// verdict: every attacked trace's user-relevant auth projection must match a
// prefix of the deterministic honest trace.

#include <optional>
#include <string>
#include <vector>

#include "sessint/engine.hpp"

namespace sessint {

struct ExplorationBounds {
    int max_steps = 60;           // steps per explored trace
    int max_msg_fields = 6;       // synthesized fields per attacker message
    int max_branching = 48;       // successors expanded per state
    int max_attacker_moves = 2;   // attacker interactions per trace
    long max_states = 200000;     // total states expanded by the search
    int max_knowledge_names = 4;  // knowledge names used per synthesis slot
    std::vector<Value> pool;      // primitive value pool (defaults below)

    static ExplorationBounds defaults();
};

struct IntegrityVerdict {
    enum class Status {
        NoViolationWithinBound,
        Violation,
        BoundsTooSmall,      // the honest baseline itself exceeds the bounds
        PreconditionFailed,  // ill-formed user actions / dirty honest run
    } status = Status::NoViolationWithinBound;

    std::string message;

    // violation witness
    Trace witness;
    std::vector<std::string> witness_keys;  // replayable rule keys
    Label violated_label;
    std::vector<Event> honest_projection;
    std::vector<Event> attacked_projection;

    long states_explored = 0;
    bool frontier_clipped = false;
};

// Attacker moves available at a state: responses on intercepted connections
// (including the auto-submitting-script pattern) and requests to declared
// endpoints, all built from the knowledge set and the value pool.
std::vector<StepChoice> synthesize_messages(const World& w, const SystemState& s,
                                            const ExplorationBounds& b);

IntegrityVerdict check_session_integrity(const World& w, const ExplorationBounds& b);

// Re-executes a witness by its rule keys; returns the reproduced trace, or
// nothing if some key no longer matches.
std::optional<Trace> replay_witness(const World& w, const std::vector<std::string>& keys,
                                    const ExplorationBounds& b);

// The auth annotations of the world that the attacker cannot influence; the
// integrity property quantifies over exactly these.
std::vector<Label> relevant_auth_labels(const World& w);

}  // namespace sessint
