#pragma once

// Static well-formedness of typing environments (the eight conditions on URL
// and cookie type assignments) and of honest user-action lists.

#include <string>
#include <vector>

#include "sessint/ast.hpp"

namespace sessint {

struct WfViolation {
    std::string condition;  // "1a", "1b-i", "1b-ii", "2a", "2b", "2c", "2d"
    std::string subject;    // offending URL or cookie
    std::string detail;     // the failing query, printed
};

struct WellFormednessReport {
    std::vector<WfViolation> violations;
    bool ok() const { return violations.empty(); }
};

// Evaluates all conditions against the world's label assignment and the
// attacker. Condition 2b quantifies over the declared URL types plus one
// synthetic URL per scheme/domain pair of the universe.
WellFormednessReport check_wellformed_env(const TypingEnv& env, const World& world);

struct ActionViolation {
    std::string condition;  // "1" or "3"
    size_t action_index;
    std::string detail;
};

struct UserActionReport {
    std::vector<ActionViolation> violations;
    // Condition 2 (error-free terminating honest run) needs the engine; it is
    // reported as a separate status until a simulation result is supplied.
    bool requires_simulation = true;
    bool ok() const { return violations.empty(); }
};

UserActionReport check_user_actions(const std::vector<UserAction>& actions, const TypingEnv& env,
                                    const World& world, const Label& attacker);

}  // namespace sessint
