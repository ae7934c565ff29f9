#pragma once

// The syntax-directed security type system: expressions, references,
// commands, forms, scripts and endpoints (typed twice, once per branch),
// with rule-level blame and optional derivation traces.

#include <optional>
#include <string>
#include <vector>

#include "sessint/ast.hpp"
#include "sessint/env.hpp"

namespace sessint {

enum class Branch : uint8_t { Hon, Csrf };
inline const char* branch_name(Branch b) { return b == Branch::Hon ? "hon" : "csrf"; }

struct BranchFailure {
    Branch branch;
    std::string rule;  // the typing rule whose premise failed
    Pos pos;
    std::string message;
};

struct DerivNode {
    Branch branch;
    int depth = 0;
    std::string rule;
    Pos pos;
    std::string note;  // session / pc after the rule
};

struct EndpointVerdict {
    Url url;
    bool ok = true;
    std::vector<BranchFailure> failures;  // at most one per branch
    std::vector<DerivNode> derivation;    // filled when requested
};

struct ClusterVerdict {
    bool env_ok = true;
    WellFormednessReport wf;
    std::vector<EndpointVerdict> endpoints;
    bool ok() const {
        if (!env_ok) return false;
        for (const auto& e : endpoints)
            if (!e.ok) return false;
        return true;
    }
};

struct TypeCheckOptions {
    bool record_derivation = false;
};

EndpointVerdict type_endpoint(const World& world, const Endpoint& ep,
                              TypeCheckOptions opts = {});
ClusterVerdict type_cluster(const World& world, TypeCheckOptions opts = {});

// Expression-level entry point used by tests: the minimal type of e in the
// given variable environment / session, or nothing with a message.
struct SynthResult {
    bool ok = false;
    bool is_undef = false;  // the undefined literal checks against any type
    SecType type;
    std::string error;
};
SynthResult synth_server_expr(const World& world, const std::map<std::string, SecType>& vars,
                              const std::optional<Label>& session, const ServerExprPtr& e);

}  // namespace sessint
