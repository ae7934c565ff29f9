#pragma once

// Text and structured report rendering for the check/attack/explain drivers.

#include <string>

#include "sessint/harness.hpp"
#include "sessint/typecheck.hpp"

namespace sessint {

struct CheckResult {
    WellFormednessReport wf;
    UserActionReport actions;
    bool honest_clean = false;  // user-action condition 2, via simulation
    std::string honest_note;
    ClusterVerdict cluster;
    bool ok() const { return wf.ok() && actions.ok() && honest_clean && cluster.ok(); }
};

CheckResult run_check(const World& w);

std::string render_check_text(const CheckResult& r, const World& w);
std::string render_check_json(const CheckResult& r, const World& w);

std::string render_attack_text(const IntegrityVerdict& v, const World& w);
std::string render_attack_json(const IntegrityVerdict& v, const World& w);

std::string render_derivation(const EndpointVerdict& v, const World& w);

}  // namespace sessint
