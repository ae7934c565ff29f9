#pragma once

// Parser for .ws world files and the shared label syntax, plus the
// pretty-printer used by round-trip tests and report rendering.

#include <stdexcept>
#include <string>

#include "sessint/ast.hpp"

namespace sessint {

struct ParseError : std::runtime_error {
    Pos pos;
    ParseError(const std::string& msg, Pos p)
        : std::runtime_error(p.known() ? p.str() + ": " + msg : msg), pos(p) {}
};

// Parses and validates a whole world file. Throws ParseError on lexical,
// syntactic or semantic load errors (duplicate endpoints, unknown domains,
// unbound variables, ill-formed cookie specs, ...).
World parse_world(const std::string& text);
World parse_world_file(const std::string& path);

// Renders a world back to concrete syntax; parse(print(w)) reproduces the
// same AST up to positions.
std::string print_world(const World& w);

std::string print_command(const CommandPtr& c, const World& w, int indent = 0);
std::string print_server_expr(const ServerExprPtr& e, const World& w);
std::string print_script(const ScriptPtr& s, const World& w);

}  // namespace sessint
