#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "kga/error.hpp"
#include "kga/graph.hpp"
#include "kga/value.hpp"

// Small expression language for answer extraction: `let` bindings followed
// by a final `result = <expr>`. It can read the task graph through accessor
// functions but cannot mutate it, reach the filesystem, or loop unboundedly;
// every evaluation step is counted against a budget and a wall-clock
// deadline, and all runtime errors are trapped.
namespace kga::script {

struct Expr {
    enum class Kind { Literal, Var, Unary, Binary, Call, Lambda };
    Kind kind = Kind::Literal;
    PropertyValue literal; // Literal
    std::string name;      // Var name, Call callee, operator text, Lambda param
    std::vector<Expr> args;
    bool operator==(const Expr&) const = default;
};

struct Program {
    std::vector<std::pair<std::string, Expr>> lets;
    Expr result;
    bool operator==(const Program&) const = default;
};

// Throws kga::ParseError on malformed text. `parse_expression` accepts a
// bare expression (what eval_math consumes).
Program parse_program(const std::string& src);
Expr parse_expression(const std::string& src);

// Canonical rendering; parse(print(p)) == p.
std::string print_program(const Program& p);
std::string print_expression(const Expr& e);

struct Limits {
    std::int64_t step_budget = 10000;
    std::chrono::milliseconds timeout{5000};
};

// Trapped runtime failure carrying the step at which evaluation stopped.
class EvalError : public std::runtime_error {
public:
    EvalError(const std::string& what, std::int64_t step)
        : std::runtime_error(what), step_(step) {}
    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

struct RunStats {
    std::int64_t steps = 0;
};

// Evaluates the program against a read-only view of `graph` (pass nullptr
// for pure computation; graph accessors then trap). Throws EvalError on any
// trapped error, budget exhaustion, or timeout.
PropertyValue run_program(const Program& p, const GraphStore* graph,
                          const Limits& limits = {}, RunStats* stats = nullptr);

// Arithmetic helper for answer post-processing: parses and evaluates a bare
// expression (or a full program) with no graph attached. Integer-only input
// with integer-closed operations yields an integer.
PropertyValue eval_math(const std::string& text, const Limits& limits = {});

} // namespace kga::script
