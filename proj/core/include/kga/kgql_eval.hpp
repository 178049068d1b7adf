#pragma once

#include <string>
#include <vector>

#include "kga/graph.hpp"
#include "kga/kgql.hpp"

namespace kga::kgql {

// Evaluation-time failure: unbound variable, RETURN in a write list, a
// MATCH-for-write that binds nothing, and similar.
class EvalError : public std::runtime_error {
public:
    explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<PropertyValue>> rows;
    bool operator==(const ResultTable&) const = default;
};

// Runs a read-only list (MATCH statements, final one carrying RETURN) and
// yields that final statement's table. Rows are ordered lexicographically by
// the tuple of bound node ids, columns by RETURN order. Never mutates.
ResultTable execute_read(const QueryList& q, const GraphStore& graph);

struct WriteSummary {
    int nodes_created = 0;
    int relationships_created = 0;
    int nodes_merged = 0;
    bool ambiguous_match = false;
    bool operator==(const WriteSummary&) const = default;
};

// Applies a write list (CREATE/MERGE, optionally prefixed by binding MATCH
// statements; RETURN is rejected). The list is atomic: any failure rolls the
// graph back to its pre-call state before the error propagates.
WriteSummary execute_write(const QueryList& q, GraphStore& graph);

// Groups statement lists into chains that may touch the same nodes. Two
// lists conflict when any of their node signatures (label plus the property
// keys used for matching or creation) could select a common node; an empty
// label or key set is treated as a wildcard. The analysis is conservative:
// lists it separates are guaranteed not to interact. Chains are returned as
// index groups, ascending within and across groups.
std::vector<std::vector<std::size_t>>
partition_independent(const std::vector<QueryList>& lists);

struct BatchItemOutcome {
    bool applied = false;
    WriteSummary summary;
    std::string error; // empty when applied
};

// Applies every list, collecting per-list outcomes instead of throwing; a
// failed list rolls back alone and later lists still run. With parallel set,
// independent chains are evaluated concurrently against clones of the input
// graph and their recorded mutations are replayed in list order, so the
// final graph bytes match the sequential run exactly.
std::vector<BatchItemOutcome>
execute_write_batch(const std::vector<QueryList>& lists, GraphStore& graph,
                    bool parallel);

} // namespace kga::kgql
