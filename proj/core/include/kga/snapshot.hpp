#pragma once

#include <string>

#include "kga/graph.hpp"

namespace kga {

// Canonical JSON snapshot of a graph. Ids are renumbered densely from 0 in
// ascending current-id order (i.e. insertion order), object keys are sorted,
// output is UTF-8 with two-space indentation and a trailing newline. Equal
// graphs always serialize to identical bytes.
std::string export_snapshot(const GraphStore& graph);

// Replaces the contents of `graph` with the snapshot in `doc`. Malformed
// JSON, schema violations, and relationship endpoints that name no node are
// rejected with SnapshotError; the target graph is modified only on success.
void import_snapshot(const std::string& doc, GraphStore& graph);

// Human-readable listing used inside prompts: nodes then relationships,
// grouped under "Label:" headers in first-appearance order.
std::string render_graph_text(const GraphStore& graph);

} // namespace kga
