#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "kga/value.hpp"

namespace kga {

using NodeId = std::int64_t;
using RelId = std::int64_t;

struct Node {
    NodeId id = 0;
    std::string label;
    PropertyMap properties;
};

struct Relationship {
    RelId id = 0;
    NodeId source = 0;
    NodeId target = 0;
    std::string label; // may be empty, rendered as "None"
    PropertyMap properties;
};

struct MergeOutcome {
    NodeId id = 0;
    bool created = false;
    bool ambiguous = false; // multiple matches existed, lowest id was updated
};

struct RemovalSummary {
    std::size_t nodes_removed = 0;
    std::size_t relationships_removed = 0; // includes cascaded edges
    std::vector<NodeId> unknown_nodes;
    std::vector<RelId> unknown_relationships;
};

// Neutral dump of store contents, used for cloning and atomic rollback.
struct GraphState {
    std::vector<Node> nodes;
    std::vector<Relationship> relationships;
    NodeId next_node_id = 0;
    RelId next_relationship_id = 0;
};

enum class StoreBackend { PropertyGraph, AdjacencyList };

// Mutable directed labeled multigraph. Node and relationship ids are dense
// integers assigned in insertion order; removal leaves gaps that only the
// snapshot exporter renumbers. Parallel edges and self-loops are allowed.
class GraphStore {
public:
    virtual ~GraphStore() = default;

    virtual NodeId add_node(std::string label, PropertyMap properties) = 0;
    virtual RelId add_relationship(NodeId source, NodeId target, std::string label,
                                   PropertyMap properties) = 0;
    // Finds nodes with `label` whose properties contain every pair in `match`.
    // No match: creates a node with match+set. One match: applies `set`.
    // Several matches: applies `set` to the lowest id and flags the outcome.
    virtual MergeOutcome merge_node(const std::string& label, const PropertyMap& match,
                                    const PropertyMap& set) = 0;
    virtual RemovalSummary remove_elements(const std::set<NodeId>& nodes,
                                           const std::set<RelId>& relationships) = 0;
    virtual void update_node_properties(NodeId id, const PropertyMap& set) = 0;

    virtual const Node* find_node(NodeId id) const = 0;
    virtual const Relationship* find_relationship(RelId id) const = 0;
    virtual std::size_t node_count() const = 0;
    virtual std::size_t relationship_count() const = 0;
    virtual std::vector<NodeId> node_ids() const = 0;               // ascending
    virtual std::vector<RelId> relationship_ids() const = 0;        // ascending
    virtual std::vector<RelId> out_edges(NodeId id) const = 0;      // ascending rel ids
    virtual std::vector<RelId> in_edges(NodeId id) const = 0;

    virtual NodeId next_node_id() const = 0;
    virtual RelId next_relationship_id() const = 0;

    virtual GraphState dump_state() const = 0;
    virtual void load_state(const GraphState& state) = 0;

    virtual std::unique_ptr<GraphStore> clone() const = 0;
    virtual StoreBackend backend() const = 0;
};

std::unique_ptr<GraphStore> make_store(StoreBackend backend);

// True when the node carries every property in `match` with equal values.
bool node_matches(const Node& node, const PropertyMap& match);

// Pairs of node ids that look like duplicates: same label, equal shared
// non-text properties, near-equal shared text (normalized edit similarity of
// the longest shared text property >= threshold). Pairs come back with
// first < second, ordered ascending.
std::vector<std::pair<NodeId, NodeId>>
find_duplicate_candidates(const GraphStore& graph, double threshold = 0.9);

// Similarity helper: 1 - levenshtein(a, b) / max(len); 1.0 for two empties.
double edit_similarity(const std::string& a, const std::string& b);

// Lowercases ASCII, trims, and collapses whitespace runs to single spaces.
std::string normalize_text(const std::string& s);

} // namespace kga
