#include "kga/graph.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace kga {

bool node_matches(const Node& node, const PropertyMap& match) {
    for (const auto& [k, v] : match) {
        auto it = node.properties.find(k);
        if (it == node.properties.end() || !(it->second == v)) return false;
    }
    return true;
}

namespace {

void check_label(const std::string& label) {
    if (label.empty()) throw GraphError("node label must not be empty");
}

void check_properties(const PropertyMap&) {
    // PropertyValue construction already rejects non-finite reals and nested
    // lists; nothing further to validate here.
}

template <typename Store>
MergeOutcome merge_impl(Store& store, const std::string& label, const PropertyMap& match,
                        const PropertyMap& set) {
    check_label(label);
    std::vector<NodeId> hits;
    for (NodeId id : store.node_ids()) {
        const Node* n = store.find_node(id);
        if (n->label == label && node_matches(*n, match)) hits.push_back(id);
    }
    if (hits.empty()) {
        PropertyMap props = match;
        for (const auto& [k, v] : set) props[k] = v;
        NodeId id = store.add_node(label, std::move(props));
        return MergeOutcome{id, true, false};
    }
    NodeId id = *std::min_element(hits.begin(), hits.end());
    store.update_node_properties(id, set);
    return MergeOutcome{id, false, hits.size() > 1};
}

// Ordered-map backend: nodes and relationships keyed by id with explicit
// adjacency indexes kept in step.
class PropertyGraphStore final : public GraphStore {
public:
    NodeId add_node(std::string label, PropertyMap properties) override {
        check_label(label);
        check_properties(properties);
        NodeId id = next_node_++;
        nodes_.emplace(id, Node{id, std::move(label), std::move(properties)});
        out_.emplace(id, std::vector<RelId>{});
        in_.emplace(id, std::vector<RelId>{});
        return id;
    }

    RelId add_relationship(NodeId source, NodeId target, std::string label,
                           PropertyMap properties) override {
        if (!nodes_.count(source))
            throw GraphError("unknown source node id " + std::to_string(source));
        if (!nodes_.count(target))
            throw GraphError("unknown target node id " + std::to_string(target));
        check_properties(properties);
        RelId id = next_rel_++;
        rels_.emplace(id, Relationship{id, source, target, std::move(label),
                                       std::move(properties)});
        out_[source].push_back(id);
        in_[target].push_back(id);
        return id;
    }

    MergeOutcome merge_node(const std::string& label, const PropertyMap& match,
                            const PropertyMap& set) override {
        return merge_impl(*this, label, match, set);
    }

    RemovalSummary remove_elements(const std::set<NodeId>& nodes,
                                   const std::set<RelId>& relationships) override {
        RemovalSummary summary;
        std::set<RelId> doomed;
        for (RelId id : relationships) {
            if (rels_.count(id)) doomed.insert(id);
            else summary.unknown_relationships.push_back(id);
        }
        for (NodeId id : nodes) {
            if (!nodes_.count(id)) {
                summary.unknown_nodes.push_back(id);
                continue;
            }
            for (RelId r : out_[id]) doomed.insert(r);
            for (RelId r : in_[id]) doomed.insert(r);
        }
        for (RelId id : doomed) {
            const Relationship& r = rels_.at(id);
            auto detach = [id](std::vector<RelId>& v) {
                v.erase(std::remove(v.begin(), v.end(), id), v.end());
            };
            detach(out_[r.source]);
            detach(in_[r.target]);
            rels_.erase(id);
        }
        summary.relationships_removed = doomed.size();
        for (NodeId id : nodes) {
            if (nodes_.erase(id)) {
                out_.erase(id);
                in_.erase(id);
                ++summary.nodes_removed;
            }
        }
        return summary;
    }

    void update_node_properties(NodeId id, const PropertyMap& set) override {
        auto it = nodes_.find(id);
        if (it == nodes_.end())
            throw GraphError("unknown node id " + std::to_string(id));
        for (const auto& [k, v] : set) it->second.properties[k] = v;
    }

    const Node* find_node(NodeId id) const override {
        auto it = nodes_.find(id);
        return it == nodes_.end() ? nullptr : &it->second;
    }

    const Relationship* find_relationship(RelId id) const override {
        auto it = rels_.find(id);
        return it == rels_.end() ? nullptr : &it->second;
    }

    std::size_t node_count() const override { return nodes_.size(); }
    std::size_t relationship_count() const override { return rels_.size(); }

    std::vector<NodeId> node_ids() const override {
        std::vector<NodeId> ids;
        ids.reserve(nodes_.size());
        for (const auto& [id, _] : nodes_) ids.push_back(id);
        return ids;
    }

    std::vector<RelId> relationship_ids() const override {
        std::vector<RelId> ids;
        ids.reserve(rels_.size());
        for (const auto& [id, _] : rels_) ids.push_back(id);
        return ids;
    }

    std::vector<RelId> out_edges(NodeId id) const override {
        auto it = out_.find(id);
        if (it == out_.end()) return {};
        auto v = it->second;
        std::sort(v.begin(), v.end());
        return v;
    }

    std::vector<RelId> in_edges(NodeId id) const override {
        auto it = in_.find(id);
        if (it == in_.end()) return {};
        auto v = it->second;
        std::sort(v.begin(), v.end());
        return v;
    }

    NodeId next_node_id() const override { return next_node_; }
    RelId next_relationship_id() const override { return next_rel_; }

    GraphState dump_state() const override {
        GraphState st;
        st.nodes.reserve(nodes_.size());
        for (const auto& [_, n] : nodes_) st.nodes.push_back(n);
        st.relationships.reserve(rels_.size());
        for (const auto& [_, r] : rels_) st.relationships.push_back(r);
        st.next_node_id = next_node_;
        st.next_relationship_id = next_rel_;
        return st;
    }

    void load_state(const GraphState& st) override {
        nodes_.clear();
        rels_.clear();
        out_.clear();
        in_.clear();
        for (const auto& n : st.nodes) {
            nodes_.emplace(n.id, n);
            out_.emplace(n.id, std::vector<RelId>{});
            in_.emplace(n.id, std::vector<RelId>{});
        }
        for (const auto& r : st.relationships) {
            rels_.emplace(r.id, r);
            out_[r.source].push_back(r.id);
            in_[r.target].push_back(r.id);
        }
        next_node_ = st.next_node_id;
        next_rel_ = st.next_relationship_id;
    }

    std::unique_ptr<GraphStore> clone() const override {
        auto copy = std::make_unique<PropertyGraphStore>();
        copy->load_state(dump_state());
        return copy;
    }

    StoreBackend backend() const override { return StoreBackend::PropertyGraph; }

private:
    std::map<NodeId, Node> nodes_;
    std::map<RelId, Relationship> rels_;
    std::map<NodeId, std::vector<RelId>> out_;
    std::map<NodeId, std::vector<RelId>> in_;
    NodeId next_node_ = 0;
    RelId next_rel_ = 0;
};

// Slot-vector backend: ids index directly into vectors, removals tombstone
// the slot, adjacency lives inline with each node entry.
class AdjacencyListStore final : public GraphStore {
public:
    NodeId add_node(std::string label, PropertyMap properties) override {
        check_label(label);
        check_properties(properties);
        NodeId id = static_cast<NodeId>(node_slots_.size());
        node_slots_.push_back(NodeSlot{Node{id, std::move(label), std::move(properties)}, {}, {}, true});
        return id;
    }

    RelId add_relationship(NodeId source, NodeId target, std::string label,
                           PropertyMap properties) override {
        if (!alive_node(source))
            throw GraphError("unknown source node id " + std::to_string(source));
        if (!alive_node(target))
            throw GraphError("unknown target node id " + std::to_string(target));
        check_properties(properties);
        RelId id = static_cast<RelId>(rel_slots_.size());
        rel_slots_.push_back(RelSlot{Relationship{id, source, target, std::move(label),
                                                  std::move(properties)}, true});
        node_slots_[source].out.push_back(id);
        node_slots_[target].in.push_back(id);
        return id;
    }

    MergeOutcome merge_node(const std::string& label, const PropertyMap& match,
                            const PropertyMap& set) override {
        return merge_impl(*this, label, match, set);
    }

    RemovalSummary remove_elements(const std::set<NodeId>& nodes,
                                   const std::set<RelId>& relationships) override {
        RemovalSummary summary;
        std::set<RelId> doomed;
        for (RelId id : relationships) {
            if (alive_rel(id)) doomed.insert(id);
            else summary.unknown_relationships.push_back(id);
        }
        for (NodeId id : nodes) {
            if (!alive_node(id)) {
                summary.unknown_nodes.push_back(id);
                continue;
            }
            for (RelId r : node_slots_[id].out) if (alive_rel(r)) doomed.insert(r);
            for (RelId r : node_slots_[id].in) if (alive_rel(r)) doomed.insert(r);
        }
        for (RelId id : doomed) {
            RelSlot& slot = rel_slots_[id];
            auto detach = [id](std::vector<RelId>& v) {
                v.erase(std::remove(v.begin(), v.end(), id), v.end());
            };
            detach(node_slots_[slot.rel.source].out);
            detach(node_slots_[slot.rel.target].in);
            slot.alive = false;
        }
        summary.relationships_removed = doomed.size();
        for (NodeId id : nodes) {
            if (alive_node(id)) {
                node_slots_[id].alive = false;
                node_slots_[id].out.clear();
                node_slots_[id].in.clear();
                ++summary.nodes_removed;
            }
        }
        return summary;
    }

    void update_node_properties(NodeId id, const PropertyMap& set) override {
        if (!alive_node(id)) throw GraphError("unknown node id " + std::to_string(id));
        for (const auto& [k, v] : set) node_slots_[id].node.properties[k] = v;
    }

    const Node* find_node(NodeId id) const override {
        return alive_node(id) ? &node_slots_[id].node : nullptr;
    }

    const Relationship* find_relationship(RelId id) const override {
        return alive_rel(id) ? &rel_slots_[id].rel : nullptr;
    }

    std::size_t node_count() const override {
        std::size_t n = 0;
        for (const auto& s : node_slots_) n += s.alive;
        return n;
    }

    std::size_t relationship_count() const override {
        std::size_t n = 0;
        for (const auto& s : rel_slots_) n += s.alive;
        return n;
    }

    std::vector<NodeId> node_ids() const override {
        std::vector<NodeId> ids;
        for (std::size_t i = 0; i < node_slots_.size(); ++i)
            if (node_slots_[i].alive) ids.push_back(static_cast<NodeId>(i));
        return ids;
    }

    std::vector<RelId> relationship_ids() const override {
        std::vector<RelId> ids;
        for (std::size_t i = 0; i < rel_slots_.size(); ++i)
            if (rel_slots_[i].alive) ids.push_back(static_cast<RelId>(i));
        return ids;
    }

    std::vector<RelId> out_edges(NodeId id) const override {
        if (!alive_node(id)) return {};
        auto v = node_slots_[id].out;
        std::sort(v.begin(), v.end());
        return v;
    }

    std::vector<RelId> in_edges(NodeId id) const override {
        if (!alive_node(id)) return {};
        auto v = node_slots_[id].in;
        std::sort(v.begin(), v.end());
        return v;
    }

    NodeId next_node_id() const override { return static_cast<NodeId>(node_slots_.size()); }
    RelId next_relationship_id() const override { return static_cast<RelId>(rel_slots_.size()); }

    GraphState dump_state() const override {
        GraphState st;
        for (const auto& s : node_slots_)
            if (s.alive) st.nodes.push_back(s.node);
        for (const auto& s : rel_slots_)
            if (s.alive) st.relationships.push_back(s.rel);
        st.next_node_id = next_node_id();
        st.next_relationship_id = next_relationship_id();
        return st;
    }

    void load_state(const GraphState& st) override {
        node_slots_.clear();
        rel_slots_.clear();
        node_slots_.resize(static_cast<std::size_t>(st.next_node_id));
        rel_slots_.resize(static_cast<std::size_t>(st.next_relationship_id));
        for (std::size_t i = 0; i < node_slots_.size(); ++i) {
            node_slots_[i].alive = false;
            node_slots_[i].node.id = static_cast<NodeId>(i);
        }
        for (std::size_t i = 0; i < rel_slots_.size(); ++i) {
            rel_slots_[i].alive = false;
            rel_slots_[i].rel.id = static_cast<RelId>(i);
        }
        for (const auto& n : st.nodes) {
            node_slots_[n.id] = NodeSlot{n, {}, {}, true};
        }
        for (const auto& r : st.relationships) {
            rel_slots_[r.id] = RelSlot{r, true};
            node_slots_[r.source].out.push_back(r.id);
            node_slots_[r.target].in.push_back(r.id);
        }
    }

    std::unique_ptr<GraphStore> clone() const override {
        auto copy = std::make_unique<AdjacencyListStore>();
        copy->node_slots_ = node_slots_;
        copy->rel_slots_ = rel_slots_;
        return copy;
    }

    StoreBackend backend() const override { return StoreBackend::AdjacencyList; }

private:
    struct NodeSlot {
        Node node;
        std::vector<RelId> out;
        std::vector<RelId> in;
        bool alive = false;
    };
    struct RelSlot {
        Relationship rel;
        bool alive = false;
    };

    bool alive_node(NodeId id) const {
        return id >= 0 && id < static_cast<NodeId>(node_slots_.size()) &&
               node_slots_[id].alive;
    }
    bool alive_rel(RelId id) const {
        return id >= 0 && id < static_cast<RelId>(rel_slots_.size()) &&
               rel_slots_[id].alive;
    }

    std::vector<NodeSlot> node_slots_;
    std::vector<RelSlot> rel_slots_;
};

} // namespace

std::unique_ptr<GraphStore> make_store(StoreBackend backend) {
    if (backend == StoreBackend::PropertyGraph)
        return std::make_unique<PropertyGraphStore>();
    return std::make_unique<AdjacencyListStore>();
}

std::string normalize_text(const std::string& s) {
    std::string out;
    bool in_space = true;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out += ' ';
            in_space = true;
        } else {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

double edit_similarity(const std::string& a, const std::string& b) {
    if (a.empty() && b.empty()) return 1.0;
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    double dist = static_cast<double>(prev[m]);
    return 1.0 - dist / static_cast<double>(std::max(n, m));
}

namespace {

// Duplicate test for one pair: shared scalar properties must agree exactly,
// shared text properties must agree after whitespace/case normalization,
// except the longest shared text property which only needs to clear the
// similarity threshold.
bool looks_duplicate(const Node& a, const Node& b, double threshold) {
    if (a.label != b.label) return false;
    std::vector<std::string> shared_text;
    for (const auto& [k, va] : a.properties) {
        auto it = b.properties.find(k);
        if (it == b.properties.end()) continue;
        const PropertyValue& vb = it->second;
        if (va.is_text() && vb.is_text()) {
            shared_text.push_back(k);
        } else if (!(va == vb)) {
            return false;
        }
    }
    if (shared_text.empty()) return false;
    std::string longest;
    std::size_t longest_len = 0;
    for (const auto& k : shared_text) {
        std::size_t len = std::max(a.properties.at(k).as_text().size(),
                                   b.properties.at(k).as_text().size());
        if (len >= longest_len) {
            longest_len = len;
            longest = k;
        }
    }
    for (const auto& k : shared_text) {
        const std::string& ta = a.properties.at(k).as_text();
        const std::string& tb = b.properties.at(k).as_text();
        if (k == longest) {
            if (edit_similarity(normalize_text(ta), normalize_text(tb)) < threshold)
                return false;
        } else if (normalize_text(ta) != normalize_text(tb)) {
            return false;
        }
    }
    return true;
}

} // namespace

std::vector<std::pair<NodeId, NodeId>>
find_duplicate_candidates(const GraphStore& graph, double threshold) {
    std::vector<std::pair<NodeId, NodeId>> pairs;
    auto ids = graph.node_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Node* a = graph.find_node(ids[i]);
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            const Node* b = graph.find_node(ids[j]);
            if (looks_duplicate(*a, *b, threshold)) pairs.emplace_back(ids[i], ids[j]);
        }
    }
    return pairs;
}

} // namespace kga
