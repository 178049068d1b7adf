#include "kga/snapshot.hpp"

#include <map>

#include <nlohmann/json.hpp>

namespace kga {

using nlohmann::json;

std::string export_snapshot(const GraphStore& graph) {
    json doc;
    json nodes = json::array();
    std::map<NodeId, std::int64_t> remap;
    std::int64_t next = 0;
    for (NodeId id : graph.node_ids()) {
        const Node* n = graph.find_node(id);
        remap[id] = next;
        nodes.push_back({{"id", next}, {"label", n->label},
                         {"properties", property_map_to_json(n->properties)}});
        ++next;
    }
    json rels = json::array();
    std::int64_t next_rel = 0;
    for (RelId id : graph.relationship_ids()) {
        const Relationship* r = graph.find_relationship(id);
        rels.push_back({{"id", next_rel}, {"label", r->label},
                        {"properties", property_map_to_json(r->properties)},
                        {"source", remap.at(r->source)},
                        {"target", remap.at(r->target)}});
        ++next_rel;
    }
    doc["nodes"] = std::move(nodes);
    doc["relationships"] = std::move(rels);
    return doc.dump(2) + "\n";
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw SnapshotError(msg); }

const json& need(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(where + " is missing \"" + key + "\"");
    return *it;
}

std::int64_t need_int(const json& obj, const char* key, const std::string& where) {
    const json& v = need(obj, key, where);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        fail(where + " field \"" + key + "\" must be an integer");
    return v.get<std::int64_t>();
}

std::string need_string(const json& obj, const char* key, const std::string& where) {
    const json& v = need(obj, key, where);
    if (!v.is_string()) fail(where + " field \"" + key + "\" must be a string");
    return v.get<std::string>();
}

} // namespace

void import_snapshot(const std::string& doc, GraphStore& graph) {
    json j;
    try {
        j = json::parse(doc);
    } catch (const json::parse_error& e) {
        // nlohmann reports a 1-based byte position; convert for the message.
        std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
        auto [line, col] = line_col_at(doc, offset);
        fail("invalid JSON at " + std::to_string(line) + ":" + std::to_string(col) +
             ": " + e.what());
    }
    if (!j.is_object()) fail("snapshot root must be an object");
    const json& nodes = need(j, "nodes", "snapshot");
    const json& rels = need(j, "relationships", "snapshot");
    if (!nodes.is_array()) fail("\"nodes\" must be an array");
    if (!rels.is_array()) fail("\"relationships\" must be an array");

    GraphState st;
    std::map<std::int64_t, NodeId> seen;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const json& n = nodes[i];
        std::string where = "node[" + std::to_string(i) + "]";
        if (!n.is_object()) fail(where + " must be an object");
        std::int64_t id = need_int(n, "id", where);
        if (seen.count(id)) fail(where + " reuses id " + std::to_string(id));
        std::string label = need_string(n, "label", where);
        if (label.empty()) fail(where + " has an empty label");
        PropertyMap props;
        try {
            props = property_map_from_json(need(n, "properties", where));
        } catch (const GraphError& e) {
            fail(where + ": " + e.what());
        }
        seen[id] = id;
        st.nodes.push_back(Node{id, std::move(label), std::move(props)});
        st.next_node_id = std::max(st.next_node_id, id + 1);
    }
    for (std::size_t i = 0; i < rels.size(); ++i) {
        const json& r = rels[i];
        std::string where = "relationship[" + std::to_string(i) + "]";
        if (!r.is_object()) fail(where + " must be an object");
        std::int64_t id = need_int(r, "id", where);
        std::int64_t source = need_int(r, "source", where);
        std::int64_t target = need_int(r, "target", where);
        std::string label = need_string(r, "label", where);
        if (!seen.count(source))
            fail(where + " source " + std::to_string(source) + " names no node");
        if (!seen.count(target))
            fail(where + " target " + std::to_string(target) + " names no node");
        PropertyMap props;
        try {
            props = property_map_from_json(need(r, "properties", where));
        } catch (const GraphError& e) {
            fail(where + ": " + e.what());
        }
        st.relationships.push_back(Relationship{id, source, target, std::move(label),
                                                std::move(props)});
        st.next_relationship_id = std::max(st.next_relationship_id, id + 1);
    }
    graph.load_state(st);
}

namespace {

std::string render_properties(const PropertyMap& props) {
    std::string out = "{";
    bool first = true;
    for (const auto& [k, v] : props) {
        if (!first) out += ", ";
        first = false;
        out += "'" + k + "': " + v.display_quoted();
    }
    return out + "}";
}

} // namespace

std::string render_graph_text(const GraphStore& graph) {
    std::string out = "Existing Nodes:\n";
    std::vector<std::string> label_order;
    std::map<std::string, std::vector<NodeId>> by_label;
    for (NodeId id : graph.node_ids()) {
        const std::string& label = graph.find_node(id)->label;
        if (!by_label.count(label)) label_order.push_back(label);
        by_label[label].push_back(id);
    }
    for (const auto& label : label_order) {
        out += " Label: " + label + "\n";
        for (NodeId id : by_label[label]) {
            const Node* n = graph.find_node(id);
            out += "   {id: " + std::to_string(id) + ", properties: " +
                   render_properties(n->properties) + "}\n";
        }
    }
    out += "Existing Relationships:\n";
    std::vector<std::string> rel_label_order;
    std::map<std::string, std::vector<RelId>> rels_by_label;
    for (RelId id : graph.relationship_ids()) {
        std::string label = graph.find_relationship(id)->label;
        if (label.empty()) label = "None";
        if (!rels_by_label.count(label)) rel_label_order.push_back(label);
        rels_by_label[label].push_back(id);
    }
    for (const auto& label : rel_label_order) {
        out += " Label: " + label + "\n";
        for (RelId id : rels_by_label[label]) {
            const Relationship* r = graph.find_relationship(id);
            const Node* s = graph.find_node(r->source);
            const Node* t = graph.find_node(r->target);
            out += "   {source: {id: " + std::to_string(r->source) + ", label: " + s->label +
                   "}, target: {id: " + std::to_string(r->target) + ", label: " + t->label +
                   "}, properties: " + render_properties(r->properties) + "}\n";
        }
    }
    return out;
}

} // namespace kga
