#include "kga/kgql_eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <thread>

namespace kga::kgql {

namespace {

using Binding = std::map<std::string, NodeId>;

bool value_satisfies(CmpOp op, const PropertyValue& lhs, const PropertyValue& rhs) {
    auto c = PropertyValue::compare(lhs, rhs);
    if (!c) return false; // incomparable kinds never match
    switch (op) {
    case CmpOp::Eq: return *c == 0;
    case CmpOp::Ne: return *c != 0;
    case CmpOp::Lt: return *c < 0;
    case CmpOp::Gt: return *c > 0;
    case CmpOp::Le: return *c <= 0;
    case CmpOp::Ge: return *c >= 0;
    }
    return false;
}

const PropertyValue* resolve_operand(const Operand& op, const Binding& binding,
                                     const GraphStore& graph) {
    if (op.kind == Operand::Kind::Literal) return &op.literal;
    auto it = binding.find(op.variable);
    if (it == binding.end())
        throw EvalError("unbound variable '" + op.variable + "' in WHERE");
    const Node* n = graph.find_node(it->second);
    auto pit = n->properties.find(op.property);
    return pit == n->properties.end() ? nullptr : &pit->second;
}

bool eval_expr(const BoolExpr& e, const Binding& binding, const GraphStore& graph) {
    switch (e.kind) {
    case BoolExpr::Kind::Cmp: {
        const PropertyValue* lhs = resolve_operand(e.cmp->lhs, binding, graph);
        const PropertyValue* rhs = resolve_operand(e.cmp->rhs, binding, graph);
        if (!lhs || !rhs) return false; // missing property is a non-match
        return value_satisfies(e.cmp->op, *lhs, *rhs);
    }
    case BoolExpr::Kind::And:
        for (const auto& arg : e.args)
            if (!eval_expr(arg, binding, graph)) return false;
        return true;
    case BoolExpr::Kind::Or:
        for (const auto& arg : e.args)
            if (eval_expr(arg, binding, graph)) return true;
        return false;
    }
    return false;
}

bool node_fits_pattern(const Node& node, const NodePattern& pat) {
    if (!pat.label.empty() && node.label != pat.label) return false;
    return node_matches(node, pat.properties);
}

// Extends each candidate binding along one chain, depth-first over hops.
void match_chain_from(const GraphStore& graph, const PatternChain& chain,
                      std::size_t hop, NodeId current, Binding binding,
                      std::vector<Binding>& out) {
    if (hop == chain.rels.size()) {
        out.push_back(std::move(binding));
        return;
    }
    const RelPattern& rel = chain.rels[hop];
    const NodePattern& next_pat = chain.nodes[hop + 1];
    std::vector<RelId> edges = rel.direction == Direction::Out
                                   ? graph.out_edges(current)
                                   : graph.in_edges(current);
    for (RelId rid : edges) {
        const Relationship* r = graph.find_relationship(rid);
        if (!rel.label.empty() && r->label != rel.label) continue;
        NodeId next = rel.direction == Direction::Out ? r->target : r->source;
        const Node* n = graph.find_node(next);
        if (!node_fits_pattern(*n, next_pat)) continue;
        auto it = binding.find(next_pat.variable);
        if (!next_pat.variable.empty() && it != binding.end() && it->second != next)
            continue;
        Binding extended = binding;
        if (!next_pat.variable.empty()) extended[next_pat.variable] = next;
        match_chain_from(graph, chain, hop + 1, next, std::move(extended), out);
    }
}

std::vector<Binding> match_chain(const GraphStore& graph, const PatternChain& chain,
                                 const std::vector<Binding>& seeds) {
    std::vector<Binding> out;
    const NodePattern& first = chain.nodes[0];
    for (const Binding& seed : seeds) {
        std::vector<NodeId> starts;
        auto bound = first.variable.empty() ? seed.end() : seed.find(first.variable);
        if (bound != seed.end()) {
            const Node* n = graph.find_node(bound->second);
            if (n && node_fits_pattern(*n, first)) starts.push_back(bound->second);
        } else {
            for (NodeId id : graph.node_ids())
                if (node_fits_pattern(*graph.find_node(id), first)) starts.push_back(id);
        }
        for (NodeId id : starts) {
            Binding binding = seed;
            if (!first.variable.empty()) binding[first.variable] = id;
            match_chain_from(graph, chain, 0, id, std::move(binding), out);
        }
    }
    return out;
}

// Appends variables of `stmt` to `order` in first-appearance order; the
// accumulated order fixes the lexicographic sort key for binding rows.
void note_variables(const MatchStatement& stmt, std::vector<std::string>& order) {
    for (const auto& chain : stmt.patterns)
        for (const auto& node : chain.nodes)
            if (!node.variable.empty() &&
                std::find(order.begin(), order.end(), node.variable) == order.end())
                order.push_back(node.variable);
}

void sort_rows(std::vector<Binding>& rows, const std::vector<std::string>& order) {
    auto key = [&](const Binding& b) {
        std::vector<NodeId> ids;
        ids.reserve(order.size());
        for (const auto& v : order) {
            auto it = b.find(v);
            ids.push_back(it == b.end() ? -1 : it->second);
        }
        return ids;
    };
    std::stable_sort(rows.begin(), rows.end(),
                     [&](const Binding& a, const Binding& b) { return key(a) < key(b); });
}

// One MATCH statement over a set of seed bindings: extend along every chain,
// then filter by WHERE. Row multiplicity follows path multiplicity (parallel
// edges yield repeated binding rows).
std::vector<Binding> evaluate_match(const MatchStatement& stmt, const GraphStore& graph,
                                    std::vector<Binding> rows) {
    for (const auto& chain : stmt.patterns) rows = match_chain(graph, chain, rows);
    if (stmt.where) {
        std::vector<Binding> kept;
        for (auto& b : rows)
            if (eval_expr(*stmt.where, b, graph)) kept.push_back(std::move(b));
        rows = std::move(kept);
    }
    return rows;
}

ResultTable project(const MatchStatement& stmt, const GraphStore& graph,
                    const std::vector<Binding>& rows) {
    ResultTable table;
    bool has_count = false;
    for (const auto& item : stmt.returns) {
        has_count = has_count || item.is_count;
        std::string col = item.alias;
        if (col.empty())
            col = item.is_count ? "COUNT(" + item.variable + ")"
                                : item.variable + "." + item.property;
        table.columns.push_back(col);
    }
    if (has_count) {
        if (stmt.returns.size() != 1)
            throw EvalError("COUNT must be the only RETURN item");
        table.rows.push_back({PropertyValue::integer(static_cast<std::int64_t>(rows.size()))});
        return table;
    }
    for (const auto& binding : rows) {
        std::vector<PropertyValue> cells;
        for (const auto& item : stmt.returns) {
            auto it = binding.find(item.variable);
            if (it == binding.end())
                throw EvalError("unbound variable '" + item.variable + "' in RETURN");
            const Node* n = graph.find_node(it->second);
            auto pit = n->properties.find(item.property);
            // A projected property the node lacks renders as empty text.
            cells.push_back(pit == n->properties.end() ? PropertyValue::text("")
                                                       : pit->second);
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

// Mutation recording so the parallel batch can replay a chain's effects onto
// the real graph in original list order.
struct RecordedOp {
    enum class Kind { CreateNode, CreateRel, MergeUpdate };
    Kind kind = Kind::CreateNode;
    NodeId node = 0;      // clone-local id created (CreateNode) or updated (MergeUpdate)
    NodeId source = 0;    // CreateRel endpoints, clone-local
    NodeId target = 0;
    std::string label;
    PropertyMap properties; // node/rel properties, or merge set-map
};

struct Recorder {
    std::vector<RecordedOp>* ops = nullptr;

    void created_node(NodeId id, const std::string& label, const PropertyMap& props) {
        if (ops) ops->push_back({RecordedOp::Kind::CreateNode, id, 0, 0, label, props});
    }
    void created_rel(NodeId src, NodeId dst, const std::string& label,
                     const PropertyMap& props) {
        if (ops) ops->push_back({RecordedOp::Kind::CreateRel, 0, src, dst, label, props});
    }
    void merged_into(NodeId id, const PropertyMap& set) {
        if (ops) ops->push_back({RecordedOp::Kind::MergeUpdate, id, 0, 0, "", set});
    }
};

WriteSummary apply_write(const QueryList& q, GraphStore& graph, Recorder rec) {
    bool has_mutation = false;
    for (const auto& stmt : q.statements) {
        if (std::holds_alternative<MatchStatement>(stmt)) {
            if (!std::get<MatchStatement>(stmt).returns.empty())
                throw EvalError("RETURN is not allowed in a write list");
        } else {
            has_mutation = true;
        }
    }
    if (!has_mutation) throw EvalError("write list has no CREATE or MERGE");

    WriteSummary summary;
    Binding env;
    std::vector<std::string> var_order;
    for (const auto& stmt : q.statements) {
        if (const auto* m = std::get_if<MatchStatement>(&stmt)) {
            note_variables(*m, var_order);
            auto rows = evaluate_match(*m, graph, {env});
            sort_rows(rows, var_order);
            rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
            if (rows.empty()) throw EvalError("MATCH in write list bound nothing");
            if (rows.size() > 1) summary.ambiguous_match = true;
            env = rows.front(); // lowest binding tuple after sorting
            continue;
        }
        if (const auto* c = std::get_if<CreateStatement>(&stmt)) {
            for (const auto& chain : c->patterns) {
                std::vector<NodeId> ids(chain.nodes.size());
                for (std::size_t i = 0; i < chain.nodes.size(); ++i) {
                    const NodePattern& pat = chain.nodes[i];
                    auto bound = pat.variable.empty() ? env.end() : env.find(pat.variable);
                    if (bound != env.end()) {
                        if (!pat.label.empty() || !pat.properties.empty())
                            throw EvalError("variable '" + pat.variable +
                                            "' is already bound; reference it bare");
                        ids[i] = bound->second;
                        continue;
                    }
                    if (pat.label.empty())
                        throw EvalError(pat.variable.empty()
                                            ? "CREATE node needs a label"
                                            : "unbound variable '" + pat.variable +
                                                  "' in CREATE needs a label");
                    ids[i] = graph.add_node(pat.label, pat.properties);
                    rec.created_node(ids[i], pat.label, pat.properties);
                    ++summary.nodes_created;
                    if (!pat.variable.empty()) env[pat.variable] = ids[i];
                }
                for (std::size_t i = 0; i < chain.rels.size(); ++i) {
                    const RelPattern& rel = chain.rels[i];
                    if (rel.label.empty())
                        throw EvalError("CREATE relationship needs a label");
                    NodeId src = rel.direction == Direction::Out ? ids[i] : ids[i + 1];
                    NodeId dst = rel.direction == Direction::Out ? ids[i + 1] : ids[i];
                    graph.add_relationship(src, dst, rel.label, {});
                    rec.created_rel(src, dst, rel.label, {});
                    ++summary.relationships_created;
                }
            }
            continue;
        }
        const auto& m = std::get<MergeStatement>(stmt);
        if (m.node.label.empty()) throw EvalError("MERGE node needs a label");
        MergeOutcome out = graph.merge_node(m.node.label, m.node.properties, {});
        if (out.created) {
            rec.created_node(out.id, m.node.label, m.node.properties);
            ++summary.nodes_created;
        } else {
            rec.merged_into(out.id, {});
            ++summary.nodes_merged;
            if (out.ambiguous) summary.ambiguous_match = true;
        }
        if (!m.node.variable.empty()) env[m.node.variable] = out.id;
    }
    return summary;
}

} // namespace

ResultTable execute_read(const QueryList& q, const GraphStore& graph) {
    if (q.statements.empty()) throw EvalError("empty query");
    std::vector<const MatchStatement*> stmts;
    for (const auto& stmt : q.statements) {
        const auto* m = std::get_if<MatchStatement>(&stmt);
        if (!m) throw EvalError("read query must contain only MATCH statements");
        if (!m->returns.empty() && &stmt != &q.statements.back())
            throw EvalError("RETURN is only allowed on the final statement");
        stmts.push_back(m);
    }
    if (stmts.back()->returns.empty()) throw EvalError("read query needs a RETURN");

    // Successive MATCH statements refine the same binding rows.
    std::vector<Binding> rows{Binding{}};
    std::vector<std::string> var_order;
    for (const auto* m : stmts) {
        note_variables(*m, var_order);
        rows = evaluate_match(*m, graph, std::move(rows));
    }
    sort_rows(rows, var_order);
    return project(*stmts.back(), graph, rows);
}

WriteSummary execute_write(const QueryList& q, GraphStore& graph) {
    GraphState before = graph.dump_state();
    try {
        return apply_write(q, graph, Recorder{});
    } catch (...) {
        graph.load_state(before);
        throw;
    }
}

namespace {

struct NodeSignature {
    std::string label;               // empty means wildcard
    std::set<std::string> keys;      // empty means wildcard
};

// Could two signatures select or describe the same node?
bool signatures_conflict(const NodeSignature& a, const NodeSignature& b) {
    if (!a.label.empty() && !b.label.empty() && a.label != b.label) return false;
    if (a.keys.empty() || b.keys.empty()) return true;
    for (const auto& k : a.keys)
        if (b.keys.count(k)) return true;
    return false;
}

void collect_where_keys(const BoolExpr& e,
                        std::map<std::string, std::set<std::string>>& var_keys) {
    if (e.kind == BoolExpr::Kind::Cmp) {
        for (const Operand* op : {&e.cmp->lhs, &e.cmp->rhs})
            if (op->kind == Operand::Kind::Property)
                var_keys[op->variable].insert(op->property);
        return;
    }
    for (const auto& arg : e.args) collect_where_keys(arg, var_keys);
}

std::vector<NodeSignature> list_signatures(const QueryList& q) {
    std::vector<NodeSignature> sigs;
    auto add_pattern = [&](const NodePattern& pat,
                           const std::map<std::string, std::set<std::string>>& extra) {
        NodeSignature sig;
        sig.label = pat.label;
        for (const auto& [k, _] : pat.properties) sig.keys.insert(k);
        if (!pat.variable.empty()) {
            auto it = extra.find(pat.variable);
            if (it != extra.end())
                sig.keys.insert(it->second.begin(), it->second.end());
        }
        sigs.push_back(std::move(sig));
    };
    for (const auto& stmt : q.statements) {
        std::map<std::string, std::set<std::string>> where_keys;
        if (const auto* m = std::get_if<MatchStatement>(&stmt)) {
            if (m->where) collect_where_keys(*m->where, where_keys);
            for (const auto& chain : m->patterns)
                for (const auto& node : chain.nodes) add_pattern(node, where_keys);
        } else if (const auto* c = std::get_if<CreateStatement>(&stmt)) {
            for (const auto& chain : c->patterns)
                for (const auto& node : chain.nodes)
                    if (node.properties.empty() && node.label.empty() &&
                        !node.variable.empty()) {
                        // bound reference, covered by its binding statement
                    } else {
                        add_pattern(node, {});
                    }
        } else {
            add_pattern(std::get<MergeStatement>(stmt).node, {});
        }
    }
    return sigs;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

} // namespace

std::vector<std::vector<std::size_t>>
partition_independent(const std::vector<QueryList>& lists) {
    std::vector<std::vector<NodeSignature>> sigs;
    sigs.reserve(lists.size());
    for (const auto& q : lists) sigs.push_back(list_signatures(q));

    UnionFind uf(lists.size());
    for (std::size_t i = 0; i < lists.size(); ++i) {
        for (std::size_t j = i + 1; j < lists.size(); ++j) {
            bool conflict = false;
            for (const auto& a : sigs[i]) {
                for (const auto& b : sigs[j]) {
                    if (signatures_conflict(a, b)) {
                        conflict = true;
                        break;
                    }
                }
                if (conflict) break;
            }
            if (conflict) uf.unite(i, j);
        }
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < lists.size(); ++i) groups[uf.find(i)].push_back(i);
    std::vector<std::vector<std::size_t>> chains;
    chains.reserve(groups.size());
    for (auto& [_, members] : groups) chains.push_back(std::move(members));
    return chains;
}

std::vector<BatchItemOutcome>
execute_write_batch(const std::vector<QueryList>& lists, GraphStore& graph,
                    bool parallel) {
    std::vector<BatchItemOutcome> outcomes(lists.size());
    if (!parallel) {
        for (std::size_t i = 0; i < lists.size(); ++i) {
            try {
                outcomes[i].summary = execute_write(lists[i], graph);
                outcomes[i].applied = true;
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
        return outcomes;
    }

    auto chains = partition_independent(lists);
    std::vector<std::vector<RecordedOp>> recorded(lists.size());

    // Phase 1: evaluate each chain against a clone of the current graph,
    // recording the primitive mutations each list produces.
    auto run_chain = [&](const std::vector<std::size_t>& chain) {
        auto clone = graph.clone();
        for (std::size_t idx : chain) {
            GraphState before = clone->dump_state();
            try {
                Recorder rec{&recorded[idx]};
                outcomes[idx].summary = apply_write(lists[idx], *clone, rec);
                outcomes[idx].applied = true;
            } catch (const std::exception& e) {
                clone->load_state(before);
                recorded[idx].clear();
                outcomes[idx].error = e.what();
            }
        }
    };
    if (chains.size() <= 1) {
        for (const auto& chain : chains) run_chain(chain);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(chains.size());
        for (const auto& chain : chains)
            threads.emplace_back([&run_chain, &chain] { run_chain(chain); });
        for (auto& t : threads) t.join();
    }

    // Phase 2: replay recorded mutations in original list order so ids land
    // exactly as a sequential run would assign them.
    NodeId base_next = graph.next_node_id();
    std::vector<std::map<NodeId, NodeId>> clone_to_real(chains.size());
    std::vector<std::size_t> chain_of(lists.size(), 0);
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (std::size_t idx : chains[c]) chain_of[idx] = c;

    for (std::size_t idx = 0; idx < lists.size(); ++idx) {
        if (!outcomes[idx].applied) continue;
        auto& remap = clone_to_real[chain_of[idx]];
        auto real_id = [&](NodeId clone_id) {
            if (clone_id < base_next) return clone_id;
            return remap.at(clone_id);
        };
        for (const auto& op : recorded[idx]) {
            switch (op.kind) {
            case RecordedOp::Kind::CreateNode:
                remap[op.node] = graph.add_node(op.label, op.properties);
                break;
            case RecordedOp::Kind::CreateRel:
                graph.add_relationship(real_id(op.source), real_id(op.target), op.label,
                                       op.properties);
                break;
            case RecordedOp::Kind::MergeUpdate:
                graph.update_node_properties(real_id(op.node), op.properties);
                break;
            }
        }
    }
    return outcomes;
}

} // namespace kga::kgql
