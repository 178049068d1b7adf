#include "kga/kgql.hpp"

namespace kga::kgql {

namespace {

std::string print_literal(const PropertyValue& v) {
    switch (v.kind()) {
    case PropertyValue::Kind::Text: {
        std::string out = "\"";
        for (char c : v.as_text()) {
            switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c; break;
            }
        }
        return out + "\"";
    }
    case PropertyValue::Kind::List: {
        std::string out = "[";
        const auto& xs = v.as_list();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i) out += ", ";
            out += print_literal(xs[i]);
        }
        return out + "]";
    }
    default:
        return v.display();
    }
}

std::string print_property_map(const PropertyMap& props) {
    std::string out = "{";
    bool first = true;
    for (const auto& [k, v] : props) {
        if (!first) out += ", ";
        first = false;
        out += k + ": " + print_literal(v);
    }
    return out + "}";
}

std::string print_node(const NodePattern& node) {
    std::string out = "(" + node.variable;
    if (!node.label.empty()) out += ":" + node.label;
    if (!node.properties.empty()) {
        if (!node.variable.empty() || !node.label.empty()) out += " ";
        out += print_property_map(node.properties);
    }
    return out + ")";
}

std::string print_chain(const PatternChain& chain) {
    std::string out = print_node(chain.nodes[0]);
    for (std::size_t i = 0; i < chain.rels.size(); ++i) {
        const RelPattern& rel = chain.rels[i];
        std::string body = "[" + (rel.label.empty() ? "" : ":" + rel.label) + "]";
        if (rel.direction == Direction::Out) out += "-" + body + "->";
        else out += "<-" + body + "-";
        out += print_node(chain.nodes[i + 1]);
    }
    return out;
}

std::string print_operand(const Operand& op) {
    if (op.kind == Operand::Kind::Property) return op.variable + "." + op.property;
    return print_literal(op.literal);
}

std::string cmp_op_text(CmpOp op) {
    switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "<>";
    case CmpOp::Lt: return "<";
    case CmpOp::Gt: return ">";
    case CmpOp::Le: return "<=";
    case CmpOp::Ge: return ">=";
    }
    return "=";
}

std::string print_expr(const BoolExpr& e) {
    switch (e.kind) {
    case BoolExpr::Kind::Cmp:
        return print_operand(e.cmp->lhs) + " " + cmp_op_text(e.cmp->op) + " " +
               print_operand(e.cmp->rhs);
    case BoolExpr::Kind::And: {
        std::string out;
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i) out += " AND ";
            const BoolExpr& arg = e.args[i];
            if (arg.kind == BoolExpr::Kind::Or) out += "(" + print_expr(arg) + ")";
            else out += print_expr(arg);
        }
        return out;
    }
    case BoolExpr::Kind::Or: {
        std::string out;
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i) out += " OR ";
            out += print_expr(e.args[i]);
        }
        return out;
    }
    }
    return {};
}

std::string print_return_item(const ReturnItem& item) {
    std::string out = item.is_count ? "COUNT(" + item.variable + ")"
                                    : item.variable + "." + item.property;
    if (!item.alias.empty()) out += " AS " + item.alias;
    return out;
}

} // namespace

std::string print(const Statement& s) {
    if (const auto* m = std::get_if<MatchStatement>(&s)) {
        std::string out = "MATCH ";
        for (std::size_t i = 0; i < m->patterns.size(); ++i) {
            if (i) out += ", ";
            out += print_chain(m->patterns[i]);
        }
        if (m->where) out += " WHERE " + print_expr(*m->where);
        if (!m->returns.empty()) {
            out += " RETURN ";
            for (std::size_t i = 0; i < m->returns.size(); ++i) {
                if (i) out += ", ";
                out += print_return_item(m->returns[i]);
            }
        }
        return out;
    }
    if (const auto* c = std::get_if<CreateStatement>(&s)) {
        std::string out = "CREATE ";
        for (std::size_t i = 0; i < c->patterns.size(); ++i) {
            if (i) out += ", ";
            out += print_chain(c->patterns[i]);
        }
        return out;
    }
    const auto& m = std::get<MergeStatement>(s);
    return "MERGE " + print_node(m.node);
}

std::string print(const QueryList& q) {
    std::string out;
    for (std::size_t i = 0; i < q.statements.size(); ++i) {
        if (i) out += "; ";
        out += print(q.statements[i]);
    }
    return out;
}

} // namespace kga::kgql
