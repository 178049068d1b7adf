#include "kga/kgql.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>

namespace kga::kgql {

namespace {

const char* const kKeywords[] = {"MATCH", "WHERE", "RETURN", "CREATE", "MERGE",
                                 "AS", "AND", "OR", "COUNT"};

bool is_keyword(const std::string& upper) {
    return std::find(std::begin(kKeywords), std::end(kKeywords), upper) !=
           std::end(kKeywords);
}

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

[[noreturn]] void lex_fail(const std::string& src, std::size_t offset,
                           const std::string& found) {
    auto [line, col] = line_col_at(src, offset);
    throw ParseError(offset, line, col, {"a token"}, found);
}

} // namespace

std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = src.size();
    while (i < n) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (ident_start(c)) {
            while (i < n && ident_char(src[i])) ++i;
            std::string text = src.substr(start, i - start);
            std::string upper = text;
            std::transform(upper.begin(), upper.end(), upper.begin(),
                           [](unsigned char ch) { return std::toupper(ch); });
            if (is_keyword(upper)) {
                out.push_back({TokenKind::Keyword, text, upper, start});
            } else if (upper == "TRUE" || upper == "FALSE") {
                out.push_back({TokenKind::Boolean, text,
                               upper == "TRUE" ? "true" : "false", start});
            } else {
                out.push_back({TokenKind::Identifier, text, text, start});
            }
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            bool real = false;
            while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
            if (i < n && src[i] == '.' && i + 1 < n &&
                std::isdigit(static_cast<unsigned char>(src[i + 1]))) {
                real = true;
                ++i;
                while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
            }
            if (i < n && (src[i] == 'e' || src[i] == 'E')) {
                std::size_t save = i;
                ++i;
                if (i < n && (src[i] == '+' || src[i] == '-')) ++i;
                if (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) {
                    real = true;
                    while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
                } else {
                    i = save;
                }
            }
            std::string text = src.substr(start, i - start);
            out.push_back({real ? TokenKind::Real : TokenKind::Integer, text, text, start});
            continue;
        }
        if (c == '\'' || c == '"') {
            char quote = c;
            ++i;
            std::string value;
            bool closed = false;
            while (i < n) {
                char d = src[i];
                if (d == '\\' && i + 1 < n) {
                    char e = src[i + 1];
                    switch (e) {
                    case 'n': value += '\n'; break;
                    case 't': value += '\t'; break;
                    case 'r': value += '\r'; break;
                    case '\'': value += '\''; break;
                    case '"': value += '"'; break;
                    case '\\': value += '\\'; break;
                    default: value += '\\'; value += e; break;
                    }
                    i += 2;
                    continue;
                }
                if (d == quote) {
                    closed = true;
                    ++i;
                    break;
                }
                value += d;
                ++i;
            }
            if (!closed) lex_fail(src, start, "unterminated string");
            out.push_back({TokenKind::String, src.substr(start, i - start), value, start});
            continue;
        }
        auto two = [&](const char* t) {
            return i + 1 < n && src[i] == t[0] && src[i + 1] == t[1];
        };
        if (two("->") || two("<-") || two("<>") || two("<=") || two(">=")) {
            out.push_back({TokenKind::Punct, src.substr(i, 2), src.substr(i, 2), i});
            i += 2;
            continue;
        }
        if (std::string("()[]{}:,;.=<>-").find(c) != std::string::npos) {
            out.push_back({TokenKind::Punct, std::string(1, c), std::string(1, c), i});
            ++i;
            continue;
        }
        lex_fail(src, i, "'" + std::string(1, c) + "'");
    }
    out.push_back({TokenKind::End, "", "", n});
    return out;
}

namespace {

constexpr std::size_t kMaxHops = 3;
constexpr int kMaxExprDepth = 64;

class Parser {
public:
    explicit Parser(const std::string& src) : src_(src), tokens_(lex(src)) {}

    QueryList parse_query_list() {
        QueryList q;
        while (true) {
            if (at_end()) {
                if (q.statements.empty())
                    fail({"MATCH", "CREATE", "MERGE"});
                break;
            }
            q.statements.push_back(parse_statement());
            while (is_punct(";")) advance();
        }
        return q;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& advance() { return tokens_[pos_++]; }
    bool at_end() const { return peek().kind == TokenKind::End; }

    bool is_keyword(const char* kw) const {
        return peek().kind == TokenKind::Keyword && peek().value == kw;
    }
    bool is_punct(const char* p) const {
        return peek().kind == TokenKind::Punct && peek().value == p;
    }

    void expect_keyword(const char* kw) {
        if (!is_keyword(kw)) fail({kw});
        advance();
    }
    void expect_punct(const char* p) {
        if (!is_punct(p)) fail({std::string("'") + p + "'"});
        advance();
    }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        const Token& t = peek();
        auto [line, col] = line_col_at(src_, t.offset);
        std::string found =
            t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
        throw ParseError(t.offset, line, col, std::move(expected), found);
    }

    Statement parse_statement() {
        if (is_keyword("MATCH")) return parse_match();
        if (is_keyword("CREATE")) return parse_create();
        if (is_keyword("MERGE")) return parse_merge();
        fail({"MATCH", "CREATE", "MERGE"});
    }

    MatchStatement parse_match() {
        expect_keyword("MATCH");
        MatchStatement s;
        s.patterns.push_back(parse_chain());
        while (is_punct(",")) {
            advance();
            s.patterns.push_back(parse_chain());
        }
        if (is_keyword("WHERE")) {
            advance();
            s.where = parse_or_expr(0);
        }
        if (is_keyword("RETURN")) {
            advance();
            s.returns.push_back(parse_return_item());
            while (is_punct(",")) {
                advance();
                s.returns.push_back(parse_return_item());
            }
        }
        return s;
    }

    CreateStatement parse_create() {
        expect_keyword("CREATE");
        CreateStatement s;
        s.patterns.push_back(parse_chain());
        while (is_punct(",")) {
            advance();
            s.patterns.push_back(parse_chain());
        }
        return s;
    }

    MergeStatement parse_merge() {
        expect_keyword("MERGE");
        MergeStatement s;
        s.node = parse_node_pattern();
        return s;
    }

    PatternChain parse_chain() {
        PatternChain chain;
        chain.nodes.push_back(parse_node_pattern());
        while (is_punct("-") || is_punct("<-")) {
            if (chain.rels.size() == kMaxHops)
                fail({"at most " + std::to_string(kMaxHops) + " hops per pattern"});
            chain.rels.push_back(parse_rel_pattern());
            chain.nodes.push_back(parse_node_pattern());
        }
        return chain;
    }

    NodePattern parse_node_pattern() {
        expect_punct("(");
        NodePattern node;
        if (peek().kind == TokenKind::Identifier) {
            node.variable = advance().value;
        }
        if (is_punct(":")) {
            advance();
            if (peek().kind != TokenKind::Identifier) fail({"a label"});
            node.label = advance().value;
        }
        if (is_punct("{")) {
            node.properties = parse_property_map();
        }
        expect_punct(")");
        return node;
    }

    RelPattern parse_rel_pattern() {
        RelPattern rel;
        if (is_punct("<-")) {
            rel.direction = Direction::In;
            advance();
            parse_rel_body(rel);
            expect_punct("-");
        } else {
            rel.direction = Direction::Out;
            expect_punct("-");
            parse_rel_body(rel);
            expect_punct("->");
        }
        return rel;
    }

    void parse_rel_body(RelPattern& rel) {
        expect_punct("[");
        if (peek().kind == TokenKind::Identifier)
            fail({"':' (relationship variables are not supported)"});
        if (is_punct(":")) {
            advance();
            if (peek().kind != TokenKind::Identifier) fail({"a relationship label"});
            rel.label = advance().value;
        }
        expect_punct("]");
    }

    PropertyMap parse_property_map() {
        expect_punct("{");
        PropertyMap props;
        if (!is_punct("}")) {
            while (true) {
                if (peek().kind != TokenKind::Identifier) fail({"a property key"});
                std::string key = advance().value;
                expect_punct(":");
                props[key] = parse_literal();
                if (is_punct(",")) {
                    advance();
                    continue;
                }
                break;
            }
        }
        expect_punct("}");
        return props;
    }

    PropertyValue parse_literal() {
        bool negate = false;
        if (is_punct("-")) {
            advance();
            negate = true;
        }
        const Token& t = peek();
        switch (t.kind) {
        case TokenKind::String:
            if (negate) fail({"a number"});
            return PropertyValue::text(advance().value);
        case TokenKind::Integer: {
            std::int64_t v = 0;
            auto res = std::from_chars(t.value.data(), t.value.data() + t.value.size(), v);
            if (res.ec != std::errc{}) fail({"an integer in range"});
            advance();
            return PropertyValue::integer(negate ? -v : v);
        }
        case TokenKind::Real: {
            double v = std::strtod(t.value.c_str(), nullptr);
            advance();
            return PropertyValue::real(negate ? -v : v);
        }
        case TokenKind::Boolean: {
            if (negate) fail({"a number"});
            bool v = t.value == "true";
            advance();
            return PropertyValue::boolean(v);
        }
        case TokenKind::Punct:
            if (t.value == "[" && !negate) {
                advance();
                std::vector<PropertyValue> items;
                if (!is_punct("]")) {
                    items.push_back(parse_literal());
                    while (is_punct(",")) {
                        advance();
                        items.push_back(parse_literal());
                    }
                }
                expect_punct("]");
                return PropertyValue::list(std::move(items));
            }
            [[fallthrough]];
        default:
            fail({"a literal"});
        }
    }

    BoolExpr parse_or_expr(int depth) {
        if (depth > kMaxExprDepth) fail({"a shallower expression"});
        BoolExpr left = parse_and_expr(depth);
        if (!is_keyword("OR")) return left;
        BoolExpr node;
        node.kind = BoolExpr::Kind::Or;
        node.args.push_back(std::move(left));
        while (is_keyword("OR")) {
            advance();
            node.args.push_back(parse_and_expr(depth));
        }
        return node;
    }

    BoolExpr parse_and_expr(int depth) {
        BoolExpr left = parse_bool_primary(depth);
        if (!is_keyword("AND")) return left;
        BoolExpr node;
        node.kind = BoolExpr::Kind::And;
        node.args.push_back(std::move(left));
        while (is_keyword("AND")) {
            advance();
            node.args.push_back(parse_bool_primary(depth));
        }
        return node;
    }

    BoolExpr parse_bool_primary(int depth) {
        if (is_punct("(")) {
            // Could be a parenthesized expression or nothing valid; patterns
            // cannot appear inside WHERE, so '(' always opens an expression.
            advance();
            BoolExpr inner = parse_or_expr(depth + 1);
            expect_punct(")");
            return inner;
        }
        BoolExpr leaf;
        leaf.kind = BoolExpr::Kind::Cmp;
        leaf.cmp = parse_comparison();
        return leaf;
    }

    Comparison parse_comparison() {
        Comparison cmp;
        cmp.lhs = parse_operand();
        if (is_punct("=")) cmp.op = CmpOp::Eq;
        else if (is_punct("<>")) cmp.op = CmpOp::Ne;
        else if (is_punct("<")) cmp.op = CmpOp::Lt;
        else if (is_punct(">")) cmp.op = CmpOp::Gt;
        else if (is_punct("<=")) cmp.op = CmpOp::Le;
        else if (is_punct(">=")) cmp.op = CmpOp::Ge;
        else fail({"'='", "'<>'", "'<'", "'>'", "'<='", "'>='"});
        advance();
        cmp.rhs = parse_operand();
        return cmp;
    }

    Operand parse_operand() {
        Operand op;
        if (peek().kind == TokenKind::Identifier) {
            op.kind = Operand::Kind::Property;
            op.variable = advance().value;
            expect_punct(".");
            if (peek().kind != TokenKind::Identifier) fail({"a property name"});
            op.property = advance().value;
            return op;
        }
        op.kind = Operand::Kind::Literal;
        op.literal = parse_literal();
        return op;
    }

    ReturnItem parse_return_item() {
        ReturnItem item;
        if (is_keyword("COUNT")) {
            advance();
            expect_punct("(");
            if (peek().kind != TokenKind::Identifier) fail({"a variable"});
            item.is_count = true;
            item.variable = advance().value;
            expect_punct(")");
        } else {
            if (peek().kind != TokenKind::Identifier) fail({"a variable", "COUNT"});
            item.variable = advance().value;
            expect_punct(".");
            if (peek().kind != TokenKind::Identifier) fail({"a property name"});
            item.property = advance().value;
        }
        if (is_keyword("AS")) {
            advance();
            if (peek().kind != TokenKind::Identifier) fail({"an alias"});
            item.alias = advance().value;
        }
        return item;
    }

    const std::string& src_;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

} // namespace

QueryList parse(const std::string& src) {
    Parser p(src);
    return p.parse_query_list();
}

} // namespace kga::kgql
