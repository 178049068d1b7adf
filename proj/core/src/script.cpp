#include "kga/script.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

namespace kga::script {

namespace {

enum class Tok { Ident, Keyword, Integer, Real, String, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::string value;
    std::size_t offset = 0;
};

const std::set<std::string> kKeywords = {"let",  "result", "and",  "or",
                                         "not",  "true",   "false"};

std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = src.size();
    auto fail = [&](std::size_t at, const std::string& found) {
        auto [line, col] = line_col_at(src, at);
        throw ParseError(at, line, col, {"a token"}, found);
    };
    while (i < n) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (i < n && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_'))
                ++i;
            std::string text = src.substr(start, i - start);
            out.push_back({kKeywords.count(text) ? Tok::Keyword : Tok::Ident, text, text,
                           start});
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
                std::size_t save = i++;
                if (i < n && (src[i] == '+' || src[i] == '-')) ++i;
                if (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) {
                    real = true;
                    while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
                } else {
                    i = save;
                }
            }
            out.push_back({real ? Tok::Real : Tok::Integer, src.substr(start, i - start),
                           src.substr(start, i - start), start});
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
            if (!closed) fail(start, "unterminated string");
            out.push_back({Tok::String, src.substr(start, i - start), value, start});
            continue;
        }
        auto two = [&](const char* t) {
            return i + 1 < n && src[i] == t[0] && src[i + 1] == t[1];
        };
        if (two("==") || two("!=") || two("<=") || two(">=") || two("->")) {
            out.push_back({Tok::Punct, src.substr(i, 2), src.substr(i, 2), i});
            i += 2;
            continue;
        }
        if (std::string("()[],;=<>+-*/%").find(c) != std::string::npos) {
            out.push_back({Tok::Punct, std::string(1, c), std::string(1, c), i});
            ++i;
            continue;
        }
        fail(i, "'" + std::string(1, c) + "'");
    }
    out.push_back({Tok::End, "", "", n});
    return out;
}

constexpr int kMaxDepth = 128;

class Parser {
public:
    explicit Parser(const std::string& src) : src_(src), tokens_(lex(src)) {}

    Program parse_program() {
        Program p;
        bool saw_result = false;
        while (!at_end()) {
            if (is_keyword("let")) {
                advance();
                if (peek().kind != Tok::Ident) fail({"a binding name"});
                std::string name = advance().value;
                expect_punct("=");
                p.lets.emplace_back(std::move(name), parse_expr(0));
                expect_punct(";");
                continue;
            }
            if (is_keyword("result")) {
                advance();
                expect_punct("=");
                p.result = parse_expr(0);
                if (is_punct(";")) advance();
                saw_result = true;
                if (!at_end()) fail({"end of program"});
                break;
            }
            fail({"let", "result"});
        }
        if (!saw_result) fail({"result"});
        return p;
    }

    Expr parse_bare_expression() {
        Expr e = parse_expr(0);
        if (!at_end()) fail({"end of expression"});
        return e;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = pos_ + ahead;
        return i < tokens_.size() ? tokens_[i] : tokens_.back();
    }
    const Token& advance() { return tokens_[pos_++]; }
    bool at_end() const { return peek().kind == Tok::End; }
    bool is_keyword(const char* kw) const {
        return peek().kind == Tok::Keyword && peek().value == kw;
    }
    bool is_punct(const char* p) const {
        return peek().kind == Tok::Punct && peek().value == p;
    }
    void expect_punct(const char* p) {
        if (!is_punct(p)) fail({std::string("'") + p + "'"});
        advance();
    }
    [[noreturn]] void fail(std::vector<std::string> expected) const {
        const Token& t = peek();
        auto [line, col] = line_col_at(src_, t.offset);
        std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
        throw ParseError(t.offset, line, col, std::move(expected), found);
    }

    Expr make_binary(std::string op, Expr lhs, Expr rhs) {
        Expr e;
        e.kind = Expr::Kind::Binary;
        e.name = std::move(op);
        e.args.push_back(std::move(lhs));
        e.args.push_back(std::move(rhs));
        return e;
    }

    Expr parse_expr(int depth) { return parse_or(depth); }

    Expr parse_or(int depth) {
        check_depth(depth);
        Expr lhs = parse_and(depth);
        while (is_keyword("or")) {
            advance();
            lhs = make_binary("or", std::move(lhs), parse_and(depth));
        }
        return lhs;
    }

    Expr parse_and(int depth) {
        Expr lhs = parse_not(depth);
        while (is_keyword("and")) {
            advance();
            lhs = make_binary("and", std::move(lhs), parse_not(depth));
        }
        return lhs;
    }

    Expr parse_not(int depth) {
        if (is_keyword("not")) {
            advance();
            Expr e;
            e.kind = Expr::Kind::Unary;
            e.name = "not";
            e.args.push_back(parse_not(depth + 1));
            return e;
        }
        return parse_comparison(depth);
    }

    Expr parse_comparison(int depth) {
        Expr lhs = parse_additive(depth);
        for (const char* op : {"==", "!=", "<=", ">=", "<", ">"}) {
            if (is_punct(op)) {
                advance();
                return make_binary(op, std::move(lhs), parse_additive(depth));
            }
        }
        return lhs;
    }

    Expr parse_additive(int depth) {
        Expr lhs = parse_multiplicative(depth);
        while (is_punct("+") || is_punct("-")) {
            std::string op = advance().value;
            lhs = make_binary(std::move(op), std::move(lhs), parse_multiplicative(depth));
        }
        return lhs;
    }

    Expr parse_multiplicative(int depth) {
        Expr lhs = parse_unary(depth);
        while (is_punct("*") || is_punct("/") || is_punct("%")) {
            std::string op = advance().value;
            lhs = make_binary(std::move(op), std::move(lhs), parse_unary(depth));
        }
        return lhs;
    }

    Expr parse_unary(int depth) {
        check_depth(depth);
        if (is_punct("-")) {
            advance();
            Expr arg = parse_unary(depth + 1);
            // Fold minus into numeric literals so -5 round-trips as one node.
            if (arg.kind == Expr::Kind::Literal && arg.literal.is_integer())
                return literal(PropertyValue::integer(-arg.literal.as_integer()));
            if (arg.kind == Expr::Kind::Literal && arg.literal.is_real())
                return literal(PropertyValue::real(-arg.literal.as_real()));
            Expr e;
            e.kind = Expr::Kind::Unary;
            e.name = "-";
            e.args.push_back(std::move(arg));
            return e;
        }
        return parse_primary(depth);
    }

    Expr literal(PropertyValue v) {
        Expr e;
        e.kind = Expr::Kind::Literal;
        e.literal = std::move(v);
        return e;
    }

    Expr parse_primary(int depth) {
        check_depth(depth);
        const Token& t = peek();
        switch (t.kind) {
        case Tok::Integer: {
            std::int64_t v = 0;
            auto res = std::from_chars(t.value.data(), t.value.data() + t.value.size(), v);
            if (res.ec != std::errc{}) fail({"an integer in range"});
            advance();
            return literal(PropertyValue::integer(v));
        }
        case Tok::Real: {
            double v = std::strtod(t.value.c_str(), nullptr);
            advance();
            return literal(PropertyValue::real(v));
        }
        case Tok::String: {
            std::string v = t.value;
            advance();
            return literal(PropertyValue::text(std::move(v)));
        }
        case Tok::Keyword:
            if (t.value == "true" || t.value == "false") {
                bool v = t.value == "true";
                advance();
                return literal(PropertyValue::boolean(v));
            }
            fail({"an expression"});
        case Tok::Ident: {
            // Lambda (x -> body) is only valid as a call argument and is
            // handled in parse_call_args.
            std::string name = advance().value;
            if (is_punct("(")) {
                Expr call;
                call.kind = Expr::Kind::Call;
                call.name = std::move(name);
                advance();
                if (!is_punct(")")) {
                    call.args.push_back(parse_call_arg(depth + 1));
                    while (is_punct(",")) {
                        advance();
                        call.args.push_back(parse_call_arg(depth + 1));
                    }
                }
                expect_punct(")");
                return call;
            }
            Expr var;
            var.kind = Expr::Kind::Var;
            var.name = std::move(name);
            return var;
        }
        case Tok::Punct:
            if (t.value == "(") {
                advance();
                Expr inner = parse_expr(depth + 1);
                expect_punct(")");
                return inner;
            }
            if (t.value == "[") {
                advance();
                Expr list;
                list.kind = Expr::Kind::Call;
                list.name = "__list";
                if (!is_punct("]")) {
                    list.args.push_back(parse_expr(depth + 1));
                    while (is_punct(",")) {
                        advance();
                        list.args.push_back(parse_expr(depth + 1));
                    }
                }
                expect_punct("]");
                return list;
            }
            fail({"an expression"});
        default:
            fail({"an expression"});
        }
    }

    Expr parse_call_arg(int depth) {
        if (peek().kind == Tok::Ident && peek(1).kind == Tok::Punct &&
            peek(1).value == "->") {
            Expr lambda;
            lambda.kind = Expr::Kind::Lambda;
            lambda.name = advance().value;
            advance(); // ->
            lambda.args.push_back(parse_expr(depth + 1));
            return lambda;
        }
        return parse_expr(depth);
    }

    void check_depth(int depth) const {
        if (depth > kMaxDepth) fail({"a shallower expression"});
    }

    const std::string& src_;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

} // namespace

Program parse_program(const std::string& src) {
    return Parser(src).parse_program();
}

Expr parse_expression(const std::string& src) {
    return Parser(src).parse_bare_expression();
}

namespace {

int precedence(const std::string& op) {
    if (op == "or") return 1;
    if (op == "and") return 2;
    if (op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" || op == ">=")
        return 4;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/" || op == "%") return 6;
    return 9;
}

std::string print_expr(const Expr& e, int parent_prec) {
    switch (e.kind) {
    case Expr::Kind::Literal:
        if (e.literal.is_text()) {
            std::string out = "\"";
            for (char c : e.literal.as_text()) {
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
        if (e.literal.is_list()) {
            std::string out = "[";
            const auto& xs = e.literal.as_list();
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (i) out += ", ";
                Expr item;
                item.kind = Expr::Kind::Literal;
                item.literal = xs[i];
                out += print_expr(item, 0);
            }
            return out + "]";
        }
        return e.literal.display();
    case Expr::Kind::Var:
        return e.name;
    case Expr::Kind::Unary: {
        std::string inner = print_expr(e.args[0], 8);
        std::string out = e.name == "not" ? "not " + inner : "-" + inner;
        return parent_prec > 7 ? "(" + out + ")" : out;
    }
    case Expr::Kind::Binary: {
        int prec = precedence(e.name);
        // Comparisons do not chain, so both operands get tighter context.
        int lhs_prec = prec == 4 ? prec + 1 : prec;
        std::string out = print_expr(e.args[0], lhs_prec) + " " + e.name + " " +
                          print_expr(e.args[1], prec + 1);
        return parent_prec > prec ? "(" + out + ")" : out;
    }
    case Expr::Kind::Call: {
        if (e.name == "__list") {
            std::string out = "[";
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i) out += ", ";
                out += print_expr(e.args[i], 0);
            }
            return out + "]";
        }
        std::string out = e.name + "(";
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i) out += ", ";
            out += print_expr(e.args[i], 0);
        }
        return out + ")";
    }
    case Expr::Kind::Lambda:
        return e.name + " -> " + print_expr(e.args[0], 0);
    }
    return {};
}

} // namespace

std::string print_expression(const Expr& e) { return print_expr(e, 0); }

std::string print_program(const Program& p) {
    std::string out;
    for (const auto& [name, value] : p.lets)
        out += "let " + name + " = " + print_expression(value) + "; ";
    out += "result = " + print_expression(p.result);
    return out;
}

namespace {

class Interpreter {
public:
    Interpreter(const GraphStore* graph, const Limits& limits)
        : graph_(graph), limits_(limits),
          deadline_(std::chrono::steady_clock::now() + limits.timeout) {}

    PropertyValue run(const Program& p) {
        std::map<std::string, PropertyValue> env;
        for (const auto& [name, value] : p.lets) env[name] = eval(value, env);
        return eval(p.result, env);
    }

    PropertyValue eval_bare(const Expr& e) {
        std::map<std::string, PropertyValue> env;
        return eval(e, env);
    }

    std::int64_t steps() const { return steps_; }

private:
    using Env = std::map<std::string, PropertyValue>;

    [[noreturn]] void trap(const std::string& msg) const {
        throw EvalError(msg, steps_);
    }

    void charge(std::int64_t amount = 1) {
        steps_ += amount;
        if (steps_ > limits_.step_budget)
            throw EvalError("step budget of " + std::to_string(limits_.step_budget) +
                                " exhausted",
                            steps_);
        if (std::chrono::steady_clock::now() > deadline_)
            throw EvalError("evaluation timed out", steps_);
    }

    PropertyValue eval(const Expr& e, Env& env) {
        charge();
        switch (e.kind) {
        case Expr::Kind::Literal:
            return e.literal;
        case Expr::Kind::Var: {
            auto it = env.find(e.name);
            if (it == env.end()) trap("unbound name '" + e.name + "'");
            return it->second;
        }
        case Expr::Kind::Unary: {
            if (e.name == "not") {
                PropertyValue v = eval(e.args[0], env);
                if (!v.is_boolean()) trap("'not' needs a boolean");
                return PropertyValue::boolean(!v.as_boolean());
            }
            PropertyValue v = eval(e.args[0], env);
            if (v.is_integer()) {
                if (v.as_integer() == INT64_MIN) trap("integer overflow");
                return PropertyValue::integer(-v.as_integer());
            }
            if (v.is_real()) return PropertyValue::real(-v.as_real());
            trap("unary '-' needs a number");
        }
        case Expr::Kind::Binary:
            return eval_binary(e, env);
        case Expr::Kind::Call:
            return eval_call(e, env);
        case Expr::Kind::Lambda:
            trap("lambda is only valid as a map/filter argument");
        }
        trap("unreachable");
    }

    PropertyValue eval_binary(const Expr& e, Env& env) {
        const std::string& op = e.name;
        if (op == "and" || op == "or") {
            PropertyValue lhs = eval(e.args[0], env);
            if (!lhs.is_boolean()) trap("'" + op + "' needs booleans");
            if (op == "and" && !lhs.as_boolean()) return PropertyValue::boolean(false);
            if (op == "or" && lhs.as_boolean()) return PropertyValue::boolean(true);
            PropertyValue rhs = eval(e.args[1], env);
            if (!rhs.is_boolean()) trap("'" + op + "' needs booleans");
            return rhs;
        }
        PropertyValue lhs = eval(e.args[0], env);
        PropertyValue rhs = eval(e.args[1], env);
        if (op == "==" || op == "!=") {
            auto c = PropertyValue::compare(lhs, rhs);
            bool eq = c.has_value() && *c == 0;
            return PropertyValue::boolean(op == "==" ? eq : !eq);
        }
        if (op == "<" || op == "<=" || op == ">" || op == ">=") {
            auto c = PropertyValue::compare(lhs, rhs);
            if (!c) trap("values of different kinds are not ordered");
            if (op == "<") return PropertyValue::boolean(*c < 0);
            if (op == "<=") return PropertyValue::boolean(*c <= 0);
            if (op == ">") return PropertyValue::boolean(*c > 0);
            return PropertyValue::boolean(*c >= 0);
        }
        return arith(op, lhs, rhs);
    }

    PropertyValue arith(const std::string& op, const PropertyValue& lhs,
                        const PropertyValue& rhs) {
        if (!lhs.is_number() || !rhs.is_number())
            trap("'" + op + "' needs numbers");
        if (op == "%") {
            if (!lhs.is_integer() || !rhs.is_integer()) trap("'%' needs integers");
            if (rhs.as_integer() == 0) trap("modulo by zero");
            return PropertyValue::integer(lhs.as_integer() % rhs.as_integer());
        }
        bool ints = lhs.is_integer() && rhs.is_integer();
        if (op == "/") {
            if (ints) {
                std::int64_t a = lhs.as_integer(), b = rhs.as_integer();
                if (b == 0) trap("division by zero");
                if (a % b == 0) return PropertyValue::integer(a / b);
                return make_real(static_cast<double>(a) / static_cast<double>(b));
            }
            if (rhs.as_real() == 0.0) trap("division by zero");
            return make_real(lhs.as_real() / rhs.as_real());
        }
        if (ints) {
            std::int64_t a = lhs.as_integer(), b = rhs.as_integer(), r = 0;
            bool overflow = false;
            if (op == "+") overflow = __builtin_add_overflow(a, b, &r);
            else if (op == "-") overflow = __builtin_sub_overflow(a, b, &r);
            else overflow = __builtin_mul_overflow(a, b, &r);
            if (overflow) trap("integer overflow");
            return PropertyValue::integer(r);
        }
        double a = lhs.as_real(), b = rhs.as_real();
        if (op == "+") return make_real(a + b);
        if (op == "-") return make_real(a - b);
        return make_real(a * b);
    }

    PropertyValue make_real(double v) {
        if (!std::isfinite(v)) trap("non-finite arithmetic result");
        return PropertyValue::real(v);
    }

    PropertyValue apply_lambda(const Expr& lambda, Env& env, const PropertyValue& arg) {
        auto saved = env.find(lambda.name) != env.end()
                         ? std::optional<PropertyValue>(env[lambda.name])
                         : std::nullopt;
        env[lambda.name] = arg;
        PropertyValue out = eval(lambda.args[0], env);
        if (saved) env[lambda.name] = *saved;
        else env.erase(lambda.name);
        return out;
    }

    const GraphStore& graph() {
        if (!graph_) trap("graph accessors need an attached graph");
        return *graph_;
    }

    PropertyValue eval_call(const Expr& e, Env& env) {
        const std::string& fn = e.name;
        auto arity = [&](std::size_t n) {
            if (e.args.size() != n)
                trap(fn + " takes " + std::to_string(n) + " argument" +
                     (n == 1 ? "" : "s"));
        };
        auto eval_arg = [&](std::size_t i) { return eval(e.args[i], env); };
        auto as_list = [&](const PropertyValue& v) -> const std::vector<PropertyValue>& {
            if (!v.is_list()) trap(fn + " needs a list");
            return v.as_list();
        };
        auto as_int = [&](const PropertyValue& v) {
            if (!v.is_integer()) trap(fn + " needs an integer");
            return v.as_integer();
        };
        auto as_text = [&](const PropertyValue& v) -> const std::string& {
            if (!v.is_text()) trap(fn + " needs text");
            return v.as_text();
        };
        auto lambda_at = [&](std::size_t i) -> const Expr& {
            if (i >= e.args.size() || e.args[i].kind != Expr::Kind::Lambda)
                trap(fn + " needs a lambda like (x -> ...)");
            return e.args[i];
        };

        if (fn == "__list") {
            std::vector<PropertyValue> items;
            items.reserve(e.args.size());
            for (const auto& arg : e.args) items.push_back(eval(arg, env));
            return PropertyValue::list(std::move(items));
        }
        if (fn == "nodes_by_label") {
            arity(1);
            std::string label = as_text(eval_arg(0));
            std::vector<PropertyValue> ids;
            for (NodeId id : graph().node_ids())
                if (graph().find_node(id)->label == label)
                    ids.push_back(PropertyValue::integer(id));
            charge(static_cast<std::int64_t>(graph().node_count()));
            return PropertyValue::list(std::move(ids));
        }
        if (fn == "property_of") {
            arity(2);
            std::int64_t id = as_int(eval_arg(0));
            std::string prop = as_text(eval_arg(1));
            const Node* n = graph().find_node(id);
            if (!n) trap("unknown node id " + std::to_string(id));
            auto it = n->properties.find(prop);
            if (it == n->properties.end())
                trap("node " + std::to_string(id) + " has no property '" + prop + "'");
            return it->second;
        }
        if (fn == "neighbors") {
            arity(1);
            std::int64_t id = as_int(eval_arg(0));
            const Node* n = graph().find_node(id);
            if (!n) trap("unknown node id " + std::to_string(id));
            std::set<NodeId> seen;
            for (RelId rid : graph().out_edges(id))
                seen.insert(graph().find_relationship(rid)->target);
            std::vector<PropertyValue> ids;
            for (NodeId t : seen) ids.push_back(PropertyValue::integer(t));
            charge(static_cast<std::int64_t>(ids.size()));
            return PropertyValue::list(std::move(ids));
        }
        if (fn == "edge_count") {
            arity(0);
            return PropertyValue::integer(
                static_cast<std::int64_t>(graph().relationship_count()));
        }
        if (fn == "sort_asc" || fn == "sort_desc") {
            arity(1);
            PropertyValue v = eval_arg(0);
            std::vector<PropertyValue> items = as_list(v);
            charge(static_cast<std::int64_t>(items.size()));
            bool asc = fn == "sort_asc";
            bool comparable = true;
            std::stable_sort(items.begin(), items.end(),
                             [&](const PropertyValue& a, const PropertyValue& b) {
                                 auto c = PropertyValue::compare(a, b);
                                 if (!c) {
                                     comparable = false;
                                     return false;
                                 }
                                 return asc ? *c < 0 : *c > 0;
                             });
            if (!comparable) trap(fn + " needs mutually comparable elements");
            return PropertyValue::list(std::move(items));
        }
        if (fn == "map" || fn == "filter") {
            arity(2);
            PropertyValue v = eval_arg(0);
            const auto& items = as_list(v);
            const Expr& lambda = lambda_at(1);
            std::vector<PropertyValue> out;
            out.reserve(items.size());
            for (const auto& item : items) {
                PropertyValue r = apply_lambda(lambda, env, item);
                if (fn == "map") {
                    out.push_back(std::move(r));
                } else {
                    if (!r.is_boolean()) trap("filter lambda must return a boolean");
                    if (r.as_boolean()) out.push_back(item);
                }
            }
            return PropertyValue::list(std::move(out));
        }
        if (fn == "index") {
            arity(2);
            PropertyValue v = eval_arg(0);
            const auto& items = as_list(v);
            std::int64_t i = as_int(eval_arg(1));
            if (i < 0 || i >= static_cast<std::int64_t>(items.size()))
                trap("index " + std::to_string(i) + " out of range for length " +
                     std::to_string(items.size()));
            return items[i];
        }
        if (fn == "slice") {
            arity(3);
            PropertyValue v = eval_arg(0);
            const auto& items = as_list(v);
            std::int64_t from = as_int(eval_arg(1));
            std::int64_t to = as_int(eval_arg(2));
            if (from < 0 || to < from) trap("slice bounds out of order");
            from = std::min<std::int64_t>(from, items.size());
            to = std::min<std::int64_t>(to, items.size());
            return PropertyValue::list(
                std::vector<PropertyValue>(items.begin() + from, items.begin() + to));
        }
        if (fn == "sum") {
            arity(1);
            PropertyValue v = eval_arg(0);
            const auto& items = as_list(v);
            charge(static_cast<std::int64_t>(items.size()));
            bool ints = true;
            for (const auto& it : items) {
                if (!it.is_number()) trap("sum needs numbers");
                ints = ints && it.is_integer();
            }
            if (ints) {
                std::int64_t acc = 0;
                for (const auto& it : items) {
                    if (__builtin_add_overflow(acc, it.as_integer(), &acc))
                        trap("integer overflow");
                }
                return PropertyValue::integer(acc);
            }
            double acc = 0;
            for (const auto& it : items) acc += it.as_real();
            return make_real(acc);
        }
        if (fn == "join") {
            arity(2);
            PropertyValue v = eval_arg(0);
            const auto& items = as_list(v);
            std::string sep = as_text(eval_arg(1));
            charge(static_cast<std::int64_t>(items.size()));
            std::string out;
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (i) out += sep;
                out += items[i].display();
            }
            return PropertyValue::text(std::move(out));
        }
        if (fn == "length") {
            arity(1);
            PropertyValue v = eval_arg(0);
            if (v.is_list())
                return PropertyValue::integer(static_cast<std::int64_t>(v.as_list().size()));
            if (v.is_text())
                return PropertyValue::integer(static_cast<std::int64_t>(v.as_text().size()));
            trap("length needs a list or text");
        }
        if (fn == "concat") {
            if (e.args.empty()) trap("concat needs at least one argument");
            std::string out;
            for (std::size_t i = 0; i < e.args.size(); ++i) out += eval_arg(i).display();
            return PropertyValue::text(std::move(out));
        }
        if (fn == "lower" || fn == "upper") {
            arity(1);
            std::string s = as_text(eval_arg(0));
            for (char& c : s)
                c = fn == "lower" ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
                                  : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            return PropertyValue::text(std::move(s));
        }
        if (fn == "contains") {
            arity(2);
            std::string hay = as_text(eval_arg(0));
            std::string needle = as_text(eval_arg(1));
            return PropertyValue::boolean(hay.find(needle) != std::string::npos);
        }
        if (fn == "round") {
            arity(1);
            PropertyValue v = eval_arg(0);
            if (v.is_integer()) return v;
            if (!v.is_real()) trap("round needs a number");
            double r = v.as_real();
            if (r < -9.2e18 || r > 9.2e18) trap("round out of integer range");
            return PropertyValue::integer(std::llround(r));
        }
        trap("unknown function '" + fn + "'");
    }

    const GraphStore* graph_;
    const Limits& limits_;
    std::chrono::steady_clock::time_point deadline_;
    std::int64_t steps_ = 0;
};

} // namespace

PropertyValue run_program(const Program& p, const GraphStore* graph,
                          const Limits& limits, RunStats* stats) {
    Interpreter interp(graph, limits);
    try {
        PropertyValue out = interp.run(p);
        if (stats) stats->steps = interp.steps();
        return out;
    } catch (...) {
        if (stats) stats->steps = interp.steps();
        throw;
    }
}

PropertyValue eval_math(const std::string& text, const Limits& limits) {
    try {
        Expr e = parse_expression(text);
        Program p;
        p.result = std::move(e);
        return run_program(p, nullptr, limits);
    } catch (const ParseError&) {
        Program p = parse_program(text);
        return run_program(p, nullptr, limits);
    }
}

} // namespace kga::script
