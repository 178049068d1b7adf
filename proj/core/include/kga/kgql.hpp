#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kga/error.hpp"
#include "kga/value.hpp"

// Cypher-flavored query subset used for graph reads and writes: linear MATCH
// chains of at most 3 hops, literal property maps, WHERE comparisons joined
// by AND/OR, RETURN projections with aliases and COUNT, CREATE chains, and
// node-only MERGE. Statements are sequenced in one list; variables bound by
// an earlier statement stay visible to later ones.
namespace kga::kgql {

enum class TokenKind { Keyword, Identifier, String, Integer, Real, Boolean, Punct, End };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;      // raw lexeme, quotes included for strings
    std::string value;     // decoded payload (string body, uppercased keyword)
    std::size_t offset = 0;
};

// Tokenizes `src`; the End token is appended last. Token texts plus the
// skipped whitespace reconstruct the input exactly.
std::vector<Token> lex(const std::string& src);

struct NodePattern {
    std::string variable; // empty when anonymous
    std::string label;    // empty when unlabeled
    PropertyMap properties;
    bool operator==(const NodePattern&) const = default;
};

enum class Direction { Out, In };

struct RelPattern {
    Direction direction = Direction::Out;
    std::string label; // empty matches any label (not allowed in CREATE)
    bool operator==(const RelPattern&) const = default;
};

// nodes.size() == rels.size() + 1, rels.size() <= 3
struct PatternChain {
    std::vector<NodePattern> nodes;
    std::vector<RelPattern> rels;
    bool operator==(const PatternChain&) const = default;
};

struct Operand {
    enum class Kind { Property, Literal };
    Kind kind = Kind::Literal;
    std::string variable;
    std::string property;
    PropertyValue literal;
    bool operator==(const Operand&) const = default;
};

enum class CmpOp { Eq, Ne, Lt, Gt, Le, Ge };

struct Comparison {
    Operand lhs;
    CmpOp op = CmpOp::Eq;
    Operand rhs;
    bool operator==(const Comparison&) const = default;
};

// AND/OR nodes are n-ary and flattened; Cmp nodes are leaves.
struct BoolExpr {
    enum class Kind { Cmp, And, Or };
    Kind kind = Kind::Cmp;
    std::optional<Comparison> cmp;
    std::vector<BoolExpr> args;
    bool operator==(const BoolExpr&) const = default;
};

struct ReturnItem {
    bool is_count = false;
    std::string variable;
    std::string property; // unused for COUNT
    std::string alias;    // empty when none given
    bool operator==(const ReturnItem&) const = default;
};

struct MatchStatement {
    std::vector<PatternChain> patterns;
    std::optional<BoolExpr> where;
    std::vector<ReturnItem> returns; // empty when MATCH only binds variables
    bool operator==(const MatchStatement&) const = default;
};

struct CreateStatement {
    std::vector<PatternChain> patterns;
    bool operator==(const CreateStatement&) const = default;
};

struct MergeStatement {
    NodePattern node;
    bool operator==(const MergeStatement&) const = default;
};

using Statement = std::variant<MatchStatement, CreateStatement, MergeStatement>;

struct QueryList {
    std::vector<Statement> statements;
    bool operator==(const QueryList&) const = default;
};

// Parses a `;`-separated statement list (a bare keyword also opens a new
// statement). Throws kga::ParseError with line:col, expected set, and the
// offending lexeme.
QueryList parse(const std::string& src);

// Canonical single-line rendering; parse(print(q)) == q for any parsed q.
std::string print(const QueryList& q);
std::string print(const Statement& s);

} // namespace kga::kgql
