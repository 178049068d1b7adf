#include <doctest.h>

#include <random>

#include "kga/script.hpp"
#include "kga/snapshot.hpp"

#include "test_support.hpp"

using namespace kga;
using namespace kga::script;

namespace {

// ---------------------------------------------------------------------------
// Independent arithmetic oracle: builds fully parenthesized integer
// expressions and computes their value in 128-bit arithmetic alongside the
// rendered text, so eval_math can be checked without trusting its own parser.
// ---------------------------------------------------------------------------

struct OracleSample {
    std::string text;
    __int128 value = 0;
};

OracleSample oracle_expr(std::mt19937_64& rng, int depth) {
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
    if (depth == 0 || pick(3) == 0) {
        std::int64_t v = pick(41) - 20;
        return {std::to_string(v), v};
    }
    OracleSample lhs = oracle_expr(rng, depth - 1);
    OracleSample rhs = oracle_expr(rng, depth - 1);
    switch (pick(3)) {
    case 0: return {"(" + lhs.text + " + " + rhs.text + ")", lhs.value + rhs.value};
    case 1: return {"(" + lhs.text + " - " + rhs.text + ")", lhs.value - rhs.value};
    default: return {"(" + lhs.text + " * " + rhs.text + ")", lhs.value * rhs.value};
    }
}

bool fits_int64(__int128 v) {
    return v >= static_cast<__int128>(INT64_MIN) && v <= static_cast<__int128>(INT64_MAX);
}

Limits generous() {
    Limits l;
    l.step_budget = 1'000'000;
    return l;
}

} // namespace

TEST_CASE("eval_math agrees with the oracle on 500 random integer expressions") {
    std::mt19937_64 rng(0x5eed);
    int checked = 0;
    while (checked < 500) {
        OracleSample s = oracle_expr(rng, 4);
        if (!fits_int64(s.value)) continue;
        PropertyValue got = eval_math(s.text, generous());
        REQUIRE(got.is_integer());
        if (got.as_integer() != static_cast<std::int64_t>(s.value)) CAPTURE(s.text);
        CHECK(got.as_integer() == static_cast<std::int64_t>(s.value));
        ++checked;
    }
}

TEST_CASE("exact division of an oracle product recovers the factor") {
    std::mt19937_64 rng(0xd1f);
    for (int i = 0; i < 100; ++i) {
        OracleSample s = oracle_expr(rng, 3);
        if (!fits_int64(s.value)) continue;
        std::int64_t k = 1 + static_cast<std::int64_t>(rng() % 9);
        if (!fits_int64(s.value * k)) continue;
        PropertyValue got = eval_math("(" + s.text + " * " + std::to_string(k) + ") / " +
                                      std::to_string(k), generous());
        REQUIRE(got.is_integer());
        CHECK(got.as_integer() == static_cast<std::int64_t>(s.value));
    }
}

TEST_CASE("operator precedence and integer-closed division") {
    CHECK(eval_math("2 + 3 * 4") == PropertyValue::integer(14));
    CHECK(eval_math("(2 + 3) * 4") == PropertyValue::integer(20));
    CHECK(eval_math("6 / 3") == PropertyValue::integer(2));
    CHECK(eval_math("7 / 2") == PropertyValue::real(3.5));
    CHECK(eval_math("7 % 3") == PropertyValue::integer(1));
    CHECK(eval_math("-5 + 2") == PropertyValue::integer(-3));
    CHECK(eval_math("2.5 * 2") == PropertyValue::real(5.0));
}

TEST_CASE("arithmetic failure modes trap instead of propagating") {
    CHECK_THROWS_AS(eval_math("1 / 0"), EvalError);
    CHECK_THROWS_AS(eval_math("1 % 0"), EvalError);
    CHECK_THROWS_AS(eval_math("9223372036854775807 + 1"), EvalError);
    CHECK_THROWS_AS(eval_math("1 + 'a'"), EvalError);
    CHECK_THROWS_AS(eval_math("1 < 'a'"), EvalError);
    CHECK_THROWS_AS(eval_math("not 3"), EvalError);
}

TEST_CASE("comparisons and boolean operators") {
    CHECK(eval_math("1 < 2") == PropertyValue::boolean(true));
    CHECK(eval_math("2 <= 2") == PropertyValue::boolean(true));
    CHECK(eval_math("1 == 1.0") == PropertyValue::boolean(true));
    CHECK(eval_math("1 == 'a'") == PropertyValue::boolean(false));
    CHECK(eval_math("1 != 'a'") == PropertyValue::boolean(true));
    CHECK(eval_math("true and false") == PropertyValue::boolean(false));
    CHECK(eval_math("true or false") == PropertyValue::boolean(true));
    CHECK(eval_math("not false") == PropertyValue::boolean(true));
}

TEST_CASE("short-circuit skips the right operand entirely") {
    // The right side would trap if evaluated.
    CHECK(eval_math("false and (1 / 0 == 1)") == PropertyValue::boolean(false));
    CHECK(eval_math("true or (1 / 0 == 1)") == PropertyValue::boolean(true));
}

TEST_CASE("eval_math accepts a full program as well as a bare expression") {
    CHECK(eval_math("let x = 2; result = x * 21") == PropertyValue::integer(42));
}

TEST_CASE("programs round-trip through the canonical printer") {
    const char* samples[] = {
        "let x = 1; result = x + 2",
        "result = [1, 2, 3]",
        "result = map([1, 2], x -> x * 2)",
        "let s = lower('ABC'); result = concat(s, '!', 5)",
        "result = not (true and false)",
        "result = -x",
        "let xs = filter([1, 2, 3], v -> v > 1); result = sum(xs)",
        "result = slice(sort_desc([3, 1, 2]), 0, 2)",
    };
    for (const char* text : samples) {
        Program p = parse_program(text);
        std::string printed = print_program(p);
        CHECK(parse_program(printed) == p);
        CHECK(print_program(parse_program(printed)) == printed);
    }
    CHECK(print_program(parse_program("let x = 1; result = x")) ==
          "let x = 1; result = x");
}

TEST_CASE("expressions round-trip too") {
    const char* samples[] = {"1 + 2 * 3", "(1 + 2) * 3", "length('abc') == 3",
                             "join([1, 2], '-')", "x -> x"};
    for (const char* text : samples) {
        if (std::string(text) == "x -> x") {
            CHECK_THROWS_AS(parse_expression(text), ParseError);
            continue;
        }
        Expr e = parse_expression(text);
        CHECK(parse_expression(print_expression(e)) == e);
    }
}

TEST_CASE("parse errors carry position and expectations") {
    try {
        parse_program("let = 1; result = 1");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
        CHECK(e.expected() == std::vector<std::string>{"a binding name"});
    }
    CHECK_THROWS_AS(parse_program("let x = 1;"), ParseError);
    CHECK_THROWS_AS(parse_program("result = 'unterminated"), ParseError);
    CHECK_THROWS_AS(parse_program("result = 1 @ 2"), ParseError);
    std::string deep(200, '(');
    deep += "1";
    deep += std::string(200, ')');
    CHECK_THROWS_AS(parse_expression(deep), ParseError);
}

TEST_CASE("the sorted-array program extracts the expected sum") {
    auto g = make_store(StoreBackend::PropertyGraph);
    test::build_sorted_array_graph(*g);
    Program p = parse_program(
        "let arr = index(nodes_by_label(\"Array\"), 0);\n"
        "let xs = sort_asc(property_of(arr, \"values\"));\n"
        "result = index(xs, 2) + index(xs, 4)");
    RunStats stats;
    PropertyValue out = run_program(p, g.get(), {}, &stats);
    CHECK(out == PropertyValue::integer(65));
    CHECK(stats.steps > 0);
}

TEST_CASE("graph accessors read labels, properties and topology") {
    auto g = make_store(StoreBackend::AdjacencyList);
    NodeId a = g->add_node("Person", {{"name", PropertyValue::text("Ada")}});
    NodeId b = g->add_node("Person", {{"name", PropertyValue::text("Bo")}});
    NodeId c = g->add_node("City", {});
    g->add_relationship(a, b, "KNOWS", {});
    g->add_relationship(a, b, "KNOWS", {});
    g->add_relationship(a, c, "IN", {});
    g->add_relationship(b, a, "KNOWS", {});

    auto run = [&](const std::string& text) {
        return run_program(parse_program(text), g.get());
    };
    CHECK(run("result = nodes_by_label('Person')") ==
          PropertyValue::list({PropertyValue::integer(a), PropertyValue::integer(b)}));
    CHECK(run("result = property_of(0, 'name')") == PropertyValue::text("Ada"));
    // Parallel edges collapse and only outgoing edges count.
    CHECK(run("result = neighbors(0)") ==
          PropertyValue::list({PropertyValue::integer(b), PropertyValue::integer(c)}));
    CHECK(run("result = edge_count()") == PropertyValue::integer(4));
    CHECK_THROWS_AS(run("result = property_of(99, 'name')"), EvalError);
    CHECK_THROWS_AS(run("result = property_of(2, 'name')"), EvalError);
    CHECK_THROWS_AS(run("result = nodes_by_label(7)"), EvalError);
}

TEST_CASE("graph accessors trap without an attached graph") {
    try {
        run_program(parse_program("result = nodes_by_label('Person')"), nullptr);
        FAIL("expected EvalError");
    } catch (const EvalError& e) {
        CHECK(std::string(e.what()).find("graph") != std::string::npos);
    }
}

TEST_CASE("list builtins behave as documented") {
    auto v = [&](const std::string& text) { return eval_math(text, generous()); };
    CHECK(v("sort_asc([3, 1, 2])") ==
          PropertyValue::list({PropertyValue::integer(1), PropertyValue::integer(2),
                               PropertyValue::integer(3)}));
    CHECK(v("sort_desc(['b', 'a'])") ==
          PropertyValue::list({PropertyValue::text("b"), PropertyValue::text("a")}));
    CHECK(v("map([1, 2, 3], x -> x * x)") ==
          PropertyValue::list({PropertyValue::integer(1), PropertyValue::integer(4),
                               PropertyValue::integer(9)}));
    CHECK(v("filter([1, 2, 3, 4], x -> x % 2 == 0)") ==
          PropertyValue::list({PropertyValue::integer(2), PropertyValue::integer(4)}));
    CHECK(v("index([10, 20], 1)") == PropertyValue::integer(20));
    CHECK(v("slice([1, 2, 3, 4], 1, 3)") ==
          PropertyValue::list({PropertyValue::integer(2), PropertyValue::integer(3)}));
    CHECK(v("slice([1, 2], 0, 99)") ==
          PropertyValue::list({PropertyValue::integer(1), PropertyValue::integer(2)}));
    CHECK(v("sum([1, 2, 3])") == PropertyValue::integer(6));
    CHECK(v("sum([1, 2.5])") == PropertyValue::real(3.5));
    CHECK(v("length([1, 2])") == PropertyValue::integer(2));
    CHECK(v("length('abc')") == PropertyValue::integer(3));
    CHECK_THROWS_AS(v("index([1], 1)"), EvalError);
    CHECK_THROWS_AS(v("index([1], -1)"), EvalError);
    CHECK_THROWS_AS(v("slice([1], 2, 1)"), EvalError);
    CHECK_THROWS_AS(v("sort_asc([1, 'a'])"), EvalError);
    CHECK_THROWS_AS(v("sum([1, 'a'])"), EvalError);
    CHECK_THROWS_AS(v("filter([1], x -> x)"), EvalError);
    CHECK_THROWS_AS(v("map([1], 2)"), EvalError);
}

TEST_CASE("text builtins behave as documented") {
    auto v = [&](const std::string& text) { return eval_math(text, generous()); };
    CHECK(v("lower('AbC')") == PropertyValue::text("abc"));
    CHECK(v("upper('AbC')") == PropertyValue::text("ABC"));
    CHECK(v("contains('hello', 'ell')") == PropertyValue::boolean(true));
    CHECK(v("contains('hello', 'xyz')") == PropertyValue::boolean(false));
    CHECK(v("concat('n=', 5)") == PropertyValue::text("n=5"));
    CHECK(v("join([1, 2, 3], '-')") == PropertyValue::text("1-2-3"));
    CHECK(v("join([], '-')") == PropertyValue::text(""));
    CHECK(v("round(2.6)") == PropertyValue::integer(3));
    CHECK(v("round(-2.6)") == PropertyValue::integer(-3));
    CHECK(v("round(7)") == PropertyValue::integer(7));
    CHECK_THROWS_AS(v("round('x')"), EvalError);
    CHECK_THROWS_AS(v("unknown_fn(1)"), EvalError);
}

TEST_CASE("lambda parameters shadow and restore outer bindings") {
    CHECK(eval_math("let x = 100; let ys = map([1, 2], x -> x + 1); result = x") ==
          PropertyValue::integer(100));
    CHECK(eval_math("let x = 100; let ys = map([1, 2], x -> x + 1); "
                    "result = index(ys, 1)") == PropertyValue::integer(3));
    CHECK_THROWS_AS(eval_math("result = map([1], x -> y)"), EvalError);
}

TEST_CASE("default limits are ten thousand steps and five seconds") {
    Limits l;
    CHECK(l.step_budget == 10000);
    CHECK(l.timeout == std::chrono::milliseconds(5000));
}

TEST_CASE("the step budget stops runaway evaluation") {
    Limits l;
    l.step_budget = 5;
    try {
        eval_math("1 + 1 + 1 + 1 + 1 + 1 + 1", l);
        FAIL("expected EvalError");
    } catch (const EvalError& e) {
        CHECK(e.step() == 6);
        CHECK(std::string(e.what()).find("budget") != std::string::npos);
    }
}

TEST_CASE("an already-expired deadline traps immediately") {
    Limits l;
    l.timeout = std::chrono::milliseconds(-1);
    try {
        eval_math("1 + 1", l);
        FAIL("expected EvalError");
    } catch (const EvalError& e) {
        CHECK(std::string(e.what()).find("timed out") != std::string::npos);
    }
}

TEST_CASE("builtins charge by data size so wide scans hit the budget") {
    auto g = make_store(StoreBackend::PropertyGraph);
    for (int i = 0; i < 50; ++i) g->add_node("Person", {});
    Limits l;
    l.step_budget = 20;
    CHECK_THROWS_AS(
        run_program(parse_program("result = nodes_by_label('Person')"), g.get(), l),
        EvalError);
}

TEST_CASE("evaluation never mutates the attached graph") {
    auto g = make_store(StoreBackend::PropertyGraph);
    test::build_sorted_array_graph(*g);
    std::string before = export_snapshot(*g);
    run_program(parse_program("result = length(nodes_by_label('Array'))"), g.get());
    try {
        run_program(parse_program("result = property_of(999, 'x')"), g.get());
    } catch (const EvalError&) {
    }
    CHECK(export_snapshot(*g) == before);
}
