#include <doctest.h>

#include <fstream>

#include "kga/tools.hpp"
#include "kga/ziparc.hpp"

#include "test_support.hpp"

using namespace kga;
using namespace kga::tools;

namespace {

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// A registry with one flaky tool that fails `fail_times` before succeeding.
ToolRegistry flaky_registry(int fail_times) {
    ToolRegistry reg;
    auto counter = std::make_shared<int>(0);
    reg.register_tool(
        ToolSpec{"flaky", "fails a few times first",
                 {{"n", {"integer", "payload", true}},
                  {"note", {"string", "unused extra", false}}}},
        [counter, fail_times](const nlohmann::json& args) -> std::string {
            if ((*counter)++ < fail_times) throw ToolError("transient failure");
            return "ok:" + args.at("n").dump();
        });
    return reg;
}

} // namespace

TEST_CASE("registration rejects duplicates, empty names, long descriptions") {
    ToolRegistry reg;
    reg.register_tool(ToolSpec{"a", "first", {}}, [](const nlohmann::json&) {
        return std::string("1");
    });
    CHECK(reg.has("a"));
    CHECK_FALSE(reg.has("b"));
    CHECK_THROWS_AS(reg.register_tool(ToolSpec{"a", "again", {}},
                                      [](const nlohmann::json&) { return ""; }),
                    ToolError);
    CHECK_THROWS_AS(reg.register_tool(ToolSpec{"", "unnamed", {}},
                                      [](const nlohmann::json&) { return ""; }),
                    ToolError);
    CHECK_THROWS_AS(
        reg.register_tool(ToolSpec{"big", std::string(kMaxDescriptionLength + 1, 'x'), {}},
                          [](const nlohmann::json&) { return ""; }),
        ToolError);
    CHECK_NOTHROW(
        reg.register_tool(ToolSpec{"fits", std::string(kMaxDescriptionLength, 'x'), {}},
                          [](const nlohmann::json&) { return ""; }));
}

TEST_CASE("the specs text lists tools in registration order with their args") {
    ToolRegistry reg = flaky_registry(0);
    reg.register_tool(ToolSpec{"second", "another tool", {}},
                      [](const nlohmann::json&) { return ""; });
    std::string text = reg.render_specs_text();
    CHECK(text.find("- flaky: fails a few times first") != std::string::npos);
    CHECK(text.find("n (integer, required): payload") != std::string::npos);
    CHECK(text.find("note (string, optional): unused extra") != std::string::npos);
    CHECK(text.find("- flaky") < text.find("- second"));
}

TEST_CASE("invocation validates before spending any attempts") {
    ToolRegistry reg = flaky_registry(0);
    auto unknown = reg.invoke_with_retry({"nope", nlohmann::json::object(), "c1"}, 3);
    CHECK_FALSE(unknown.success);
    CHECK(unknown.attempts == 0);
    CHECK(unknown.content.find("unknown tool") != std::string::npos);

    auto missing = reg.invoke_with_retry({"flaky", nlohmann::json::object(), "c2"}, 3);
    CHECK_FALSE(missing.success);
    CHECK(missing.attempts == 0);
    CHECK(missing.content.find("missing argument 'n'") != std::string::npos);

    auto wrong_type = reg.invoke_with_retry({"flaky", {{"n", "five"}}, "c3"}, 3);
    CHECK_FALSE(wrong_type.success);
    CHECK(wrong_type.content.find("must be a integer") != std::string::npos);

    auto extra = reg.invoke_with_retry({"flaky", {{"n", 1}, {"bogus", 2}}, "c4"}, 3);
    CHECK_FALSE(extra.success);
    CHECK(extra.content.find("no argument 'bogus'") != std::string::npos);

    auto not_object = reg.invoke_with_retry({"flaky", nlohmann::json::array(), "c5"}, 3);
    CHECK_FALSE(not_object.success);
    CHECK(not_object.content.find("must be an object") != std::string::npos);
}

TEST_CASE("retries run up to the limit and keep the failure log") {
    ToolRegistry twice = flaky_registry(2);
    auto ok = twice.invoke_with_retry({"flaky", {{"n", 7}}, "c1"}, 3);
    CHECK(ok.success);
    CHECK(ok.attempts == 3);
    CHECK(ok.content == "ok:7");
    CHECK(ok.failure_log == std::vector<std::string>{"transient failure",
                                                     "transient failure"});

    ToolRegistry always = flaky_registry(99);
    auto failed = always.invoke_with_retry({"flaky", {{"n", 7}}, "c2"}, 3);
    CHECK_FALSE(failed.success);
    CHECK(failed.attempts == 3);
    CHECK(failed.failure_log.size() == 3);
    CHECK(failed.content == "transient failure");

    // Optional arguments may simply be absent.
    ToolRegistry opt = flaky_registry(0);
    CHECK(opt.invoke_with_retry({"flaky", {{"n", 1}}, "c3"}, 1).success);
    CHECK(opt.invoke_with_retry({"flaky", {{"n", 1}, {"note", "x"}}, "c4"}, 1).success);
}

TEST_CASE("the calculator evaluates expressions and reports parse failures") {
    ToolRegistry reg;
    register_builtin_tools(reg, {});
    auto sum = reg.invoke_with_retry({"calculator", {{"expression", "2 + 3 * 4"}}, "c"}, 1);
    CHECK(sum.success);
    CHECK(sum.content == "14");
    auto frac = reg.invoke_with_retry({"calculator", {{"expression", "7 / 2"}}, "c"}, 1);
    CHECK(frac.success);
    CHECK(frac.content == "3.5");
    auto prog = reg.invoke_with_retry(
        {"calculator", {{"expression", "let x = 6; result = x * 7"}}, "c"}, 1);
    CHECK(prog.success);
    CHECK(prog.content == "42");
    auto bad = reg.invoke_with_retry({"calculator", {{"expression", "2 +"}}, "c"}, 1);
    CHECK_FALSE(bad.success);
    CHECK(bad.content.find("cannot parse") != std::string::npos);
    auto div0 = reg.invoke_with_retry({"calculator", {{"expression", "1 / 0"}}, "c"}, 1);
    CHECK_FALSE(div0.success);
    CHECK(div0.content.find("evaluation failed") != std::string::npos);
}

TEST_CASE("text_inspector reads text files and tabulates CSV") {
    std::string root = test::temp_dir("tools-root");
    write_text(root + "/notes.txt", "line one\nline two\n");
    write_text(root + "/table.csv",
               "name,score\n\"Smith, Jo\",10\n\"say \"\"hi\"\"\",2\na|b,3\n");
    write_text(root + "/image.png", "not really an image");
    write_text(root + "/blob.dat", std::string("ab\0cd", 5));
    std::filesystem::create_directories(root + "/sub");

    ToolRegistry reg;
    BuiltinToolOptions opts;
    opts.fixture_root = root;
    register_builtin_tools(reg, opts);

    auto txt = reg.invoke_with_retry({"text_inspector", {{"path", "notes.txt"}}, "c"}, 1);
    CHECK(txt.success);
    CHECK(txt.content == "# notes.txt\n\nline one\nline two\n");

    auto csv = reg.invoke_with_retry({"text_inspector", {{"path", "table.csv"}}, "c"}, 1);
    CHECK(csv.success);
    CHECK(csv.content == "# table.csv\n\n"
                         "| name | score |\n"
                         "| --- | --- |\n"
                         "| Smith, Jo | 10 |\n"
                         "| say \"hi\" | 2 |\n"
                         "| a\\|b | 3 |\n");

    auto png = reg.invoke_with_retry({"text_inspector", {{"path", "image.png"}}, "c"}, 1);
    CHECK_FALSE(png.success);
    CHECK(png.content.find("unsupported file type") != std::string::npos);

    auto blob = reg.invoke_with_retry({"text_inspector", {{"path", "blob.dat"}}, "c"}, 1);
    CHECK_FALSE(blob.success);
    CHECK(blob.content.find("looks binary") != std::string::npos);

    auto dir = reg.invoke_with_retry({"text_inspector", {{"path", "sub"}}, "c"}, 1);
    CHECK_FALSE(dir.success);
    CHECK(dir.content.find("is a directory") != std::string::npos);
}

TEST_CASE("file tools refuse paths that leave the fixture root") {
    std::string root = test::temp_dir("tools-jail");
    write_text(root + "/ok.txt", "fine");

    ToolRegistry reg;
    BuiltinToolOptions opts;
    opts.fixture_root = root;
    register_builtin_tools(reg, opts);

    for (const char* path : {"../etc/passwd", "/etc/passwd", "a/../../b", "ghost.txt"}) {
        auto r = reg.invoke_with_retry({"text_inspector", {{"path", path}}, "c"}, 1);
        CAPTURE(path);
        CHECK_FALSE(r.success);
    }
}

TEST_CASE("archive_extract unpacks into the scratch directory") {
    std::string root = test::temp_dir("tools-zip-root");
    std::string scratch = test::temp_dir("tools-zip-scratch");
    std::vector<ZipEntry> entries = {
        {"docs/", "", true},
        {"docs/readme.txt", "hello from the archive", false},
        {"data.bin", std::string("\0\1\2", 3), false},
    };
    write_zip(root + "/bundle.zip", entries, true);
    write_text(root + "/not_a.zip", "PK but not really");

    ToolRegistry reg;
    BuiltinToolOptions opts;
    opts.fixture_root = root;
    opts.scratch_dir = scratch;
    register_builtin_tools(reg, opts);

    auto r = reg.invoke_with_retry({"archive_extract", {{"path", "bundle.zip"}}, "c"}, 1);
    CHECK(r.success);
    CHECK(r.content.find("docs/readme.txt (22 bytes)") != std::string::npos);
    // Text entries are inlined, binary ones only listed.
    CHECK(r.content.find("## docs/readme.txt\nhello from the archive") !=
          std::string::npos);
    CHECK(r.content.find("## data.bin") == std::string::npos);
    bool found = false;
    for (const auto& e : std::filesystem::recursive_directory_iterator(scratch)) {
        if (e.path().filename() == "readme.txt") {
            found = true;
            CHECK(test::read_file(e.path().string()) == "hello from the archive");
        }
    }
    CHECK(found);

    auto bad = reg.invoke_with_retry({"archive_extract", {{"path", "not_a.zip"}}, "c"}, 1);
    CHECK_FALSE(bad.success);
}

TEST_CASE("search matches corpus patterns case-insensitively") {
    std::string dir = test::temp_dir("tools-corpus");
    write_text(dir + "/corpus.json", R"([
        {"pattern": "word of the day", "snippets": ["petrichor was featured"]},
        {"pattern": "sorted array", "snippets": ["sorting puts 2 first", "88 comes last"]}
    ])");

    ToolRegistry reg;
    BuiltinToolOptions opts;
    opts.corpus_path = dir + "/corpus.json";
    register_builtin_tools(reg, opts);

    auto hit = reg.invoke_with_retry(
        {"search", {{"query", "What was the Word Of The Day?"}}, "c"}, 1);
    CHECK(hit.success);
    CHECK(hit.content == "1 result:\n- petrichor was featured\n");

    auto two = reg.invoke_with_retry({"search", {{"query", "the sorted array"}}, "c"}, 1);
    CHECK(two.success);
    CHECK(two.content.find("2 results:") == 0);

    auto miss = reg.invoke_with_retry({"search", {{"query", "unrelated"}}, "c"}, 1);
    CHECK(miss.success);
    CHECK(miss.content == "0 results");

    BuiltinToolOptions none;
    none.corpus_path = dir + "/absent.json";
    ToolRegistry reg2;
    register_builtin_tools(reg2, none);
    auto broken = reg2.invoke_with_retry({"search", {{"query", "x"}}, "c"}, 1);
    CHECK_FALSE(broken.success);
}

TEST_CASE("zip archives round-trip through writer and reader") {
    std::string dir = test::temp_dir("ziprt");
    std::vector<ZipEntry> entries = {
        {"a.txt", "alpha", false},
        {"nested/", "", true},
        {"nested/b.txt", std::string(5000, 'z'), false},
    };
    for (bool compress : {false, true}) {
        std::string path = dir + (compress ? "/c.zip" : "/s.zip");
        write_zip(path, entries, compress);
        auto back = read_zip(path);
        REQUIRE(back.size() == entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            CHECK(back[i].name == entries[i].name);
            CHECK(back[i].content == entries[i].content);
            CHECK(back[i].is_dir == entries[i].is_dir);
        }
    }
    CHECK_THROWS_AS(read_zip(dir + "/missing.zip"), ZipError);
    write_text(dir + "/junk.zip", "this is not a zip file at all");
    CHECK_THROWS_AS(read_zip(dir + "/junk.zip"), ZipError);
}
