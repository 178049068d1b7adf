// Shared helpers for the test suites: fixture paths, file IO, seeded random
// graph generation, and the two frozen example graphs that several suites
// reference (a writer/word-of-the-day graph and a script/array graph).
#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "kga/graph.hpp"

namespace kga::test {

inline std::string fixture_path(const std::string& rel) {
    return std::string(KGA_FIXTURE_DIR) + "/" + rel;
}

inline std::string prompt_dir() { return KGA_PROMPT_DIR; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("test fixture missing: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string temp_dir(const std::string& stem) {
    auto dir = std::filesystem::temp_directory_path() /
               ("kga-test-" + stem + "-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir.string();
}

// Writer quoted for a word-of-the-day entry and in a separate quote. Node
// and relationship insertion order matches the scripted end-to-end run so
// the exported snapshot is byte-comparable with that run's output.
inline void build_writer_quote_graph(GraphStore& g) {
    NodeId w = g.add_node("Writer", {{"name", PropertyValue::text("Edna Holloway")}});
    NodeId d = g.add_node("WordOfTheDay",
                          {{"counter", PropertyValue::integer(1)},
                           {"date", PropertyValue::text("2016-06-27")},
                           {"definition", PropertyValue::text("the earthy scent after rain")},
                           {"origin", PropertyValue::text("from Greek roots")},
                           {"pronunciation", PropertyValue::text("PET-rih-kor")},
                           {"word", PropertyValue::text("petrichor")}});
    g.add_relationship(w, d, "QUOTED_FOR", {});
    NodeId q = g.add_node("Quote",
                          {{"date", PropertyValue::text("2016-06-27")},
                           {"source", PropertyValue::text("Harvest Evening")},
                           {"text", PropertyValue::text("The petrichor rose from the fields.")}});
    g.add_relationship(w, q, "QUOTED_IN", {});
}

// Web page whose script builds an integer array, plus the sorted copy that
// a second enhancement round adds. The answer-extraction program sums the
// elements at indices 2 and 4 of the sorted array: 23 + 42 = 65.
inline void build_sorted_array_graph(GraphStore& g) {
    auto ints = [](std::initializer_list<int> xs) {
        std::vector<PropertyValue> vals;
        for (int x : xs) vals.push_back(PropertyValue::integer(x));
        return PropertyValue::list(std::move(vals));
    };
    NodeId u = g.add_node(
        "URL", {{"address", PropertyValue::text("https://example.org/challenge.html")}});
    NodeId s = g.add_node("Script", {{"name", PropertyValue::text("challenge.js")}});
    NodeId f = g.add_node("Function", {{"name", PropertyValue::text("computeAnswer")}});
    NodeId a = g.add_node("Array", {{"values", ints({42, 23, 2, 88, 37, 15})}});
    g.add_relationship(u, s, "contains", {});
    g.add_relationship(s, f, "uses", {});
    g.add_relationship(f, a, "constructs", {});
    NodeId sorted = g.add_node("SortedArray", {{"values", ints({2, 15, 23, 37, 42, 88})}});
    g.add_relationship(a, sorted, "sorted_into", {});
}

// Random graph with <= max_nodes nodes, a few labels and property keys, and
// random edges (self-loops and parallel edges included on purpose).
inline void build_random_graph(GraphStore& g, std::mt19937_64& rng,
                               std::size_t max_nodes = 20) {
    static const char* labels[] = {"Person", "City", "Item", "Tag"};
    static const char* keys[] = {"name", "rank", "size", "flag"};
    static const char* rel_labels[] = {"KNOWS", "IN", "HAS", ""};

    std::uniform_int_distribution<std::size_t> node_count(1, max_nodes);
    std::size_t n = node_count(rng);
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < n; ++i) {
        PropertyMap props;
        std::uniform_int_distribution<int> prop_count(0, 3);
        int k = prop_count(rng);
        for (int p = 0; p < k; ++p) {
            const char* key = keys[rng() % 4];
            switch (rng() % 4) {
            case 0: props[key] = PropertyValue::text("v" + std::to_string(rng() % 5)); break;
            case 1: props[key] = PropertyValue::integer(static_cast<std::int64_t>(rng() % 10)); break;
            case 2: props[key] = PropertyValue::real(0.5 * static_cast<double>(rng() % 8)); break;
            default: props[key] = PropertyValue::boolean(rng() % 2 == 0); break;
            }
        }
        ids.push_back(g.add_node(labels[rng() % 4], std::move(props)));
    }
    std::uniform_int_distribution<std::size_t> edge_count(0, 2 * n);
    std::size_t m = edge_count(rng);
    for (std::size_t i = 0; i < m; ++i) {
        NodeId src = ids[rng() % ids.size()];
        NodeId dst = ids[rng() % ids.size()];
        g.add_relationship(src, dst, rel_labels[rng() % 4], {});
    }
}

} // namespace kga::test
