#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kga/error.hpp"

namespace kga {

// Property values carried by nodes and relationships: text, 64-bit integer,
// finite real, boolean, or a flat list of those scalars. Maps and lists of
// lists are rejected at construction so every value survives a JSON round trip
// unchanged.
class PropertyValue {
public:
    enum class Kind { Text, Integer, Real, Boolean, List };

    PropertyValue() : repr_(std::string{}) {}

    static PropertyValue text(std::string v);
    static PropertyValue integer(std::int64_t v);
    static PropertyValue real(double v);     // throws GraphError on NaN/inf
    static PropertyValue boolean(bool v);
    static PropertyValue list(std::vector<PropertyValue> items); // scalar items only

    Kind kind() const;
    bool is_text() const { return kind() == Kind::Text; }
    bool is_integer() const { return kind() == Kind::Integer; }
    bool is_real() const { return kind() == Kind::Real; }
    bool is_number() const { return is_integer() || is_real(); }
    bool is_boolean() const { return kind() == Kind::Boolean; }
    bool is_list() const { return kind() == Kind::List; }

    const std::string& as_text() const;
    std::int64_t as_integer() const;
    double as_real() const;            // accepts Integer, widening to double
    bool as_boolean() const;
    const std::vector<PropertyValue>& as_list() const;

    bool operator==(const PropertyValue& other) const;
    bool operator!=(const PropertyValue& other) const { return !(*this == other); }

    // Ordering used by query comparisons: numbers compare numerically across
    // Integer/Real, text lexicographically, booleans false < true, lists
    // elementwise. Mixed kinds are incomparable and yield nullopt.
    static std::optional<int> compare(const PropertyValue& a, const PropertyValue& b);

    // Canonical text: reals use the shortest digit string that round-trips.
    std::string display() const;
    // Same but text values come wrapped in single quotes, for graph listings.
    std::string display_quoted() const;

    nlohmann::json to_json() const;
    static PropertyValue from_json(const nlohmann::json& j); // throws GraphError

private:
    using Repr = std::variant<std::string, std::int64_t, double, bool,
                              std::vector<PropertyValue>>;
    explicit PropertyValue(Repr r) : repr_(std::move(r)) {}
    Repr repr_;
};

using PropertyMap = std::map<std::string, PropertyValue>;

std::string format_real_shortest(double v);

nlohmann::json property_map_to_json(const PropertyMap& m);
PropertyMap property_map_from_json(const nlohmann::json& j);

} // namespace kga
