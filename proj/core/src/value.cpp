#include "kga/value.hpp"

#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

namespace kga {

std::string ParseError::render(std::size_t line, std::size_t col,
                               const std::vector<std::string>& expected,
                               const std::string& found) {
    std::string out = std::to_string(line) + ":" + std::to_string(col) + " expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i > 0) out += (i + 1 == expected.size()) ? " or " : ", ";
        out += expected[i];
    }
    if (expected.empty()) out += "nothing";
    out += " found " + found;
    return out;
}

std::pair<std::size_t, std::size_t> line_col_at(const std::string& text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

PropertyValue PropertyValue::text(std::string v) { return PropertyValue(Repr(std::move(v))); }
PropertyValue PropertyValue::integer(std::int64_t v) { return PropertyValue(Repr(v)); }

PropertyValue PropertyValue::real(double v) {
    if (!std::isfinite(v)) throw GraphError("property real must be finite");
    return PropertyValue(Repr(v));
}

PropertyValue PropertyValue::boolean(bool v) { return PropertyValue(Repr(v)); }

PropertyValue PropertyValue::list(std::vector<PropertyValue> items) {
    for (const auto& it : items) {
        if (it.is_list()) throw GraphError("property lists hold scalars only");
    }
    return PropertyValue(Repr(std::move(items)));
}

PropertyValue::Kind PropertyValue::kind() const {
    switch (repr_.index()) {
    case 0: return Kind::Text;
    case 1: return Kind::Integer;
    case 2: return Kind::Real;
    case 3: return Kind::Boolean;
    default: return Kind::List;
    }
}

const std::string& PropertyValue::as_text() const {
    if (!is_text()) throw GraphError("property value is not text");
    return std::get<std::string>(repr_);
}

std::int64_t PropertyValue::as_integer() const {
    if (!is_integer()) throw GraphError("property value is not an integer");
    return std::get<std::int64_t>(repr_);
}

double PropertyValue::as_real() const {
    if (is_integer()) return static_cast<double>(std::get<std::int64_t>(repr_));
    if (!is_real()) throw GraphError("property value is not a number");
    return std::get<double>(repr_);
}

bool PropertyValue::as_boolean() const {
    if (!is_boolean()) throw GraphError("property value is not a boolean");
    return std::get<bool>(repr_);
}

const std::vector<PropertyValue>& PropertyValue::as_list() const {
    if (!is_list()) throw GraphError("property value is not a list");
    return std::get<std::vector<PropertyValue>>(repr_);
}

bool PropertyValue::operator==(const PropertyValue& other) const {
    return repr_ == other.repr_;
}

std::optional<int> PropertyValue::compare(const PropertyValue& a, const PropertyValue& b) {
    if (a.is_number() && b.is_number()) {
        if (a.is_integer() && b.is_integer()) {
            auto x = a.as_integer(), y = b.as_integer();
            return x < y ? -1 : (x > y ? 1 : 0);
        }
        double x = a.as_real(), y = b.as_real();
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    if (a.kind() != b.kind()) return std::nullopt;
    switch (a.kind()) {
    case Kind::Text: {
        int c = a.as_text().compare(b.as_text());
        return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case Kind::Boolean:
        return int(a.as_boolean()) - int(b.as_boolean());
    case Kind::List: {
        const auto& xs = a.as_list();
        const auto& ys = b.as_list();
        for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
            auto c = compare(xs[i], ys[i]);
            if (!c) return std::nullopt;
            if (*c != 0) return c;
        }
        if (xs.size() == ys.size()) return 0;
        return xs.size() < ys.size() ? -1 : 1;
    }
    default:
        return std::nullopt; // unreachable
    }
}

std::string format_real_shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, res.ptr);
    // Keep reals visually distinct from integers.
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
        s += ".0";
    }
    return s;
}

std::string PropertyValue::display() const {
    switch (kind()) {
    case Kind::Text: return as_text();
    case Kind::Integer: return std::to_string(as_integer());
    case Kind::Real: return format_real_shortest(std::get<double>(repr_));
    case Kind::Boolean: return as_boolean() ? "true" : "false";
    case Kind::List: {
        std::string out = "[";
        const auto& xs = as_list();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i) out += ", ";
            out += xs[i].display_quoted();
        }
        return out + "]";
    }
    }
    return {};
}

std::string PropertyValue::display_quoted() const {
    if (!is_text()) return display();
    std::string out = "'";
    for (char c : as_text()) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
    }
    return out + "'";
}

nlohmann::json PropertyValue::to_json() const {
    switch (kind()) {
    case Kind::Text: return as_text();
    case Kind::Integer: return as_integer();
    case Kind::Real: return std::get<double>(repr_);
    case Kind::Boolean: return as_boolean();
    case Kind::List: {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& it : as_list()) arr.push_back(it.to_json());
        return arr;
    }
    }
    return {};
}

PropertyValue PropertyValue::from_json(const nlohmann::json& j) {
    switch (j.type()) {
    case nlohmann::json::value_t::string:
        return text(j.get<std::string>());
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned:
        return integer(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_float:
        return real(j.get<double>());
    case nlohmann::json::value_t::boolean:
        return boolean(j.get<bool>());
    case nlohmann::json::value_t::array: {
        std::vector<PropertyValue> items;
        items.reserve(j.size());
        for (const auto& el : j) items.push_back(from_json(el));
        return list(std::move(items));
    }
    default:
        throw GraphError("unsupported property value type: " + std::string(j.type_name()));
    }
}

nlohmann::json property_map_to_json(const PropertyMap& m) {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [k, v] : m) obj[k] = v.to_json();
    return obj;
}

PropertyMap property_map_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw GraphError("properties must be a JSON object");
    PropertyMap m;
    for (auto it = j.begin(); it != j.end(); ++it) {
        m.emplace(it.key(), PropertyValue::from_json(it.value()));
    }
    return m;
}

} // namespace kga
