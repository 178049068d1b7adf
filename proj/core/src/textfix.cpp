#include "kga/textfix.hpp"

#include <cctype>
#include <cstdint>

namespace kga {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

} // namespace

std::string strip_code_fences(const std::string& raw) {
    std::size_t open = raw.find("```");
    if (open == std::string::npos) return trim(raw);
    std::size_t body = raw.find('\n', open);
    if (body == std::string::npos) return trim(raw);
    ++body;
    std::size_t close = raw.find("```", body);
    if (close == std::string::npos) return trim(raw.substr(body));
    return trim(raw.substr(body, close - body));
}

std::string decode_escapes(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c != '\\' || i + 1 >= raw.size()) {
            out += c;
            continue;
        }
        char n = raw[i + 1];
        switch (n) {
        case 'n': out += '\n'; ++i; break;
        case 't': out += '\t'; ++i; break;
        case 'r': out += '\r'; ++i; break;
        case '"': out += '"'; ++i; break;
        case '\'': out += '\''; ++i; break;
        case '\\': out += '\\'; ++i; break;
        case 'u': {
            if (i + 5 < raw.size()) {
                std::uint32_t cp = 0;
                bool ok = true;
                for (int k = 0; k < 4; ++k) {
                    char h = raw[i + 2 + k];
                    cp <<= 4;
                    if (h >= '0' && h <= '9') cp |= static_cast<std::uint32_t>(h - '0');
                    else if (h >= 'a' && h <= 'f') cp |= static_cast<std::uint32_t>(h - 'a' + 10);
                    else if (h >= 'A' && h <= 'F') cp |= static_cast<std::uint32_t>(h - 'A' + 10);
                    else { ok = false; break; }
                }
                if (ok) {
                    append_utf8(out, cp);
                    i += 5;
                    break;
                }
            }
            out += c; // malformed \u, keep backslash as-is
            break;
        }
        default:
            out += c; // unknown escape, keep untouched
            break;
        }
    }
    return out;
}

std::string balance_tail(const std::string& raw) {
    int parens = 0, brackets = 0, braces = 0;
    char quote = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        switch (c) {
        case '\'': case '"': quote = c; break;
        case '(': ++parens; break;
        case ')': --parens; break;
        case '[': ++brackets; break;
        case ']': --brackets; break;
        case '{': ++braces; break;
        case '}': --braces; break;
        default: break;
        }
    }
    std::string out = raw;
    int missing = (quote ? 1 : 0) + (parens == 1) + (brackets == 1) + (braces == 1);
    if (missing != 1) return out;
    if (quote) out += quote;
    else if (parens == 1) out += ')';
    else if (brackets == 1) out += ']';
    else out += '}';
    return out;
}

std::string repair_text(const std::string& raw) {
    return balance_tail(decode_escapes(strip_code_fences(raw)));
}

} // namespace kga
