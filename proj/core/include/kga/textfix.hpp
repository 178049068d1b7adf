#pragma once

#include <string>

namespace kga {

// Cleans up model-emitted query or script text before parsing:
//  1. strips markdown code fences (``` / ```lang) and surrounding prose
//     outside the fence when a fence is present,
//  2. decodes doubly-escaped sequences (\n, \t, \r, \", \', \\, \uXXXX),
//  3. appends a single missing closing quote or parenthesis when exactly one
//     is missing at the end.
// Idempotent on its own output for text without escape sequences; never
// throws, returns the input trimmed if nothing applies.
std::string repair_text(const std::string& raw);

// Steps 1-3 individually, exposed for targeted tests.
std::string strip_code_fences(const std::string& raw);
std::string decode_escapes(const std::string& raw);
std::string balance_tail(const std::string& raw);

} // namespace kga
