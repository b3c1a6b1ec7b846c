#pragma once

// Line-delimited JSON helpers shared by the module readers. Not installed.

#include <cstddef>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

namespace vpt::detail {

using Json = nlohmann::json;

// Calls `fn(line_number, record)` for every non-blank line. Throws
// ParseError naming the 1-based line on malformed JSON; exceptions thrown
// by `fn` that are not already vpt errors are rewrapped with the line.
void for_each_jsonl(std::istream& in,
                    const std::function<void(std::size_t, const Json&)>& fn);

void write_jsonl(std::ostream& out, const Json& record);

// Typed field access that reports the missing/mistyped key.
std::string require_string(const Json& rec, const char* key, std::size_t line);
double require_number(const Json& rec, const char* key, std::size_t line);

} // namespace vpt::detail
