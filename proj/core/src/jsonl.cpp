#include "jsonl.hpp"

#include "vpt/errors.hpp"

namespace vpt::detail {

void
for_each_jsonl(std::istream& in,
               const std::function<void(std::size_t, const Json&)>& fn)
{
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      fn(line_no, rec);
    } catch (const Error&) {
      throw;
    } catch (const Json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

void
write_jsonl(std::ostream& out, const Json& record)
{
  out << record.dump() << '\n';
}

std::string
require_string(const Json& rec, const char* key, std::size_t line)
{
  const auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw ParseError(line, std::string("expected string field \"") + key + "\"");
  }
  return it->get<std::string>();
}

double
require_number(const Json& rec, const char* key, std::size_t line)
{
  const auto it = rec.find(key);
  if (it == rec.end() || !it->is_number()) {
    throw ParseError(line, std::string("expected numeric field \"") + key + "\"");
  }
  return it->get<double>();
}

} // namespace vpt::detail
