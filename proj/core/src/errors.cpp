#include "vpt/errors.hpp"

namespace vpt {

ParseError::ParseError(std::size_t line, const std::string& what)
  : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
    m_line(line)
{
}

} // namespace vpt
