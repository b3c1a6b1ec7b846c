#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vpt {

// Base for everything thrown by the library. Subclasses map onto the
// failure categories callers are expected to distinguish.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error
{
public:
  using Error::Error;
};

class ValidationError : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

class NotFoundError : public Error
{
public:
  using Error::Error;
};

class RangeError : public Error
{
public:
  using Error::Error;
};

class DomainError : public Error
{
public:
  using Error::Error;
};

class IoError : public Error
{
public:
  using Error::Error;
};

class CorruptionError : public Error
{
public:
  using Error::Error;
};

class NumericalError : public Error
{
public:
  using Error::Error;
};

// Malformed input text. `line()` is 1-based; 0 when not line oriented.
class ParseError : public Error
{
public:
  ParseError(std::size_t line, const std::string& what);

  std::size_t line() const noexcept { return m_line; }

private:
  std::size_t m_line;
};

} // namespace vpt
