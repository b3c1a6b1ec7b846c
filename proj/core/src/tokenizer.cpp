#include "vpt/tokenizer.hpp"

#include <algorithm>

#include "vpt/errors.hpp"

namespace vpt {

TokenSequence
tokenize(std::string_view text, std::size_t max_len)
{
  if (max_len < 2) {
    throw ArgumentError("tokenize: max_len must be >= 2");
  }
  const std::size_t n = std::min(text.size(), max_len - 2);
  TokenSequence out;
  out.reserve(max_len);
  out.push_back(kBosToken);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(static_cast<std::uint8_t>(text[i]));
  }
  out.push_back(kEosToken);
  out.resize(max_len, kPadToken);
  return out;
}

std::string
detokenize(std::span<const std::int32_t> tokens)
{
  std::string out;
  std::size_t i = 0;
  if (!tokens.empty() && tokens[0] == kBosToken) {
    i = 1;
  }
  for (; i < tokens.size(); ++i) {
    const auto t = tokens[i];
    if (t == kEosToken) {
      break;
    }
    if (t >= 0 && t < 256) {
      out.push_back(static_cast<char>(static_cast<std::uint8_t>(t)));
    }
  }
  return out;
}

std::size_t
unpadded_length(std::span<const std::int32_t> tokens) noexcept
{
  std::size_t n = tokens.size();
  while (n > 0 && tokens[n - 1] == kPadToken) {
    --n;
  }
  return n;
}

void
validate_tokens(std::span<const std::int32_t> tokens, std::size_t max_len)
{
  if (tokens.size() > max_len) {
    throw ValidationError("token sequence longer than max_target_len");
  }
  const std::size_t n = unpadded_length(tokens);
  if (std::find(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n), kPadToken)
      != tokens.begin() + static_cast<std::ptrdiff_t>(n)) {
    throw ValidationError("PAD token inside a token sequence");
  }
}

} // namespace vpt
