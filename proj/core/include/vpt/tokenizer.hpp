#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vpt {

// Byte-level vocabulary: ids 0..255 are raw bytes, then three specials.
inline constexpr std::int32_t kPadToken = 256;
inline constexpr std::int32_t kBosToken = 257;
inline constexpr std::int32_t kEosToken = 258;
inline constexpr std::size_t kByteVocabSize = 259;

using TokenSequence = std::vector<std::int32_t>;

// [BOS, bytes..., EOS, PAD...] of exactly max_len ids. Text longer than
// max_len - 2 bytes is truncated; EOS is always kept. max_len must be >= 2.
TokenSequence tokenize(std::string_view text, std::size_t max_len);

// Bytes between the leading BOS and the first EOS; PAD and stray specials
// are skipped.
std::string detokenize(std::span<const std::int32_t> tokens);

// Number of ids before the PAD suffix.
std::size_t unpadded_length(std::span<const std::int32_t> tokens) noexcept;

// Throws ValidationError unless PAD appears only as a suffix and the
// length is within max_len.
void validate_tokens(std::span<const std::int32_t> tokens, std::size_t max_len);

} // namespace vpt
