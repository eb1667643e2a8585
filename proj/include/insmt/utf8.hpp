#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace insmt::utf8 {

// Decodes UTF-8, rejecting overlong forms, surrogates and truncated sequences.
// Returns std::nullopt on invalid input; `error_offset` receives the byte offset.
std::optional<std::u32string> decode(std::string_view text, std::size_t* error_offset = nullptr);

// Throws ValidationError on invalid input.
std::u32string decode_or_throw(std::string_view text);

std::string encode(char32_t codepoint);
std::string encode(std::u32string_view text);

bool valid(std::string_view text);

// Simple case mapping through the C.UTF-8 locale; ASCII-only if that locale is missing.
std::string lowercase(std::string_view text);

std::size_t length(std::string_view text);

}  // namespace insmt::utf8
