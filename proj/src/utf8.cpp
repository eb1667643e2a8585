#include "insmt/utf8.hpp"

#include <locale>

#include "insmt/errors.hpp"

namespace insmt::utf8 {

std::optional<std::u32string> decode(std::string_view text, std::size_t* error_offset) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  auto fail = [&](std::size_t at) -> std::optional<std::u32string> {
    if (error_offset) *error_offset = at;
    return std::nullopt;
  };
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    int extra = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if (lead < 0x80) {
      out.push_back(lead);
      ++i;
      continue;
    } else if ((lead & 0xE0) == 0xC0) {
      extra = 1, cp = lead & 0x1F, min = 0x80;
    } else if ((lead & 0xF0) == 0xE0) {
      extra = 2, cp = lead & 0x0F, min = 0x800;
    } else if ((lead & 0xF8) == 0xF0) {
      extra = 3, cp = lead & 0x07, min = 0x10000;
    } else {
      return fail(i);
    }
    if (i + static_cast<std::size_t>(extra) >= text.size()) return fail(i);
    for (int k = 1; k <= extra; ++k) {
      const auto b = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
      if ((b & 0xC0) != 0x80) return fail(i);
      cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return fail(i);
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

std::u32string decode_or_throw(std::string_view text) {
  std::size_t offset = 0;
  auto decoded = decode(text, &offset);
  if (!decoded) throw ValidationError("invalid UTF-8 at byte " + std::to_string(offset));
  return *std::move(decoded);
}

std::string encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::string encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) out += encode(cp);
  return out;
}

bool valid(std::string_view text) { return decode(text).has_value(); }

namespace {

const std::ctype<wchar_t>* utf8_ctype() {
  static const std::ctype<wchar_t>* facet = []() -> const std::ctype<wchar_t>* {
    try {
      static const std::locale loc("C.UTF-8");
      return &std::use_facet<std::ctype<wchar_t>>(loc);
    } catch (const std::runtime_error&) {
      return nullptr;
    }
  }();
  return facet;
}

}  // namespace

std::string lowercase(std::string_view text) {
  std::u32string cps = decode_or_throw(text);
  const std::ctype<wchar_t>* facet = utf8_ctype();
  for (char32_t& cp : cps) {
    if (cp < 0x80) {
      if (cp >= U'A' && cp <= U'Z') cp += 32;
    } else if (facet) {
      cp = static_cast<char32_t>(facet->tolower(static_cast<wchar_t>(cp)));
    }
  }
  return encode(cps);
}

std::size_t length(std::string_view text) { return decode_or_throw(text).size(); }

}  // namespace insmt::utf8
