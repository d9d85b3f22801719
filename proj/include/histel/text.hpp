#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace histel {

// Decodes UTF-8 into code points. Malformed bytes decode to U+FFFD.
std::u32string DecodeUtf8(std::string_view s);
std::string EncodeUtf8(std::u32string_view s);

// Lookup key for aliases and surfaces: diacritics stripped (compatibility
// decomposition of the Latin blocks), then lower-cased.
std::string FoldKey(std::string_view s);

std::string ToLowerAscii(std::string_view s);

// "Q2683" -> 2683. Anything else is nullopt.
std::optional<std::uint64_t> QidNumber(std::string_view qid);
bool IsQid(std::string_view s);

inline constexpr std::string_view kNil = "NIL";

// Total order for tie-breaking: ascending QID number, NIL after every QID,
// other strings after NIL lexicographically.
bool QidLess(std::string_view a, std::string_view b);

std::string_view Trim(std::string_view s);

}  // namespace histel
