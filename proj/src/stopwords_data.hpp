#pragma once

#include <array>
#include <string_view>

namespace taskalloc::textprep::detail {

inline constexpr std::size_t kBuiltinStopwordCount = 179;
extern const std::array<std::string_view, kBuiltinStopwordCount> kBuiltinStopwords;

}  // namespace taskalloc::textprep::detail
