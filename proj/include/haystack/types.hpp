#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace haystack {

enum class NeedleType { None, Neg, Con, Ner };
enum class HayType { Orig, Rand };

std::string_view to_string(NeedleType needle);
std::string_view to_string(HayType hay);
NeedleType needle_from_string(std::string_view s);  // throws std::invalid_argument
HayType hay_from_string(std::string_view s);

inline constexpr NeedleType kAllNeedles[] = {NeedleType::Neg, NeedleType::Con, NeedleType::Ner};
inline constexpr HayType kAllHays[] = {HayType::Orig, HayType::Rand};

/// Hay sentences before (i) and after (j) the needle.
struct Position {
  int i = 0;
  int j = 0;

  int length() const { return i + j + 1; }
  auto operator<=>(const Position&) const = default;
};

/// All (i, j) with 0 <= i, j <= k_max, row-major in i.
std::vector<Position> all_positions(int k_max);

}  // namespace haystack
