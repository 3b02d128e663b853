#include "haystack/types.hpp"

namespace haystack {

std::string_view to_string(NeedleType needle) {
  switch (needle) {
    case NeedleType::None: return "none";
    case NeedleType::Neg: return "neg";
    case NeedleType::Con: return "con";
    case NeedleType::Ner: return "ner";
  }
  return "none";
}

std::string_view to_string(HayType hay) { return hay == HayType::Orig ? "orig" : "rand"; }

NeedleType needle_from_string(std::string_view s) {
  if (s == "neg") return NeedleType::Neg;
  if (s == "con") return NeedleType::Con;
  if (s == "ner") return NeedleType::Ner;
  if (s == "none") return NeedleType::None;
  throw std::invalid_argument("unknown needle type: " + std::string(s));
}

HayType hay_from_string(std::string_view s) {
  if (s == "orig") return HayType::Orig;
  if (s == "rand") return HayType::Rand;
  throw std::invalid_argument("unknown hay type: " + std::string(s));
}

std::vector<Position> all_positions(int k_max) {
  std::vector<Position> out;
  out.reserve(static_cast<std::size_t>((k_max + 1) * (k_max + 1)));
  for (int i = 0; i <= k_max; ++i)
    for (int j = 0; j <= k_max; ++j) out.push_back({i, j});
  return out;
}

}  // namespace haystack
