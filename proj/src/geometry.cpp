#include "dimap/geometry.hpp"

#include <string>

#include "dimap/errors.hpp"

namespace dimap {

std::string_view to_string(Units u) {
  switch (u) {
    case Units::Pixels: return "pixels";
    case Units::Meters: return "meters";
    case Units::Degrees: return "degrees";
  }
  return "pixels";
}

Units units_from_string(std::string_view s) {
  if (s == "pixels") return Units::Pixels;
  if (s == "meters") return Units::Meters;
  if (s == "degrees") return Units::Degrees;
  throw InputError("unknown units '" + std::string(s) + "' (expected pixels, meters or degrees)");
}

}  // namespace dimap
