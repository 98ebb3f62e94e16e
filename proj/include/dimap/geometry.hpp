#pragma once

#include <cmath>
#include <span>
#include <string_view>
#include <vector>

namespace dimap {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Euclidean distance from p to the closed segment [a, b]. A degenerate
// segment collapses to the point distance.
inline double point_segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return distance(p, a);
  double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return distance(p, Point{a.x + t * dx, a.y + t * dy});
}

inline double polyline_length(std::span<const Point> pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += distance(pts[i - 1], pts[i]);
  return total;
}

// Coordinate frame tag carried by graphs and vector layers.
enum class Units { Pixels, Meters, Degrees };

std::string_view to_string(Units u);
Units units_from_string(std::string_view s);

}  // namespace dimap
