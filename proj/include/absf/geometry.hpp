#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace absf {

using Point = Eigen::Vector2d;

/// Axis-aligned world rectangle anchored at the origin (meters).
struct World {
  double width = 150.0;
  double height = 150.0;

  bool contains(const Point& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width && p.y() <= height;
  }

  Point clamp(const Point& p) const {
    return {std::clamp(p.x(), 0.0, width), std::clamp(p.y(), 0.0, height)};
  }

  Point center() const { return {0.5 * width, 0.5 * height}; }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watt(double dbm) { return db_to_linear(dbm - 30.0); }
inline double watt_to_dbm(double w) { return linear_to_db(w) + 30.0; }

}  // namespace absf
