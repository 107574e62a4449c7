#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mhc/error.hpp"

namespace mhc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_closed = false;
  bool hi_closed = false;

  bool contains(double x) const {
    if (std::isnan(x)) return false;
    const bool above = lo_closed ? x >= lo : x > lo;
    const bool below = hi_closed ? x <= hi : x < hi;
    return above && below;
  }

  static Interval real_line() { return {}; }
  static Interval positive() { return {0.0, std::numeric_limits<double>::infinity(), false, false}; }
  static Interval nonnegative() { return {0.0, std::numeric_limits<double>::infinity(), true, false}; }
  static Interval closed(double a, double b) { return {a, b, true, true}; }
  static Interval open(double a, double b) { return {a, b, false, false}; }
};

struct ParamPoint {
  std::vector<double> values;
  std::vector<std::string> names;
  std::vector<Interval> support;

  std::size_t dim() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  bool in_support() const {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!support[i].contains(values[i])) return false;
    return true;
  }

  void check_support() const {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!support[i].contains(values[i]))
        throw SupportError("parameter " + names[i] + " = " + std::to_string(values[i]) + " outside support");
  }

  ParamPoint with_values(std::vector<double> v) const {
    ParamPoint p = *this;
    p.values = std::move(v);
    return p;
  }
};

// n observations (rows) of width p. columns names each entry of a row.
struct Dataset {
  Matrix rows;
  std::vector<std::string> columns;
  std::string layout;

  Eigen::Index n() const { return rows.rows(); }
  Eigen::Index p() const { return rows.cols(); }
};

}  // namespace mhc
