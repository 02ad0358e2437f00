#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace hexsense {

enum class ErrorCode {
  InvalidParams,
  NotInnerNode,
  NonPositiveMeasurement,
  WidthDegenerate,
  SingularJacobian,
  TooFewValidSamples,
  NoFiniteValue,
  NotStochastic,
  SparsityViolation,
  AllWeightsZero,
  DisconnectedGraph,
  NeedTwoMethods,
  InvalidConfig,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::NotInnerNode: return "NotInnerNode";
    case ErrorCode::NonPositiveMeasurement: return "NonPositiveMeasurement";
    case ErrorCode::WidthDegenerate: return "WidthDegenerate";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::TooFewValidSamples: return "TooFewValidSamples";
    case ErrorCode::NoFiniteValue: return "NoFiniteValue";
    case ErrorCode::NotStochastic: return "NotStochastic";
    case ErrorCode::SparsityViolation: return "SparsityViolation";
    case ErrorCode::AllWeightsZero: return "AllWeightsZero";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::NeedTwoMethods: return "NeedTwoMethods";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

/// Library-wide exception; `code()` is stable and machine-checkable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

/// 2x2 matrix, row major.
struct Mat2 {
  double xx = 1.0, xy = 0.0;
  double yx = 0.0, yy = 1.0;

  Vec2 apply(Vec2 v) const { return {xx * v.x + xy * v.y, yx * v.x + yy * v.y}; }
  Vec2 apply_transposed(Vec2 v) const { return {xx * v.x + yx * v.y, xy * v.x + yy * v.y}; }
  double det() const { return xx * yy - xy * yx; }

  static Mat2 rotation(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c, -s, s, c};
  }
};

inline double spread(const auto& v) {
  double lo = v[0], hi = v[0];
  for (double e : v) {
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  return hi - lo;
}

}  // namespace hexsense
