#pragma once

// Built-in analytic test fields with exact gradients and Hessians.

#include <cmath>
#include <functional>
#include <string>

#include "mmesh/core.hpp"

namespace mmesh {

template <int D>
struct AnalyticField {
  std::function<double(const Vec<D>&)> value;
  std::function<Vec<D>(const Vec<D>&)> gradient;
  std::function<Mat<D>(const Vec<D>&)> hessian;
};

namespace detail {

/// tanh(s(p)) for an arbitrary smooth argument s.
inline AnalyticField<2> tanh_of(std::function<double(const Vec<2>&)> s,
                                std::function<Vec<2>(const Vec<2>&)> ds,
                                std::function<Mat<2>(const Vec<2>&)> d2s) {
  AnalyticField<2> f;
  f.value = [s](const Vec<2>& p) { return std::tanh(s(p)); };
  f.gradient = [s, ds](const Vec<2>& p) {
    const double t = std::tanh(s(p));
    return Vec<2>(((1.0 - t * t) * ds(p)).eval());
  };
  f.hessian = [s, ds, d2s](const Vec<2>& p) {
    const double t = std::tanh(s(p));
    const double sech2 = 1.0 - t * t;
    const Vec<2> g = ds(p);
    return Mat<2>((sech2 * d2s(p) - 2.0 * t * sech2 * g * g.transpose()).eval());
  };
  return f;
}

}  // namespace detail

/// Steep band along y = 1/2 + sin(2 pi x)/4: tanh(-100 (y - 1/2 - sin(2 pi x)/4)).
inline AnalyticField<2> field_sine_band() {
  auto s = [](const Vec<2>& p) {
    return -100.0 * (p[1] - 0.5 - 0.25 * std::sin(2.0 * M_PI * p[0]));
  };
  auto ds = [](const Vec<2>& p) {
    return Vec<2>(50.0 * M_PI * std::cos(2.0 * M_PI * p[0]), -100.0);
  };
  auto d2s = [](const Vec<2>& p) {
    Mat<2> H = Mat<2>::Zero();
    H(0, 0) = -100.0 * M_PI * M_PI * std::sin(2.0 * M_PI * p[0]);
    return H;
  };
  return detail::tanh_of(s, ds, d2s);
}

/// X-shaped crossing of two steep fronts:
/// tanh(100 (1 - x - y)) - tanh(100 (x - y)).
inline AnalyticField<2> field_x_shape() {
  auto a = detail::tanh_of(
      [](const Vec<2>& p) { return 100.0 * (1.0 - p[0] - p[1]); },
      [](const Vec<2>&) { return Vec<2>(-100.0, -100.0); },
      [](const Vec<2>&) { return Mat<2>(Mat<2>::Zero()); });
  auto b = detail::tanh_of(
      [](const Vec<2>& p) { return 100.0 * (p[0] - p[1]); },
      [](const Vec<2>&) { return Vec<2>(100.0, -100.0); },
      [](const Vec<2>&) { return Mat<2>(Mat<2>::Zero()); });
  AnalyticField<2> f;
  f.value = [a, b](const Vec<2>& p) { return a.value(p) - b.value(p); };
  f.gradient = [a, b](const Vec<2>& p) { return Vec<2>(a.gradient(p) - b.gradient(p)); };
  f.hessian = [a, b](const Vec<2>& p) { return Mat<2>(a.hessian(p) - b.hessian(p)); };
  return f;
}

/// Static travelling-front profile u = 1 / (1 + exp(Re (x + y - t))).
inline AnalyticField<2> field_burgers_profile(double re, double t) {
  AnalyticField<2> f;
  auto u_of = [re, t](const Vec<2>& p) {
    return 1.0 / (1.0 + std::exp(re * (p[0] + p[1] - t)));
  };
  f.value = u_of;
  f.gradient = [u_of, re](const Vec<2>& p) {
    const double u = u_of(p);
    const double du = -re * u * (1.0 - u);
    return Vec<2>(du, du);
  };
  f.hessian = [u_of, re](const Vec<2>& p) {
    const double u = u_of(p);
    const double d2 = re * re * u * (1.0 - u) * (1.0 - 2.0 * u);
    Mat<2> H;
    H << d2, d2, d2, d2;
    return H;
  };
  return f;
}

/// Named lookup used by experiment configs. `re` and `t` only affect the
/// travelling-front profile.
inline AnalyticField<2> builtin_field(const std::string& name, double re = 100.0,
                                      double t = 0.5) {
  if (name == "sine_band") return field_sine_band();
  if (name == "x_shape") return field_x_shape();
  if (name == "burgers_profile") return field_burgers_profile(re, t);
  throw Error("unknown builtin field '" + name + "'");
}

inline double builtin_field_value(const std::string& name, const Vec<2>& p,
                                  double re = 100.0, double t = 0.5) {
  return builtin_field(name, re, t).value(p);
}

}  // namespace mmesh
