#pragma once

// Forward-mode automatic differentiation with a fixed number of
// infinitesimal directions. A Dual<N> carries a value together with its
// partial derivatives with respect to N seeded inputs.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

namespace photocal {

template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit constant lift

  static Dual variable(double value, std::size_t index) {
    Dual x(value);
    x.d[index] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t k = 0; k < N; ++k) d[k] += o.d[k];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t k = 0; k < N; ++k) d[k] -= o.d[k];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t k = 0; k < N; ++k) d[k] = d[k] * o.v + v * o.d[k];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (std::size_t k = 0; k < N; ++k) d[k] = (d[k] - q * o.d[k]) * inv;
    v = q;
    return *this;
  }
  Dual& operator+=(double s) {
    v += s;
    return *this;
  }
  Dual& operator-=(double s) {
    v -= s;
    return *this;
  }
  Dual& operator*=(double s) {
    v *= s;
    for (auto& x : d) x *= s;
    return *this;
  }
  Dual& operator/=(double s) { return *this *= (1.0 / s); }
};

template <std::size_t N>
Dual<N> operator-(Dual<N> a) {
  a.v = -a.v;
  for (auto& x : a.d) x = -x;
  return a;
}

template <std::size_t N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <std::size_t N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <std::size_t N>
Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <std::size_t N>
Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }

template <std::size_t N>
Dual<N> operator+(Dual<N> a, double s) { return a += s; }
template <std::size_t N>
Dual<N> operator+(double s, Dual<N> a) { return a += s; }
template <std::size_t N>
Dual<N> operator-(Dual<N> a, double s) { return a -= s; }
template <std::size_t N>
Dual<N> operator-(double s, const Dual<N>& a) { return -a + s; }
template <std::size_t N>
Dual<N> operator*(Dual<N> a, double s) { return a *= s; }
template <std::size_t N>
Dual<N> operator*(double s, Dual<N> a) { return a *= s; }
template <std::size_t N>
Dual<N> operator/(Dual<N> a, double s) { return a /= s; }
template <std::size_t N>
Dual<N> operator/(double s, const Dual<N>& a) {
  Dual<N> r(s / a.v);
  const double f = -r.v / a.v;
  for (std::size_t k = 0; k < N; ++k) r.d[k] = f * a.d[k];
  return r;
}

// Comparisons act on the value only.
template <std::size_t N>
bool operator<(const Dual<N>& a, const Dual<N>& b) { return a.v < b.v; }
template <std::size_t N>
bool operator>(const Dual<N>& a, const Dual<N>& b) { return a.v > b.v; }
template <std::size_t N>
bool operator<(const Dual<N>& a, double b) { return a.v < b; }
template <std::size_t N>
bool operator>(const Dual<N>& a, double b) { return a.v > b; }
template <std::size_t N>
bool operator<=(const Dual<N>& a, double b) { return a.v <= b; }
template <std::size_t N>
bool operator>=(const Dual<N>& a, double b) { return a.v >= b; }

namespace detail {
template <std::size_t N>
Dual<N> chain(const Dual<N>& a, double value, double slope) {
  Dual<N> r(value);
  for (std::size_t k = 0; k < N; ++k) r.d[k] = slope * a.d[k];
  return r;
}
}  // namespace detail

template <std::size_t N>
Dual<N> sqrt(const Dual<N>& a) {
  const double s = std::sqrt(a.v);
  return detail::chain(a, s, 0.5 / s);
}

template <std::size_t N>
Dual<N> exp(const Dual<N>& a) {
  const double e = std::exp(a.v);
  return detail::chain(a, e, e);
}

template <std::size_t N>
Dual<N> log(const Dual<N>& a) {
  return detail::chain(a, std::log(a.v), 1.0 / a.v);
}

template <std::size_t N>
Dual<N> erf(const Dual<N>& a) {
  constexpr double k = 2.0 / 1.7724538509055160273;  // 2/sqrt(pi)
  return detail::chain(a, std::erf(a.v), k * std::exp(-a.v * a.v));
}

template <std::size_t N>
Dual<N> erfc(const Dual<N>& a) {
  constexpr double k = 2.0 / 1.7724538509055160273;
  return detail::chain(a, std::erfc(a.v), -k * std::exp(-a.v * a.v));
}

// Uniform access to the primal value for generic code.
inline double value_of(double x) { return x; }
template <std::size_t N>
double value_of(const Dual<N>& x) { return x.v; }

}  // namespace photocal
