#pragma once

#include <cmath>

namespace facefit {

template <class T>
struct Vec2T {
  T x{}, y{};
};

template <class T> inline Vec2T<T> operator+(const Vec2T<T>& a, const Vec2T<T>& b) { return {a.x + b.x, a.y + b.y}; }
template <class T> inline Vec2T<T> operator-(const Vec2T<T>& a, const Vec2T<T>& b) { return {a.x - b.x, a.y - b.y}; }
template <class T, class S> inline Vec2T<T> operator*(const Vec2T<T>& a, S s) { return {a.x * s, a.y * s}; }

template <class T>
struct Vec3T {
  T x{}, y{}, z{};

  Vec3T() = default;
  Vec3T(T xx, T yy, T zz) : x(xx), y(yy), z(zz) {}

  Vec3T operator-() const { return {-x, -y, -z}; }
  Vec3T& operator+=(const Vec3T& o) { x = x + o.x; y = y + o.y; z = z + o.z; return *this; }
};

template <class T> inline Vec3T<T> operator+(const Vec3T<T>& a, const Vec3T<T>& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
template <class T> inline Vec3T<T> operator-(const Vec3T<T>& a, const Vec3T<T>& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
template <class T, class S> inline Vec3T<T> operator*(const Vec3T<T>& a, S s) { return {a.x * s, a.y * s, a.z * s}; }
template <class T, class S> inline Vec3T<T> operator*(S s, const Vec3T<T>& a) { return a * s; }
template <class T> inline Vec3T<T> mul(const Vec3T<T>& a, const Vec3T<T>& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }

template <class T> inline T dot(const Vec3T<T>& a, const Vec3T<T>& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

template <class T>
inline Vec3T<T> cross(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class T>
inline T norm(const Vec3T<T>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

template <class T>
inline Vec3T<T> normalized(const Vec3T<T>& a) {
  T n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}

// Columns c0,c1,c2; apply() is M*v, tmul() is M^T*v.
template <class T>
struct Mat3T {
  Vec3T<T> c0, c1, c2;

  static Mat3T identity() {
    return {{T(1), T(0), T(0)}, {T(0), T(1), T(0)}, {T(0), T(0), T(1)}};
  }
  Vec3T<T> apply(const Vec3T<T>& v) const { return c0 * v.x + c1 * v.y + c2 * v.z; }
  Vec3T<T> tmul(const Vec3T<T>& v) const { return {dot(c0, v), dot(c1, v), dot(c2, v)}; }
};

using Vec2 = Vec2T<double>;
using Vec3 = Vec3T<double>;
using Mat3 = Mat3T<double>;

}  // namespace facefit
