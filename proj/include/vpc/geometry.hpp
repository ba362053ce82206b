#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace vpc {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }

/// Phase-space point or 6-vector: x block first, v block second.
struct Vec6 {
  Vec3 x, v;

  double& operator[](int i) { return i < 3 ? x[i] : v[i - 3]; }
  double operator[](int i) const { return i < 3 ? x[i] : v[i - 3]; }

  Vec6& operator+=(const Vec6& o) { x += o.x; v += o.v; return *this; }
  Vec6& operator-=(const Vec6& o) { x -= o.x; v -= o.v; return *this; }
  Vec6& operator*=(double s) { x *= s; v *= s; return *this; }
};

using PhasePoint = Vec6;

inline Vec6 operator+(Vec6 a, const Vec6& b) { return a += b; }
inline Vec6 operator-(Vec6 a, const Vec6& b) { return a -= b; }
inline Vec6 operator*(double s, Vec6 a) { return a *= s; }
inline double dot(const Vec6& a, const Vec6& b) { return dot(a.x, b.x) + dot(a.v, b.v); }
inline double norm2(const Vec6& a) { return dot(a, a); }
inline double norm(const Vec6& a) { return std::sqrt(norm2(a)); }

inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}
inline bool is_finite(const Vec6& a) { return is_finite(a.x) && is_finite(a.v); }

struct Mat3 {
  // row-major
  std::array<double, 9> a{};

  double& operator()(int r, int c) { return a[3 * r + c]; }
  double operator()(int r, int c) const { return a[3 * r + c]; }

  static Mat3 zero() { return {}; }
  static Mat3 identity() {
    Mat3 m;
    m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
    return m;
  }

  Mat3& operator+=(const Mat3& o) {
    for (int i = 0; i < 9; ++i) a[i] += o.a[i];
    return *this;
  }
  Mat3& operator*=(double s) {
    for (double& e : a) e *= s;
    return *this;
  }
  Vec3 col(int c) const { return {a[c], a[3 + c], a[6 + c]}; }
  double trace() const { return a[0] + a[4] + a[8]; }
};

inline Mat3 operator+(Mat3 a, const Mat3& b) { return a += b; }
inline Mat3 operator*(double s, Mat3 m) { return m *= s; }
inline Vec3 operator*(const Mat3& m, const Vec3& u) {
  return {m.a[0] * u.x + m.a[1] * u.y + m.a[2] * u.z,
          m.a[3] * u.x + m.a[4] * u.y + m.a[5] * u.z,
          m.a[6] * u.x + m.a[7] * u.y + m.a[8] * u.z};
}

/// Matrix of u -> w x u.
inline Mat3 cross_matrix(const Vec3& w) {
  Mat3 m;
  m(0, 1) = -w.z; m(0, 2) = w.y;
  m(1, 0) = w.z;  m(1, 2) = -w.x;
  m(2, 0) = -w.y; m(2, 1) = w.x;
  return m;
}

inline Mat3 outer(const Vec3& a, const Vec3& b) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = a[r] * b[c];
  return m;
}

struct Mat6 {
  // row-major
  std::array<double, 36> a{};

  double& operator()(int r, int c) { return a[6 * r + c]; }
  double operator()(int r, int c) const { return a[6 * r + c]; }

  static Mat6 zero() { return {}; }
  static Mat6 identity() {
    Mat6 m;
    for (int i = 0; i < 6; ++i) m(i, i) = 1.0;
    return m;
  }

  Mat6& operator+=(const Mat6& o) {
    for (int i = 0; i < 36; ++i) a[i] += o.a[i];
    return *this;
  }
  Mat6& operator-=(const Mat6& o) {
    for (int i = 0; i < 36; ++i) a[i] -= o.a[i];
    return *this;
  }
  Mat6& operator*=(double s) {
    for (double& e : a) e *= s;
    return *this;
  }

  void set_block(int r0, int c0, const Mat3& b) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) (*this)(r0 + r, c0 + c) = b(r, c);
  }
};

inline Mat6 operator+(Mat6 a, const Mat6& b) { return a += b; }
inline Mat6 operator-(Mat6 a, const Mat6& b) { return a -= b; }
inline Mat6 operator*(double s, Mat6 m) { return m *= s; }

inline Mat6 operator*(const Mat6& A, const Mat6& B) {
  Mat6 C;
  for (int r = 0; r < 6; ++r)
    for (int k = 0; k < 6; ++k) {
      const double arj = A(r, k);
      for (int c = 0; c < 6; ++c) C(r, c) += arj * B(k, c);
    }
  return C;
}

inline Vec6 operator*(const Mat6& A, const Vec6& u) {
  Vec6 out;
  for (int r = 0; r < 6; ++r) {
    double s = 0.0;
    for (int c = 0; c < 6; ++c) s += A(r, c) * u[c];
    out[r] = s;
  }
  return out;
}

inline Vec6 transpose_mul(const Mat6& A, const Vec6& u) {
  Vec6 out;
  for (int c = 0; c < 6; ++c) {
    double s = 0.0;
    for (int r = 0; r < 6; ++r) s += A(r, c) * u[r];
    out[c] = s;
  }
  return out;
}

inline bool is_finite(const Mat6& m) {
  for (double e : m.a)
    if (!std::isfinite(e)) return false;
  return true;
}

/// Determinant by LU with partial pivoting.
inline double det(const Mat6& m) {
  std::array<double, 36> a = m.a;
  double d = 1.0;
  for (int k = 0; k < 6; ++k) {
    int p = k;
    for (int r = k + 1; r < 6; ++r)
      if (std::abs(a[6 * r + k]) > std::abs(a[6 * p + k])) p = r;
    if (p != k) {
      for (int c = 0; c < 6; ++c) std::swap(a[6 * p + c], a[6 * k + c]);
      d = -d;
    }
    const double piv = a[6 * k + k];
    if (piv == 0.0) return 0.0;
    d *= piv;
    for (int r = k + 1; r < 6; ++r) {
      const double f = a[6 * r + k] / piv;
      for (int c = k + 1; c < 6; ++c) a[6 * r + c] -= f * a[6 * k + c];
    }
  }
  return d;
}

}  // namespace vpc
