#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace starid {

/// Raised when two vectors that must be distinct (or non-parallel) are not.
class DegenerateGeometry : public std::runtime_error {
   public:
    explicit DegenerateGeometry(const std::string &what) : std::runtime_error(what) {}
};

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * kDegToRad; }
inline double rad_to_deg(double rad) { return rad * kRadToDeg; }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3 &o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3 &o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr bool operator==(const Vec3 &) const = default;

    constexpr double dot(const Vec3 &o) const { return x * o.x + y * o.y + z * o.z; }
    constexpr Vec3 cross(const Vec3 &o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }

    /// Unit vector in the same direction. Throws DegenerateGeometry for the zero vector.
    Vec3 normalized() const {
        const double n = norm();
        if (!(n > 0.0)) throw DegenerateGeometry("cannot normalize a zero-length vector");
        return *this / n;
    }
};

inline constexpr Vec3 operator*(double s, const Vec3 &v) { return v * s; }

/**
 * A direction on the unit sphere. Construction always normalizes, so the stored
 * vector has unit norm up to rounding.
 */
class UnitVector3 {
   public:
    UnitVector3() : v_{1.0, 0.0, 0.0} {}
    explicit UnitVector3(const Vec3 &v) : v_(v.normalized()) {}
    UnitVector3(double x, double y, double z) : UnitVector3(Vec3{x, y, z}) {}

    const Vec3 &vec() const { return v_; }
    operator const Vec3 &() const { return v_; }  // NOLINT(google-explicit-constructor)
    double x() const { return v_.x; }
    double y() const { return v_.y; }
    double z() const { return v_.z; }

   private:
    Vec3 v_;
};

/**
 * Row-major 3x3 rotation. In this project an attitude takes inertial (catalog)
 * frame vectors to body (image) frame vectors: b = A * r.
 */
struct RotationMatrix {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static RotationMatrix identity() { return {}; }
    /// Matrix whose columns are c0, c1, c2.
    static RotationMatrix from_columns(const Vec3 &c0, const Vec3 &c1, const Vec3 &c2);
    /// Right-handed rotation of `angle_deg` about `axis` (Rodrigues).
    static RotationMatrix about_axis(const Vec3 &axis, double angle_deg);

    double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }
    double &operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }

    Vec3 operator*(const Vec3 &v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    RotationMatrix operator*(const RotationMatrix &o) const;
    RotationMatrix transpose() const;
    double determinant() const;
    /// max |A^T A - I| entry.
    double orthonormality_error() const;
    /// max |A - B| entry.
    double max_abs_diff(const RotationMatrix &o) const;
};

/// Great-circle angle between two unit vectors, degrees. The dot product is clamped to [-1, 1].
double angular_separation(const Vec3 &u, const Vec3 &v);

/**
 * Angle at `center` between the tangent-plane directions toward p and q, degrees.
 * Throws DegenerateGeometry if p or q coincides with center.
 */
double interior_angle(const Vec3 &center, const Vec3 &p, const Vec3 &q);

/**
 * TRIAD attitude from two body-frame observations b1, b2 of the inertial-frame
 * directions r1, r2. The result maps r1 exactly onto b1 and r2 onto b2 up to the
 * inconsistency of the measured angle. Throws DegenerateGeometry for parallel pairs.
 */
RotationMatrix triad(const Vec3 &b1, const Vec3 &b2, const Vec3 &r1, const Vec3 &r2);

/// One weighted observation for the Wahba loss: body vector and its inertial counterpart.
struct WeightedObservation {
    double weight = 1.0;
    Vec3 body;
    Vec3 inertial;
};

/// 1/2 * sum_j w_j * |body_j - A * inertial_j|^2.
double wahba_loss(const RotationMatrix &attitude, std::span<const WeightedObservation> pairs);

/**
 * Overlay test used by the direct match test. The image stars are carried into the
 * catalog frame with the inverse of `attitude` and each candidate in `catalog_stars`
 * is kept when some carried image star lies strictly within 3 * sigma_o degrees of it.
 * Returns the indices (into catalog_stars) of the overlaid stars, ascending.
 */
std::vector<std::size_t> find_positive_overlay(std::span<const Vec3> catalog_stars,
                                               std::span<const Vec3> image_stars,
                                               const RotationMatrix &attitude, double sigma_o);

}  // namespace starid
