#include "starid/features.hpp"

#include <algorithm>
#include <array>
#include <tuple>

namespace starid {

namespace {

// Trios whose scalar triple product falls below this are treated as lying on one great circle.
constexpr double kDegenerateVolume = 1e-14;

// Features are evaluated on a canonical vertex order so every permutation of the
// same trio produces bit-identical values.
std::array<Vec3, 3> canonical(const Vec3 &a, const Vec3 &b, const Vec3 &c) {
    std::array<Vec3, 3> v{a, b, c};
    std::sort(v.begin(), v.end(), [](const Vec3 &l, const Vec3 &r) {
        return std::tie(l.x, l.y, l.z) < std::tie(r.x, r.y, r.z);
    });
    return v;
}

double arc(const Vec3 &u, const Vec3 &v) { return std::atan2(u.cross(v).norm(), u.dot(v)); }

double lhuilier(const Vec3 &v1, const Vec3 &v2, const Vec3 &v3) {
    const double a = arc(v2, v3), b = arc(v1, v3), c = arc(v1, v2);
    const double s = 0.5 * (a + b + c);
    const double t = std::tan(0.5 * s) * std::tan(0.5 * (s - a)) * std::tan(0.5 * (s - b)) *
                     std::tan(0.5 * (s - c));
    return 4.0 * std::atan(std::sqrt(std::max(t, 0.0)));
}

Vec3 centroid(const Vec3 &a, const Vec3 &b, const Vec3 &c) { return (a + b + c).normalized(); }

double subdivided_moment(const Vec3 &a, const Vec3 &b, const Vec3 &c, const Vec3 &pole, int depth) {
    if (depth == 0) {
        const double d = arc(centroid(a, b, c), pole);
        return lhuilier(a, b, c) * d * d;
    }
    const Vec3 ab = (a + b).normalized(), bc = (b + c).normalized(), ca = (c + a).normalized();
    return subdivided_moment(a, ab, ca, pole, depth - 1) + subdivided_moment(ab, b, bc, pole, depth - 1) +
           subdivided_moment(ca, bc, c, pole, depth - 1) + subdivided_moment(ab, bc, ca, pole, depth - 1);
}

bool degenerate(const std::array<Vec3, 3> &v) {
    return std::abs(v[0].dot(v[1].cross(v[2]))) < kDegenerateVolume;
}

}  // namespace

double spherical_area(const Vec3 &v1, const Vec3 &v2, const Vec3 &v3) {
    const auto v = canonical(v1, v2, v3);
    if (degenerate(v)) return 0.0;
    return lhuilier(v[0], v[1], v[2]);
}

TrioFeatures spherical_features(const Vec3 &v1, const Vec3 &v2, const Vec3 &v3, int depth) {
    const auto v = canonical(v1, v2, v3);
    if (degenerate(v)) return {};
    const Vec3 pole = centroid(v[0], v[1], v[2]);
    return {lhuilier(v[0], v[1], v[2]), subdivided_moment(v[0], v[1], v[2], pole, std::max(depth, 0))};
}

TrioFeatures planar_features(const Vec3 &v1, const Vec3 &v2, const Vec3 &v3) {
    const auto v = canonical(v1, v2, v3);
    std::array<double, 3> s{(v[0] - v[1]).norm(), (v[1] - v[2]).norm(), (v[2] - v[0]).norm()};
    std::sort(s.begin(), s.end(), std::greater<>());
    const double a = s[0], b = s[1], c = s[2];
    const double q = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if (!(q > 0.0)) return {};
    const double area = 0.25 * std::sqrt(q);
    return {area, area * (a * a + b * b + c * c) / 36.0};
}

TrioFeatures trio_features(TriangleKind kind, const Vec3 &v1, const Vec3 &v2, const Vec3 &v3,
                           int depth) {
    return kind == TriangleKind::Spherical ? spherical_features(v1, v2, v3, depth)
                                           : planar_features(v1, v2, v3);
}

}  // namespace starid
