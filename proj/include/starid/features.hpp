#pragma once

#include "starid/geometry.hpp"

namespace starid {

/// Area and polar moment of a star trio. Both are zero for degenerate trios.
struct TrioFeatures {
    double area = 0.0;
    double moment = 0.0;
};

enum class TriangleKind { Spherical, Planar };

inline constexpr int kDefaultMomentDepth = 3;

/**
 * Planar triangle through the three points (chord side lengths). Area by Heron's
 * formula in its cancellation-free ordering; polar moment about the centroid is
 * area * (s1^2 + s2^2 + s3^2) / 36.
 */
TrioFeatures planar_features(const Vec3 &v1, const Vec3 &v2, const Vec3 &v3);

/**
 * Spherical triangle on the unit sphere. Area is the spherical excess from
 * l'Huilier's theorem (steradians). The polar moment is accumulated over a
 * recursive midpoint subdivision `depth` levels deep: each leaf contributes its
 * area times the squared angular distance (radians) from its centroid to the
 * centroid of the whole triangle.
 */
TrioFeatures spherical_features(const Vec3 &v1, const Vec3 &v2, const Vec3 &v3,
                                int depth = kDefaultMomentDepth);

/// Spherical excess of the triangle (v1, v2, v3), steradians.
double spherical_area(const Vec3 &v1, const Vec3 &v2, const Vec3 &v3);

TrioFeatures trio_features(TriangleKind kind, const Vec3 &v1, const Vec3 &v2, const Vec3 &v3,
                           int depth = kDefaultMomentDepth);

}  // namespace starid
