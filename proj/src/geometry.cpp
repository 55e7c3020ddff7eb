#include "starid/geometry.hpp"

#include <algorithm>

namespace starid {

RotationMatrix RotationMatrix::from_columns(const Vec3 &c0, const Vec3 &c1, const Vec3 &c2) {
    RotationMatrix r;
    r.m = {c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z};
    return r;
}

RotationMatrix RotationMatrix::about_axis(const Vec3 &axis, double angle_deg) {
    const Vec3 k = axis.normalized();
    const double t = deg_to_rad(angle_deg);
    const double c = std::cos(t), s = std::sin(t), v = 1.0 - c;
    RotationMatrix r;
    r.m = {c + k.x * k.x * v,       k.x * k.y * v - k.z * s, k.x * k.z * v + k.y * s,
           k.y * k.x * v + k.z * s, c + k.y * k.y * v,       k.y * k.z * v - k.x * s,
           k.z * k.x * v - k.y * s, k.z * k.y * v + k.x * s, c + k.z * k.z * v};
    return r;
}

RotationMatrix RotationMatrix::operator*(const RotationMatrix &o) const {
    RotationMatrix r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += (*this)(i, k) * o(k, j);
            r(i, j) = acc;
        }
    }
    return r;
}

RotationMatrix RotationMatrix::transpose() const {
    RotationMatrix r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
}

double RotationMatrix::determinant() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

double RotationMatrix::orthonormality_error() const {
    const RotationMatrix p = transpose() * (*this);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(p(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

double RotationMatrix::max_abs_diff(const RotationMatrix &o) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < 9; ++i) worst = std::max(worst, std::abs(m[i] - o.m[i]));
    return worst;
}

double angular_separation(const Vec3 &u, const Vec3 &v) {
    return rad_to_deg(std::acos(std::clamp(u.dot(v), -1.0, 1.0)));
}

double interior_angle(const Vec3 &center, const Vec3 &p, const Vec3 &q) {
    constexpr double kCoincident = 1e-12;
    if ((p - center).norm() < kCoincident || (q - center).norm() < kCoincident) {
        throw DegenerateGeometry("interior angle vertex coincides with a neighbor");
    }
    // Directions toward p and q as seen from the vertex, in the plane tangent to the sphere there.
    const Vec3 tp = p - center * p.dot(center);
    const Vec3 tq = q - center * q.dot(center);
    const double np = tp.norm(), nq = tq.norm();
    if (np < kCoincident || nq < kCoincident) {
        throw DegenerateGeometry("interior angle neighbor is antipodal to the vertex");
    }
    return rad_to_deg(std::acos(std::clamp(tp.dot(tq) / (np * nq), -1.0, 1.0)));
}

namespace {

struct Triad {
    Vec3 t1, t2, t3;
};

Triad make_triad(const Vec3 &v1, const Vec3 &v2) {
    const Vec3 c = v1.cross(v2);
    const double cn = c.norm();
    if (cn < 1e-12) throw DegenerateGeometry("TRIAD requires non-parallel vector pairs");
    Triad t;
    t.t1 = v1.normalized();
    t.t2 = c / cn;
    t.t3 = t.t1.cross(t.t2);
    return t;
}

}  // namespace

RotationMatrix triad(const Vec3 &b1, const Vec3 &b2, const Vec3 &r1, const Vec3 &r2) {
    const Triad body = make_triad(b1, b2);
    const Triad inertial = make_triad(r1, r2);
    const RotationMatrix tb = RotationMatrix::from_columns(body.t1, body.t2, body.t3);
    const RotationMatrix tr = RotationMatrix::from_columns(inertial.t1, inertial.t2, inertial.t3);
    return tb * tr.transpose();
}

double wahba_loss(const RotationMatrix &attitude, std::span<const WeightedObservation> pairs) {
    double loss = 0.0;
    for (const auto &p : pairs) {
        const Vec3 d = p.body - attitude * p.inertial;
        loss += p.weight * d.dot(d);
    }
    return 0.5 * loss;
}

std::vector<std::size_t> find_positive_overlay(std::span<const Vec3> catalog_stars,
                                               std::span<const Vec3> image_stars,
                                               const RotationMatrix &attitude, double sigma_o) {
    const RotationMatrix to_catalog = attitude.transpose();
    std::vector<Vec3> carried;
    carried.reserve(image_stars.size());
    for (const auto &i : image_stars) carried.push_back(to_catalog * i);

    // theta(i, p) < 3 sigma_o  <=>  i . p > cos(3 sigma_o)
    const double min_dot = std::cos(deg_to_rad(3.0 * sigma_o));
    std::vector<std::size_t> overlaid;
    for (std::size_t k = 0; k < catalog_stars.size(); ++k) {
        for (const auto &i : carried) {
            if (i.dot(catalog_stars[k]) > min_dot) {
                overlaid.push_back(k);
                break;
            }
        }
    }
    return overlaid;
}

}  // namespace starid
