#include <algorithm>
#include <numbers>
#include <random>

#include "doctest.h"
#include "starid/catalog.hpp"
#include "starid/features.hpp"
#include "test_support.hpp"

using namespace starid;

TEST_CASE("planar features closed form") {
    const Vec3 x{1, 0, 0}, y{0, 1, 0}, z{0, 0, 1};
    const TrioFeatures f = planar_features(x, y, z);
    CHECK(f.area == doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-14));
    CHECK(f.moment == doctest::Approx(std::sqrt(3.0) / 12).epsilon(1e-14));

    const TrioFeatures d = planar_features(to_cartesian(0, 0), to_cartesian(1, 0), to_cartesian(2, 0));
    // chords of a great circle are not collinear in space, so only exact repeats are degenerate
    CHECK(d.area > 0.0);
    const TrioFeatures rep = planar_features(x, x, y);
    CHECK(rep.area == 0.0);
    CHECK(rep.moment == 0.0);
}

TEST_CASE("spherical features closed form") {
    const Vec3 x{1, 0, 0}, y{0, 1, 0}, z{0, 0, 1};
    CHECK(std::abs(spherical_area(x, y, z) - std::numbers::pi / 2) < 1e-9);
    CHECK(std::abs(spherical_features(x, y, z).area - std::numbers::pi / 2) < 1e-9);

    const TrioFeatures d = spherical_features(to_cartesian(0, 0), to_cartesian(1, 0), to_cartesian(2, 0));
    CHECK(d.area == 0.0);
    CHECK(d.moment == 0.0);
}

TEST_CASE("small spherical triangle approaches planar area") {
    const Vec3 a = to_cartesian(50, 10), b = to_cartesian(50.3, 10.1), c = to_cartesian(50.1, 10.4);
    const double s = spherical_area(a, b, c), p = planar_features(a, b, c).area;
    CHECK(std::abs(s - p) / p < 0.01);
}

TEST_CASE("features are permutation invariant") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 50; ++t) {
        std::array<Vec3, 3> v{testsupport::random_unit(rng), testsupport::random_unit(rng),
                              testsupport::random_unit(rng)};
        const TrioFeatures s0 = spherical_features(v[0], v[1], v[2]);
        const TrioFeatures p0 = planar_features(v[0], v[1], v[2]);
        std::array<int, 3> idx{0, 1, 2};
        do {
            const TrioFeatures s = spherical_features(v[idx[0]], v[idx[1]], v[idx[2]]);
            const TrioFeatures p = planar_features(v[idx[0]], v[idx[1]], v[idx[2]]);
            CHECK(s.area == s0.area);
            CHECK(s.moment == s0.moment);
            CHECK(p.area == p0.area);
            CHECK(p.moment == p0.moment);
        } while (std::next_permutation(idx.begin(), idx.end()));
    }
}

TEST_CASE("features are rotation invariant") {
    std::mt19937_64 rng(8);
    const Vec3 a = to_cartesian(200, -30), b = to_cartesian(205, -28), c = to_cartesian(198, -22);
    const TrioFeatures s0 = spherical_features(a, b, c), p0 = planar_features(a, b, c);
    for (int t = 0; t < 100; ++t) {
        const RotationMatrix r = testsupport::random_rotation(rng);
        const TrioFeatures s = spherical_features(r * a, r * b, r * c);
        const TrioFeatures p = planar_features(r * a, r * b, r * c);
        CHECK(std::abs(s.area - s0.area) < 1e-10);
        CHECK(std::abs(s.moment - s0.moment) < 1e-10);
        CHECK(std::abs(p.area - p0.area) < 1e-10);
        CHECK(std::abs(p.moment - p0.moment) < 1e-10);
    }
}

TEST_CASE("moment subdivision converges monotonically") {
    const std::array<std::array<Vec3, 3>, 2> fixtures{{
        {to_cartesian(0, 0), to_cartesian(12, 0), to_cartesian(4, 15)},
        {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}},
    }};
    for (const auto &f : fixtures) {
        double prev_step = std::numeric_limits<double>::infinity();
        double prev = spherical_features(f[0], f[1], f[2], 0).moment;
        for (int d = 1; d <= 6; ++d) {
            const double m = spherical_features(f[0], f[1], f[2], d).moment;
            const double step = std::abs(m - prev);
            CHECK(step < prev_step);
            prev_step = step;
            prev = m;
        }
    }
}

TEST_CASE("feature values are non-negative") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 200; ++t) {
        const Vec3 a = testsupport::random_unit(rng), b = testsupport::random_unit(rng),
                   c = testsupport::random_unit(rng);
        for (auto kind : {TriangleKind::Spherical, TriangleKind::Planar}) {
            const TrioFeatures f = trio_features(kind, a, b, c);
            CHECK(f.area >= 0.0);
            CHECK(f.moment >= 0.0);
        }
    }
}
