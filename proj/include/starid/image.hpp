#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <vector>

#include "starid/catalog.hpp"
#include "starid/geometry.hpp"

namespace starid {

/// Truth label carried by false stars.
inline constexpr StarId kSpikeLabel = -1;

class EmptyImageError : public std::runtime_error {
   public:
    explicit EmptyImageError(const std::string &what) : std::runtime_error(what) {}
};

struct ImageStar {
    Vec3 v;                     ///< body-frame unit vector
    StarId label = kSpikeLabel;  ///< catalog id, or kSpikeLabel
};

struct SyntheticImage {
    std::vector<ImageStar> stars;
    double psi = 20.0;  ///< field of view, degrees
    Vec3 center;        ///< b_f, the rotated image center
    RotationMatrix attitude;
    std::uint64_t seed = 0;

    std::vector<Vec3> vectors() const;
    std::size_t spike_count() const;
};

/// Uniformly distributed rotation (normalized Gaussian quaternion).
RotationMatrix random_attitude(std::mt19937_64 &rng);
/// Uniformly distributed unit vector.
Vec3 random_direction(std::mt19937_64 &rng);

/**
 * Rotate every catalog star within psi/2 of r_f into the body frame. Stars are
 * emitted in an order shuffled by `seed`, so image index carries no catalog order.
 * Throws EmptyImageError if no star lies in the field.
 */
SyntheticImage generate_image(const StarTable &stars, double psi, const RotationMatrix &attitude, const Vec3 &r_f,
                              std::uint64_t seed);

/// SLERP displacement of one vector toward b_star by K = g / Omega, g the Gaussian draw in degrees.
Vec3 slerp_toward(const Vec3 &b, const Vec3 &b_star, double g_deg);

/**
 * Move each star toward a random direction by a N(0, rho^2) arc. A star whose
 * result leaves the field is redrawn from scratch. rho = 0 leaves the image unchanged.
 */
SyntheticImage apply_gaussian_noise(SyntheticImage image, double rho, std::uint64_t seed);

/// Insert `omega` false stars, uniform over the field cap, at random positions in the star list.
SyntheticImage add_spikes(SyntheticImage image, int omega, std::uint64_t seed);

void save_image(const SyntheticImage &image, const std::filesystem::path &path);
/// Throws std::runtime_error on a malformed file.
SyntheticImage load_image(const std::filesystem::path &path);

}  // namespace starid
