#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starid/catalog.hpp"
#include "starid/geometry.hpp"

namespace starid {

/// How PYR/COM pick the verification star beta for trio (i, j, k).
enum class BetaRule {
    FirstUnused,  ///< lowest image index not in the trio
    AfterTrio,    ///< first index after k not in the trio, wrapping to 0
};

enum class Method { Angle, InteriorAngle, Spherical, Planar, Pyramid, Composite };

inline constexpr std::array<Method, 6> kAllMethods{Method::Angle,   Method::InteriorAngle, Method::Spherical,
                                                   Method::Planar,  Method::Pyramid,       Method::Composite};

/// Short lowercase tag: ang, int, sph, pln, pyr, com.
std::string_view method_tag(Method m);
std::optional<Method> parse_method(std::string_view tag);

struct MethodConfig {
    double sigma_theta = 1e-4;  ///< degrees
    double sigma_phi = 1e-2;    ///< degrees
    double sigma_a = 1e-9;
    double sigma_tau = 1e-9;
    double sigma_o = 0.0;  ///< overlay deviation in degrees; 0 selects the method default
    double psi = 20.0;
    std::uint64_t access_limit = 500;
    bool verify = true;  ///< pyramid / composite verification stage
    /// Pivot on an empty first candidate set too, not only on |R| > 1.
    bool pivot_on_empty = false;
    BetaRule beta_rule = BetaRule::AfterTrio;
    /// Trio features used by the composite method.
    TriangleKind composite_features = TriangleKind::Planar;
};

/// Query deviations selected for each method.
MethodConfig default_config(Method m);

/// The overlay deviation DMT uses: sigma_o if set, else sigma_theta for methods with one, else 1e-4.
double overlay_sigma(Method m, const MethodConfig &cfg);

// Image subset orders, 0-based.
std::vector<std::array<std::size_t, 2>> sequential_pairs(std::size_t n);
std::vector<std::array<std::size_t, 3>> sequential_trios(std::size_t n);
std::vector<std::array<std::size_t, 3>> pyramid_trios(std::size_t n);

enum class Outcome { Identified, Exhausted, AccessLimit };
std::string_view outcome_tag(Outcome o);

struct StarMatch {
    std::size_t image_index = 0;
    StarId id = 0;
    bool operator==(const StarMatch &) const = default;
};

/// Image-to-catalog mapping; empty means b -> nothing.
using Bijection = std::vector<StarMatch>;

struct IdentificationResult {
    Outcome outcome = Outcome::Exhausted;
    std::vector<std::size_t> b;
    std::vector<StarId> r;
    Bijection h;
    std::uint64_t accesses_total = 0;
    /// Accesses spent when the returned r was selected (equals total when nothing is returned).
    std::uint64_t accesses_query = 0;
    /// Accesses spent when the first singleton candidate set was obtained; 0 if never.
    std::uint64_t accesses_first_r = 0;
    /// The first image subset's query met |R| = 1 without pivoting.
    bool first_query_singleton = false;
    std::uint64_t dmt_calls = 0;
    double elapsed_ms = 0.0;
};

/// Flatten two sets of tuples to star sets and intersect them. Ascending ids.
std::vector<StarId> flatten_common(std::span<const std::vector<StarId>> t1, std::span<const std::vector<StarId>> t2);

/// Members of R sharing at least two ids with some tuple of R_bar.
std::vector<std::vector<StarId>> partial_match(std::span<const std::vector<StarId>> r,
                                               std::span<const std::vector<StarId>> r_bar);

/**
 * Direct match test. Every pairing of b with r (lexicographic permutation order) yields
 * a TRIAD attitude from its first two members; the pairing overlaying the most nearby
 * catalog stars wins, lower index on ties. Returns the empty bijection when every
 * pairing overlays exactly |b| stars. The nearby-star lookup counts as one access.
 */
Bijection direct_match_test(std::span<const std::size_t> b, std::span<const StarId> r, std::span<const Vec3> image,
                            const CatalogStore &store, double psi, double sigma_o, AccessCounter &counter);

/// Run one identification. Deterministic for a given (image, store, config).
IdentificationResult identify(Method m, std::span<const Vec3> image, const CatalogStore &store,
                              const MethodConfig &cfg);

/// Candidate set of a single query step: the image subset used and every candidate tuple.
struct QueryStep {
    std::vector<std::size_t> b;
    std::vector<std::vector<StarId>> candidates;
    /// Candidate tuples are positional (INT, PYR) rather than unordered.
    bool ordered = false;
    double elapsed_ms = 0.0;
};

/**
 * The method's candidate query on its first image subset, without pivoting or verification.
 * Each catalog query stops after `max_rows` rows; the pyramid pair queries are never capped.
 */
QueryStep first_query_step(Method m, std::span<const Vec3> image, const CatalogStore &store, const MethodConfig &cfg,
                           std::size_t max_rows = std::numeric_limits<std::size_t>::max());

}  // namespace starid
