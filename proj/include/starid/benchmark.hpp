#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "starid/catalog.hpp"
#include "starid/identification.hpp"
#include "starid/image.hpp"

namespace starid {

/// A method plus its verification toggle; tags like "pyr" and "pyr-n".
struct MethodVariant {
    Method method = Method::Angle;
    bool verify = true;

    std::string tag() const;
    MethodConfig config() const;
    bool operator==(const MethodVariant &) const = default;
};
std::optional<MethodVariant> parse_variant(std::string_view tag);
std::vector<MethodVariant> all_variants();

struct NoiseSpec {
    double rho = 0.0;
    int omega = 0;
};

struct BenchOptions {
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    double psi = 20.0;
    /// Fields with fewer catalog stars are resampled.
    std::size_t min_stars = 4;
    unsigned jobs = 1;
    /// Applied on top of each variant's defaults when set.
    std::function<void(MethodConfig &)> tweak;
};

/// Seed of trial `index` in a batch started from `base`.
std::uint64_t trial_seed(std::uint64_t base, std::size_t index);

/// Uniform attitude and boresight, resampled until the field holds at least `min_stars` stars.
SyntheticImage sample_image(const CatalogStore &store, double psi, std::size_t min_stars, std::uint64_t seed);
/// sample_image followed by Gaussian noise and spikes, each with its own derived seed.
SyntheticImage sample_trial_image(const CatalogStore &store, const BenchOptions &opt, const NoiseSpec &noise,
                                  std::uint64_t seed);

struct TrialRecord {
    std::string method;
    double rho = 0.0;
    int omega = 0;
    std::uint64_t seed = 0;
    Outcome outcome = Outcome::Exhausted;
    bool h_correct = false;
    bool r_correct = false;
    std::uint64_t acc_query = 0;
    std::uint64_t acc_total = 0;
    double ms = 0.0;
    // not part of the trial CSV
    std::uint64_t acc_first_r = 0;
    bool first_singleton = false;
};

/// Every mapped pair matches the truth labels (false for an empty bijection).
bool bijection_correct(const Bijection &h, const SyntheticImage &image);
/// The returned r equals the truth labels of b (positional for INT/PYR, as sets otherwise).
bool candidate_correct(Method m, const IdentificationResult &r, const SyntheticImage &image);

TrialRecord run_trial(const MethodVariant &v, const CatalogStore &store, const SyntheticImage &image,
                      const NoiseSpec &noise, std::uint64_t seed, const BenchOptions &opt);

/// Run fn(i) for i in [0, n) on `jobs` threads.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)> &fn);

/// Full identification for every (variant, noise) pair. All variants see the same images per noise level.
std::vector<TrialRecord> run_end_to_end(const std::vector<MethodVariant> &variants, const CatalogStore &store,
                                        const std::vector<NoiseSpec> &grid, const BenchOptions &opt);

// ---------------------------------------------------------------------------
// Query step

struct QueryRecord {
    std::string method;
    std::uint64_t seed = 0;
    std::size_t candidates = 0;
    bool truth_in_r = false;
    double ms = 0.0;
};

struct QueryStats {
    std::string method;
    std::size_t n = 0;
    double f = 0.0;       ///< fraction with the true r in R
    std::size_t s = 0;    ///< count with |R| = 1
    double mean_ms = 0.0;
};

std::vector<QueryRecord> run_query_experiment(const std::vector<Method> &methods, const CatalogStore &store,
                                              const BenchOptions &opt);
std::vector<QueryStats> summarize_queries(const std::vector<QueryRecord> &records);

// ---------------------------------------------------------------------------
// Pivot cost

struct PivotStats {
    std::string method;
    std::size_t trials = 0;
    std::size_t first_b_failed = 0;  ///< trials whose first query missed |R| = 1
    std::size_t counted = 0;         ///< of those, trials that obtained an r
    double mean_accesses = 0.0;
    double var_accesses = 0.0;
};

/// SPH, PLN, COM at the given noise; records carry acc_first_r and first_singleton.
std::vector<TrialRecord> run_pivot_experiment(const CatalogStore &store, double rho, const BenchOptions &opt);
std::vector<PivotStats> summarize_pivots(const std::vector<TrialRecord> &records);

// ---------------------------------------------------------------------------
// Verification ablation, sigma tuning

std::vector<TrialRecord> run_verification_ablation(const CatalogStore &store, const std::vector<double> &rhos,
                                                   const BenchOptions &opt);

struct SigmaChoice {
    Method method;
    double sigma1 = 0.0;  ///< sigma_theta, or sigma_a for trio methods
    double sigma2 = 0.0;  ///< sigma_phi / sigma_tau; unused for one-parameter methods
    std::size_t singletons = 0;
    std::size_t sets_evaluated = 0;
};

/// 10^-16 ... 10^1.
std::vector<double> sigma_grid();

/**
 * Grid search over the query deviations. Each set runs one query step on every image;
 * the set with the most |R| = 1 outcomes wins, ties going to the larger deviations.
 */
SigmaChoice tune_sigma(Method m, const CatalogStore &store, const std::vector<SyntheticImage> &images,
                       const std::vector<double> &grid = sigma_grid());

// ---------------------------------------------------------------------------
// Statistics

struct ZTest {
    double z = 0.0;
    double p = 1.0;
};

double normal_cdf(double x);
/// Pooled two-proportion Z test; tails is 1 or 2. z > 0 when p1 < p2.
ZTest z_test(double p1, std::size_t n1, double p2, std::size_t n2, int tails);
/// Two-sample Z test on means with pooled variance.
ZTest z_test_means(double m1, double var1, std::size_t n1, double m2, double var2, std::size_t n2, int tails);

enum class TrendModel { Log, Linear };

struct TrendFit {
    TrendModel model = TrendModel::Log;
    double c = 0.0;
    double d = 0.0;
    bool fitted = false;  ///< false marks "no decay" (or too few points)
    double rho_star = 0.0;  ///< first grid point with accuracy < 0.95 (log model)
    std::size_t points = 0;
};

/// Ordinary least squares y = c x + d.
std::pair<double, double> least_squares(const std::vector<double> &x, const std::vector<double> &y);

/**
 * Log model: y = c ln(x) + d over the points from the first x with y < 0.95 onward
 * (x > 0 only), extended backwards to at least three points. A series that never drops
 * below 0.95 is not fitted. Linear model: plain least squares on every point.
 */
TrendFit fit_trend(const std::vector<double> &x, const std::vector<double> &y, TrendModel model);

// ---------------------------------------------------------------------------
// Aggregation and reports

struct Aggregate {
    std::string method;
    double rho = 0.0;
    int omega = 0;
    std::size_t n = 0;
    double accuracy = 0.0;
    double r_accuracy = 0.0;
    double mean_acc_query = 0.0;
    double mean_acc_total = 0.0;
    double mean_ms = 0.0;
};

/// One row per (method, rho, omega), in first-seen order.
std::vector<Aggregate> aggregate(const std::vector<TrialRecord> &records);

inline constexpr const char *kTrialHeader = "method,rho,omega,seed,outcome,h_correct,r_correct,acc_query,acc_total,ms";

void write_trials_csv(const std::vector<TrialRecord> &records, const std::filesystem::path &path);
std::vector<TrialRecord> read_trials_csv(const std::filesystem::path &path);
void write_query_csv(const std::vector<QueryRecord> &records, const std::filesystem::path &path);
std::vector<QueryRecord> read_query_csv(const std::filesystem::path &path);
/// Trial CSV columns plus acc_first_r and first_singleton.
void write_pivot_csv(const std::vector<TrialRecord> &records, const std::filesystem::path &path);
std::vector<TrialRecord> read_pivot_csv(const std::filesystem::path &path);
void write_aggregate_csv(const std::vector<Aggregate> &rows, const std::filesystem::path &path);

struct BarSeries {
    std::string label;
    std::vector<double> values;
};

/// Grouped bar chart, one group per category.
void write_bar_svg(const std::filesystem::path &path, const std::string &title, const std::string &y_label,
                   const std::vector<std::string> &categories, const std::vector<BarSeries> &series, bool log_y);

struct LineSeries {
    std::string label;
    std::vector<double> x, y;              ///< markers
    std::vector<double> curve_x, curve_y;  ///< trend line samples, may be empty
};

/// Markers plus trend lines; x_labels name the axis positions 0..k-1.
void write_line_svg(const std::filesystem::path &path, const std::string &title, const std::string &x_title,
                    const std::string &y_label, const std::vector<std::string> &x_labels,
                    const std::vector<LineSeries> &series);

}  // namespace starid
