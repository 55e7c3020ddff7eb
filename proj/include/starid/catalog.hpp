#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "starid/features.hpp"
#include "starid/geometry.hpp"

namespace starid {

/// Fatal problem reading or writing catalog data.
class CatalogError : public std::runtime_error {
   public:
    explicit CatalogError(const std::string &what) : std::runtime_error(what) {}
};

using StarId = std::int32_t;

/// One inertial-frame star.
struct CatalogStar {
    StarId id = 0;
    double alpha = 0.0;      ///< right ascension, degrees in [0, 360)
    double delta = 0.0;      ///< declination, degrees in [-90, 90]
    double magnitude = 0.0;  ///< apparent magnitude
    Vec3 v;                  ///< ECI unit vector
};

/// (r cos(delta) cos(alpha), r cos(delta) sin(alpha), r sin(delta)); angles in degrees.
Vec3 to_cartesian(double alpha_deg, double delta_deg, double r = 1.0);

/// Column names of the delimited source table. The first line of the file is the header.
struct SourceColumns {
    std::string id = "HIP";
    std::string alpha = "RAdeg";
    std::string delta = "DEdeg";
    std::string magnitude = "Hpmag";
    char delimiter = ',';
};

struct ParseStats {
    std::size_t rows = 0;
    std::size_t missing_position = 0;
    std::size_t malformed = 0;  ///< warning counter
    std::size_t kept = 0;
};

/**
 * Read a delimited star table. Rows without a position are skipped, rows that fail
 * to parse are skipped and counted as warnings, and only stars strictly brighter
 * than `magnitude_cutoff` are returned (a missing magnitude counts as +inf; an
 * infinite cutoff disables the filter).
 * Output is sorted by id. Throws CatalogError if the file cannot be read.
 */
std::vector<CatalogStar> parse_source(const std::filesystem::path &path, double magnitude_cutoff,
                                      const SourceColumns &columns = {}, ParseStats *stats = nullptr);

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path &path);

/// Closed feature interval [lo, hi].
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    static Interval around(double value, double sigma) { return {value - 3.0 * sigma, value + 3.0 * sigma}; }
    bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Counts catalog accesses. Owned by the caller so the store itself stays immutable.
struct AccessCounter {
    std::uint64_t count = 0;
    void tick() { ++count; }
};

/// One indexed row of a feature catalog: member star ids plus precomputed feature values.
template <std::size_t NIds, std::size_t NFeatures>
struct FeatureRow {
    static constexpr std::size_t kIds = NIds;
    static constexpr std::size_t kFeatures = NFeatures;
    std::array<StarId, NIds> ids{};
    std::array<double, NFeatures> f{};

    bool operator==(const FeatureRow &) const = default;
};

/// K^2 row: ids (a < b), f = {theta in degrees}.
using PairEntry = FeatureRow<2, 1>;
/// K^3 row: ids (a < b < c), f = {area, moment}.
using TrioEntry = FeatureRow<3, 2>;
/// Permutation row: ids (central, closest, second closest), f = {theta(c1, c), theta(c2, c), phi}.
using TrioPermEntry = FeatureRow<3, 3>;

namespace detail {

/// Read-only memory mapping of a whole file.
class MappedFile {
   public:
    explicit MappedFile(const std::filesystem::path &path);
    ~MappedFile();
    MappedFile(const MappedFile &) = delete;
    MappedFile &operator=(const MappedFile &) = delete;

    std::span<const std::byte> bytes() const { return {data_, size_}; }

   private:
    const std::byte *data_ = nullptr;
    std::size_t size_ = 0;
};

void write_table_file(const std::filesystem::path &path, std::uint32_t ids, std::uint32_t features,
                      std::uint32_t row_size, std::span<const std::byte> rows, std::uint64_t count);
std::span<const std::byte> table_file_rows(const MappedFile &file, std::uint32_t ids,
                                           std::uint32_t features, std::uint32_t row_size,
                                           std::uint64_t &count);

}  // namespace detail

/**
 * Feature catalog sorted on its first feature column. A range query binary-searches
 * the first interval and filters the remaining features over that slice, which is
 * the access pattern of a B+ tree index on the leading column.
 */
template <typename Row>
class FeatureTable {
   public:
    FeatureTable() = default;
    FeatureTable(FeatureTable &&) noexcept = default;
    FeatureTable &operator=(FeatureTable &&) noexcept = default;
    // view_ may point into owned_, so copies would dangle.
    FeatureTable(const FeatureTable &) = delete;
    FeatureTable &operator=(const FeatureTable &) = delete;

    /// Takes ownership of rows and sorts them by (f[0], f[1], ..., ids).
    explicit FeatureTable(std::vector<Row> rows) : owned_(std::move(rows)) {
        std::sort(owned_.begin(), owned_.end(), [](const Row &a, const Row &b) {
            if (a.f != b.f) return a.f < b.f;
            return a.ids < b.ids;
        });
        view_ = owned_;
    }

    static FeatureTable load(const std::filesystem::path &path) {
        FeatureTable t;
        t.file_ = std::make_shared<detail::MappedFile>(path);
        std::uint64_t count = 0;
        auto bytes = detail::table_file_rows(*t.file_, Row::kIds, Row::kFeatures, sizeof(Row), count);
        t.view_ = {reinterpret_cast<const Row *>(bytes.data()), static_cast<std::size_t>(count)};
        return t;
    }

    void save(const std::filesystem::path &path) const {
        detail::write_table_file(path, Row::kIds, Row::kFeatures, sizeof(Row), std::as_bytes(view_),
                                 view_.size());
    }

    std::span<const Row> rows() const { return view_; }
    std::size_t size() const { return view_.size(); }
    bool empty() const { return view_.empty(); }

    /// Every row whose features all lie in their closed intervals, stopping after `max_rows`. Counts one access.
    std::vector<Row> query_range(std::span<const Interval, Row::kFeatures> predicate, AccessCounter &counter,
                                 std::size_t max_rows = std::numeric_limits<std::size_t>::max()) const {
        counter.tick();
        std::vector<Row> out;
        const Interval &lead = predicate[0];
        auto first = std::lower_bound(view_.begin(), view_.end(), lead.lo,
                                      [](const Row &r, double v) { return r.f[0] < v; });
        for (auto it = first; it != view_.end() && it->f[0] <= lead.hi && out.size() < max_rows; ++it) {
            bool keep = true;
            for (std::size_t k = 1; k < Row::kFeatures && keep; ++k) keep = predicate[k].contains(it->f[k]);
            if (keep) out.push_back(*it);
        }
        return out;
    }

    std::vector<Row> query_range(const std::array<Interval, Row::kFeatures> &predicate, AccessCounter &counter,
                                 std::size_t max_rows = std::numeric_limits<std::size_t>::max()) const {
        return query_range(std::span<const Interval, Row::kFeatures>(predicate), counter, max_rows);
    }

    /// Exhaustive filter with the same predicate; the reference for query_range.
    std::vector<Row> linear_scan(const std::array<Interval, Row::kFeatures> &predicate) const {
        std::vector<Row> out;
        for (const Row &r : view_) {
            bool keep = true;
            for (std::size_t k = 0; k < Row::kFeatures && keep; ++k) keep = predicate[k].contains(r.f[k]);
            if (keep) out.push_back(r);
        }
        return out;
    }

   private:
    std::vector<Row> owned_;
    std::shared_ptr<detail::MappedFile> file_;
    std::span<const Row> view_;
};

using PairTable = FeatureTable<PairEntry>;
using TrioTable = FeatureTable<TrioEntry>;
using TrioPermTable = FeatureTable<TrioPermEntry>;

/// Bright stars with lookup by id and cone queries.
class StarTable {
   public:
    StarTable() = default;
    explicit StarTable(std::vector<CatalogStar> stars);

    std::span<const CatalogStar> stars() const { return stars_; }
    std::size_t size() const { return stars_.size(); }
    const CatalogStar *find(StarId id) const;
    const CatalogStar &at(StarId id) const;

    /// Stars with angular_separation(star, center) < radius_deg, ascending id. No access counted.
    std::vector<CatalogStar> cone(const Vec3 &center, double radius_deg) const;
    /// Same as cone() but counted as one catalog access.
    std::vector<CatalogStar> cone(const Vec3 &center, double radius_deg, AccessCounter &counter) const {
        counter.tick();
        return cone(center, radius_deg);
    }

    void save(const std::filesystem::path &path) const;
    static StarTable load(const std::filesystem::path &path);

   private:
    std::vector<CatalogStar> stars_;       // ascending id
    std::vector<std::uint32_t> by_z_;      // indices into stars_, ascending v.z
    std::vector<double> z_;                // v.z in by_z_ order
};

/// Stars sorted by id, with each star's neighbors (higher index, within psi_max) listed.
struct NeighborGraph {
    std::vector<std::vector<std::uint32_t>> higher;  ///< ascending indices j > i
};
NeighborGraph build_neighbor_graph(std::span<const CatalogStar> stars, double psi_max);

/// Every unordered pair within psi_max degrees, indexed on theta.
PairTable build_pair_catalog(std::span<const CatalogStar> stars, double psi_max, unsigned jobs = 1);

/// Every trio whose three pairwise angles are within psi_max, with (area, moment) features.
TrioTable build_trio_catalog(std::span<const CatalogStar> stars, double psi_max, TriangleKind kind,
                             int moment_depth = kDefaultMomentDepth, unsigned jobs = 1);

/// Three ordered rows per trio: one per central star, neighbors ordered by theta (ties: lower id first).
TrioPermTable build_trio_permutation_catalog(std::span<const CatalogStar> stars, double psi_max,
                                             unsigned jobs = 1);

/// Build the ordered permutation row for central star c and neighbors p, q.
TrioPermEntry make_trio_perm_entry(const CatalogStar &c, const CatalogStar &p, const CatalogStar &q);

struct CatalogCounts {
    std::uint64_t pairs = 0;
    std::uint64_t trios = 0;
    std::uint64_t trio_perms = 0;
};
/// Row counts the three builders would produce, without computing features.
CatalogCounts count_catalog_rows(std::span<const CatalogStar> stars, double psi_max);

/// Line-oriented key=value manifest stored next to the tables.
struct Manifest {
    std::map<std::string, std::string> values;

    std::string get(const std::string &key, const std::string &fallback = "") const;
    double get_double(const std::string &key, double fallback) const;
    long long get_int(const std::string &key, long long fallback) const;
    void set(const std::string &key, const std::string &value) { values[key] = value; }

    void save(const std::filesystem::path &path) const;
    static Manifest load(const std::filesystem::path &path);
};

struct BuildOptions {
    double magnitude_cutoff = 6.0;
    double psi_max = 20.0;
    int moment_depth = kDefaultMomentDepth;
    bool pairs = true;
    bool trios_spherical = true;
    bool trios_planar = true;
    bool trio_perms = true;
    unsigned jobs = 1;
    SourceColumns columns;
};

/// Everything the identification methods read. Immutable once built or loaded.
struct CatalogStore {
    Manifest manifest;
    StarTable stars;
    PairTable pairs;
    TrioTable trios_spherical;
    TrioTable trios_planar;
    TrioPermTable trio_perms;

    double psi_max() const { return manifest.get_double("psi_max", 20.0); }
    int moment_depth() const { return static_cast<int>(manifest.get_int("moment_depth", kDefaultMomentDepth)); }
    const TrioTable &trios(TriangleKind kind) const {
        return kind == TriangleKind::Spherical ? trios_spherical : trios_planar;
    }

    /// Build every requested table from bright stars already in memory.
    static CatalogStore build(std::vector<CatalogStar> stars, const BuildOptions &options);
    /// Parse `source` and build; records the source checksum in the manifest.
    static CatalogStore build_from_source(const std::filesystem::path &source, const BuildOptions &options,
                                          ParseStats *stats = nullptr);

    void save(const std::filesystem::path &dir) const;
    /// Throws CatalogError if `dir` has no manifest.
    static CatalogStore load(const std::filesystem::path &dir);
};

}  // namespace starid
