#include "starid/catalog.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <charconv>
#include <cstring>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <thread>

namespace starid {

Vec3 to_cartesian(double alpha_deg, double delta_deg, double r) {
    const double a = deg_to_rad(alpha_deg), d = deg_to_rad(delta_deg);
    return {r * std::cos(d) * std::cos(a), r * std::cos(d) * std::sin(a), r * std::sin(d)};
}

namespace {

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double &out) {
    s = trim(s);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_long(std::string_view s, long long &out) {
    s = trim(s);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::size_t column_index(const std::vector<std::string_view> &header, const std::string &name,
                         const std::filesystem::path &path) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (trim(header[i]) == name) return i;
    throw CatalogError("column '" + name + "' not found in header of " + path.string());
}

}  // namespace

std::vector<CatalogStar> parse_source(const std::filesystem::path &path, double magnitude_cutoff,
                                      const SourceColumns &columns, ParseStats *stats) {
    std::ifstream in(path);
    if (!in) throw CatalogError("cannot read star source " + path.string());

    ParseStats local;
    std::vector<CatalogStar> stars;
    std::string line;
    if (!std::getline(in, line)) {
        if (stats) *stats = local;
        return stars;
    }
    const auto header = split(line, columns.delimiter);
    const std::size_t c_id = column_index(header, columns.id, path);
    const std::size_t c_alpha = column_index(header, columns.alpha, path);
    const std::size_t c_delta = column_index(header, columns.delta, path);
    const std::size_t c_mag = column_index(header, columns.magnitude, path);
    const std::size_t needed = std::max({c_id, c_alpha, c_delta, c_mag}) + 1;

    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++local.rows;
        const auto cells = split(line, columns.delimiter);
        if (cells.size() < needed) {
            ++local.malformed;
            continue;
        }
        if (trim(cells[c_alpha]).empty() || trim(cells[c_delta]).empty()) {
            ++local.missing_position;
            continue;
        }
        long long id = 0;
        double alpha = 0.0, delta = 0.0;
        if (!parse_long(cells[c_id], id) || !parse_double(cells[c_alpha], alpha) ||
            !parse_double(cells[c_delta], delta) || delta < -90.0 || delta > 90.0 ||
            id < std::numeric_limits<StarId>::min() || id > std::numeric_limits<StarId>::max()) {
            ++local.malformed;
            continue;
        }
        double mag = std::numeric_limits<double>::infinity();
        if (!trim(cells[c_mag]).empty() && !parse_double(cells[c_mag], mag)) {
            ++local.malformed;
            continue;
        }
        if (!std::isinf(magnitude_cutoff) && !(mag < magnitude_cutoff)) continue;
        alpha = std::fmod(alpha, 360.0);
        if (alpha < 0.0) alpha += 360.0;
        CatalogStar s;
        s.id = static_cast<StarId>(id);
        s.alpha = alpha;
        s.delta = delta;
        s.magnitude = mag;
        s.v = to_cartesian(alpha, delta).normalized();
        stars.push_back(s);
    }
    std::sort(stars.begin(), stars.end(), [](const CatalogStar &a, const CatalogStar &b) { return a.id < b.id; });
    local.kept = stars.size();
    if (stats) *stats = local;
    return stars;
}

std::string file_checksum(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CatalogError("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---------------------------------------------------------------------------
// On-disk tables

namespace detail {

namespace {
constexpr char kMagic[8] = {'S', 'T', 'I', 'D', 'T', 'B', 'L', '1'};

struct TableHeader {
    char magic[8];
    std::uint32_t ids;
    std::uint32_t features;
    std::uint32_t row_size;
    std::uint32_t reserved;
    std::uint64_t count;
};
static_assert(sizeof(TableHeader) == 32);
}  // namespace

MappedFile::MappedFile(const std::filesystem::path &path) {
    const int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) throw CatalogError("cannot open " + path.string());
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw CatalogError("cannot stat " + path.string());
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
        void *p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
        if (p == MAP_FAILED) {
            ::close(fd);
            throw CatalogError("cannot map " + path.string());
        }
        data_ = static_cast<const std::byte *>(p);
    }
    ::close(fd);
}

MappedFile::~MappedFile() {
    if (data_) ::munmap(const_cast<std::byte *>(data_), size_);
}

void write_table_file(const std::filesystem::path &path, std::uint32_t ids, std::uint32_t features,
                      std::uint32_t row_size, std::span<const std::byte> rows, std::uint64_t count) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CatalogError("cannot write " + path.string());
    TableHeader h{};
    std::memcpy(h.magic, kMagic, sizeof kMagic);
    h.ids = ids;
    h.features = features;
    h.row_size = row_size;
    h.count = count;
    out.write(reinterpret_cast<const char *>(&h), sizeof h);
    out.write(reinterpret_cast<const char *>(rows.data()), static_cast<std::streamsize>(rows.size()));
    if (!out) throw CatalogError("short write to " + path.string());
}

std::span<const std::byte> table_file_rows(const MappedFile &file, std::uint32_t ids, std::uint32_t features,
                                           std::uint32_t row_size, std::uint64_t &count) {
    const auto bytes = file.bytes();
    if (bytes.size() < sizeof(TableHeader)) throw CatalogError("table file too short");
    TableHeader h{};
    std::memcpy(&h, bytes.data(), sizeof h);
    if (std::memcmp(h.magic, kMagic, sizeof kMagic) != 0) throw CatalogError("bad table magic");
    if (h.ids != ids || h.features != features || h.row_size != row_size)
        throw CatalogError("table layout does not match this build");
    if (bytes.size() != sizeof h + h.count * h.row_size) throw CatalogError("table size mismatch");
    count = h.count;
    return bytes.subspan(sizeof h);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stars

StarTable::StarTable(std::vector<CatalogStar> stars) : stars_(std::move(stars)) {
    std::sort(stars_.begin(), stars_.end(), [](const CatalogStar &a, const CatalogStar &b) { return a.id < b.id; });
    by_z_.resize(stars_.size());
    for (std::size_t i = 0; i < stars_.size(); ++i) by_z_[i] = static_cast<std::uint32_t>(i);
    std::sort(by_z_.begin(), by_z_.end(), [&](std::uint32_t a, std::uint32_t b) {
        return stars_[a].v.z < stars_[b].v.z || (stars_[a].v.z == stars_[b].v.z && a < b);
    });
    z_.reserve(by_z_.size());
    for (auto i : by_z_) z_.push_back(stars_[i].v.z);
}

const CatalogStar *StarTable::find(StarId id) const {
    auto it = std::lower_bound(stars_.begin(), stars_.end(), id,
                               [](const CatalogStar &s, StarId v) { return s.id < v; });
    return (it != stars_.end() && it->id == id) ? &*it : nullptr;
}

const CatalogStar &StarTable::at(StarId id) const {
    const CatalogStar *s = find(id);
    if (!s) throw CatalogError("unknown catalog id " + std::to_string(id));
    return *s;
}

std::vector<CatalogStar> StarTable::cone(const Vec3 &center, double radius_deg) const {
    const Vec3 c = center.normalized();
    const double delta_c = std::asin(std::clamp(c.z, -1.0, 1.0));
    const double r = deg_to_rad(radius_deg);
    const double z_lo = std::sin(std::max(delta_c - r, -std::numbers::pi / 2)) - 1e-12;
    const double z_hi = std::sin(std::min(delta_c + r, std::numbers::pi / 2)) + 1e-12;
    const double min_dot = std::cos(r);
    std::vector<CatalogStar> out;
    auto lo = std::lower_bound(z_.begin(), z_.end(), z_lo);
    for (auto it = lo; it != z_.end() && *it <= z_hi; ++it) {
        const CatalogStar &s = stars_[by_z_[static_cast<std::size_t>(it - z_.begin())]];
        if (s.v.dot(c) > min_dot && angular_separation(s.v, c) < radius_deg) out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](const CatalogStar &a, const CatalogStar &b) { return a.id < b.id; });
    return out;
}

void StarTable::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw CatalogError("cannot write " + path.string());
    out << "id,alpha,delta,magnitude,x,y,z\n" << std::setprecision(17);
    for (const auto &s : stars_)
        out << s.id << ',' << s.alpha << ',' << s.delta << ',' << s.magnitude << ',' << s.v.x << ',' << s.v.y
            << ',' << s.v.z << '\n';
    if (!out) throw CatalogError("short write to " + path.string());
}

StarTable StarTable::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw CatalogError("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<CatalogStar> stars;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split(line, ',');
        long long id = 0;
        CatalogStar s;
        if (c.size() != 7 || !parse_long(c[0], id) || !parse_double(c[1], s.alpha) ||
            !parse_double(c[2], s.delta) || !parse_double(c[4], s.v.x) || !parse_double(c[5], s.v.y) ||
            !parse_double(c[6], s.v.z))
            throw CatalogError("malformed star row in " + path.string());
        if (!parse_double(c[3], s.magnitude)) s.magnitude = std::numeric_limits<double>::infinity();
        s.id = static_cast<StarId>(id);
        stars.push_back(s);
    }
    return StarTable(std::move(stars));
}

// ---------------------------------------------------------------------------
// Builders

NeighborGraph build_neighbor_graph(std::span<const CatalogStar> stars, double psi_max) {
    NeighborGraph g;
    g.higher.resize(stars.size());
    std::vector<std::uint32_t> order(stars.size());
    for (std::size_t i = 0; i < stars.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return stars[a].v.z < stars[b].v.z; });

    // |z_i - z_j| <= theta for unit vectors, so a z band bounds the candidates.
    const double band = deg_to_rad(psi_max) + 1e-12;
    const double min_dot = std::cos(deg_to_rad(psi_max)) - 1e-12;
    for (std::size_t a = 0; a < order.size(); ++a) {
        const auto &sa = stars[order[a]];
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            const auto &sb = stars[order[b]];
            if (sb.v.z - sa.v.z > band) break;
            if (sa.v.dot(sb.v) < min_dot) continue;
            if (angular_separation(sa.v, sb.v) > psi_max) continue;
            const auto lo = std::min(order[a], order[b]), hi = std::max(order[a], order[b]);
            g.higher[lo].push_back(hi);
        }
    }
    for (auto &n : g.higher) std::sort(n.begin(), n.end());
    return g;
}

namespace {

/// Runs fn(i) for i in [0, n) over `jobs` workers; each worker appends to its own vector.
template <typename Row, typename Fn>
std::vector<Row> parallel_collect(std::size_t n, unsigned jobs, Fn fn) {
    jobs = std::max(1u, jobs);
    std::vector<std::vector<Row>> parts(jobs);
    auto work = [&](unsigned w) {
        for (std::size_t i = w; i < n; i += jobs) fn(i, parts[w]);
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(work, w);
        for (auto &t : pool) t.join();
    }
    std::size_t total = 0;
    for (auto &p : parts) total += p.size();
    std::vector<Row> out;
    out.reserve(total);
    for (auto &p : parts) {
        out.insert(out.end(), p.begin(), p.end());
        std::vector<Row>().swap(p);
    }
    return out;
}

/// Calls visit(i, j, k) for every mutually-close trio i < j < k.
template <typename Visit>
void for_each_trio_from(const NeighborGraph &g, std::size_t i, Visit &&visit) {
    const auto &ni = g.higher[i];
    for (std::size_t a = 0; a < ni.size(); ++a) {
        const auto j = ni[a];
        const auto &nj = g.higher[j];
        // k must neighbor both i and j with k > j: merge ni[a+1..] with nj.
        auto p = ni.begin() + static_cast<std::ptrdiff_t>(a + 1);
        auto q = nj.begin();
        while (p != ni.end() && q != nj.end()) {
            if (*p < *q) {
                ++p;
            } else if (*q < *p) {
                ++q;
            } else {
                visit(i, j, *p);
                ++p;
                ++q;
            }
        }
    }
}

}  // namespace

PairTable build_pair_catalog(std::span<const CatalogStar> stars, double psi_max, unsigned jobs) {
    const NeighborGraph g = build_neighbor_graph(stars, psi_max);
    auto rows = parallel_collect<PairEntry>(stars.size(), jobs, [&](std::size_t i, std::vector<PairEntry> &out) {
        for (auto j : g.higher[i]) {
            PairEntry e;
            e.ids = {stars[i].id, stars[j].id};
            e.f = {angular_separation(stars[i].v, stars[j].v)};
            out.push_back(e);
        }
    });
    return PairTable(std::move(rows));
}

TrioTable build_trio_catalog(std::span<const CatalogStar> stars, double psi_max, TriangleKind kind,
                             int moment_depth, unsigned jobs) {
    const NeighborGraph g = build_neighbor_graph(stars, psi_max);
    auto rows = parallel_collect<TrioEntry>(stars.size(), jobs, [&](std::size_t i, std::vector<TrioEntry> &out) {
        for_each_trio_from(g, i, [&](std::size_t a, std::size_t b, std::size_t c) {
            const TrioFeatures tf = trio_features(kind, stars[a].v, stars[b].v, stars[c].v, moment_depth);
            TrioEntry e;
            e.ids = {stars[a].id, stars[b].id, stars[c].id};
            e.f = {tf.area, tf.moment};
            out.push_back(e);
        });
    });
    return TrioTable(std::move(rows));
}

TrioPermEntry make_trio_perm_entry(const CatalogStar &c, const CatalogStar &p, const CatalogStar &q) {
    double tp = angular_separation(p.v, c.v), tq = angular_separation(q.v, c.v);
    const CatalogStar *first = &p, *second = &q;
    if (tq < tp || (tq == tp && q.id < p.id)) {
        std::swap(first, second);
        std::swap(tp, tq);
    }
    TrioPermEntry e;
    e.ids = {c.id, first->id, second->id};
    e.f = {tp, tq, interior_angle(c.v, first->v, second->v)};
    return e;
}

TrioPermTable build_trio_permutation_catalog(std::span<const CatalogStar> stars, double psi_max, unsigned jobs) {
    const NeighborGraph g = build_neighbor_graph(stars, psi_max);
    auto rows =
        parallel_collect<TrioPermEntry>(stars.size(), jobs, [&](std::size_t i, std::vector<TrioPermEntry> &out) {
            for_each_trio_from(g, i, [&](std::size_t a, std::size_t b, std::size_t c) {
                out.push_back(make_trio_perm_entry(stars[a], stars[b], stars[c]));
                out.push_back(make_trio_perm_entry(stars[b], stars[a], stars[c]));
                out.push_back(make_trio_perm_entry(stars[c], stars[a], stars[b]));
            });
        });
    return TrioPermTable(std::move(rows));
}

CatalogCounts count_catalog_rows(std::span<const CatalogStar> stars, double psi_max) {
    const NeighborGraph g = build_neighbor_graph(stars, psi_max);
    CatalogCounts counts;
    for (std::size_t i = 0; i < stars.size(); ++i) {
        counts.pairs += g.higher[i].size();
        for_each_trio_from(g, i, [&](std::size_t, std::size_t, std::size_t) { ++counts.trios; });
    }
    // One ordered row per choice of central star.
    counts.trio_perms = 3 * counts.trios;
    return counts;
}

// ---------------------------------------------------------------------------
// Manifest and store

std::string Manifest::get(const std::string &key, const std::string &fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

double Manifest::get_double(const std::string &key, double fallback) const {
    double v = 0.0;
    return parse_double(get(key), v) ? v : fallback;
}

long long Manifest::get_int(const std::string &key, long long fallback) const {
    long long v = 0;
    return parse_long(get(key), v) ? v : fallback;
}

void Manifest::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw CatalogError("cannot write " + path.string());
    for (const auto &[k, v] : values) out << k << '=' << v << '\n';
    if (!out) throw CatalogError("short write to " + path.string());
}

Manifest Manifest::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw CatalogError("cannot read manifest " + path.string());
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw CatalogError("malformed manifest line: " + std::string(t));
        m.values[std::string(trim(t.substr(0, eq)))] = std::string(trim(t.substr(eq + 1)));
    }
    return m;
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

constexpr const char *kManifestFile = "manifest.txt";
constexpr const char *kStarsFile = "stars.csv";
constexpr const char *kPairsFile = "pairs.tbl";
constexpr const char *kTriosSphFile = "trios_spherical.tbl";
constexpr const char *kTriosPlnFile = "trios_planar.tbl";
constexpr const char *kTrioPermsFile = "trio_perms.tbl";

}  // namespace

CatalogStore CatalogStore::build(std::vector<CatalogStar> stars, const BuildOptions &options) {
    CatalogStore store;
    store.manifest.set("format", "1");
    store.manifest.set("mag_cutoff", fmt_double(options.magnitude_cutoff));
    store.manifest.set("psi_max", fmt_double(options.psi_max));
    store.manifest.set("moment_depth", std::to_string(options.moment_depth));
    store.manifest.set("star_count", std::to_string(stars.size()));
    store.stars = StarTable(std::move(stars));
    const auto s = store.stars.stars();
    if (options.pairs) store.pairs = build_pair_catalog(s, options.psi_max, options.jobs);
    if (options.trios_spherical)
        store.trios_spherical =
            build_trio_catalog(s, options.psi_max, TriangleKind::Spherical, options.moment_depth, options.jobs);
    if (options.trios_planar)
        store.trios_planar =
            build_trio_catalog(s, options.psi_max, TriangleKind::Planar, options.moment_depth, options.jobs);
    if (options.trio_perms) store.trio_perms = build_trio_permutation_catalog(s, options.psi_max, options.jobs);
    store.manifest.set("pair_count", std::to_string(store.pairs.size()));
    store.manifest.set("trio_spherical_count", std::to_string(store.trios_spherical.size()));
    store.manifest.set("trio_planar_count", std::to_string(store.trios_planar.size()));
    store.manifest.set("trio_perm_count", std::to_string(store.trio_perms.size()));
    return store;
}

CatalogStore CatalogStore::build_from_source(const std::filesystem::path &source, const BuildOptions &options,
                                             ParseStats *stats) {
    ParseStats local;
    auto stars = parse_source(source, options.magnitude_cutoff, options.columns, &local);
    if (stats) *stats = local;
    CatalogStore store = build(std::move(stars), options);
    store.manifest.set("source", source.filename().string());
    store.manifest.set("source_checksum", file_checksum(source));
    store.manifest.set("source_rows", std::to_string(local.rows));
    store.manifest.set("source_malformed", std::to_string(local.malformed));
    return store;
}

void CatalogStore::save(const std::filesystem::path &dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw CatalogError("cannot create catalog directory " + dir.string() + ": " + ec.message());
    stars.save(dir / kStarsFile);
    pairs.save(dir / kPairsFile);
    trios_spherical.save(dir / kTriosSphFile);
    trios_planar.save(dir / kTriosPlnFile);
    trio_perms.save(dir / kTrioPermsFile);
    manifest.save(dir / kManifestFile);
}

CatalogStore CatalogStore::load(const std::filesystem::path &dir) {
    if (!std::filesystem::exists(dir / kManifestFile))
        throw CatalogError("no catalog manifest in " + dir.string());
    CatalogStore store;
    store.manifest = Manifest::load(dir / kManifestFile);
    store.stars = StarTable::load(dir / kStarsFile);
    store.pairs = PairTable::load(dir / kPairsFile);
    store.trios_spherical = TrioTable::load(dir / kTriosSphFile);
    store.trios_planar = TrioTable::load(dir / kTriosPlnFile);
    store.trio_perms = TrioPermTable::load(dir / kTrioPermsFile);
    return store;
}

}  // namespace starid
