// Acceptance suite: one PASS/FAIL line per criterion.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "starid/benchmark.hpp"
#include "starid/catalog.hpp"
#include "starid/features.hpp"
#include "starid/geometry.hpp"
#include "starid/identification.hpp"
#include "starid/image.hpp"

using namespace starid;

namespace {

// Tolerances and reference values.
constexpr double kCatalogMagnitude = 6.0;
constexpr double kAccuracySlack = 0.05;
const std::map<std::string, double> kZeroNoiseAccuracy{{"ang", 0.977}, {"int", 1.0}, {"sph", 1.0},
                                                       {"pln", 1.0},   {"pyr", 0.999}, {"com", 1.0}};
constexpr std::size_t kCriterion1MinStars = 5;
constexpr double kPyramidQueryF = 0.97;
constexpr double kSpikePyramidFloor = 0.97;
constexpr double kSpikeTriangleCeiling = 0.85;
constexpr double kVerifyPyramidGain = 0.02;
constexpr double kVerifyCompositeLoss = 0.20;
constexpr double kPivotReferenceGapPlnCom = (52.71 - 47.18) / 52.71;
constexpr double kPivotReferenceGapSphPln = (56.93 - 52.71) / 56.93;
constexpr double kPivotGapBand = 0.20;
constexpr double kTriadTolerance = 1e-9;
constexpr double kOctantTolerance = 1e-9;
constexpr std::uint64_t kSourceStars = 117956;
constexpr std::uint64_t kBrightStars = 4560;
constexpr double kTableSizeBand = 0.05;
constexpr std::uint64_t kPairs = 353700, kTrios = 12520359, kTrioPerms = 37561083;

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string &what) {
        if (!ok) pass = false;
        if (detail.tellp() > 0) detail << "; ";
        detail << what << (ok ? "" : " [x]");
    }
};

std::string f3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Context {
    const CatalogStore *store = nullptr;
    ParseStats source_stats;
    std::filesystem::path source, out;
    BenchOptions opt;
    /// Criteria without a stated trial count run at the reference batch size.
    BenchOptions reference_opt;
};

const Aggregate &find(const std::vector<Aggregate> &rows, const std::string &m, double rho, int omega) {
    for (const auto &a : rows)
        if (a.method == m && a.rho == rho && a.omega == omega) return a;
    throw std::runtime_error("missing aggregate for " + m);
}

Verdict criterion1(const Context &c) {
    BenchOptions opt = c.opt;
    opt.min_stars = kCriterion1MinStars;
    const auto recs = run_end_to_end(all_variants(), *c.store, {NoiseSpec{0.0, 0}}, opt);
    write_trials_csv(recs, c.out / "c1_zero_noise.csv");
    const auto rows = aggregate(recs);
    Verdict v;
    for (const auto &[m, expected] : kZeroNoiseAccuracy) {
        const double a = find(rows, m, 0.0, 0).accuracy;
        v.require(a >= expected - kAccuracySlack, m + " " + f3(a) + ">=" + f3(expected - kAccuracySlack));
    }
    return v;
}

Verdict criterion2(const Context &c) {
    const auto recs = run_query_experiment({kAllMethods.begin(), kAllMethods.end()}, *c.store, c.opt);
    write_query_csv(recs, c.out / "c2_query.csv");
    const auto stats = summarize_queries(recs);
    Verdict v;
    std::size_t s_ang = 0, s_min = SIZE_MAX;
    for (const auto &s : stats) {
        if (s.method == "pyr") v.require(s.f >= kPyramidQueryF, "pyr f " + f3(s.f) + ">=" + f3(kPyramidQueryF));
        else v.require(s.f == 1.0, s.method + " f " + f3(s.f));
        if (s.method == "ang") s_ang = s.s;
        s_min = std::min(s_min, s.s);
    }
    std::ostringstream ss;
    for (const auto &s : stats) ss << (ss.tellp() > 0 ? " " : "") << s.method << "=" << s.s;
    v.require(s_ang == s_min, "S(ang) minimal: " + ss.str());
    return v;
}

Verdict criterion3(const Context &c) {
    const std::vector<NoiseSpec> grid{{0.0, 0}, {0.0, 6}, {0.0, 12}};
    const auto recs = run_end_to_end(all_variants(), *c.store, grid, c.opt);
    write_trials_csv(recs, c.out / "c3_spikes.csv");
    const auto rows = aggregate(recs);
    Verdict v;
    const double pyr12 = find(rows, "pyr", 0.0, 12).accuracy;
    v.require(pyr12 >= kSpikePyramidFloor, "pyr@12 " + f3(pyr12) + ">=" + f3(kSpikePyramidFloor));
    for (const char *m : {"sph", "pln"}) {
        const double a = find(rows, m, 0.0, 12).accuracy;
        v.require(a < kSpikeTriangleCeiling, std::string(m) + "@12 " + f3(a) + "<" + f3(kSpikeTriangleCeiling));
    }
    for (int w : {0, 6, 12}) {
        const double p = find(rows, "pyr", 0.0, w).accuracy;
        std::string best = "pyr";
        double top = p;
        for (const auto &var : all_variants()) {
            const double a = find(rows, var.tag(), 0.0, w).accuracy;
            if (a > top) top = a, best = var.tag();
        }
        v.require(best == "pyr", "max@" + std::to_string(w) + " " + best + " " + f3(top));
    }
    return v;
}

Verdict criterion4(const Context &c) {
    const auto recs = run_verification_ablation(*c.store, {0.0, 1e-3}, c.reference_opt);
    write_trials_csv(recs, c.out / "c4_verify.csv");
    const auto rows = aggregate(recs);
    Verdict v;
    const double pyr = find(rows, "pyr", 0.0, 0).accuracy, pyr_n = find(rows, "pyr-n", 0.0, 0).accuracy;
    v.require(pyr - pyr_n >= kVerifyPyramidGain,
              "rho=0 pyr-pyr_n " + f3(pyr) + "-" + f3(pyr_n) + ">=" + f3(kVerifyPyramidGain));
    const double com = find(rows, "com", 1e-3, 0).accuracy, com_n = find(rows, "com-n", 1e-3, 0).accuracy;
    v.require(com_n - com >= kVerifyCompositeLoss,
              "rho=1e-3 com_n-com " + f3(com_n) + "-" + f3(com) + ">=" + f3(kVerifyCompositeLoss));
    return v;
}

Verdict criterion5(const Context &c) {
    std::vector<NoiseSpec> grid{{0.0, 0}};
    for (int e = -6; e <= 0; ++e) grid.push_back({std::pow(10.0, e), 0});
    const auto recs = run_end_to_end(all_variants(), *c.store, grid, c.reference_opt);
    write_trials_csv(recs, c.out / "c5_gauss.csv");
    const auto rows = aggregate(recs);
    Verdict v;
    std::string smallest;
    double best = std::numeric_limits<double>::infinity();
    std::ostringstream fits;
    for (const auto &var : all_variants()) {
        std::vector<double> x, y;
        for (const auto &n : grid) {
            x.push_back(n.rho);
            y.push_back(find(rows, var.tag(), n.rho, 0).accuracy);
        }
        const TrendFit f = fit_trend(x, y, TrendModel::Log);
        fits << (fits.tellp() > 0 ? " " : "") << var.tag() << "=" << (f.fitted ? g(f.c) : "none");
        if (f.fitted && std::abs(f.c) < best) best = std::abs(f.c), smallest = var.tag();
    }
    v.require(smallest == "sph", "smallest |c| " + smallest + " (" + fits.str() + ")");
    return v;
}

Verdict criterion6(const Context &c) {
    const auto recs = run_pivot_experiment(*c.store, 1e-4, c.reference_opt);
    write_pivot_csv(recs, c.out / "c6_pivot.csv");
    std::map<std::string, double> mean;
    for (const auto &s : summarize_pivots(recs)) mean[s.method] = s.mean_accesses;
    Verdict v;
    const double com = mean["com"], pln = mean["pln"], sph = mean["sph"];
    v.require(com < pln && pln < sph, "com " + f3(com) + " < pln " + f3(pln) + " < sph " + f3(sph));
    const double gap1 = (pln - com) / pln, gap2 = (sph - pln) / sph;
    v.require(std::abs(gap1 - kPivotReferenceGapPlnCom) <= kPivotGapBand,
              "(pln-com)/pln " + f3(gap1) + " vs " + f3(kPivotReferenceGapPlnCom));
    v.require(std::abs(gap2 - kPivotReferenceGapSphPln) <= kPivotGapBand,
              "(sph-pln)/sph " + f3(gap2) + " vs " + f3(kPivotReferenceGapSphPln));
    return v;
}

std::string strip_timing(const std::filesystem::path &p) {
    std::ifstream in(p);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

template <class Table>
bool index_matches_scan(const Table &table, std::mt19937_64 &rng, int probes) {
    using Row = std::remove_cvref_t<decltype(table.rows()[0])>;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AccessCounter counter;
    for (int t = 0; t < probes; ++t) {
        const Row &center = table.rows()[static_cast<std::size_t>(u(rng) * static_cast<double>(table.size()))];
        std::array<Interval, Row::kFeatures> pred;
        for (std::size_t k = 0; k < Row::kFeatures; ++k)
            pred[k] = Interval::around(center.f[k], u(rng) * std::abs(center.f[k]) * 1e-2);
        auto a = table.query_range(pred, counter), b = table.linear_scan(pred);
        auto key = [](const Row &r) { return std::make_pair(r.ids, r.f); };
        std::set<decltype(key(a.front()))> sa, sb;
        for (const auto &r : a) sa.insert(key(r));
        for (const auto &r : b) sb.insert(key(r));
        if (sa != sb || sa.empty()) return false;
    }
    return true;
}

Verdict criterion7(const Context &c) {
    Verdict v;
    std::mt19937_64 rng(7);

    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const RotationMatrix a = random_attitude(rng);
        Vec3 r1 = random_direction(rng), r2 = random_direction(rng);
        while (r1.cross(r2).norm() < 1e-3) r2 = random_direction(rng);
        worst = std::max(worst, triad(a * r1, a * r2, r1, r2).max_abs_diff(a));
    }
    v.require(worst < kTriadTolerance, "triad max-norm " + g(worst));

    std::vector<CatalogStar> subset;
    for (const auto &s : c.store->stars.stars())
        if (s.magnitude < 4.5) subset.push_back(s);
    const PairTable pairs = build_pair_catalog(subset, 20.0);
    const TrioTable trios = build_trio_catalog(subset, 20.0, TriangleKind::Spherical);
    const TrioPermTable perms = build_trio_permutation_catalog(subset, 20.0);
    const bool big = pairs.size() >= 10000 && trios.size() >= 10000 && perms.size() >= 10000;
    const bool same =
        index_matches_scan(pairs, rng, 100) && index_matches_scan(trios, rng, 100) && index_matches_scan(perms, rng, 100);
    v.require(big && same, "index==scan on " + std::to_string(pairs.size()) + "/" + std::to_string(trios.size()) +
                               "/" + std::to_string(perms.size()) + " rows");

    const std::vector<std::vector<StarId>> tij{{1123, 9001}, {8234, 33}}, tjk{{612, 1123}, {33, 345}};
    v.require(flatten_common(tij, tjk) == std::vector<StarId>{33, 1123}, "FC example");

    const auto five = pyramid_trios(5);
    const std::vector<std::array<std::size_t, 3>> prefix{{0, 1, 2}, {1, 2, 3}, {2, 3, 4}, {0, 1, 3}};
    v.require(five.size() == 10 && std::equal(prefix.begin(), prefix.end(), five.begin()), "pyramid n=5 prefix");

    const SyntheticImage img = sample_image(*c.store, 20.0, 4, 5);
    const SyntheticImage same_img = apply_gaussian_noise(img, 0.0, 99);
    bool identity = same_img.stars.size() == img.stars.size();
    for (std::size_t i = 0; identity && i < img.stars.size(); ++i)
        identity = same_img.stars[i].v.x == img.stars[i].v.x && same_img.stars[i].v.y == img.stars[i].v.y &&
                   same_img.stars[i].v.z == img.stars[i].v.z && same_img.stars[i].label == img.stars[i].label;
    v.require(identity, "slerp rho=0 identity");

    const double octant = spherical_features({1, 0, 0}, {0, 1, 0}, {0, 0, 1}).area;
    v.require(std::abs(octant - std::numbers::pi / 2) < kOctantTolerance, "octant area " + g(octant));

    BenchOptions opt = c.opt;
    opt.trials = 20;
    opt.jobs = 1;
    const std::vector<NoiseSpec> grid{{0.0, 0}, {1e-4, 0}, {0.0, 6}};
    write_trials_csv(run_end_to_end(all_variants(), *c.store, grid, opt), c.out / "c7_seed_a.csv");
    opt.jobs = 2;
    write_trials_csv(run_end_to_end(all_variants(), *c.store, grid, opt), c.out / "c7_seed_b.csv");
    v.require(strip_timing(c.out / "c7_seed_a.csv") == strip_timing(c.out / "c7_seed_b.csv"), "seed determinism");
    return v;
}

bool within(std::uint64_t got, std::uint64_t want, double band) {
    return std::abs(static_cast<double>(got) - static_cast<double>(want)) <= band * static_cast<double>(want);
}

Verdict criterion8(const Context &c) {
    Verdict v;
    const std::uint64_t source = c.source_stats.kept, bright = c.store->stars.size();
    v.require(source == kSourceStars, "source stars " + std::to_string(source) + "==" + std::to_string(kSourceStars));
    v.require(bright == kBrightStars, "m<6 stars " + std::to_string(bright) + "==" + std::to_string(kBrightStars));
    const std::uint64_t p = c.store->pairs.size(), t = c.store->trios_spherical.size(),
                        q = c.store->trio_perms.size();
    v.require(within(p, kPairs, kTableSizeBand), "pairs " + std::to_string(p));
    v.require(within(t, kTrios, kTableSizeBand) && c.store->trios_planar.size() == t, "trios " + std::to_string(t));
    v.require(within(q, kTrioPerms, kTableSizeBand), "trio perms " + std::to_string(q));
    return v;
}

/// Load the cached catalog if it was built from the same source, else build and cache it.
CatalogStore prepare_catalog(const std::filesystem::path &source, const std::filesystem::path &dir, unsigned jobs) {
    const std::string checksum = file_checksum(source);
    if (std::filesystem::exists(dir / "manifest.txt")) {
        const Manifest m = Manifest::load(dir / "manifest.txt");
        if (m.get("source_checksum") == checksum && m.get_double("mag_cutoff", 0) == kCatalogMagnitude &&
            m.get("format") == "1") {
            return CatalogStore::load(dir);
        }
    }
    std::cout << "building catalog in " << dir.string() << " (one time)" << std::endl;
    BuildOptions opt;
    opt.magnitude_cutoff = kCatalogMagnitude;
    opt.jobs = jobs;
    const CatalogStore built = CatalogStore::build_from_source(source, opt);
    built.save(dir);
    return CatalogStore::load(dir);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"acceptance criteria"};
    std::string source = std::string(STARID_DATA_DIR) + "/hip2_main.csv";
    std::string catalog = "acceptance_catalog", out = "acceptance_results";
    std::vector<int> only;
    bool report_only = false;
    Context ctx;
    ctx.opt.trials = 200;
    ctx.opt.seed = 20240601;
    ctx.opt.jobs = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--source", source)->capture_default_str();
    app.add_option("--catalog", catalog, "cache directory for the built catalog")->capture_default_str();
    app.add_option("--out", out, "directory for per-criterion CSVs")->capture_default_str();
    app.add_option("--trials", ctx.opt.trials)->capture_default_str();
    std::size_t reference_trials = 2000;
    app.add_option("--reference-trials", reference_trials, "trials for criteria 4-6")->capture_default_str();
    app.add_option("--seed", ctx.opt.seed)->capture_default_str();
    app.add_option("--jobs", ctx.opt.jobs)->capture_default_str();
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_flag("--report-only", report_only, "exit 0 whenever every criterion was evaluated");
    CLI11_PARSE(app, argc, argv);

    try {
        ctx.reference_opt = ctx.opt;
        ctx.reference_opt.trials = reference_trials;
        ctx.source = source;
        ctx.out = out;
        std::filesystem::create_directories(ctx.out);
        const CatalogStore store = prepare_catalog(source, catalog, ctx.opt.jobs);
        ctx.store = &store;
        parse_source(source, std::numeric_limits<double>::infinity(), {}, &ctx.source_stats);

        const std::pair<const char *, Verdict (*)(const Context &)> criteria[] = {
            {"zero-noise accuracy", criterion1}, {"query-step frequencies", criterion2},
            {"spike robustness", criterion3},    {"verification ablation", criterion4},
            {"gaussian sensitivity", criterion5}, {"pivot cost ordering", criterion6},
            {"property suites", criterion7},     {"catalog build counts", criterion8}};
        int failed = 0;
        for (int i = 0; i < 8; ++i) {
            if (!only.empty() && std::find(only.begin(), only.end(), i + 1) == only.end()) continue;
            const auto start = std::chrono::steady_clock::now();
            const Verdict v = criteria[i].second(ctx);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            failed += !v.pass;
            std::printf("%s  %d %-24s %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                        v.detail.str().c_str(), secs);
            std::fflush(stdout);
        }
        std::printf("%d criteria failed\n", failed);
        return failed == 0 || report_only ? 0 : 1;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
        return 2;
    }
}
