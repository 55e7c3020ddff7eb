#include "starid/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "starid/benchmark.hpp"
#include "starid/catalog.hpp"
#include "starid/identification.hpp"
#include "starid/image.hpp"

namespace starid::cli {
namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool has_flag(const std::vector<std::string> &args, const std::string &flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string &a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

/// Splice key=value lines from --config into args, skipping keys already on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file");
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw CatalogError("cannot read config file " + path);
    std::vector<std::string> extra;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.rfind("--", 0) != 0) key = "--" + key;
        if (has_flag(args, key)) continue;
        if (value == "true") {
            extra.push_back(key);
        } else if (value != "false") {
            extra.push_back(key);
            extra.push_back(value);
        }
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

std::filesystem::path resolve_catalog(const std::string &flag) {
    if (!flag.empty()) return flag;
    if (const char *env = std::getenv(kCatalogEnv); env && *env) return env;
    throw CatalogError(std::string("no catalog directory; pass --catalog or set ") + kCatalogEnv);
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

std::vector<MethodVariant> parse_variants(const std::vector<std::string> &tags) {
    std::vector<MethodVariant> out;
    for (const auto &t : tags) {
        if (t == "all") {
            for (const auto &v : all_variants()) out.push_back(v);
            continue;
        }
        const auto v = parse_variant(t);
        if (!v) throw UsageError("unknown method " + t);
        out.push_back(*v);
    }
    return out;
}

std::vector<Method> parse_methods(const std::vector<std::string> &tags) {
    std::vector<Method> out;
    for (const auto &v : parse_variants(tags)) out.push_back(v.method);
    return out;
}

struct SigmaFlags {
    std::optional<double> theta, phi, a, tau, o;
    std::optional<std::uint64_t> access_limit;
    bool no_verify = false;
    bool pivot_on_empty = false;
    std::string composite_features = "planar";
    std::string beta_rule = "after-trio";

    void add(CLI::App *app) {
        app->add_option("--sigma-theta", theta, "interstar angle deviation (deg)");
        app->add_option("--sigma-phi", phi, "interior angle deviation (deg)");
        app->add_option("--sigma-a", a, "area deviation");
        app->add_option("--sigma-tau", tau, "moment deviation");
        app->add_option("--sigma-o", o, "overlay deviation (deg)");
        app->add_option("--access-limit", access_limit, "catalog accesses before giving up");
        app->add_flag("--no-verify", no_verify, "skip the PYR/COM verification star");
        app->add_flag("--pivot-on-empty", pivot_on_empty, "SPH/PLN also pivot when the first query is empty");
        app->add_option("--composite-features", composite_features, "planar or spherical")
            ->check(CLI::IsMember({"planar", "spherical"}));
        app->add_option("--beta-rule", beta_rule, "verification star: after-trio or first-unused")
            ->check(CLI::IsMember({"after-trio", "first-unused"}));
    }

    void apply(MethodConfig &c) const {
        if (theta) c.sigma_theta = *theta;
        if (phi) c.sigma_phi = *phi;
        if (a) c.sigma_a = *a;
        if (tau) c.sigma_tau = *tau;
        if (o) c.sigma_o = *o;
        if (access_limit) c.access_limit = *access_limit;
        if (no_verify) c.verify = false;
        if (pivot_on_empty) c.pivot_on_empty = true;
        c.composite_features = composite_features == "spherical" ? TriangleKind::Spherical : TriangleKind::Planar;
        c.beta_rule = beta_rule == "first-unused" ? BetaRule::FirstUnused : BetaRule::AfterTrio;
    }

    bool any() const {
        return theta || phi || a || tau || o || access_limit || pivot_on_empty || composite_features != "planar" ||
               beta_rule != "after-trio";
    }
};

// ---------------------------------------------------------------------------

struct BuildArgs {
    std::string source = std::string(STARID_DATA_DIR) + "/hip2_main.csv";
    double mag = 6.0;
    double fov = 20.0;
    std::string out;
    unsigned jobs = 1;
    int depth = kDefaultMomentDepth;
    bool count_only = false;
};

int run_build(const BuildArgs &a, std::ostream &out) {
    ParseStats stats;
    if (a.count_only) {
        const auto stars = parse_source(a.source, a.mag, {}, &stats);
        ParseStats all;
        parse_source(a.source, std::numeric_limits<double>::infinity(), {}, &all);
        const CatalogCounts c = count_catalog_rows(stars, a.fov);
        out << "source rows      " << all.kept << "\n"
            << "bright stars     " << stars.size() << "\n"
            << "pairs            " << c.pairs << "\n"
            << "trios            " << c.trios << "\n"
            << "trio perms       " << c.trio_perms << "\n";
        return kExitOk;
    }
    if (a.out.empty()) throw UsageError("--out is required unless --count-only");
    BuildOptions opt;
    opt.magnitude_cutoff = a.mag;
    opt.psi_max = a.fov;
    opt.moment_depth = a.depth;
    opt.jobs = std::max(1u, a.jobs);
    const CatalogStore store = CatalogStore::build_from_source(a.source, opt, &stats);
    store.save(a.out);
    out << "rows " << stats.rows << ", kept " << stats.kept << ", missing position " << stats.missing_position
        << ", malformed " << stats.malformed << "\n";
    out << "stars " << store.stars.size() << ", pairs " << store.pairs.size() << ", trios "
        << store.trios_spherical.size() << ", perms " << store.trio_perms.size() << "\n";
    out << "wrote " << a.out << "\n";
    return kExitOk;
}

struct ImagesArgs {
    std::string catalog, out;
    std::size_t count = 10;
    std::uint64_t seed = 1;
    double rho = 0.0;
    int omega = 0;
    double fov = 20.0;
    std::size_t min_stars = 4;
};

int run_gen_images(const ImagesArgs &a, std::ostream &out) {
    if (a.out.empty()) throw UsageError("--out is required");
    const CatalogStore store = CatalogStore::load(resolve_catalog(a.catalog));
    BenchOptions opt;
    opt.psi = a.fov;
    opt.min_stars = a.min_stars;
    std::filesystem::create_directories(a.out);
    for (std::size_t i = 0; i < a.count; ++i) {
        const auto img = sample_trial_image(store, opt, {a.rho, a.omega}, trial_seed(a.seed, i));
        char name[32];
        std::snprintf(name, sizeof name, "image_%04zu.txt", i);
        save_image(img, std::filesystem::path(a.out) / name);
    }
    out << "wrote " << a.count << " images to " << a.out << "\n";
    return kExitOk;
}

struct IdentifyArgs {
    std::string catalog, image, method = "pyr";
    SigmaFlags sigma;
};

int run_identify(const IdentifyArgs &a, std::ostream &out) {
    const auto variant = parse_variant(a.method);
    if (!variant) throw UsageError("unknown method " + a.method);
    const CatalogStore store = CatalogStore::load(resolve_catalog(a.catalog));
    const SyntheticImage img = load_image(a.image);
    MethodConfig cfg = variant->config();
    cfg.psi = img.psi;
    a.sigma.apply(cfg);
    const IdentificationResult r = identify(variant->method, img.vectors(), store, cfg);
    out << "method   " << variant->tag() << "\n"
        << "stars    " << img.stars.size() << "\n"
        << "outcome  " << outcome_tag(r.outcome) << "\n"
        << "accesses " << r.accesses_total << " (selected at " << r.accesses_query << ")\n";
    bool labelled = false;
    for (const auto &s : img.stars) labelled = labelled || s.label != kSpikeLabel;
    std::size_t right = 0;
    for (const auto &m : r.h) {
        out << "  " << m.image_index << " -> HIP " << m.id;
        if (labelled) {
            const StarId truth = img.stars[m.image_index].label;
            const bool ok = truth == m.id;
            right += ok;
            out << (ok ? "  ok" : truth == kSpikeLabel ? "  wrong (spike)" : "  wrong (HIP " + std::to_string(truth) + ")");
        }
        out << "\n";
    }
    if (labelled && !r.h.empty()) out << "correct  " << right << "/" << r.h.size() << "\n";
    return kExitOk;
}

struct TuneArgs {
    std::string catalog, out;
    std::vector<std::string> methods{"all"};
    std::size_t images = 30;
    std::uint64_t seed = 1;
    double fov = 20.0;
};

std::vector<SigmaChoice> tune_all(const CatalogStore &store, const std::vector<Method> &methods, std::size_t count,
                                  std::uint64_t seed, double fov) {
    std::vector<SyntheticImage> images;
    for (std::size_t i = 0; i < count; ++i) images.push_back(sample_image(store, fov, 4, trial_seed(seed, i)));
    std::vector<SigmaChoice> out;
    for (Method m : methods) out.push_back(tune_sigma(m, store, images));
    return out;
}

void print_sigma(std::ostream &out, const std::vector<SigmaChoice> &choices, std::size_t images) {
    out << "method  sigma1    sigma2    |R|=1   sets\n";
    for (const auto &c : choices) {
        const bool two = c.method != Method::Angle && c.method != Method::Pyramid;
        out << std::left << std::setw(8) << method_tag(c.method) << std::setw(10) << fmt(c.sigma1) << std::setw(10)
            << (two ? fmt(c.sigma2) : "-") << std::setw(8) << (std::to_string(c.singletons) + "/" + std::to_string(images))
            << c.sets_evaluated << "\n"
            << std::right;
    }
}

void write_sigma_csv(const std::vector<SigmaChoice> &choices, const std::filesystem::path &path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << "method,sigma1,sigma2,singletons,sets\n";
    for (const auto &c : choices)
        f << method_tag(c.method) << ',' << c.sigma1 << ',' << c.sigma2 << ',' << c.singletons << ','
          << c.sets_evaluated << '\n';
}

int run_tune(const TuneArgs &a, std::ostream &out) {
    const auto methods = parse_methods(a.methods);
    const CatalogStore store = CatalogStore::load(resolve_catalog(a.catalog));
    const auto choices = tune_all(store, methods, a.images, a.seed, a.fov);
    print_sigma(out, choices, a.images);
    if (!a.out.empty()) write_sigma_csv(choices, std::filesystem::path(a.out) / "tune.csv");
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::string experiment, catalog, out = "results";
    std::vector<std::string> methods{"all"};
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    double fov = 20.0;
    std::size_t min_stars = 4;
    std::size_t images = 30;
    std::vector<double> rhos;
    std::vector<int> omegas;
    SigmaFlags sigma;
};

void print_aggregates(std::ostream &out, const std::vector<Aggregate> &rows) {
    out << "method  rho        omega  n     accuracy  r_acc   acc_query  acc_total\n";
    for (const auto &a : rows)
        out << std::left << std::setw(8) << a.method << std::setw(11) << fmt(a.rho) << std::setw(7) << a.omega
            << std::setw(6) << a.n << std::setw(10) << fmt(a.accuracy, 4) << std::setw(8) << fmt(a.r_accuracy, 4)
            << std::setw(11) << fmt(a.mean_acc_query, 5) << fmt(a.mean_acc_total, 5) << "\n"
            << std::right;
}

void print_query_stats(std::ostream &out, const std::vector<QueryStats> &stats) {
    out << "method  n     f       S     mean_ms\n";
    for (const auto &s : stats)
        out << std::left << std::setw(8) << s.method << std::setw(6) << s.n << std::setw(8) << fmt(s.f, 4)
            << std::setw(6) << s.s << fmt(s.mean_ms, 4) << "\n"
            << std::right;
}

void print_pivot_stats(std::ostream &out, const std::vector<PivotStats> &stats) {
    out << "method  trials  first_failed  counted  mean_accesses  var\n";
    for (const auto &s : stats)
        out << std::left << std::setw(8) << s.method << std::setw(8) << s.trials << std::setw(14) << s.first_b_failed
            << std::setw(9) << s.counted << std::setw(15) << fmt(s.mean_accesses, 5) << fmt(s.var_accesses, 5)
            << "\n"
            << std::right;
}

int run_bench(const BenchArgs &a, std::ostream &out) {
    const CatalogStore store = CatalogStore::load(resolve_catalog(a.catalog));
    BenchOptions opt;
    opt.trials = a.trials;
    opt.seed = a.seed;
    opt.jobs = std::max(1u, a.jobs);
    opt.psi = a.fov;
    opt.min_stars = a.min_stars;
    if (a.sigma.any()) {
        const SigmaFlags s = a.sigma;
        opt.tweak = [s](MethodConfig &c) {
            const bool verify = c.verify;
            s.apply(c);
            c.verify = verify && !s.no_verify;
        };
    }
    const std::filesystem::path dir = a.out;
    std::filesystem::create_directories(dir);
    const std::string &x = a.experiment;

    if (x == "query") {
        const auto recs = run_query_experiment(parse_methods(a.methods), store, opt);
        write_query_csv(recs, dir / "query.csv");
        print_query_stats(out, summarize_queries(recs));
    } else if (x == "pivot") {
        const double rho = a.rhos.empty() ? 1e-4 : a.rhos.front();
        const auto recs = run_pivot_experiment(store, rho, opt);
        write_pivot_csv(recs, dir / "pivot.csv");
        print_pivot_stats(out, summarize_pivots(recs));
    } else if (x == "verify") {
        const auto rhos = a.rhos.empty() ? std::vector<double>{0.0, 1e-6, 1e-3} : a.rhos;
        const auto recs = run_verification_ablation(store, rhos, opt);
        write_trials_csv(recs, dir / "verify.csv");
        print_aggregates(out, aggregate(recs));
    } else if (x == "e2e-gauss") {
        std::vector<NoiseSpec> grid;
        if (a.rhos.empty()) {
            grid.push_back({0.0, 0});
            for (int e = -6; e <= -1; ++e) grid.push_back({std::pow(10.0, e), 0});
            grid.push_back({1.0, 0});
        }
        for (double r : a.rhos) grid.push_back({r, 0});
        const auto recs = run_end_to_end(parse_variants(a.methods), store, grid, opt);
        write_trials_csv(recs, dir / "e2e_gauss.csv");
        print_aggregates(out, aggregate(recs));
    } else if (x == "e2e-spike") {
        std::vector<NoiseSpec> grid;
        for (int w : a.omegas.empty() ? std::vector<int>{0, 3, 6, 9, 12} : a.omegas) grid.push_back({0.0, w});
        const auto recs = run_end_to_end(parse_variants(a.methods), store, grid, opt);
        write_trials_csv(recs, dir / "e2e_spike.csv");
        print_aggregates(out, aggregate(recs));
    } else if (x == "tune") {
        const auto choices = tune_all(store, parse_methods(a.methods), a.images, a.seed, a.fov);
        write_sigma_csv(choices, dir / "tune.csv");
        print_sigma(out, choices, a.images);
    } else {
        throw UsageError("unknown experiment " + x);
    }
    out << "results in " << dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

std::string rho_label(double rho) { return rho == 0.0 ? "0" : fmt(rho, 3); }

template <class Key>
std::vector<Key> unique_in_order(const std::vector<Key> &keys) {
    std::vector<Key> out;
    for (const auto &k : keys)
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    return out;
}

const Aggregate *find_agg(const std::vector<Aggregate> &rows, const std::string &m, double rho, int omega) {
    for (const auto &a : rows)
        if (a.method == m && a.rho == rho && a.omega == omega) return &a;
    return nullptr;
}

void report_verify(const std::filesystem::path &in, bool plots, std::ostream &out) {
    const auto rows = aggregate(read_trials_csv(in / "verify.csv"));
    out << "\n== verification ablation\n";
    print_aggregates(out, rows);
    write_aggregate_csv(rows, in / "verify_summary.csv");
    std::vector<double> rhos;
    std::vector<std::string> methods;
    for (const auto &r : rows) rhos.push_back(r.rho), methods.push_back(r.method);
    rhos = unique_in_order(rhos);
    methods = unique_in_order(methods);
    for (const auto &[with, without] : {std::pair{"pyr", "pyr-n"}, std::pair{"com", "com-n"}}) {
        for (double rho : rhos) {
            const Aggregate *a = find_agg(rows, with, rho, 0), *b = find_agg(rows, without, rho, 0);
            if (!a || !b) continue;
            const ZTest z = z_test(b->accuracy, b->n, a->accuracy, a->n, 2);
            out << with << " vs " << without << " at rho " << rho_label(rho) << ": " << fmt(a->accuracy, 4) << " vs "
                << fmt(b->accuracy, 4) << ", z = " << fmt(z.z, 3) << ", p = " << fmt(z.p, 3) << "\n";
        }
    }
    if (!plots) return;
    std::vector<std::string> cats;
    for (double r : rhos) cats.push_back(rho_label(r));
    std::vector<BarSeries> series;
    for (const auto &m : methods) {
        BarSeries s{m, {}};
        for (double r : rhos) s.values.push_back(find_agg(rows, m, r, 0) ? find_agg(rows, m, r, 0)->accuracy : 0.0);
        series.push_back(s);
    }
    write_bar_svg(in / "verify.svg", "Accuracy with and without verification", "a(h,b,r)", cats, series, false);
}

void report_gauss(const std::filesystem::path &in, bool plots, std::ostream &out) {
    const auto rows = aggregate(read_trials_csv(in / "e2e_gauss.csv"));
    out << "\n== Gaussian noise sweep\n";
    print_aggregates(out, rows);
    write_aggregate_csv(rows, in / "e2e_gauss_summary.csv");
    std::vector<double> rhos;
    std::vector<std::string> methods;
    for (const auto &r : rows) rhos.push_back(r.rho), methods.push_back(r.method);
    rhos = unique_in_order(rhos);
    std::sort(rhos.begin(), rhos.end());
    methods = unique_in_order(methods);

    out << "log fits a = c ln(rho) + d\n";
    std::vector<LineSeries> acc_lines, cost_lines;
    for (const auto &m : methods) {
        LineSeries acc, cost;
        acc.label = cost.label = m;
        std::vector<double> xs, ys;
        for (std::size_t k = 0; k < rhos.size(); ++k) {
            const Aggregate *a = find_agg(rows, m, rhos[k], 0);
            if (!a) continue;
            acc.x.push_back(static_cast<double>(k));
            acc.y.push_back(a->accuracy);
            cost.x.push_back(static_cast<double>(k));
            cost.y.push_back(a->mean_acc_query);
            xs.push_back(rhos[k]);
            ys.push_back(a->accuracy);
        }
        const TrendFit f = fit_trend(xs, ys, TrendModel::Log);
        if (!f.fitted) {
            out << "  " << std::left << std::setw(6) << m << std::right << "no decay\n";
        } else {
            out << "  " << std::left << std::setw(6) << m << std::right << "c = " << fmt(f.c, 4) << ", d = "
                << fmt(f.d, 4) << ", rho* = " << rho_label(f.rho_star) << ", points " << f.points << "\n";
            // sample the fitted curve between adjacent positive grid points
            for (std::size_t k = 0; k + 1 < rhos.size(); ++k) {
                if (rhos[k] <= 0.0 || rhos[k] < f.rho_star / 10.0) continue;
                for (int s = 0; s <= 10; ++s) {
                    const double t = s / 10.0;
                    const double lr = std::log(rhos[k]) * (1 - t) + std::log(rhos[k + 1]) * t;
                    acc.curve_x.push_back(static_cast<double>(k) + t);
                    acc.curve_y.push_back(std::clamp(f.c * lr + f.d, 0.0, 1.0));
                }
            }
        }
        acc_lines.push_back(acc);
        cost_lines.push_back(cost);
    }
    if (!plots) return;
    std::vector<std::string> labels;
    for (double r : rhos) labels.push_back(rho_label(r));
    write_line_svg(in / "e2e_gauss_accuracy.svg", "Accuracy under Gaussian noise", "rho (deg)", "a(h,b,r)", labels,
                   acc_lines);
    write_line_svg(in / "e2e_gauss_accesses.svg", "Catalog accesses under Gaussian noise", "rho (deg)",
                   "accesses", labels, cost_lines);
}

void report_spike(const std::filesystem::path &in, bool plots, std::ostream &out) {
    const auto recs = read_trials_csv(in / "e2e_spike.csv");
    const auto rows = aggregate(recs);
    out << "\n== spike sweep\n";
    print_aggregates(out, rows);
    write_aggregate_csv(rows, in / "e2e_spike_summary.csv");
    std::vector<int> omegas;
    std::vector<std::string> methods;
    for (const auto &r : rows) omegas.push_back(r.omega), methods.push_back(r.method);
    omegas = unique_in_order(omegas);
    std::sort(omegas.begin(), omegas.end());
    methods = unique_in_order(methods);

    out << "linear fits t = c omega + d (t in catalog accesses)\n";
    std::vector<LineSeries> acc_lines, cost_lines;
    for (const auto &m : methods) {
        LineSeries acc, cost;
        acc.label = cost.label = m;
        std::vector<double> xs, ts;
        for (std::size_t k = 0; k < omegas.size(); ++k) {
            const Aggregate *a = find_agg(rows, m, 0.0, omegas[k]);
            if (!a) continue;
            acc.x.push_back(static_cast<double>(k));
            acc.y.push_back(a->accuracy);
            cost.x.push_back(static_cast<double>(k));
            cost.y.push_back(a->mean_acc_query);
            xs.push_back(omegas[k]);
            ts.push_back(a->mean_acc_query);
        }
        const TrendFit f = fit_trend(xs, ts, TrendModel::Linear);
        if (f.fitted) {
            out << "  " << std::left << std::setw(6) << m << std::right << "c = " << fmt(f.c, 4) << ", d = "
                << fmt(f.d, 4) << "\n";
            for (std::size_t k = 0; k < omegas.size(); ++k) {
                cost.curve_x.push_back(static_cast<double>(k));
                cost.curve_y.push_back(f.c * omegas[k] + f.d);
            }
        }
        acc_lines.push_back(acc);
        cost_lines.push_back(cost);
    }
    if (!omegas.empty()) {
        const int top = omegas.back();
        if (const Aggregate *p = find_agg(rows, "pyr", 0.0, top)) {
            for (const auto &m : methods) {
                const Aggregate *o = find_agg(rows, m, 0.0, top);
                if (!o || m == "pyr") continue;
                const ZTest z = z_test(o->accuracy, o->n, p->accuracy, p->n, 2);
                out << "pyr vs " << m << " at omega " << top << ": z = " << fmt(z.z, 3) << ", p = " << fmt(z.p, 3)
                    << "\n";
            }
        }
    }
    if (!plots) return;
    std::vector<std::string> labels;
    for (int w : omegas) labels.push_back(std::to_string(w));
    write_line_svg(in / "e2e_spike_accuracy.svg", "Accuracy under spikes", "omega", "a(h,b,r)", labels, acc_lines);
    write_line_svg(in / "e2e_spike_accesses.svg", "Catalog accesses under spikes", "omega", "accesses", labels,
                   cost_lines);
}

void report_query(const std::filesystem::path &in, bool plots, std::ostream &out) {
    const auto stats = summarize_queries(read_query_csv(in / "query.csv"));
    out << "\n== query step\n";
    print_query_stats(out, stats);
    if (!plots) return;
    std::vector<std::string> cats;
    BarSeries f{"f", {}}, s{"S / n", {}};
    for (const auto &q : stats) {
        cats.push_back(q.method);
        f.values.push_back(q.f);
        s.values.push_back(q.n ? static_cast<double>(q.s) / static_cast<double>(q.n) : 0.0);
    }
    write_bar_svg(in / "query.svg", "Query step", "fraction", cats, {f, s}, false);
}

void report_pivot(const std::filesystem::path &in, bool plots, std::ostream &out) {
    const auto stats = summarize_pivots(read_pivot_csv(in / "pivot.csv"));
    out << "\n== accesses to obtain r\n";
    print_pivot_stats(out, stats);
    for (std::size_t i = 0; i + 1 < stats.size(); ++i) {
        const auto &a = stats[i], &b = stats[i + 1];
        const ZTest z = z_test_means(a.mean_accesses, a.var_accesses, a.counted, b.mean_accesses, b.var_accesses,
                                     b.counted, 2);
        out << a.method << " vs " << b.method << ": z = " << fmt(z.z, 3) << ", p = " << fmt(z.p, 3) << "\n";
    }
    if (!plots) return;
    std::vector<std::string> cats;
    BarSeries s{"mean accesses", {}};
    for (const auto &p : stats) {
        cats.push_back(p.method);
        s.values.push_back(p.mean_accesses);
    }
    write_bar_svg(in / "pivot.svg", "Catalog accesses to obtain r", "accesses", cats, {s}, false);
}

int run_report(const std::string &in_dir, bool plots, std::ostream &out) {
    const std::filesystem::path in = in_dir;
    if (!std::filesystem::is_directory(in)) throw CatalogError("no such results directory: " + in_dir);
    bool any = false;
    const std::pair<const char *, void (*)(const std::filesystem::path &, bool, std::ostream &)> parts[] = {
        {"query.csv", report_query},        {"pivot.csv", report_pivot},      {"verify.csv", report_verify},
        {"e2e_gauss.csv", report_gauss}, {"e2e_spike.csv", report_spike}};
    for (const auto &[file, fn] : parts) {
        if (!std::filesystem::exists(in / file)) continue;
        fn(in, plots, out);
        any = true;
    }
    if (std::filesystem::exists(in / "tune.csv")) {
        std::ifstream f(in / "tune.csv");
        out << "\n== sigma tuning\n" << f.rdbuf();
        any = true;
    }
    if (!any) throw CatalogError("no experiment CSVs in " + in_dir);
    return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string> &raw, std::ostream &out, std::ostream &err) {
    CLI::App app{"Lost-in-space star identification: catalog builder, identifier and benchmark harness", "starid"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    BuildArgs build;
    auto *c_build = app.add_subcommand("build-catalog", "parse a star source and build the feature tables");
    c_build->add_option("--source", build.source, "CSV with HIP, RAdeg, DEdeg, Hpmag columns")->capture_default_str();
    c_build->add_option("--mag-cutoff", build.mag, "keep stars brighter than this")->capture_default_str();
    c_build->add_option("--fov", build.fov, "field of view, degrees")->capture_default_str();
    c_build->add_option("--out", build.out, "catalog directory");
    c_build->add_option("--jobs", build.jobs, "worker threads")->capture_default_str();
    c_build->add_option("--depth", build.depth, "moment subdivision depth")->capture_default_str();
    c_build->add_flag("--count-only", build.count_only, "print table sizes without building");

    ImagesArgs images;
    auto *c_images = app.add_subcommand("gen-images", "write synthetic images");
    c_images->add_option("--catalog", images.catalog, "catalog directory");
    c_images->add_option("--out", images.out, "output directory");
    c_images->add_option("--count", images.count)->capture_default_str();
    c_images->add_option("--seed", images.seed)->capture_default_str();
    c_images->add_option("--rho", images.rho, "Gaussian noise, degrees")->capture_default_str();
    c_images->add_option("--omega,--spikes", images.omega, "false stars per image")->capture_default_str();
    c_images->add_option("--fov", images.fov)->capture_default_str();
    c_images->add_option("--min-stars", images.min_stars)->capture_default_str();

    IdentifyArgs ident;
    auto *c_ident = app.add_subcommand("identify", "identify the stars of one image");
    c_ident->add_option("--method", ident.method, "ang, int, sph, pln, pyr, com (suffix -n: no verification)")
        ->capture_default_str();
    c_ident->add_option("--catalog", ident.catalog, "catalog directory");
    c_ident->add_option("--image", ident.image, "image file")->required();
    ident.sigma.add(c_ident);

    TuneArgs tune;
    auto *c_tune = app.add_subcommand("tune-sigma", "grid search over the query deviations");
    c_tune->add_option("--catalog", tune.catalog, "catalog directory");
    c_tune->add_option("--methods", tune.methods)->delimiter(',')->capture_default_str();
    c_tune->add_option("--images", tune.images, "query steps per deviation set")->capture_default_str();
    c_tune->add_option("--seed", tune.seed)->capture_default_str();
    c_tune->add_option("--fov", tune.fov)->capture_default_str();
    c_tune->add_option("--out", tune.out, "directory for tune.csv");

    BenchArgs bench;
    auto *c_bench = app.add_subcommand("bench", "run an experiment and write its CSV");
    c_bench->add_option("--experiment", bench.experiment)
        ->required()
        ->check(CLI::IsMember({"query", "pivot", "verify", "e2e-gauss", "e2e-spike", "tune"}));
    c_bench->add_option("--catalog", bench.catalog, "catalog directory");
    c_bench->add_option("--methods", bench.methods, "comma separated tags or all")
        ->delimiter(',')
        ->capture_default_str();
    c_bench->add_option("--trials", bench.trials)->capture_default_str();
    c_bench->add_option("--seed", bench.seed)->capture_default_str();
    c_bench->add_option("--out", bench.out)->capture_default_str();
    c_bench->add_option("--jobs", bench.jobs)->capture_default_str();
    c_bench->add_option("--fov", bench.fov)->capture_default_str();
    c_bench->add_option("--min-stars", bench.min_stars)->capture_default_str();
    c_bench->add_option("--images", bench.images, "images per deviation set (tune)")->capture_default_str();
    c_bench->add_option("--rhos", bench.rhos, "noise grid, degrees")->delimiter(',');
    c_bench->add_option("--omegas", bench.omegas, "spike grid")->delimiter(',');
    bench.sigma.add(c_bench);

    std::string report_in = "results";
    bool report_plots = false;
    auto *c_report = app.add_subcommand("report", "summarize experiment CSVs");
    c_report->add_option("--in", report_in)->capture_default_str();
    c_report->add_flag("--plots", report_plots, "write SVG charts next to the CSVs");

    try {
        std::vector<std::string> args = expand_config(raw);
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }

    try {
        if (c_build->parsed()) return run_build(build, out);
        if (c_images->parsed()) return run_gen_images(images, out);
        if (c_ident->parsed()) return run_identify(ident, out);
        if (c_tune->parsed()) return run_tune(tune, out);
        if (c_bench->parsed()) return run_bench(bench, out);
        if (c_report->parsed()) return run_report(report_in, report_plots, out);
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

int dispatch(int argc, char **argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace starid::cli
