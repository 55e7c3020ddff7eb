#include "starid/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace starid {

std::string MethodVariant::tag() const {
    std::string t(method_tag(method));
    if (!verify) t += "-n";
    return t;
}

MethodConfig MethodVariant::config() const {
    MethodConfig c = default_config(method);
    c.verify = verify;
    return c;
}

std::optional<MethodVariant> parse_variant(std::string_view tag) {
    bool verify = true;
    if (tag.size() > 2 && (tag.ends_with("-n") || tag.ends_with("-N"))) {
        verify = false;
        tag.remove_suffix(2);
    }
    const auto m = parse_method(tag);
    if (!m) return std::nullopt;
    if (!verify && *m != Method::Pyramid && *m != Method::Composite) return std::nullopt;
    return MethodVariant{*m, verify};
}

std::vector<MethodVariant> all_variants() {
    std::vector<MethodVariant> v;
    for (Method m : kAllMethods) v.push_back({m, true});
    return v;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t index) {
    // splitmix64 finalizer over (base, index)
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SyntheticImage sample_image(const CatalogStore &store, double psi, std::size_t min_stars, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const Vec3 r_f = random_direction(rng);
        const RotationMatrix a = random_attitude(rng);
        const std::uint64_t image_seed = rng();
        if (store.stars.cone(r_f, psi / 2.0).size() < std::max<std::size_t>(min_stars, 1)) continue;
        return generate_image(store.stars, psi, a, r_f, image_seed);
    }
    throw EmptyImageError("no field with enough stars found; catalog too sparse");
}

SyntheticImage sample_trial_image(const CatalogStore &store, const BenchOptions &opt, const NoiseSpec &noise,
                                  std::uint64_t seed) {
    SyntheticImage image = sample_image(store, opt.psi, opt.min_stars, seed);
    image = apply_gaussian_noise(std::move(image), noise.rho, trial_seed(seed, 1));
    return add_spikes(std::move(image), noise.omega, trial_seed(seed, 2));
}

bool bijection_correct(const Bijection &h, const SyntheticImage &image) {
    if (h.empty()) return false;
    for (const auto &m : h)
        if (m.image_index >= image.stars.size() || image.stars[m.image_index].label != m.id) return false;
    return true;
}

bool candidate_correct(Method m, const IdentificationResult &r, const SyntheticImage &image) {
    if (r.r.empty() || r.r.size() != r.b.size()) return false;
    std::vector<StarId> truth;
    for (auto i : r.b) truth.push_back(image.stars[i].label);
    std::vector<StarId> got = r.r;
    if (m != Method::InteriorAngle && m != Method::Pyramid) {
        std::sort(truth.begin(), truth.end());
        std::sort(got.begin(), got.end());
    }
    return got == truth;
}

TrialRecord run_trial(const MethodVariant &v, const CatalogStore &store, const SyntheticImage &image,
                      const NoiseSpec &noise, std::uint64_t seed, const BenchOptions &opt) {
    MethodConfig cfg = v.config();
    cfg.psi = opt.psi;
    if (opt.tweak) opt.tweak(cfg);
    const auto vectors = image.vectors();
    const IdentificationResult r = identify(v.method, vectors, store, cfg);
    TrialRecord t;
    t.method = v.tag();
    t.rho = noise.rho;
    t.omega = noise.omega;
    t.seed = seed;
    t.outcome = r.outcome;
    t.h_correct = r.outcome == Outcome::Identified && bijection_correct(r.h, image);
    t.r_correct = candidate_correct(v.method, r, image);
    t.acc_query = r.accesses_query;
    t.acc_total = r.accesses_total;
    t.ms = r.elapsed_ms;
    t.acc_first_r = r.accesses_first_r;
    t.first_singleton = r.first_query_singleton;
    return t;
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)> &fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned w = 0; w < jobs; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto &t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<TrialRecord> run_end_to_end(const std::vector<MethodVariant> &variants, const CatalogStore &store,
                                        const std::vector<NoiseSpec> &grid, const BenchOptions &opt) {
    const std::size_t per_noise = opt.trials * variants.size();
    std::vector<TrialRecord> out(grid.size() * per_noise);
    parallel_for(grid.size() * opt.trials, opt.jobs, [&](std::size_t item) {
        const std::size_t g = item / opt.trials, i = item % opt.trials;
        const std::uint64_t seed = trial_seed(opt.seed, i);
        const SyntheticImage image = sample_trial_image(store, opt, grid[g], seed);
        for (std::size_t v = 0; v < variants.size(); ++v)
            out[g * per_noise + v * opt.trials + i] = run_trial(variants[v], store, image, grid[g], seed, opt);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Query step

std::vector<QueryRecord> run_query_experiment(const std::vector<Method> &methods, const CatalogStore &store,
                                              const BenchOptions &opt) {
    std::vector<QueryRecord> out(methods.size() * opt.trials);
    BenchOptions o = opt;
    o.min_stars = std::max<std::size_t>(opt.min_stars, 3);
    parallel_for(opt.trials, opt.jobs, [&](std::size_t i) {
        const std::uint64_t seed = trial_seed(opt.seed, i);
        const SyntheticImage image = sample_image(store, o.psi, o.min_stars, seed);
        const auto vectors = image.vectors();
        for (std::size_t k = 0; k < methods.size(); ++k) {
            MethodConfig cfg = default_config(methods[k]);
            cfg.psi = opt.psi;
            if (opt.tweak) opt.tweak(cfg);
            const QueryStep q = first_query_step(methods[k], vectors, store, cfg);
            std::vector<StarId> truth;
            for (auto b : q.b) truth.push_back(image.stars[b].label);
            if (!q.ordered) std::sort(truth.begin(), truth.end());
            bool found = false;
            for (auto c : q.candidates) {
                if (!q.ordered) std::sort(c.begin(), c.end());
                if (c == truth) {
                    found = true;
                    break;
                }
            }
            QueryRecord &r = out[k * opt.trials + i];
            r.method = std::string(method_tag(methods[k]));
            r.seed = seed;
            r.candidates = q.candidates.size();
            r.truth_in_r = found;
            r.ms = q.elapsed_ms;
        }
    });
    return out;
}

std::vector<QueryStats> summarize_queries(const std::vector<QueryRecord> &records) {
    std::vector<QueryStats> out;
    for (const auto &r : records) {
        auto it = std::find_if(out.begin(), out.end(), [&](const QueryStats &s) { return s.method == r.method; });
        if (it == out.end()) {
            out.push_back({r.method});
            it = out.end() - 1;
        }
        ++it->n;
        it->f += r.truth_in_r ? 1.0 : 0.0;
        it->s += r.candidates == 1 ? 1 : 0;
        it->mean_ms += r.ms;
    }
    for (auto &s : out) {
        if (s.n == 0) continue;
        s.f /= static_cast<double>(s.n);
        s.mean_ms /= static_cast<double>(s.n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pivot cost

std::vector<TrialRecord> run_pivot_experiment(const CatalogStore &store, double rho, const BenchOptions &opt) {
    const std::vector<MethodVariant> v{{Method::Spherical, true}, {Method::Planar, true}, {Method::Composite, true}};
    return run_end_to_end(v, store, {NoiseSpec{rho, 0}}, opt);
}

std::vector<PivotStats> summarize_pivots(const std::vector<TrialRecord> &records) {
    std::vector<PivotStats> out;
    std::map<std::string, std::vector<double>> samples;
    for (const auto &r : records) {
        auto it = std::find_if(out.begin(), out.end(), [&](const PivotStats &s) { return s.method == r.method; });
        if (it == out.end()) {
            out.push_back({r.method});
            it = out.end() - 1;
        }
        ++it->trials;
        if (r.first_singleton) continue;
        ++it->first_b_failed;
        if (r.acc_first_r == 0) continue;
        ++it->counted;
        samples[r.method].push_back(static_cast<double>(r.acc_first_r));
    }
    for (auto &s : out) {
        const auto &x = samples[s.method];
        if (x.empty()) continue;
        s.mean_accesses = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
        double ss = 0;
        for (double v : x) ss += (v - s.mean_accesses) * (v - s.mean_accesses);
        s.var_accesses = x.size() > 1 ? ss / static_cast<double>(x.size() - 1) : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Verification ablation, sigma tuning

std::vector<TrialRecord> run_verification_ablation(const CatalogStore &store, const std::vector<double> &rhos,
                                                   const BenchOptions &opt) {
    const std::vector<MethodVariant> v{
        {Method::Pyramid, true}, {Method::Pyramid, false}, {Method::Composite, true}, {Method::Composite, false}};
    std::vector<NoiseSpec> grid;
    for (double r : rhos) grid.push_back({r, 0});
    return run_end_to_end(v, store, grid, opt);
}

std::vector<double> sigma_grid() {
    std::vector<double> g;
    for (int e = -16; e <= 1; ++e) g.push_back(std::pow(10.0, e));
    return g;
}

SigmaChoice tune_sigma(Method m, const CatalogStore &store, const std::vector<SyntheticImage> &images,
                       const std::vector<double> &grid) {
    const bool two = m != Method::Angle && m != Method::Pyramid;
    std::vector<std::vector<Vec3>> vectors;
    for (const auto &img : images) vectors.push_back(img.vectors());

    SigmaChoice best{m};
    bool have = false;
    for (double s1 : grid) {
        for (double s2 : two ? grid : std::vector<double>{0.0}) {
            MethodConfig cfg = default_config(m);
            if (m == Method::Angle || m == Method::Pyramid) {
                cfg.sigma_theta = s1;
            } else if (m == Method::InteriorAngle) {
                cfg.sigma_theta = s1;
                cfg.sigma_phi = s2;
            } else {
                cfg.sigma_a = s1;
                cfg.sigma_tau = s2;
            }
            std::size_t singles = 0;
            for (const auto &v : vectors) singles += first_query_step(m, v, store, cfg, 2).candidates.size() == 1;
            ++best.sets_evaluated;
            const bool better = !have || singles > best.singletons ||
                                (singles == best.singletons &&
                                 (s1 > best.sigma1 || (s1 == best.sigma1 && s2 > best.sigma2)));
            if (better) {
                best.sigma1 = s1;
                best.sigma2 = s2;
                best.singletons = singles;
                have = true;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Statistics

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {
ZTest finish_z(double z, int tails) {
    const double tail = 0.5 * std::erfc(std::abs(z) / std::sqrt(2.0));
    return {z, std::min(1.0, tails == 1 ? tail : 2.0 * tail)};
}
}  // namespace

ZTest z_test(double p1, std::size_t n1, double p2, std::size_t n2, int tails) {
    if (n1 == 0 || n2 == 0) return {};
    const double a = static_cast<double>(n1), b = static_cast<double>(n2);
    const double pooled = (p1 * a + p2 * b) / (a + b);
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / a + 1.0 / b));
    if (!(se > 0.0)) return {};
    return finish_z((p2 - p1) / se, tails);
}

ZTest z_test_means(double m1, double var1, std::size_t n1, double m2, double var2, std::size_t n2, int tails) {
    if (n1 + n2 < 3 || n1 == 0 || n2 == 0) return {};
    const double a = static_cast<double>(n1), b = static_cast<double>(n2);
    const double pooled = ((a - 1) * var1 + (b - 1) * var2) / (a + b - 2);
    const double se = std::sqrt(pooled * (1.0 / a + 1.0 / b));
    if (!(se > 0.0)) return {};
    return finish_z((m2 - m1) / se, tails);
}

std::pair<double, double> least_squares(const std::vector<double> &x, const std::vector<double> &y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double c = sxx > 0 ? sxy / sxx : 0.0;
    return {c, my - c * mx};
}

TrendFit fit_trend(const std::vector<double> &x, const std::vector<double> &y, TrendModel model) {
    TrendFit fit;
    fit.model = model;
    if (model == TrendModel::Linear) {
        if (x.size() < 2) return fit;
        std::tie(fit.c, fit.d) = least_squares(x, y);
        fit.points = x.size();
        fit.fitted = true;
        return fit;
    }
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::size_t knee = order.size();
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (y[order[k]] < 0.95) {
            knee = k;
            break;
        }
    }
    if (knee == order.size()) return fit;
    fit.rho_star = x[order[knee]];
    std::size_t start = knee;
    auto usable = [&](std::size_t from) {
        std::size_t n = 0;
        for (std::size_t k = from; k < order.size(); ++k) n += x[order[k]] > 0.0;
        return n;
    };
    while (usable(start) < 3 && start > 0 && x[order[start - 1]] > 0.0) --start;
    std::vector<double> lx, ly;
    for (std::size_t k = start; k < order.size(); ++k) {
        if (x[order[k]] <= 0.0) continue;
        lx.push_back(std::log(x[order[k]]));
        ly.push_back(y[order[k]]);
    }
    if (lx.size() < 2) return fit;
    std::tie(fit.c, fit.d) = least_squares(lx, ly);
    fit.points = lx.size();
    fit.fitted = true;
    return fit;
}

// ---------------------------------------------------------------------------
// Aggregation and reports

std::vector<Aggregate> aggregate(const std::vector<TrialRecord> &records) {
    std::vector<Aggregate> out;
    for (const auto &r : records) {
        auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate &a) {
            return a.method == r.method && a.rho == r.rho && a.omega == r.omega;
        });
        if (it == out.end()) {
            out.push_back({r.method, r.rho, r.omega});
            it = out.end() - 1;
        }
        ++it->n;
        it->accuracy += r.h_correct;
        it->r_accuracy += r.r_correct;
        it->mean_acc_query += static_cast<double>(r.acc_query);
        it->mean_acc_total += static_cast<double>(r.acc_total);
        it->mean_ms += r.ms;
    }
    for (auto &a : out) {
        const double n = static_cast<double>(a.n);
        a.accuracy /= n;
        a.r_accuracy /= n;
        a.mean_acc_query /= n;
        a.mean_acc_total /= n;
        a.mean_ms /= n;
    }
    return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path &path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path &path, const std::string &header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != header) throw std::runtime_error("unexpected header in " + path.string());
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

Outcome parse_outcome(const std::string &s) {
    if (s == "identified") return Outcome::Identified;
    if (s == "exhausted") return Outcome::Exhausted;
    if (s == "access_limit") return Outcome::AccessLimit;
    throw std::runtime_error("unknown outcome " + s);
}

void write_trial_cells(std::ostream &out, const TrialRecord &r) {
    out << r.method << ',' << num(r.rho) << ',' << r.omega << ',' << r.seed << ',' << outcome_tag(r.outcome) << ','
        << (r.h_correct ? 1 : 0) << ',' << (r.r_correct ? 1 : 0) << ',' << r.acc_query << ',' << r.acc_total << ','
        << num(r.ms);
}

TrialRecord parse_trial_cells(const std::vector<std::string> &c) {
    if (c.size() < 10) throw std::runtime_error("short trial row");
    TrialRecord r;
    r.method = c[0];
    r.rho = std::stod(c[1]);
    r.omega = std::stoi(c[2]);
    r.seed = std::stoull(c[3]);
    r.outcome = parse_outcome(c[4]);
    r.h_correct = c[5] == "1";
    r.r_correct = c[6] == "1";
    r.acc_query = std::stoull(c[7]);
    r.acc_total = std::stoull(c[8]);
    r.ms = std::stod(c[9]);
    return r;
}

constexpr const char *kQueryHeader = "method,seed,candidates,truth_in_r,ms";
const std::string kPivotHeader = std::string(kTrialHeader) + ",acc_first_r,first_singleton";

}  // namespace

void write_trials_csv(const std::vector<TrialRecord> &records, const std::filesystem::path &path) {
    auto out = open_out(path);
    out << kTrialHeader << '\n';
    for (const auto &r : records) {
        write_trial_cells(out, r);
        out << '\n';
    }
}

std::vector<TrialRecord> read_trials_csv(const std::filesystem::path &path) {
    std::vector<TrialRecord> out;
    for (const auto &c : read_rows(path, kTrialHeader)) out.push_back(parse_trial_cells(c));
    return out;
}

void write_query_csv(const std::vector<QueryRecord> &records, const std::filesystem::path &path) {
    auto out = open_out(path);
    out << kQueryHeader << '\n';
    for (const auto &r : records)
        out << r.method << ',' << r.seed << ',' << r.candidates << ',' << (r.truth_in_r ? 1 : 0) << ',' << num(r.ms)
            << '\n';
}

std::vector<QueryRecord> read_query_csv(const std::filesystem::path &path) {
    std::vector<QueryRecord> out;
    for (const auto &c : read_rows(path, kQueryHeader)) {
        if (c.size() < 5) throw std::runtime_error("short query row");
        out.push_back({c[0], std::stoull(c[1]), std::stoull(c[2]), c[3] == "1", std::stod(c[4])});
    }
    return out;
}

void write_pivot_csv(const std::vector<TrialRecord> &records, const std::filesystem::path &path) {
    auto out = open_out(path);
    out << kPivotHeader << '\n';
    for (const auto &r : records) {
        write_trial_cells(out, r);
        out << ',' << r.acc_first_r << ',' << (r.first_singleton ? 1 : 0) << '\n';
    }
}

std::vector<TrialRecord> read_pivot_csv(const std::filesystem::path &path) {
    std::vector<TrialRecord> out;
    for (const auto &c : read_rows(path, kPivotHeader)) {
        if (c.size() < 12) throw std::runtime_error("short pivot row");
        TrialRecord r = parse_trial_cells(c);
        r.acc_first_r = std::stoull(c[10]);
        r.first_singleton = c[11] == "1";
        out.push_back(r);
    }
    return out;
}

void write_aggregate_csv(const std::vector<Aggregate> &rows, const std::filesystem::path &path) {
    auto out = open_out(path);
    out << "method,rho,omega,n,accuracy,r_accuracy,mean_acc_query,mean_acc_total,mean_ms\n";
    for (const auto &a : rows)
        out << a.method << ',' << num(a.rho) << ',' << a.omega << ',' << a.n << ',' << num(a.accuracy) << ','
            << num(a.r_accuracy) << ',' << num(a.mean_acc_query) << ',' << num(a.mean_acc_total) << ','
            << num(a.mean_ms) << '\n';
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr std::array<const char *, 8> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                               "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string &s) {
    std::string o;
    for (char ch : s) {
        if (ch == '<') o += "&lt;";
        else if (ch == '>') o += "&gt;";
        else if (ch == '&') o += "&amp;";
        else o += ch;
    }
    return o;
}

struct Frame {
    double left = 70, right = 170, top = 40, bottom = 60, width = 720, height = 400;
    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
};

void svg_open(std::ostream &out, const Frame &f, const std::string &title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
        << "</text>\n";
    out << "<line x1=\"" << f.left << "\" y1=\"" << f.top + f.plot_h() << "\" x2=\"" << f.left + f.plot_w()
        << "\" y2=\"" << f.top + f.plot_h() << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\"" << f.top + f.plot_h()
        << "\" stroke=\"black\"/>\n";
}

void svg_legend(std::ostream &out, const Frame &f, const std::vector<std::string> &labels) {
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const double y = f.top + 10 + 18.0 * static_cast<double>(k);
        out << "<rect x=\"" << f.width - f.right + 20 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
            << kPalette[k % kPalette.size()] << "\"/>\n";
        out << "<text x=\"" << f.width - f.right + 38 << "\" y=\"" << y + 1 << "\">" << escape(labels[k])
            << "</text>\n";
    }
}

}  // namespace

void write_bar_svg(const std::filesystem::path &path, const std::string &title, const std::string &y_label,
                   const std::vector<std::string> &categories, const std::vector<BarSeries> &series, bool log_y) {
    auto out = open_out(path);
    const Frame f;
    double hi = 0, lo_pos = std::numeric_limits<double>::infinity();
    for (const auto &s : series)
        for (double v : s.values) {
            hi = std::max(hi, v);
            if (v > 0) lo_pos = std::min(lo_pos, v);
        }
    if (!(hi > 0)) hi = 1;
    const double log_lo = std::isfinite(lo_pos) ? std::floor(std::log10(lo_pos)) : 0.0;
    const double log_hi = std::ceil(std::log10(hi)) + (std::log10(hi) == std::ceil(std::log10(hi)) ? 1 : 0);
    auto ypos = [&](double v) {
        double frac = 0;
        if (log_y) frac = v > 0 ? (std::log10(v) - log_lo) / std::max(1e-9, log_hi - log_lo) : 0.0;
        else frac = v / (hi * 1.1);
        return f.top + f.plot_h() * (1.0 - std::clamp(frac, 0.0, 1.0));
    };
    svg_open(out, f, title);
    out << "<text x=\"18\" y=\"" << f.top + f.plot_h() / 2 << "\" transform=\"rotate(-90 18 " << f.top + f.plot_h() / 2
        << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = log_y ? std::pow(10.0, log_lo + (log_hi - log_lo) * t / 4.0) : hi * 1.1 * t / 4.0;
        out << "<text x=\"" << f.left - 6 << "\" y=\"" << ypos(v) + 4 << "\" text-anchor=\"end\">" << num(v)
            << "</text>\n";
    }
    const double group_w = f.plot_w() / static_cast<double>(std::max<std::size_t>(categories.size(), 1));
    const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const double gx = f.left + group_w * static_cast<double>(c);
        out << "<text x=\"" << gx + group_w / 2 << "\" y=\"" << f.top + f.plot_h() + 18 << "\" text-anchor=\"middle\">"
            << escape(categories[c]) << "</text>\n";
        for (std::size_t s = 0; s < series.size(); ++s) {
            if (c >= series[s].values.size()) continue;
            const double v = series[s].values[c];
            const double x = gx + group_w * 0.1 + bar_w * static_cast<double>(s);
            const double y = ypos(v);
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w * 0.95 << "\" height=\""
                << f.top + f.plot_h() - y << "\" fill=\"" << kPalette[s % kPalette.size()] << "\"/>\n";
            out << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << y - 3 << "\" text-anchor=\"middle\" font-size=\"9\">"
                << num(std::round(v * 1e4) / 1e4) << "</text>\n";
        }
    }
    std::vector<std::string> labels;
    for (const auto &s : series) labels.push_back(s.label);
    svg_legend(out, f, labels);
    out << "</svg>\n";
}

void write_line_svg(const std::filesystem::path &path, const std::string &title, const std::string &x_title,
                    const std::string &y_label, const std::vector<std::string> &x_labels,
                    const std::vector<LineSeries> &series) {
    auto out = open_out(path);
    const Frame f;
    const double xmax = static_cast<double>(std::max<std::size_t>(x_labels.size(), 2) - 1);
    double ymax = 1.1;
    for (const auto &s : series)
        for (double v : s.y) ymax = std::max(ymax, v * 1.1);
    auto px = [&](double x) { return f.left + f.plot_w() * x / xmax; };
    auto py = [&](double y) { return f.top + f.plot_h() * (1.0 - std::clamp(y / ymax, 0.0, 1.0)); };
    svg_open(out, f, title);
    out << "<text x=\"" << f.left + f.plot_w() / 2 << "\" y=\"" << f.height - 15 << "\" text-anchor=\"middle\">"
        << escape(x_title) << "</text>\n";
    out << "<text x=\"18\" y=\"" << f.top + f.plot_h() / 2 << "\" transform=\"rotate(-90 18 " << f.top + f.plot_h() / 2
        << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
    for (std::size_t k = 0; k < x_labels.size(); ++k)
        out << "<text x=\"" << px(static_cast<double>(k)) << "\" y=\"" << f.top + f.plot_h() + 18
            << "\" text-anchor=\"middle\">" << escape(x_labels[k]) << "</text>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = ymax * t / 4.0;
        out << "<text x=\"" << f.left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
            << num(std::round(v * 100) / 100) << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char *color = kPalette[s % kPalette.size()];
        for (std::size_t k = 0; k < series[s].x.size(); ++k)
            out << "<circle cx=\"" << px(series[s].x[k]) << "\" cy=\"" << py(series[s].y[k]) << "\" r=\"3\" fill=\""
                << color << "\"/>\n";
        if (series[s].curve_x.size() >= 2) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t k = 0; k < series[s].curve_x.size(); ++k)
                out << px(series[s].curve_x[k]) << ',' << py(series[s].curve_y[k]) << ' ';
            out << "\"/>\n";
        }
    }
    std::vector<std::string> labels;
    for (const auto &s : series) labels.push_back(s.label);
    svg_legend(out, f, labels);
    out << "</svg>\n";
}

}  // namespace starid
