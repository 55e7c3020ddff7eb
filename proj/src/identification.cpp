#include "starid/identification.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace starid {

std::string_view method_tag(Method m) {
    switch (m) {
        case Method::Angle: return "ang";
        case Method::InteriorAngle: return "int";
        case Method::Spherical: return "sph";
        case Method::Planar: return "pln";
        case Method::Pyramid: return "pyr";
        case Method::Composite: return "com";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view tag) {
    std::string t(tag);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    for (Method m : kAllMethods)
        if (method_tag(m) == t) return m;
    return std::nullopt;
}

std::string_view outcome_tag(Outcome o) {
    switch (o) {
        case Outcome::Identified: return "identified";
        case Outcome::Exhausted: return "exhausted";
        case Outcome::AccessLimit: return "access_limit";
    }
    return "?";
}

MethodConfig default_config(Method m) {
    MethodConfig c;
    switch (m) {
        case Method::Angle:
        case Method::Pyramid: c.sigma_theta = 1e-4; break;
        case Method::InteriorAngle:
            c.sigma_theta = 1e-2;
            c.sigma_phi = 1e-2;
            break;
        case Method::Spherical:
        case Method::Planar:
        case Method::Composite:
            c.sigma_a = 1e-9;
            c.sigma_tau = 1e-9;
            break;
    }
    return c;
}

double overlay_sigma(Method m, const MethodConfig &cfg) {
    if (cfg.sigma_o > 0.0) return cfg.sigma_o;
    switch (m) {
        case Method::Angle:
        case Method::InteriorAngle:
        case Method::Pyramid: return cfg.sigma_theta;
        default: return 1e-4;
    }
}

std::vector<std::array<std::size_t, 2>> sequential_pairs(std::size_t n) {
    std::vector<std::array<std::size_t, 2>> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.push_back({i, j});
    return out;
}

std::vector<std::array<std::size_t, 3>> sequential_trios(std::size_t n) {
    std::vector<std::array<std::size_t, 3>> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k) out.push_back({i, j, k});
    return out;
}

std::vector<std::array<std::size_t, 3>> pyramid_trios(std::size_t n) {
    std::vector<std::array<std::size_t, 3>> out;
    if (n < 3) return out;
    for (std::size_t dj = 1; dj <= n - 2; ++dj)
        for (std::size_t dk = 1; dk + dj <= n - 1; ++dk)
            for (std::size_t i = 0; i + dj + dk < n; ++i) out.push_back({i, i + dj, i + dj + dk});
    return out;
}

std::vector<StarId> flatten_common(std::span<const std::vector<StarId>> t1, std::span<const std::vector<StarId>> t2) {
    auto flat = [](std::span<const std::vector<StarId>> t) {
        std::vector<StarId> f;
        for (const auto &tuple : t) f.insert(f.end(), tuple.begin(), tuple.end());
        std::sort(f.begin(), f.end());
        f.erase(std::unique(f.begin(), f.end()), f.end());
        return f;
    };
    const auto a = flat(t1), b = flat(t2);
    std::vector<StarId> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::vector<std::vector<StarId>> partial_match(std::span<const std::vector<StarId>> r,
                                               std::span<const std::vector<StarId>> r_bar) {
    std::vector<std::vector<StarId>> out;
    for (const auto &cand : r) {
        const bool keep = std::any_of(r_bar.begin(), r_bar.end(), [&](const std::vector<StarId> &other) {
            std::size_t shared = 0;
            for (StarId id : cand) shared += static_cast<std::size_t>(std::count(other.begin(), other.end(), id));
            return shared >= 2;
        });
        if (keep) out.push_back(cand);
    }
    return out;
}

Bijection direct_match_test(std::span<const std::size_t> b, std::span<const StarId> r, std::span<const Vec3> image,
                            const CatalogStore &store, double psi, double sigma_o, AccessCounter &counter) {
    const std::size_t d = b.size();
    if (d < 2 || r.size() != d) return {};
    std::vector<Vec3> rv;
    Vec3 sum;
    for (StarId id : r) {
        rv.push_back(store.stars.at(id).v);
        sum = sum + rv.back();
    }
    std::vector<Vec3> nearby;
    for (const auto &s : store.stars.cone(sum.normalized(), psi / 2.0, counter)) nearby.push_back(s.v);

    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<std::size_t>> pairings;
    std::vector<long> scores;
    do {
        long score = -1;
        try {
            const RotationMatrix a = triad(image[b[0]], image[b[1]], rv[perm[0]], rv[perm[1]]);
            score = static_cast<long>(find_positive_overlay(nearby, image, a, sigma_o).size());
        } catch (const DegenerateGeometry &) {
        }
        pairings.push_back(perm);
        scores.push_back(score);
    } while (std::next_permutation(perm.begin(), perm.end()));

    bool any_valid = false, all_at_b = true;
    for (long s : scores) {
        if (s < 0) continue;
        any_valid = true;
        if (s != static_cast<long>(d)) all_at_b = false;
    }
    if (!any_valid || all_at_b) return {};
    const std::size_t best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    Bijection h;
    for (std::size_t k = 0; k < d; ++k) h.push_back({b[k], r[pairings[best][k]]});
    return h;
}

namespace {

using Tuples = std::vector<std::vector<StarId>>;

template <typename Row>
Tuples ids_of(const std::vector<Row> &rows) {
    Tuples out;
    out.reserve(rows.size());
    for (const auto &row : rows) out.emplace_back(row.ids.begin(), row.ids.end());
    return out;
}

struct PyramidSets {
    std::vector<StarId> ti, tj, tk;
    Tuples r;
    bool singleton() const { return ti.size() == 1 && tj.size() == 1 && tk.size() == 1 && r.size() == 1; }
};

class Engine {
   public:
    Engine(Method m, std::span<const Vec3> image, const CatalogStore &store, const MethodConfig &cfg)
        : method_(m), image_(image), store_(store), cfg_(cfg) {}

    AccessCounter counter;
    std::size_t cap = std::numeric_limits<std::size_t>::max();
    std::size_t pair_cap = std::numeric_limits<std::size_t>::max();

    bool budget_left() const { return counter.count < cfg_.access_limit; }

    Tuples pair_query(std::size_t i, std::size_t j) {
        const double theta = angular_separation(image_[i], image_[j]);
        return ids_of(store_.pairs.query_range(std::array<Interval, 1>{Interval::around(theta, cfg_.sigma_theta)},
                                               counter, pair_cap));
    }

    Tuples trio_query(std::size_t i, std::size_t j, std::size_t k, TriangleKind kind) {
        const TrioFeatures f = trio_features(kind, image_[i], image_[j], image_[k], store_.moment_depth());
        return ids_of(store_.trios(kind).query_range(
            std::array<Interval, 2>{Interval::around(f.area, cfg_.sigma_a), Interval::around(f.moment, cfg_.sigma_tau)},
            counter, cap));
    }

    /// Central star c with its two closest neighbors, lower index first on ties.
    std::optional<std::array<std::size_t, 3>> interior_subset(std::size_t c) const {
        if (image_.size() < 3) return std::nullopt;
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t i = 0; i < image_.size(); ++i)
            if (i != c) d.push_back({angular_separation(image_[c], image_[i]), i});
        std::partial_sort(d.begin(), d.begin() + 2, d.end());
        return std::array<std::size_t, 3>{c, d[0].second, d[1].second};
    }

    Tuples interior_query(const std::array<std::size_t, 3> &b) {
        const Vec3 &c = image_[b[0]], &c1 = image_[b[1]], &c2 = image_[b[2]];
        double phi = 0.0;
        try {
            phi = interior_angle(c, c1, c2);
        } catch (const DegenerateGeometry &) {
            counter.tick();
            return {};
        }
        const std::array<Interval, 3> pred{Interval::around(angular_separation(c1, c), cfg_.sigma_theta),
                                           Interval::around(angular_separation(c2, c), cfg_.sigma_theta),
                                           Interval::around(phi, cfg_.sigma_phi)};
        Tuples out;
        for (const auto &row : store_.trio_perms.query_range(pred, counter, cap))
            if (row.f[0] < row.f[1]) out.emplace_back(row.ids.begin(), row.ids.end());
        return out;
    }

    PyramidSets pyramid_query(std::size_t i, std::size_t j, std::size_t k) {
        const Tuples tij = pair_query(i, j), tik = pair_query(i, k), tjk = pair_query(j, k);
        PyramidSets s;
        s.ti = flatten_common(tij, tik);
        s.tj = flatten_common(tij, tjk);
        s.tk = flatten_common(tik, tjk);
        for (StarId a : s.ti)
            for (StarId b : s.tj)
                for (StarId c : s.tk)
                    if (a != b && a != c && b != c) s.r.push_back({a, b, c});
        return s;
    }

    std::optional<std::size_t> first_unused(const std::array<std::size_t, 3> &b) const {
        for (std::size_t x = 0; x < image_.size(); ++x)
            if (x != b[0] && x != b[1] && x != b[2]) return x;
        return std::nullopt;
    }

    std::optional<std::size_t> verification_star(const std::array<std::size_t, 3> &b) const {
        if (cfg_.beta_rule == BetaRule::FirstUnused) return first_unused(b);
        const std::size_t n = image_.size();
        const std::size_t last = std::max({b[0], b[1], b[2]});
        for (std::size_t step = 1; step < n; ++step) {
            const std::size_t x = (last + step) % n;
            if (x != b[0] && x != b[1] && x != b[2]) return x;
        }
        return std::nullopt;
    }

    Tuples pivot(const std::array<std::size_t, 3> &b, Tuples r, TriangleKind kind) {
        for (std::size_t beta = 0; beta < image_.size(); ++beta) {
            if (beta == b[0] || beta == b[1] || beta == b[2]) continue;
            if (!budget_left()) return {};
            const Tuples r_bar = trio_query(b[0], b[1], beta, kind);
            r = partial_match(r, r_bar);
            if (r.size() <= 1) return r;
        }
        return {};
    }

    Bijection dmt(std::span<const std::size_t> b, std::span<const StarId> r) {
        ++dmt_calls;
        return direct_match_test(b, r, image_, store_, cfg_.psi, overlay_sigma(method_, cfg_), counter);
    }

    std::uint64_t dmt_calls = 0;

   private:
    Method method_;
    std::span<const Vec3> image_;
    const CatalogStore &store_;
    const MethodConfig &cfg_;
};

/// Tracks the per-run bookkeeping shared by every method.
struct Run {
    Engine &engine;
    IdentificationResult result;
    bool first = true;

    void note_first(bool singleton) {
        if (first) result.first_query_singleton = singleton;
        first = false;
    }
    std::uint64_t note_r() {
        if (result.accesses_first_r == 0) result.accesses_first_r = engine.counter.count;
        return engine.counter.count;
    }
    IdentificationResult &finish(Outcome o) {
        result.outcome = o;
        result.accesses_total = engine.counter.count;
        if (o != Outcome::Identified) {
            result.accesses_query = result.accesses_total;
            result.h.clear();
        }
        result.dmt_calls = engine.dmt_calls;
        return result;
    }
    IdentificationResult &accept(std::vector<std::size_t> b, std::vector<StarId> r, Bijection h,
                                 std::uint64_t at_r) {
        result.b = std::move(b);
        result.r = std::move(r);
        result.h = std::move(h);
        result.accesses_query = at_r;
        return finish(Outcome::Identified);
    }
};

IdentificationResult identify_angle(Run &run, std::size_t n) {
    Engine &e = run.engine;
    for (const auto &[i, j] : sequential_pairs(n)) {
        if (!e.budget_left()) return run.finish(Outcome::AccessLimit);
        const Tuples r = e.pair_query(i, j);
        run.note_first(r.size() == 1);
        if (r.size() != 1) continue;
        const std::uint64_t at_r = run.note_r();
        const std::vector<std::size_t> b{i, j};
        Bijection h = e.dmt(b, r[0]);
        if (!h.empty()) return run.accept(b, r[0], std::move(h), at_r);
    }
    return run.finish(Outcome::Exhausted);
}

IdentificationResult identify_interior(Run &run, std::size_t n) {
    Engine &e = run.engine;
    if (n < 3) return run.finish(Outcome::Exhausted);
    for (std::size_t c = 0; c < n; ++c) {
        if (!e.budget_left()) return run.finish(Outcome::AccessLimit);
        const auto b = *e.interior_subset(c);
        const Tuples r = e.interior_query(b);
        run.note_first(r.size() == 1);
        if (r.size() != 1) continue;
        const std::uint64_t at_r = run.note_r();
        Bijection h{{b[0], r[0][0]}, {b[1], r[0][1]}, {b[2], r[0][2]}};
        return run.accept({b.begin(), b.end()}, r[0], std::move(h), at_r);
    }
    return run.finish(Outcome::Exhausted);
}

IdentificationResult identify_triangle(Run &run, std::size_t n, TriangleKind kind, bool pivot_on_empty) {
    Engine &e = run.engine;
    for (const auto &b : sequential_trios(n)) {
        if (!e.budget_left()) return run.finish(Outcome::AccessLimit);
        Tuples r = e.trio_query(b[0], b[1], b[2], kind);
        run.note_first(r.size() == 1);
        if (r.size() != 1 && (pivot_on_empty || !r.empty())) r = e.pivot(b, std::move(r), kind);
        if (r.size() != 1) continue;
        const std::uint64_t at_r = run.note_r();
        Bijection h = e.dmt(b, r[0]);
        if (!h.empty()) return run.accept({b.begin(), b.end()}, r[0], std::move(h), at_r);
    }
    if (!e.budget_left()) return run.finish(Outcome::AccessLimit);
    return run.finish(Outcome::Exhausted);
}

IdentificationResult identify_pyramid(Run &run, std::size_t n, bool verify) {
    Engine &e = run.engine;
    if (n < (verify ? 4u : 3u)) return run.finish(Outcome::Exhausted);
    for (const auto &b : pyramid_trios(n)) {
        if (!e.budget_left()) return run.finish(Outcome::AccessLimit);
        const PyramidSets s = e.pyramid_query(b[0], b[1], b[2]);
        run.note_first(s.singleton());
        if (!s.singleton()) continue;
        const std::uint64_t at_r = run.note_r();
        if (verify) {
            const std::size_t beta = *e.verification_star(b);
            const Tuples tib = e.pair_query(b[0], beta), tjb = e.pair_query(b[1], beta),
                         tkb = e.pair_query(b[2], beta);
            const auto a1 = flatten_common(tib, tjb), a2 = flatten_common(tjb, tkb);
            std::vector<StarId> t_beta;
            std::set_intersection(a1.begin(), a1.end(), a2.begin(), a2.end(), std::back_inserter(t_beta));
            if (t_beta.size() != 1) continue;
        }
        Bijection h{{b[0], s.r[0][0]}, {b[1], s.r[0][1]}, {b[2], s.r[0][2]}};
        return run.accept({b.begin(), b.end()}, s.r[0], std::move(h), at_r);
    }
    return run.finish(Outcome::Exhausted);
}

IdentificationResult identify_composite(Run &run, std::size_t n, TriangleKind kind, bool verify) {
    Engine &e = run.engine;
    if (n < (verify ? 4u : 3u)) return run.finish(Outcome::Exhausted);
    for (const auto &b : pyramid_trios(n)) {
        if (!e.budget_left()) return run.finish(Outcome::AccessLimit);
        const Tuples r = e.trio_query(b[0], b[1], b[2], kind);
        run.note_first(r.size() == 1);
        if (r.size() != 1) continue;
        const std::uint64_t at_r = run.note_r();
        if (verify) {
            const std::size_t beta = *e.verification_star(b);
            const Tuples t12 = e.trio_query(b[0], b[1], beta, kind), t13 = e.trio_query(b[0], b[2], beta, kind),
                         t23 = e.trio_query(b[1], b[2], beta, kind);
            const auto a1 = flatten_common(t12, t13), a2 = flatten_common(t13, t23);
            std::vector<StarId> t_beta;
            std::set_intersection(a1.begin(), a1.end(), a2.begin(), a2.end(), std::back_inserter(t_beta));
            if (t_beta.size() != 1) continue;
        }
        Bijection h = e.dmt(b, r[0]);
        if (!h.empty()) return run.accept({b.begin(), b.end()}, r[0], std::move(h), at_r);
    }
    return run.finish(Outcome::Exhausted);
}

}  // namespace

IdentificationResult identify(Method m, std::span<const Vec3> image, const CatalogStore &store,
                              const MethodConfig &cfg) {
    const auto start = std::chrono::steady_clock::now();
    Engine engine(m, image, store, cfg);
    Run run{engine, {}};
    const std::size_t n = image.size();
    IdentificationResult result;
    switch (m) {
        case Method::Angle: result = identify_angle(run, n); break;
        case Method::InteriorAngle: result = identify_interior(run, n); break;
        case Method::Spherical:
            result = identify_triangle(run, n, TriangleKind::Spherical, cfg.pivot_on_empty);
            break;
        case Method::Planar: result = identify_triangle(run, n, TriangleKind::Planar, cfg.pivot_on_empty); break;
        case Method::Pyramid: result = identify_pyramid(run, n, cfg.verify); break;
        case Method::Composite: result = identify_composite(run, n, cfg.composite_features, cfg.verify); break;
    }
    result.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return result;
}

QueryStep first_query_step(Method m, std::span<const Vec3> image, const CatalogStore &store, const MethodConfig &cfg,
                           std::size_t max_rows) {
    const auto start = std::chrono::steady_clock::now();
    Engine e(m, image, store, cfg);
    e.cap = max_rows;
    if (m == Method::Angle) e.pair_cap = max_rows;
    QueryStep q;
    const std::size_t n = image.size();
    switch (m) {
        case Method::Angle:
            if (n < 2) break;
            q.b = {0, 1};
            q.candidates = e.pair_query(0, 1);
            break;
        case Method::InteriorAngle:
            if (n < 3) break;
            {
                const auto b = *e.interior_subset(0);
                q.b = {b.begin(), b.end()};
                q.candidates = e.interior_query(b);
                q.ordered = true;
            }
            break;
        case Method::Spherical:
        case Method::Planar:
        case Method::Composite:
            if (n < 3) break;
            q.b = {0, 1, 2};
            q.candidates = e.trio_query(0, 1, 2,
                                        m == Method::Spherical ? TriangleKind::Spherical
                                        : m == Method::Planar  ? TriangleKind::Planar
                                                               : cfg.composite_features);
            break;
        case Method::Pyramid:
            if (n < 3) break;
            q.b = {0, 1, 2};
            {
                PyramidSets s = e.pyramid_query(0, 1, 2);
                q.candidates = std::move(s.r);
            }
            q.ordered = true;
            break;
    }
    q.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return q;
}

}  // namespace starid
