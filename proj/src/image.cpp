#include "starid/image.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace starid {

namespace {

// Stream tags keep the random sequences of the three stages independent for one seed.
constexpr std::uint64_t kShuffleStream = 0x51;
constexpr std::uint64_t kNoiseStream = 0x52;
constexpr std::uint64_t kSpikeStream = 0x53;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

Vec3 uniform_cube_direction(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    while (true) {
        const Vec3 v{u(rng), u(rng), u(rng)};
        if (v.norm() > 1e-12) return v.normalized();
    }
}

}  // namespace

std::vector<Vec3> SyntheticImage::vectors() const {
    std::vector<Vec3> out;
    out.reserve(stars.size());
    for (const auto &s : stars) out.push_back(s.v);
    return out;
}

std::size_t SyntheticImage::spike_count() const {
    return static_cast<std::size_t>(
        std::count_if(stars.begin(), stars.end(), [](const ImageStar &s) { return s.label == kSpikeLabel; }));
}

RotationMatrix random_attitude(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    double w = 0, x = 0, y = 0, z = 0, s = 0;
    do {
        w = n(rng), x = n(rng), y = n(rng), z = n(rng);
        s = std::sqrt(w * w + x * x + y * y + z * z);
    } while (s < 1e-12);
    w /= s, x /= s, y /= s, z /= s;
    RotationMatrix r;
    r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
           2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
           2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
    return r;
}

Vec3 random_direction(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    while (true) {
        const Vec3 v{n(rng), n(rng), n(rng)};
        if (v.norm() > 1e-12) return v.normalized();
    }
}

SyntheticImage generate_image(const StarTable &stars, double psi, const RotationMatrix &attitude, const Vec3 &r_f,
                              std::uint64_t seed) {
    const std::vector<CatalogStar> j = stars.cone(r_f, psi / 2.0);
    if (j.empty()) throw EmptyImageError("no catalog star within the field of view");
    SyntheticImage image;
    image.psi = psi;
    image.attitude = attitude;
    image.center = attitude * r_f.normalized();
    image.seed = seed;
    for (const auto &s : j) image.stars.push_back({attitude * s.v, s.id});
    auto rng = stream(seed, kShuffleStream);
    std::shuffle(image.stars.begin(), image.stars.end(), rng);
    return image;
}

Vec3 slerp_toward(const Vec3 &b, const Vec3 &b_star, double g_deg) {
    const double omega = std::acos(std::clamp(b_star.dot(b), -1.0, 1.0));
    const double k = deg_to_rad(g_deg) / omega;
    const double s = std::sin(omega);
    return b * (std::sin((1.0 - k) * omega) / s) + b_star * (std::sin(k * omega) / s);
}

SyntheticImage apply_gaussian_noise(SyntheticImage image, double rho, std::uint64_t seed) {
    if (rho == 0.0) return image;
    if (rho < 0.0) throw std::invalid_argument("noise deviation must be non-negative");
    auto rng = stream(seed, kNoiseStream);
    std::normal_distribution<double> gauss(0.0, rho);
    for (auto &star : image.stars) {
        while (true) {
            const Vec3 b_star = uniform_cube_direction(rng);
            const double omega = std::acos(std::clamp(b_star.dot(star.v), -1.0, 1.0));
            if (std::sin(omega) < 1e-9) continue;
            const Vec3 moved = slerp_toward(star.v, b_star, gauss(rng)).normalized();
            if (angular_separation(moved, image.center) < image.psi / 2.0) {
                star.v = moved;
                break;
            }
        }
    }
    return image;
}

SyntheticImage add_spikes(SyntheticImage image, int omega, std::uint64_t seed) {
    if (omega <= 0) return image;
    auto rng = stream(seed, kSpikeStream);
    for (int k = 0; k < omega; ++k) {
        Vec3 v;
        do {
            v = uniform_cube_direction(rng);
        } while (!(angular_separation(v, image.center) < image.psi / 2.0));
        std::uniform_int_distribution<std::size_t> at(0, image.stars.size());
        image.stars.insert(image.stars.begin() + static_cast<std::ptrdiff_t>(at(rng)), ImageStar{v, kSpikeLabel});
    }
    return image;
}

void save_image(const SyntheticImage &image, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write image " + path.string());
    out << std::setprecision(17);
    out << "fov " << image.psi << '\n';
    out << "seed " << image.seed << '\n';
    out << "attitude";
    for (double v : image.attitude.m) out << ' ' << v;
    out << '\n';
    out << "center " << image.center.x << ' ' << image.center.y << ' ' << image.center.z << '\n';
    for (const auto &s : image.stars) {
        out << s.v.x << ' ' << s.v.y << ' ' << s.v.z << ' ';
        if (s.label == kSpikeLabel)
            out << "SPIKE";
        else
            out << s.label;
        out << '\n';
    }
    if (!out) throw std::runtime_error("short write to " + path.string());
}

SyntheticImage load_image(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read image " + path.string());
    SyntheticImage image;
    std::string line;
    int headers = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        bool ok = true;
        if (head == "fov") {
            ok = static_cast<bool>(ls >> image.psi);
            ++headers;
        } else if (head == "seed") {
            ok = static_cast<bool>(ls >> image.seed);
        } else if (head == "attitude") {
            for (double &v : image.attitude.m) ok = ok && static_cast<bool>(ls >> v);
        } else if (head == "center") {
            ok = static_cast<bool>(ls >> image.center.x >> image.center.y >> image.center.z);
            ++headers;
        } else {
            ImageStar s;
            std::string label;
            std::istringstream row(line);
            ok = static_cast<bool>(row >> s.v.x >> s.v.y >> s.v.z >> label);
            if (ok) {
                if (label == "SPIKE") {
                    s.label = kSpikeLabel;
                } else {
                    try {
                        s.label = static_cast<StarId>(std::stol(label));
                    } catch (const std::exception &) {
                        ok = false;
                    }
                }
            }
            image.stars.push_back(s);
        }
        if (!ok) throw std::runtime_error("malformed image line: " + line);
    }
    if (headers < 2) throw std::runtime_error("image file lacks fov/center headers: " + path.string());
    return image;
}

}  // namespace starid
