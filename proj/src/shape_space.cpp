#include "repertoire/shape_space.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "repertoire/rng.hpp"

namespace repertoire {

double ShapeSpace::distance(std::size_t i, std::size_t j) const {
    double d = std::fabs(centers[i] - centers[j]);
    if (periodic) d = std::min(d, 1.0 - d);
    return d;
}

ShapeSpace make_grid(std::size_t M, bool periodic) {
    if (M < 2) throw std::invalid_argument("make_grid: M must be at least 2");
    ShapeSpace s;
    s.M = M;
    s.periodic = periodic;
    s.centers.resize(M);
    for (std::size_t i = 0; i < M; ++i) s.centers[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(M);
    return s;
}

double Distribution::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) m += p[i] * space.centers[i];
    return m;
}

double Distribution::stddev() const {
    double m = mean();
    double v = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) v += p[i] * (space.centers[i] - m) * (space.centers[i] - m);
    return std::sqrt(v);
}

Distribution normalized(const ShapeSpace& space, std::vector<double> w) {
    if (w.size() != space.M) throw std::invalid_argument("normalized: size mismatch");
    double s = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("normalized: weights must be finite and nonnegative");
        s += x;
    }
    if (!(s > 0.0)) throw std::invalid_argument("normalized: weights sum to zero");
    for (double& x : w) x /= s;
    return Distribution{space, std::move(w)};
}

void check_simplex(const Distribution& d, double tol) {
    if (d.p.size() != d.space.M) throw std::invalid_argument("distribution size does not match its space");
    double s = 0.0;
    for (double x : d.p) {
        if (x < 0.0 || !std::isfinite(x)) throw std::invalid_argument("distribution has a negative or non-finite entry");
        s += x;
    }
    if (std::fabs(s - 1.0) > tol) throw std::invalid_argument("distribution does not sum to one");
}

Distribution uniform_distribution(const ShapeSpace& space) {
    return normalized(space, std::vector<double>(space.M, 1.0));
}

Distribution one_hot(const ShapeSpace& space, std::size_t bin) {
    if (bin >= space.M) throw std::invalid_argument("one_hot: bin out of range");
    std::vector<double> w(space.M, 0.0);
    w[bin] = 1.0;
    return Distribution{space, std::move(w)};
}

std::size_t nearest_bin(const ShapeSpace& space, double x) {
    double idx = std::floor(x * static_cast<double>(space.M));
    if (idx < 0) idx = 0;
    if (idx > static_cast<double>(space.M - 1)) idx = static_cast<double>(space.M - 1);
    return static_cast<std::size_t>(idx);
}

Distribution gaussian_distribution(const ShapeSpace& space, double mean, double sigma_Q) {
    if (sigma_Q < 0.0 || !std::isfinite(sigma_Q)) throw std::invalid_argument("gaussian_distribution: sigma_Q must be >= 0");
    if (mean < 0.0 || mean > 1.0) throw std::invalid_argument("gaussian_distribution: mean must lie in [0,1]");
    if (sigma_Q == 0.0) return one_hot(space, nearest_bin(space, mean));
    std::vector<double> w(space.M);
    for (std::size_t i = 0; i < space.M; ++i) {
        double d = std::fabs(space.centers[i] - mean);
        if (space.periodic) d = std::min(d, 1.0 - d);
        w[i] = std::exp(-d * d / (2.0 * sigma_Q * sigma_Q));
    }
    return normalized(space, std::move(w));
}

std::vector<double> lognormal_draws(double kappa, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    if (!(kappa > 0.0)) throw std::invalid_argument("lognormal: kappa must be positive");
    double s = std::sqrt(std::log1p(kappa * kappa));
    CounterRng rng(seed, RngTag::ShapeSpace, stream, 1);
    std::vector<double> x(n);
    for (auto& v : x) v = std::exp(s * rng.normal());
    return x;
}

Distribution lognormal_spike_distribution(const ShapeSpace& space, double kappa, std::size_t n_spikes,
                                          std::uint64_t seed) {
    if (!(kappa > 0.0)) throw std::invalid_argument("lognormal_spike_distribution: kappa must be positive");
    if (n_spikes == 0 || n_spikes > space.M)
        throw std::invalid_argument("lognormal_spike_distribution: n_spikes must be in [1, M]");
    // Partial Fisher-Yates for distinct spike positions.
    CounterRng rng(seed, RngTag::ShapeSpace, 0, 0);
    std::vector<std::size_t> idx(space.M);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n_spikes; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng() % (space.M - i));
        std::swap(idx[i], idx[j]);
    }
    double s = std::sqrt(std::log1p(kappa * kappa));
    auto x = lognormal_draws(kappa, n_spikes, seed, 0);
    std::vector<double> w(space.M, 0.0);
    for (std::size_t i = 0; i < n_spikes; ++i) {
        double lx = std::log(x[i]);
        double dens = std::exp(-lx * lx / (2.0 * s * s)) / (x[i] * s * std::sqrt(2.0 * M_PI));
        // The density never underflows for these draws, but keep spikes strictly positive regardless.
        w[idx[i]] = std::max(dens, std::numeric_limits<double>::min());
    }
    return normalized(space, std::move(w));
}

Distribution shift_distribution(const Distribution& dist, long k) {
    if (!dist.space.periodic) throw unsupported_topology("shift_distribution requires a periodic space");
    long M = static_cast<long>(dist.space.M);
    long s = ((k % M) + M) % M;
    std::vector<double> out(dist.p.size());
    for (long i = 0; i < M; ++i) out[static_cast<std::size_t>((i + s) % M)] = dist.p[static_cast<std::size_t>(i)];
    return Distribution{dist.space, std::move(out)};
}

bool Kernel::scalar_sigma() const {
    return std::all_of(sigma.begin(), sigma.end(), [&](double s) { return s == sigma.front(); });
}

Kernel gaussian_kernel(const ShapeSpace& space_d, const ShapeSpace& space_a, const std::vector<double>& sigma_per_d,
                       double f_max) {
    if (sigma_per_d.size() != space_d.M) throw std::invalid_argument("gaussian_kernel: one sigma per defender bin");
    if (!(f_max > 0.0 && f_max <= 1.0)) throw std::invalid_argument("gaussian_kernel: f_max must be in (0,1]");
    for (double s : sigma_per_d)
        if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
    bool periodic = space_d.periodic && space_a.periodic;
    Kernel k;
    k.n_def = space_d.M;
    k.n_att = space_a.M;
    k.sigma = sigma_per_d;
    k.f_max = f_max;
    k.periodic = periodic;
    k.f.resize(k.n_def * k.n_att);
    for (std::size_t d = 0; d < k.n_def; ++d) {
        double s2 = 2.0 * sigma_per_d[d] * sigma_per_d[d];
        for (std::size_t a = 0; a < k.n_att; ++a) {
            double x = std::fabs(space_d.centers[d] - space_a.centers[a]);
            if (periodic) x = std::min(x, 1.0 - x);
            k.f[d * k.n_att + a] = f_max * std::exp(-x * x / s2);
        }
    }
    return k;
}

Kernel gaussian_kernel(const ShapeSpace& space_d, const ShapeSpace& space_a, double sigma, double f_max) {
    return gaussian_kernel(space_d, space_a, std::vector<double>(space_d.M, sigma), f_max);
}

std::vector<double> piecewise_sigma(const ShapeSpace& space, const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("piecewise_sigma: no values");
    std::vector<double> out(space.M);
    for (std::size_t i = 0; i < space.M; ++i) {
        auto part = static_cast<std::size_t>(space.centers[i] * static_cast<double>(values.size()));
        out[i] = values[std::min(part, values.size() - 1)];
    }
    return out;
}

double wasserstein1(const Distribution& p, const Distribution& q) {
    if (!(p.space == q.space) || p.p.size() != q.p.size())
        throw std::invalid_argument("wasserstein1: distributions live on different spaces");
    double acc = 0.0, cdf = 0.0;
    for (std::size_t i = 0; i < p.p.size(); ++i) {
        cdf += p.p[i] - q.p[i];
        acc += std::fabs(cdf);
    }
    return acc * p.space.bin_width();
}

void write_csv(std::ostream& os, const Distribution& d) {
    os << "bin_center,probability\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < d.p.size(); ++i) os << d.space.centers[i] << ',' << d.p[i] << '\n';
}

Distribution read_csv(std::istream& is) {
    std::string line;
    std::vector<double> p;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            if (line.find("probability") != std::string::npos) continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos) throw std::invalid_argument("read_csv: malformed row: " + line);
        p.push_back(std::stod(line.substr(comma + 1)));
    }
    if (p.size() < 2) throw std::invalid_argument("read_csv: fewer than two bins");
    // Periodicity is not stored in the file; callers set it from their config.
    auto space = make_grid(p.size(), false);
    return normalized(space, std::move(p));
}

std::string to_json(const Distribution& d) {
    nlohmann::json j;
    j["centers"] = d.space.centers;
    j["p"] = d.p;
    j["periodic"] = d.space.periodic;
    return j.dump();
}

Distribution distribution_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    std::vector<double> p = j.at("p").get<std::vector<double>>();
    bool periodic = j.value("periodic", false);
    auto space = make_grid(p.size(), periodic);
    return normalized(space, std::move(p));
}

}  // namespace repertoire
