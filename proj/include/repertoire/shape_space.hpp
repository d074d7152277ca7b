#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace repertoire {

/// Thrown by operations that need a periodic axis.
class unsupported_topology : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Discretized type axis [0,1] with M bins centered at (i+0.5)/M.
struct ShapeSpace {
    std::size_t M = 0;
    std::vector<double> centers;
    bool periodic = false;

    double bin_width() const { return 1.0 / static_cast<double>(M); }
    /// Distance between two bins, wrapping when periodic.
    double distance(std::size_t i, std::size_t j) const;
    bool operator==(const ShapeSpace& o) const { return M == o.M && periodic == o.periodic; }
};

ShapeSpace make_grid(std::size_t M, bool periodic);

/// Probability vector over a ShapeSpace.
struct Distribution {
    ShapeSpace space;
    std::vector<double> p;

    std::size_t size() const { return p.size(); }
    double operator[](std::size_t i) const { return p[i]; }
    double mean() const;
    double stddev() const;
};

/// Builds a distribution from nonnegative weights, normalizing them.
Distribution normalized(const ShapeSpace& space, std::vector<double> w);
/// Throws std::invalid_argument unless p is on the simplex within tol.
void check_simplex(const Distribution& d, double tol = 1e-12);

Distribution uniform_distribution(const ShapeSpace& space);
Distribution one_hot(const ShapeSpace& space, std::size_t bin);
std::size_t nearest_bin(const ShapeSpace& space, double x);

Distribution gaussian_distribution(const ShapeSpace& space, double mean, double sigma_Q);

/// Log-normal spikes: n_spikes distinct uniform bins weighted by the log-normal
/// density of a log-normal draw with sigma^2 = ln(1 + kappa^2).
Distribution lognormal_spike_distribution(const ShapeSpace& space, double kappa, std::size_t n_spikes,
                                          std::uint64_t seed);
/// Raw log-normal draws used as spike heights (exposed for sampler checks).
std::vector<double> lognormal_draws(double kappa, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0);

Distribution shift_distribution(const Distribution& dist, long k);

/// Recognition probabilities f[d][a] on a defender axis by attacker axis.
/// Row-major; rows are defenders. sigma holds one bandwidth per row.
struct Kernel {
    std::size_t n_def = 0;
    std::size_t n_att = 0;
    std::vector<double> f;
    std::vector<double> sigma;
    double f_max = 1.0;
    bool periodic = false;

    double operator()(std::size_t d, std::size_t a) const { return f[d * n_att + a]; }
    const double* row(std::size_t d) const { return f.data() + d * n_att; }
    bool scalar_sigma() const;
};

Kernel gaussian_kernel(const ShapeSpace& space_d, const ShapeSpace& space_a, double sigma, double f_max = 1.0);
Kernel gaussian_kernel(const ShapeSpace& space_d, const ShapeSpace& space_a, const std::vector<double>& sigma_per_d,
                       double f_max = 1.0);
/// Per-defender bandwidths taking values[k] on the k-th equal part of [0,1].
std::vector<double> piecewise_sigma(const ShapeSpace& space, const std::vector<double>& values);

/// Earth mover's distance on the line: sum of |CDF difference| times bin width.
double wasserstein1(const Distribution& p, const Distribution& q);

void write_csv(std::ostream& os, const Distribution& d);
Distribution read_csv(std::istream& is);
std::string to_json(const Distribution& d);
Distribution distribution_from_json(const std::string& text);

}  // namespace repertoire
