#pragma once

#include <iosfwd>
#include <limits>
#include <vector>

#include "repertoire/shape_space.hpp"

namespace repertoire {

enum class HarmForm { PowerLaw, Saturating };

/// Per-interaction harm F(m) = m^alpha (PowerLaw) or 1 - exp(-beta m) (Saturating).
struct HarmParams {
    HarmForm form = HarmForm::PowerLaw;
    double alpha = 1.0;
    double beta = 1.0;

    void validate() const;
};

/// Total recognition probability per attacker type.
struct Coverage {
    std::vector<double> ptilde;
};

/// Per-type expected harm; infinite entries mark types with zero coverage.
struct HarmVector {
    std::vector<double> fbar;
    std::vector<bool> infinite;
};

constexpr double kInfiniteHarm = std::numeric_limits<double>::infinity();

Coverage coverage(const Distribution& P_d, const Kernel& kernel);
Coverage coverage(const std::vector<double>& p, const Kernel& kernel);

/// Closed-form expected harm at coverage x and its first two derivatives in x.
double fbar_closed(double x, const HarmParams& params);
double fbar_prime(double x, const HarmParams& params);
double fbar_second(double x, const HarmParams& params);

/// Gamma(1+alpha) / ptilde^alpha; PowerLaw only.
HarmVector analytical_harm_per_type(const Coverage& cov, const HarmParams& params);
/// Numerical integral of ptilde * int F(m) exp(-m ptilde) dm.
HarmVector empirical_harm_quadrature(const Coverage& cov, const HarmParams& params);
double empirical_harm_quadrature(double ptilde, const HarmParams& params);

double total_harm(const Distribution& Q_a, const HarmVector& fbar);
/// total_harm of P_d against Q_a under the closed-form per-type harm.
double harm_of(const Distribution& Q_a, const std::vector<double>& P_d, const Kernel& kernel, const HarmParams& params);

/// Gaussian optimum for Gaussian Q: variance (1+alpha) sigma_Q^2 - sigma^2,
/// one-hot at the mean once that variance is no longer positive.
Distribution gaussian_optimal_defender(double sigma_Q, double sigma, double alpha, const ShapeSpace& space,
                                       double mean = 0.5);

/// Gauss-Laguerre nodes and weights for weight exp(-s) on [0, inf).
struct LaguerreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const LaguerreRule& gauss_laguerre(std::size_t n = 64);

/// CSV rows: bin_center, q_a, ptilde_a, fbar_a, q_fbar.
void write_harm_csv(std::ostream& os, const Distribution& Q_a, const Coverage& cov, const HarmVector& fbar);

}  // namespace repertoire
