#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "repertoire/harm_model.hpp"
#include "repertoire/optimizer.hpp"
#include "repertoire/shape_space.hpp"

namespace repertoire {

/// f[d][u][a] = f_max exp(-(d-a)^2 / (2 u^2 sigma^2)), stored flattened with
/// defender index d * U + u so harm-model and optimizer code apply unchanged.
struct MobileKernel {
    Kernel flat;
    ShapeSpace space_d;
    std::vector<double> speeds;
    double sigma = 0.0;

    std::size_t n_speeds() const { return speeds.size(); }
    std::size_t index(std::size_t d, std::size_t u) const { return d * speeds.size() + u; }
    double operator()(std::size_t d, std::size_t u, std::size_t a) const { return flat(index(d, u), a); }
};

MobileKernel mobile_kernel(const ShapeSpace& space_d, const std::vector<double>& speeds, const ShapeSpace& space_a,
                           double sigma, double f_max = 1.0);

struct MobileSolution {
    /// Joint P[d][u], flattened like the kernel.
    std::vector<double> joint;
    Distribution d_marginal;
    std::vector<double> u_marginal;
    OptimizerReport report;
};

MobileSolution optimal_mobile_distribution(const Distribution& Q_a, const MobileKernel& kernel,
                                           const HarmParams& params, const OptimizerOptions& opts = {});

struct PerimeterScenario {
    double epsilon = 0.01;
    double horizon = 1.0;
    double dt = 0.01;

    void validate() const;
};

/// Final gap after a defender starting at d0 chases an attacker above a at speed u.
double perimeter_final_gap(double d0, double a, double u, const PerimeterScenario& sc);

struct PerimeterTrial {
    double d0 = 0.0;
    double a = 0.0;
    double u = 0.0;
    bool captured = false;
};

struct PerimeterResult {
    double recognition_rate = 0.0;
    std::size_t harm_count = 0;
    std::vector<PerimeterTrial> trials;
};

PerimeterResult perimeter_sim(const MobileKernel& kernel, const std::vector<double>& P_du, const Distribution& Q_a,
                              const PerimeterScenario& scenario, std::size_t n_trials, std::uint64_t seed);

struct RegimeRow {
    double u = 0.0;
    double sigma_eff = 0.0;
    std::size_t support = 0;
    double width = 0.0;
    /// Mass within two bins of the marginal's mode.
    double peak_mass = 0.0;
    bool collapsed = false;
    double harm = 0.0;
    double scaled_harm = 0.0;
};

/// Single-speed sweep: for each u, the optimum with bandwidth u*sigma (KKT tolerance at most 1e-8)
/// and its harm scaled by (sigma u / sigma_Q)^alpha.
std::vector<RegimeRow> mobile_regimes(const Distribution& Q_a, double sigma, double sigma_Q,
                                      const std::vector<double>& speeds, const HarmParams& params,
                                      const OptimizerOptions& opts = {}, std::size_t jobs = 1);

/// Mass of p within `radius` bins of its largest entry.
double peak_mass(const std::vector<double>& p, std::size_t radius = 2);

void write_joint_csv(std::ostream& os, const MobileKernel& kernel, const std::vector<double>& joint);
void write_csv(std::ostream& os, const std::vector<RegimeRow>& rows);

}  // namespace repertoire
