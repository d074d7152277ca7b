#pragma once

#include <iosfwd>
#include <vector>

#include "repertoire/harm_model.hpp"
#include "repertoire/shape_space.hpp"

namespace repertoire {

struct CompetitionParams {
    double c = 1.0;
    /// Scale of the resource-sharing function; calibrated from a pilot run when nonpositive.
    double b_prime = 0.0;
    double dt = 1e-3;
    /// Reference population total normalizing coverage inside phi.
    double n_st = 1.0;
    std::size_t harm_every = 1000;
    std::size_t pilot_steps = 20000;
    double support_threshold = 1e-6;
    /// Bins below this fraction of n_st are set to zero.
    double extinction = 1e-15;
    HarmParams harm;
};

struct CompetitionState {
    std::vector<double> N;
    CompetitionParams params;
};

/// phi(x) = -b' dFbar/dm at m = x / n_st; for PowerLaw b' alpha Gamma(1+alpha) (x/n_st)^(-alpha-1).
double phi(double x, double b_prime, double n_st, const HarmParams& harm);

/// One explicit Euler step of dN_d/dt = N_d [sum_a Q_a phi(Ntilde_a) f[d][a] - c].
CompetitionState step_dynamics(const CompetitionState& state, const Distribution& Q, const Kernel& kernel);

struct CompetitionRow {
    std::size_t step = 0;
    double total_harm = 0.0;
    double sum_N = 0.0;
    double max_residual = 0.0;
};

struct CompetitionResult {
    Distribution P_d;
    std::vector<double> N;
    std::vector<CompetitionRow> trajectory;
    bool converged = false;
    std::size_t steps = 0;
    double b_prime = 0.0;
    double dt = 0.0;
    double final_harm = 0.0;
};

CompetitionResult run_to_fixed_point(const std::vector<double>& init_N, const Distribution& Q, const Kernel& kernel,
                                     const CompetitionParams& params, std::size_t max_steps);

/// b' putting the fixed-point population total at n_st for the given defender distribution.
double calibrate_b_prime(const std::vector<double>& P, const Distribution& Q, const Kernel& kernel,
                         const CompetitionParams& params);

/// Coefficient of variation of -sum_a Q_a Fbar'(Ntilde_a/n_st) f[d][a] over bins
/// holding more than support_threshold of the population.
double stationarity_cv(const std::vector<double>& N, const Distribution& Q, const Kernel& kernel,
                       const CompetitionParams& params);

void write_csv(std::ostream& os, const std::vector<CompetitionRow>& rows);

}  // namespace repertoire
