#pragma once

#include <string>
#include <vector>

#include "repertoire/harm_model.hpp"
#include "repertoire/shape_space.hpp"

namespace repertoire {

struct OptimizerOptions {
    std::size_t max_iters = 50000;
    double kkt_tolerance = 1e-4;
    /// Bins above this mass count as atoms of the support.
    double support_threshold = 1e-6;
    /// Mirror-descent iterations tried before the active-set Newton polish takes over.
    std::size_t md_budget = 2000;
    bool newton_polish = true;
    /// Optional warm start; uniform when empty.
    std::vector<double> initial;
    bool record_trace = false;
};

struct OptimizerReport {
    Distribution p_star;
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::size_t support_size = 0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Objective after every accepted step (when requested).
    std::vector<double> objective_trace;
};

/// Minimizes sum_a Q_a Fbar(ptilde_a) over the simplex of defender distributions.
OptimizerReport minimize_harm(const Distribution& Q_a, const Kernel& kernel, const HarmParams& params,
                              const OptimizerOptions& opts = {});

/// Stationarity signal g_d = -sum_a Q_a Fbar'(ptilde_a) f[d][a].
std::vector<double> descent_signal(const std::vector<double>& P_d, const Distribution& Q_a, const Kernel& kernel,
                                   const HarmParams& params);

/// Relative KKT violation: spread of g_d over the support plus the largest
/// profitable off-support bin, both scaled by the support average of g.
double kkt_residual(const std::vector<double>& P_d, const Distribution& Q_a, const Kernel& kernel,
                    const HarmParams& params, double support_threshold = 1e-6);
double kkt_residual(const Distribution& P_d, const Distribution& Q_a, const Kernel& kernel, const HarmParams& params,
                    double support_threshold = 1e-6);

std::size_t support_size(const std::vector<double>& p, double threshold = 1e-6);

class ill_conditioned_deconvolution : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FourierResult {
    bool feasible = false;
    Distribution p;
    double min_entry = 0.0;
};

/// Interior solution by deconvolving the target coverage with the kernel's
/// discrete Fourier spectrum. Needs a periodic space and a scalar bandwidth.
FourierResult fourier_solve(const Distribution& Q_a, const Kernel& kernel, const HarmParams& params);

std::string to_json(const OptimizerReport& report);

}  // namespace repertoire
