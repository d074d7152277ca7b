#include "repertoire/competition.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace repertoire {

double phi(double x, double b_prime, double n_st, const HarmParams& harm) {
    if (!(x > 0.0)) throw std::invalid_argument("phi: argument must be positive");
    return -b_prime * fbar_prime(x / n_st, harm);
}

namespace {

/// Kernel columns restricted to attacker types with positive Q mass.
struct Compact {
    std::vector<double> q;
    std::vector<double> F;
    std::size_t nA = 0;
    std::size_t nD = 0;

    Compact(const Distribution& Q, const Kernel& K) : nD(K.n_def) {
        std::vector<std::size_t> types;
        for (std::size_t a = 0; a < Q.p.size(); ++a)
            if (Q.p[a] > 0.0) {
                types.push_back(a);
                q.push_back(Q.p[a]);
            }
        nA = types.size();
        F.resize(nD * nA);
        for (std::size_t d = 0; d < nD; ++d)
            for (std::size_t j = 0; j < nA; ++j) F[d * nA + j] = K(d, types[j]);
    }

    void ntilde(const std::vector<double>& N, std::vector<double>& out) const {
        out.assign(nA, 0.0);
        for (std::size_t d = 0; d < nD; ++d) {
            double n = N[d];
            if (n == 0.0) continue;
            const double* row = &F[d * nA];
            for (std::size_t j = 0; j < nA; ++j) out[j] += row[j] * n;
        }
    }

    /// Per-defender growth signal sum_j q_j phi(Ntilde_j) F[d][j] (b' folded into phi).
    void growth(const std::vector<double>& N, const CompetitionParams& p, double b_prime, std::vector<double>& g) const {
        std::vector<double> nt;
        ntilde(N, nt);
        std::vector<double> w(nA);
        for (std::size_t j = 0; j < nA; ++j) w[j] = nt[j] > 0.0 ? q[j] * phi(nt[j], b_prime, p.n_st, p.harm) : 0.0;
        g.assign(nD, 0.0);
        for (std::size_t d = 0; d < nD; ++d) {
            if (N[d] == 0.0) continue;
            const double* row = &F[d * nA];
            double s = 0.0;
            for (std::size_t j = 0; j < nA; ++j) s += row[j] * w[j];
            g[d] = s;
        }
    }
};

double euler_step(std::vector<double>& N, const Compact& cp, const CompetitionParams& p, double b_prime, double dt,
                  std::vector<double>& g) {
    cp.growth(N, p, b_prime, g);
    double max_rate = 0.0;
    double floor = p.extinction * p.n_st;
    for (std::size_t d = 0; d < N.size(); ++d) {
        if (N[d] == 0.0) continue;
        double rate = N[d] * (g[d] - p.c);
        max_rate = std::max(max_rate, std::fabs(rate));
        double x = std::max(0.0, N[d] + dt * rate);
        N[d] = x < floor ? 0.0 : x;
    }
    return max_rate;
}

std::vector<double> induced(const std::vector<double>& N) {
    double s = std::accumulate(N.begin(), N.end(), 0.0);
    std::vector<double> p(N.size());
    for (std::size_t d = 0; d < N.size(); ++d) p[d] = N[d] / s;
    return p;
}

}  // namespace

CompetitionState step_dynamics(const CompetitionState& state, const Distribution& Q, const Kernel& kernel) {
    if (state.N.size() != kernel.n_def) throw std::invalid_argument("step_dynamics: dimension mismatch");
    if (std::none_of(state.N.begin(), state.N.end(), [](double x) { return x > 0.0; }))
        throw std::domain_error("step_dynamics: extinct population");
    Compact cp(Q, kernel);
    CompetitionState next = state;
    std::vector<double> g;
    euler_step(next.N, cp, state.params, state.params.b_prime, state.params.dt, g);
    return next;
}

double calibrate_b_prime(const std::vector<double>& P, const Distribution& Q, const Kernel& kernel,
                         const CompetitionParams& params) {
    // With N = n_st * P, the total is stationary when b' sum_a Q_a (-Fbar'(Ptilde_a)) Ptilde_a = c.
    auto cov = coverage(P, kernel);
    double acc = 0.0;
    for (std::size_t a = 0; a < Q.p.size(); ++a)
        if (Q.p[a] > 0.0) acc += Q.p[a] * (-fbar_prime(cov.ptilde[a], params.harm)) * cov.ptilde[a];
    if (!(acc > 0.0) || !std::isfinite(acc)) throw std::domain_error("calibrate_b_prime: degenerate coverage");
    return params.c / acc;
}

double stationarity_cv(const std::vector<double>& N, const Distribution& Q, const Kernel& kernel,
                       const CompetitionParams& params) {
    Compact cp(Q, kernel);
    std::vector<double> g;
    // Unit b' gives -sum_a Q_a Fbar'(Ntilde_a / n_st) f[d][a].
    cp.growth(N, params, 1.0, g);
    double total = std::accumulate(N.begin(), N.end(), 0.0);
    std::vector<double> vals;
    for (std::size_t d = 0; d < N.size(); ++d)
        if (N[d] > params.support_threshold * total) vals.push_back(g[d]);
    if (vals.empty()) return std::numeric_limits<double>::infinity();
    double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    return std::sqrt(var) / std::fabs(mean);
}

CompetitionResult run_to_fixed_point(const std::vector<double>& init_N, const Distribution& Q, const Kernel& kernel,
                                     const CompetitionParams& params, std::size_t max_steps) {
    if (init_N.size() != kernel.n_def) throw std::invalid_argument("run_to_fixed_point: dimension mismatch");
    if (!(params.c > 0.0) || !(params.n_st > 0.0) || !(params.dt > 0.0))
        throw std::invalid_argument("run_to_fixed_point: c, n_st and dt must be positive");
    if (std::none_of(init_N.begin(), init_N.end(), [](double x) { return x > 0.0; }))
        throw std::domain_error("run_to_fixed_point: extinct initial population");
    Compact cp(Q, kernel);
    std::vector<double> g;

    double dt = params.dt;
    for (int attempt = 0; attempt < 6; ++attempt, dt *= 0.5) {
        double b = params.b_prime;
        bool diverged = false;
        if (!(b > 0.0)) {
            // Pilot run from the initial state, then match the fixed-point total to n_st.
            b = calibrate_b_prime(induced(init_N), Q, kernel, params);
            std::vector<double> N = init_N;
            for (std::size_t s = 0; s < params.pilot_steps; ++s) {
                euler_step(N, cp, params, b, dt, g);
                double tot = std::accumulate(N.begin(), N.end(), 0.0);
                if (!(tot < 1e12 && tot > 1e-12)) {
                    diverged = true;
                    break;
                }
            }
            if (diverged) continue;
            b = calibrate_b_prime(induced(N), Q, kernel, params);
        }

        CompetitionResult res;
        res.b_prime = b;
        res.dt = dt;
        std::vector<double> N = init_N;
        std::size_t s = 0;
        for (; s < max_steps; ++s) {
            double max_rate = euler_step(N, cp, params, b, dt, g);
            double tot = std::accumulate(N.begin(), N.end(), 0.0);
            if (!(tot < 1e12 && tot > 1e-12)) {
                diverged = true;
                break;
            }
            bool converged = max_rate / params.n_st < 1e-8;
            if ((s + 1) % params.harm_every == 0 || converged || s + 1 == max_steps) {
                res.trajectory.push_back(
                    {s + 1, harm_of(Q, induced(N), kernel, params.harm), tot, max_rate / params.n_st});
            }
            if (converged) {
                res.converged = true;
                ++s;
                break;
            }
        }
        if (diverged) continue;
        res.steps = s;
        res.N = N;
        res.P_d = normalized(Q.space.M == N.size() ? Q.space : make_grid(N.size(), false), induced(N));
        res.final_harm = harm_of(Q, res.P_d.p, kernel, params.harm);
        return res;
    }
    throw std::runtime_error("run_to_fixed_point: population diverged; use a smaller dt");
}

void write_csv(std::ostream& os, const std::vector<CompetitionRow>& rows) {
    os << "step,total_harm,sum_N,max_residual\n" << std::setprecision(17);
    for (const auto& r : rows) os << r.step << ',' << r.total_harm << ',' << r.sum_N << ',' << r.max_residual << '\n';
}

}  // namespace repertoire
