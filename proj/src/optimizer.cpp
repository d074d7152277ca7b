#include "repertoire/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace repertoire {

namespace {

/// Objective restricted to the attacker types with positive mass.
class HarmProblem {
public:
    HarmProblem(const Distribution& Q, const Kernel& K, const HarmParams& params) : K_(K), params_(params) {
        if (Q.p.size() != K.n_att) throw std::invalid_argument("optimizer: attacker dimension mismatch");
        for (std::size_t a = 0; a < Q.p.size(); ++a) {
            if (Q.p[a] > 0.0) {
                types_.push_back(a);
                q_.push_back(Q.p[a]);
            }
        }
        nA_ = types_.size();
        F_.resize(K.n_def * nA_);
        for (std::size_t d = 0; d < K.n_def; ++d)
            for (std::size_t j = 0; j < nA_; ++j) F_[d * nA_ + j] = K(d, types_[j]);
    }

    std::size_t n_def() const { return K_.n_def; }

    void cover(const std::vector<double>& p, std::vector<double>& cov) const {
        cov.assign(nA_, 0.0);
        for (std::size_t d = 0; d < K_.n_def; ++d) {
            double pd = p[d];
            if (pd == 0.0) continue;
            const double* row = &F_[d * nA_];
            for (std::size_t j = 0; j < nA_; ++j) cov[j] += row[j] * pd;
        }
    }

    double objective(const std::vector<double>& p) const {
        std::vector<double> cov;
        cover(p, cov);
        return objective_from_cov(cov);
    }

    double objective_from_cov(const std::vector<double>& cov) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < nA_; ++j) {
            double f = fbar_closed(cov[j], params_);
            if (std::isinf(f)) return kInfiniteHarm;
            acc += q_[j] * f;
        }
        return acc;
    }

    /// g_d = -sum_j q_j Fbar'(cov_j) F[d][j]
    void signal(const std::vector<double>& cov, std::vector<double>& g) const {
        std::vector<double> w(nA_);
        for (std::size_t j = 0; j < nA_; ++j) w[j] = -q_[j] * fbar_prime(cov[j], params_);
        g.assign(K_.n_def, 0.0);
        for (std::size_t d = 0; d < K_.n_def; ++d) {
            const double* row = &F_[d * nA_];
            double s = 0.0;
            for (std::size_t j = 0; j < nA_; ++j) s += row[j] * w[j];
            g[d] = s;
        }
    }

    /// Hessian of the objective restricted to the bins in S.
    Eigen::MatrixXd hessian(const std::vector<double>& cov, const std::vector<std::size_t>& S) const {
        std::vector<double> w(nA_);
        for (std::size_t j = 0; j < nA_; ++j) w[j] = q_[j] * fbar_second(cov[j], params_);
        auto n = static_cast<Eigen::Index>(S.size());
        Eigen::MatrixXd B(n, static_cast<Eigen::Index>(nA_));
        for (Eigen::Index i = 0; i < n; ++i)
            for (std::size_t j = 0; j < nA_; ++j)
                B(i, static_cast<Eigen::Index>(j)) = F_[S[static_cast<std::size_t>(i)] * nA_ + j] * std::sqrt(w[j]);
        return B * B.transpose();
    }

private:
    const Kernel& K_;
    HarmParams params_;
    std::vector<std::size_t> types_;
    std::vector<double> q_;
    std::size_t nA_ = 0;
    std::vector<double> F_;
};

double kkt_from_signal(const std::vector<double>& p, const std::vector<double>& g, double thr) {
    double mass = 0.0, lam = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) {
        if (p[d] > thr) {
            mass += p[d];
            lam += p[d] * g[d];
        }
    }
    if (!(mass > 0.0)) return kInfiniteHarm;
    lam /= mass;
    if (!std::isfinite(lam) || lam == 0.0) return kInfiniteHarm;
    double on = 0.0, off = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) {
        if (p[d] > thr)
            on = std::max(on, std::fabs(g[d] - lam) / std::fabs(lam));
        else
            off = std::max(off, std::max(0.0, g[d] - lam) / std::fabs(lam));
    }
    return on + off;
}

struct Solver {
    const HarmProblem& prob;
    const OptimizerOptions& opts;
    OptimizerReport& rep;
    std::vector<double> p;
    double obj = 0.0;
    std::size_t iters = 0;

    void record() {
        if (opts.record_trace) rep.objective_trace.push_back(obj);
    }

    double kkt() const {
        std::vector<double> cov, g;
        prob.cover(p, cov);
        prob.signal(cov, g);
        return kkt_from_signal(p, g, opts.support_threshold);
    }

    /// Entropic mirror descent; returns true once the KKT tolerance is met.
    bool mirror_descent(std::size_t budget) {
        const std::size_t n = p.size();
        std::vector<double> cov, g, trial(n), expo(n);
        double eta = 1.0;
        for (std::size_t it = 0; it < budget && iters < opts.max_iters; ++it) {
            prob.cover(p, cov);
            prob.signal(cov, g);
            if (it % 25 == 0 && kkt_from_signal(p, g, opts.support_threshold) <= opts.kkt_tolerance) return true;
            double lam = 0.0;
            for (std::size_t d = 0; d < n; ++d) lam += p[d] * g[d];
            if (!(lam > 0.0) || !std::isfinite(lam)) return false;
            bool accepted = false;
            while (eta > 1e-20) {
                double emax = -std::numeric_limits<double>::infinity();
                for (std::size_t d = 0; d < n; ++d) {
                    expo[d] = eta * (g[d] / lam - 1.0);
                    if (p[d] > 0.0) emax = std::max(emax, expo[d]);
                }
                double z = 0.0;
                for (std::size_t d = 0; d < n; ++d) {
                    trial[d] = p[d] > 0.0 ? p[d] * std::exp(expo[d] - emax) : 0.0;
                    z += trial[d];
                }
                for (double& x : trial) x /= z;
                double o = prob.objective(trial);
                if (o <= obj) {
                    p.swap(trial);
                    obj = o;
                    accepted = true;
                    break;
                }
                eta *= 0.5;
            }
            ++iters;
            if (!accepted) return false;
            record();
            eta = std::min(eta * 1.5, 1e3);
        }
        return kkt() <= opts.kkt_tolerance;
    }

    /// Equality-constrained Newton on an active set, growing the set with the
    /// most profitable excluded bin until no bin outside it is profitable.
    bool newton_polish() {
        const std::size_t n = p.size();
        const double thr = opts.support_threshold;
        std::vector<bool> in(n, false);
        for (std::size_t d = 0; d < n; ++d) in[d] = p[d] > thr;
        std::vector<double> cov, g, trial(n);
        double mu = 1e-8;
        for (int outer = 0; outer < 500 && iters < opts.max_iters; ++outer) {
            for (int inner = 0; inner < 200 && iters < opts.max_iters; ++inner) {
                std::vector<std::size_t> S;
                for (std::size_t d = 0; d < n; ++d)
                    if (in[d]) S.push_back(d);
                prob.cover(p, cov);
                prob.signal(cov, g);
                double mass = 0.0, lam = 0.0;
                for (auto d : S) {
                    mass += p[d];
                    lam += p[d] * g[d];
                }
                lam /= mass;
                double spread = 0.0;
                for (auto d : S) spread = std::max(spread, std::fabs(g[d] - lam) / lam);
                if (spread < 0.1 * opts.kkt_tolerance) break;

                auto m = static_cast<Eigen::Index>(S.size());
                Eigen::MatrixXd H = prob.hessian(cov, S);
                H.diagonal().array() += mu * H.trace() / static_cast<double>(m);
                Eigen::MatrixXd Kmat = Eigen::MatrixXd::Zero(m + 1, m + 1);
                Kmat.topLeftCorner(m, m) = H;
                Kmat.block(0, m, m, 1).setOnes();
                Kmat.block(m, 0, 1, m).setOnes();
                Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
                for (Eigen::Index i = 0; i < m; ++i) rhs(i) = g[S[static_cast<std::size_t>(i)]];
                Eigen::VectorXd sol = Kmat.partialPivLu().solve(rhs);
                Eigen::VectorXd dp = sol.head(m);
                if (!dp.allFinite()) {
                    mu *= 10.0;
                    if (mu > 1e6) break;
                    continue;
                }
                double slope = 0.0;
                for (Eigen::Index i = 0; i < m; ++i) slope -= g[S[static_cast<std::size_t>(i)]] * dp(i);
                if (!(slope < 0.0)) {
                    mu *= 10.0;
                    if (mu > 1e6) break;
                    continue;
                }
                double tmax = 1.0;
                std::size_t blocking = n;
                for (Eigen::Index i = 0; i < m; ++i) {
                    if (dp(i) < 0.0) {
                        double r = -p[S[static_cast<std::size_t>(i)]] / dp(i);
                        if (r < tmax) {
                            tmax = r;
                            blocking = S[static_cast<std::size_t>(i)];
                        }
                    }
                }
                double t = tmax;
                bool ok = false;
                while (t > 1e-14) {
                    trial = p;
                    for (Eigen::Index i = 0; i < m; ++i) {
                        auto d = S[static_cast<std::size_t>(i)];
                        trial[d] = std::max(0.0, p[d] + t * dp(i));
                    }
                    double o = prob.objective(trial);
                    if (o <= obj + 1e-4 * t * slope) {
                        ok = true;
                        obj = o;
                        break;
                    }
                    t *= 0.5;
                }
                ++iters;
                if (!ok) {
                    mu *= 10.0;
                    if (mu > 1e6) break;
                    continue;
                }
                if (t == tmax && tmax < 1.0 && blocking < n) {
                    trial[blocking] = 0.0;
                    in[blocking] = false;
                }
                double z = std::accumulate(trial.begin(), trial.end(), 0.0);
                for (double& x : trial) x /= z;
                p.swap(trial);
                obj = prob.objective(p);
                for (std::size_t d = 0; d < n; ++d)
                    if (in[d] && p[d] <= 0.0) in[d] = false;
                if (t == 1.0) mu = std::max(mu * 0.3, 1e-14);
                record();
            }
            prob.cover(p, cov);
            prob.signal(cov, g);
            double mass = 0.0, lam = 0.0;
            for (std::size_t d = 0; d < n; ++d) {
                if (in[d]) {
                    mass += p[d];
                    lam += p[d] * g[d];
                }
            }
            if (!(mass > 0.0)) return false;
            lam /= mass;
            double worst = 0.0;
            std::size_t add = n;
            for (std::size_t d = 0; d < n; ++d) {
                if (in[d]) continue;
                double v = (g[d] - lam) / lam;
                if (v > worst) {
                    worst = v;
                    add = d;
                }
            }
            if (add == n || worst < 0.1 * opts.kkt_tolerance) break;
            in[add] = true;
            mu = 1e-8;
        }
        return kkt() <= opts.kkt_tolerance;
    }
};

}  // namespace

std::size_t support_size(const std::vector<double>& p, double threshold) {
    return static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [&](double x) { return x > threshold; }));
}

std::vector<double> descent_signal(const std::vector<double>& P_d, const Distribution& Q_a, const Kernel& kernel,
                                   const HarmParams& params) {
    HarmProblem prob(Q_a, kernel, params);
    std::vector<double> cov, g;
    prob.cover(P_d, cov);
    prob.signal(cov, g);
    return g;
}

double kkt_residual(const std::vector<double>& P_d, const Distribution& Q_a, const Kernel& kernel,
                    const HarmParams& params, double support_threshold) {
    if (P_d.size() != kernel.n_def) throw std::invalid_argument("kkt_residual: defender dimension mismatch");
    HarmProblem prob(Q_a, kernel, params);
    std::vector<double> cov, g;
    prob.cover(P_d, cov);
    for (double c : cov)
        if (!(c > 0.0)) return kInfiniteHarm;
    prob.signal(cov, g);
    return kkt_from_signal(P_d, g, support_threshold);
}

double kkt_residual(const Distribution& P_d, const Distribution& Q_a, const Kernel& kernel, const HarmParams& params,
                    double support_threshold) {
    return kkt_residual(P_d.p, Q_a, kernel, params, support_threshold);
}

OptimizerReport minimize_harm(const Distribution& Q_a, const Kernel& kernel, const HarmParams& params,
                              const OptimizerOptions& opts) {
    params.validate();
    check_simplex(Q_a, 1e-9);
    HarmProblem prob(Q_a, kernel, params);
    const std::size_t n = kernel.n_def;
    OptimizerReport rep;
    Solver s{prob, opts, rep, {}, 0.0, 0};
    if (opts.initial.empty()) {
        s.p.assign(n, 1.0 / static_cast<double>(n));
    } else {
        if (opts.initial.size() != n) throw std::invalid_argument("minimize_harm: warm start has wrong size");
        // Blend a little uniform mass in so no bin is frozen at zero.
        double z = std::accumulate(opts.initial.begin(), opts.initial.end(), 0.0);
        s.p.resize(n);
        for (std::size_t d = 0; d < n; ++d) s.p[d] = (1.0 - 1e-3) * opts.initial[d] / z + 1e-3 / static_cast<double>(n);
    }
    s.obj = prob.objective(s.p);
    s.record();

    bool done = s.mirror_descent(std::min(opts.md_budget, opts.max_iters));
    if (!done && opts.newton_polish) done = s.newton_polish();
    if (!done && s.iters < opts.max_iters) done = s.mirror_descent(opts.max_iters - s.iters);

    ShapeSpace space = (n == Q_a.space.M) ? Q_a.space : make_grid(n, false);
    rep.p_star = Distribution{space, s.p};
    rep.objective = harm_of(Q_a, s.p, kernel, params);
    rep.kkt_residual = s.kkt();
    rep.support_size = support_size(s.p, opts.support_threshold);
    rep.iterations = s.iters;
    rep.converged = rep.kkt_residual <= opts.kkt_tolerance;
    return rep;
}

namespace {

std::vector<std::complex<double>> dft(const std::vector<double>& x, bool inverse = false) {
    const std::size_t M = x.size();
    std::vector<std::complex<double>> out(M);
    double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < M; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            double ang = sign * 2.0 * M_PI * static_cast<double>((k * j) % M) / static_cast<double>(M);
            acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

std::vector<double> idft_real(const std::vector<std::complex<double>>& X) {
    const std::size_t M = X.size();
    std::vector<double> out(M);
    for (std::size_t j = 0; j < M; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < M; ++k) {
            double ang = 2.0 * M_PI * static_cast<double>((k * j) % M) / static_cast<double>(M);
            acc += X[k].real() * std::cos(ang) - X[k].imag() * std::sin(ang);
        }
        out[j] = acc / static_cast<double>(M);
    }
    return out;
}

}  // namespace

FourierResult fourier_solve(const Distribution& Q_a, const Kernel& kernel, const HarmParams& params) {
    params.validate();
    if (!Q_a.space.periodic || !kernel.periodic)
        throw unsupported_topology("fourier_solve requires a periodic space");
    if (!kernel.scalar_sigma() || kernel.n_def != kernel.n_att || kernel.n_att != Q_a.p.size())
        throw std::invalid_argument("fourier_solve requires a square translation-invariant kernel");
    if (params.form != HarmForm::PowerLaw)
        throw std::invalid_argument("fourier_solve: interior condition implemented for PowerLaw harm");
    const std::size_t M = Q_a.p.size();

    // Interior stationarity makes the optimal coverage proportional to Q^(1/(1+alpha)).
    std::vector<double> target(M);
    for (std::size_t a = 0; a < M; ++a) target[a] = std::pow(Q_a.p[a], 1.0 / (1.0 + params.alpha));
    double row_sum = 0.0;
    for (std::size_t a = 0; a < M; ++a) row_sum += kernel(0, a);
    double tsum = std::accumulate(target.begin(), target.end(), 0.0);
    for (double& t : target) t *= row_sum / tsum;

    std::vector<double> column(M);
    for (std::size_t j = 0; j < M; ++j) column[j] = kernel(0, j);
    auto T = dft(target);
    auto C = dft(column);
    double t0 = std::abs(T[0]);
    double c0 = std::abs(C[0]);
    std::vector<std::complex<double>> P(M);
    for (std::size_t k = 0; k < M; ++k) {
        if (std::abs(T[k]) < 1e-13 * t0) continue;
        if (std::abs(C[k]) < 1e-12 * c0)
            throw ill_conditioned_deconvolution("fourier_solve: kernel spectrum vanishes where the target does not");
        P[k] = T[k] / C[k];
    }
    auto p = idft_real(P);
    FourierResult res;
    res.min_entry = *std::min_element(p.begin(), p.end());
    res.feasible = res.min_entry >= -1e-9;
    for (double& x : p) x = std::max(0.0, x);
    res.p = normalized(Q_a.space, std::move(p));
    return res;
}

std::string to_json(const OptimizerReport& r) {
    nlohmann::json j;
    j["objective"] = r.objective;
    j["kkt_residual"] = r.kkt_residual;
    j["support_size"] = r.support_size;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["p_star"] = r.p_star.p;
    return j.dump(2);
}

}  // namespace repertoire
