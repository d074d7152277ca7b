#include "repertoire/harm_model.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/exp_sinh.hpp>

namespace repertoire {

void HarmParams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("HarmParams: alpha must be finite and > 0");
    if (form == HarmForm::Saturating && !(beta > 0.0)) throw std::invalid_argument("HarmParams: beta must be > 0");
}

Coverage coverage(const std::vector<double>& p, const Kernel& kernel) {
    if (p.size() != kernel.n_def) throw std::invalid_argument("coverage: defender dimension mismatch");
    Coverage c;
    c.ptilde.assign(kernel.n_att, 0.0);
    for (std::size_t d = 0; d < kernel.n_def; ++d) {
        double pd = p[d];
        if (pd == 0.0) continue;
        const double* row = kernel.row(d);
        for (std::size_t a = 0; a < kernel.n_att; ++a) c.ptilde[a] += row[a] * pd;
    }
    for (double& x : c.ptilde) x = std::min(x, kernel.f_max);
    return c;
}

Coverage coverage(const Distribution& P_d, const Kernel& kernel) { return coverage(P_d.p, kernel); }

double fbar_closed(double x, const HarmParams& params) {
    if (!(x > 0.0)) return kInfiniteHarm;
    if (params.form == HarmForm::PowerLaw) return std::tgamma(1.0 + params.alpha) * std::pow(x, -params.alpha);
    return params.beta / (params.beta + x);
}

double fbar_prime(double x, const HarmParams& params) {
    if (!(x > 0.0)) return -kInfiniteHarm;
    if (params.form == HarmForm::PowerLaw)
        return -params.alpha * std::tgamma(1.0 + params.alpha) * std::pow(x, -params.alpha - 1.0);
    double s = params.beta + x;
    return -params.beta / (s * s);
}

double fbar_second(double x, const HarmParams& params) {
    if (!(x > 0.0)) return kInfiniteHarm;
    if (params.form == HarmForm::PowerLaw)
        return params.alpha * (params.alpha + 1.0) * std::tgamma(1.0 + params.alpha) * std::pow(x, -params.alpha - 2.0);
    double s = params.beta + x;
    return 2.0 * params.beta / (s * s * s);
}

HarmVector analytical_harm_per_type(const Coverage& cov, const HarmParams& params) {
    params.validate();
    if (params.form != HarmForm::PowerLaw)
        throw std::invalid_argument("analytical_harm_per_type: closed form defined for PowerLaw harm");
    HarmVector h;
    h.fbar.resize(cov.ptilde.size());
    h.infinite.resize(cov.ptilde.size());
    double g = std::tgamma(1.0 + params.alpha);
    for (std::size_t a = 0; a < cov.ptilde.size(); ++a) {
        double x = cov.ptilde[a];
        h.infinite[a] = !(x > 0.0);
        h.fbar[a] = h.infinite[a] ? kInfiniteHarm : g * std::pow(x, -params.alpha);
    }
    return h;
}

const LaguerreRule& gauss_laguerre(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, LaguerreRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    // Golub-Welsch: eigen-decomposition of the Jacobi matrix of the Laguerre recurrence.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        auto ii = static_cast<Eigen::Index>(i);
        J(ii, ii) = 2.0 * static_cast<double>(i) + 1.0;
        if (i + 1 < n) {
            J(ii, ii + 1) = static_cast<double>(i + 1);
            J(ii + 1, ii) = static_cast<double>(i + 1);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    LaguerreRule rule;
    for (std::size_t i = 0; i < n; ++i) {
        auto ii = static_cast<Eigen::Index>(i);
        rule.nodes.push_back(es.eigenvalues()(ii));
        double v0 = es.eigenvectors()(0, ii);
        rule.weights.push_back(v0 * v0);
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

double empirical_harm_quadrature(double ptilde, const HarmParams& params) {
    params.validate();
    if (!(ptilde > 0.0)) return kInfiniteHarm;
    // Substituting s = m * ptilde turns the integral into int F(s/ptilde) e^{-s} ds.
    auto F = [&](double s) {
        double m = s / ptilde;
        if (params.form == HarmForm::PowerLaw) return std::pow(m, params.alpha);
        return -std::expm1(-params.beta * m);
    };
    bool integer_alpha = params.form == HarmForm::PowerLaw && params.alpha == std::floor(params.alpha) &&
                         params.alpha <= 60.0;
    if (integer_alpha) {
        const auto& rule = gauss_laguerre(64);
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * F(rule.nodes[i]);
        return acc;
    }
    // Non-polynomial integrands (fractional powers, saturating harm): double-exponential rule.
    // The power law is combined in log space so huge abscissae underflow to zero instead of inf * 0.
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate(
        [&](double s) {
            if (!(s > 0.0)) return 0.0;
            if (params.form == HarmForm::PowerLaw) return std::exp(params.alpha * std::log(s / ptilde) - s);
            return F(s) * std::exp(-s);
        },
        1e-13);
}

HarmVector empirical_harm_quadrature(const Coverage& cov, const HarmParams& params) {
    HarmVector h;
    h.fbar.resize(cov.ptilde.size());
    h.infinite.resize(cov.ptilde.size());
    for (std::size_t a = 0; a < cov.ptilde.size(); ++a) {
        h.fbar[a] = empirical_harm_quadrature(cov.ptilde[a], params);
        h.infinite[a] = std::isinf(h.fbar[a]);
    }
    return h;
}

double total_harm(const Distribution& Q_a, const HarmVector& fbar) {
    if (Q_a.p.size() != fbar.fbar.size()) throw std::invalid_argument("total_harm: dimension mismatch");
    double acc = 0.0;
    for (std::size_t a = 0; a < Q_a.p.size(); ++a) {
        if (Q_a.p[a] <= 0.0) continue;
        if (std::isinf(fbar.fbar[a])) return kInfiniteHarm;
        acc += Q_a.p[a] * fbar.fbar[a];
    }
    return acc;
}

double harm_of(const Distribution& Q_a, const std::vector<double>& P_d, const Kernel& kernel, const HarmParams& params) {
    auto cov = coverage(P_d, kernel);
    double acc = 0.0;
    for (std::size_t a = 0; a < Q_a.p.size(); ++a) {
        if (Q_a.p[a] <= 0.0) continue;
        double f = fbar_closed(cov.ptilde[a], params);
        if (std::isinf(f)) return kInfiniteHarm;
        acc += Q_a.p[a] * f;
    }
    return acc;
}

Distribution gaussian_optimal_defender(double sigma_Q, double sigma, double alpha, const ShapeSpace& space,
                                       double mean) {
    double var = (1.0 + alpha) * sigma_Q * sigma_Q - sigma * sigma;
    if (var <= 0.0) return one_hot(space, nearest_bin(space, mean));
    return gaussian_distribution(space, mean, std::sqrt(var));
}

void write_harm_csv(std::ostream& os, const Distribution& Q_a, const Coverage& cov, const HarmVector& fbar) {
    os << "bin_center,q_a,ptilde_a,fbar_a,q_fbar\n" << std::setprecision(17);
    for (std::size_t a = 0; a < Q_a.p.size(); ++a) {
        double qf = Q_a.p[a] > 0.0 ? Q_a.p[a] * fbar.fbar[a] : 0.0;
        os << Q_a.space.centers[a] << ',' << Q_a.p[a] << ',' << cov.ptilde[a] << ',' << fbar.fbar[a] << ',' << qf
           << '\n';
    }
}

}  // namespace repertoire
