#include "repertoire/mobile.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "repertoire/parallel.hpp"
#include "repertoire/rng.hpp"

namespace repertoire {

MobileKernel mobile_kernel(const ShapeSpace& space_d, const std::vector<double>& speeds, const ShapeSpace& space_a,
                           double sigma, double f_max) {
    if (!(sigma > 0.0)) throw std::invalid_argument("mobile_kernel: sigma must be positive");
    if (speeds.empty()) throw std::invalid_argument("mobile_kernel: no speed levels");
    for (double u : speeds)
        if (!(u > 0.0)) throw std::invalid_argument("mobile_kernel: speeds must be positive");
    if (!(f_max > 0.0 && f_max <= 1.0)) throw std::invalid_argument("mobile_kernel: f_max must be in (0,1]");
    MobileKernel mk;
    mk.space_d = space_d;
    mk.speeds = speeds;
    mk.sigma = sigma;
    const std::size_t U = speeds.size();
    Kernel& k = mk.flat;
    k.n_def = space_d.M * U;
    k.n_att = space_a.M;
    k.f_max = f_max;
    k.periodic = space_d.periodic && space_a.periodic;
    k.f.resize(k.n_def * k.n_att);
    k.sigma.resize(k.n_def);
    for (std::size_t d = 0; d < space_d.M; ++d) {
        for (std::size_t u = 0; u < U; ++u) {
            double s = speeds[u] * sigma;
            std::size_t row = d * U + u;
            k.sigma[row] = s;
            for (std::size_t a = 0; a < space_a.M; ++a) {
                double x = std::fabs(space_d.centers[d] - space_a.centers[a]);
                if (k.periodic) x = std::min(x, 1.0 - x);
                k.f[row * k.n_att + a] = f_max * std::exp(-x * x / (2.0 * s * s));
            }
        }
    }
    return mk;
}

MobileSolution optimal_mobile_distribution(const Distribution& Q_a, const MobileKernel& kernel,
                                           const HarmParams& params, const OptimizerOptions& opts) {
    MobileSolution sol;
    sol.report = minimize_harm(Q_a, kernel.flat, params, opts);
    sol.joint = sol.report.p_star.p;
    const std::size_t U = kernel.n_speeds();
    std::vector<double> dm(kernel.space_d.M, 0.0);
    sol.u_marginal.assign(U, 0.0);
    for (std::size_t d = 0; d < kernel.space_d.M; ++d)
        for (std::size_t u = 0; u < U; ++u) {
            double v = sol.joint[kernel.index(d, u)];
            dm[d] += v;
            sol.u_marginal[u] += v;
        }
    sol.d_marginal = normalized(kernel.space_d, std::move(dm));
    return sol;
}

void PerimeterScenario::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("PerimeterScenario: epsilon must be in (0,1)");
    if (!(horizon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("PerimeterScenario: horizon and dt must be positive");
}

double perimeter_final_gap(double d0, double a, double u, const PerimeterScenario& sc) {
    if (!(u > 0.0)) throw std::invalid_argument("perimeter_final_gap: speed must be positive");
    auto steps = static_cast<std::size_t>(std::llround(sc.horizon / sc.dt));
    double d = d0;
    for (std::size_t s = 0; s < steps; ++s) {
        // The attacker descends vertically, so its perimeter position stays at a.
        double gap = a - d;
        double move = std::min(u * sc.dt, std::fabs(gap));
        d += gap >= 0.0 ? move : -move;
    }
    return std::fabs(d - a);
}

PerimeterResult perimeter_sim(const MobileKernel& kernel, const std::vector<double>& P_du, const Distribution& Q_a,
                              const PerimeterScenario& scenario, std::size_t n_trials, std::uint64_t seed) {
    scenario.validate();
    if (P_du.size() != kernel.flat.n_def) throw std::invalid_argument("perimeter_sim: joint has wrong size");
    CounterRng rng(seed, RngTag::Mobile, 0);
    PerimeterResult res;
    res.trials.reserve(n_trials);
    std::size_t captured = 0;
    const std::size_t U = kernel.n_speeds();
    for (std::size_t t = 0; t < n_trials; ++t) {
        std::size_t a = rng.categorical(Q_a.p);
        std::size_t du = rng.categorical(P_du);
        PerimeterTrial tr;
        tr.a = Q_a.space.centers[a];
        tr.d0 = kernel.space_d.centers[du / U];
        tr.u = kernel.speeds[du % U];
        tr.captured = perimeter_final_gap(tr.d0, tr.a, tr.u, scenario) < scenario.epsilon;
        captured += tr.captured ? 1 : 0;
        res.trials.push_back(tr);
    }
    res.recognition_rate = n_trials ? static_cast<double>(captured) / static_cast<double>(n_trials) : 0.0;
    res.harm_count = n_trials - captured;
    return res;
}

double peak_mass(const std::vector<double>& p, std::size_t radius) {
    auto it = std::max_element(p.begin(), p.end());
    auto c = static_cast<std::size_t>(it - p.begin());
    double m = 0.0;
    std::size_t lo = c >= radius ? c - radius : 0;
    std::size_t hi = std::min(p.size() - 1, c + radius);
    for (std::size_t i = lo; i <= hi; ++i) m += p[i];
    return m;
}

std::vector<RegimeRow> mobile_regimes(const Distribution& Q_a, double sigma, double sigma_Q,
                                      const std::vector<double>& speeds, const HarmParams& params,
                                      const OptimizerOptions& opts, std::size_t jobs) {
    // Support counts are only meaningful at the polished sparse optimum, so solve tightly.
    OptimizerOptions tight = opts;
    tight.kkt_tolerance = std::min(opts.kkt_tolerance, 1e-8);
    std::vector<RegimeRow> rows(speeds.size());
    parallel_for(speeds.size(), jobs, [&](std::size_t i) {
        auto mk = mobile_kernel(Q_a.space, {speeds[i]}, Q_a.space, sigma);
        auto sol = optimal_mobile_distribution(Q_a, mk, params, tight);
        RegimeRow r;
        r.u = speeds[i];
        r.sigma_eff = speeds[i] * sigma;
        r.support = support_size(sol.d_marginal.p, opts.support_threshold);
        r.width = sol.d_marginal.stddev();
        r.peak_mass = peak_mass(sol.d_marginal.p);
        r.collapsed = r.peak_mass >= 0.99;
        r.harm = sol.report.objective;
        r.scaled_harm = r.harm * std::pow(sigma * speeds[i] / sigma_Q, params.alpha);
        rows[i] = r;
    });
    return rows;
}

void write_joint_csv(std::ostream& os, const MobileKernel& kernel, const std::vector<double>& joint) {
    os << "d_center,u,probability\n" << std::setprecision(17);
    for (std::size_t d = 0; d < kernel.space_d.M; ++d)
        for (std::size_t u = 0; u < kernel.n_speeds(); ++u)
            os << kernel.space_d.centers[d] << ',' << kernel.speeds[u] << ',' << joint[kernel.index(d, u)] << '\n';
}

void write_csv(std::ostream& os, const std::vector<RegimeRow>& rows) {
    os << "u_max,sigma_eff,d_marginal_support,width,peak_mass,collapsed,harm,scaled_harm\n" << std::setprecision(17);
    for (const auto& r : rows)
        os << r.u << ',' << r.sigma_eff << ',' << r.support << ',' << r.width << ',' << r.peak_mass << ','
           << (r.collapsed ? 1 : 0) << ',' << r.harm << ',' << r.scaled_harm << '\n';
}

}  // namespace repertoire
