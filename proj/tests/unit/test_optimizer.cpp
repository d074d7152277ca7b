#include <doctest.h>

#include <cmath>
#include <numeric>

#include "repertoire/experiment.hpp"
#include "repertoire/optimizer.hpp"

using namespace repertoire;

namespace {

HarmParams power(double alpha) {
    HarmParams p;
    p.alpha = alpha;
    return p;
}

double peak_window_mass(const std::vector<double>& p, std::size_t center, std::size_t radius) {
    double m = 0.0;
    for (std::size_t i = center - radius; i <= center + radius; ++i) m += p[i];
    return m;
}

/// Width as the standard deviation about the mean.
double fitted_width(const Distribution& d) { return d.stddev(); }

/// Independent simplex oracle: plain exponentiated gradient with a fixed small step,
/// many iterations, objective sum_a q_a / ptilde_a.
std::vector<double> brute_force_identity(const std::vector<double>& q, std::size_t iters) {
    std::size_t M = q.size();
    std::vector<double> p(M, 1.0 / static_cast<double>(M));
    for (std::size_t it = 0; it < iters; ++it) {
        double z = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            double grad = -q[i] / (p[i] * p[i]);
            p[i] *= std::exp(-0.002 * grad);
            z += p[i];
        }
        for (auto& x : p) x /= z;
    }
    return p;
}

}  // namespace

TEST_CASE("gaussian Q above the threshold collapses to a one-hot") {
    auto sp = make_grid(201, false);
    auto Q = gaussian_distribution(sp, 0.5, 0.1);
    auto rep = minimize_harm(Q, gaussian_kernel(sp, sp, 0.2), power(1.0));
    CHECK(rep.converged);
    CHECK(peak_window_mass(rep.p_star.p, 100, 2) >= 0.99);
}

TEST_CASE("gaussian Q below the threshold gives the closed-form width") {
    auto sp = make_grid(201, false);
    auto Q = gaussian_distribution(sp, 0.5, 0.1);
    auto rep = minimize_harm(Q, gaussian_kernel(sp, sp, 0.05), power(1.0));
    CHECK(rep.converged);
    double expect = std::sqrt(2 * 0.01 - 0.0025);
    CHECK(fitted_width(rep.p_star) == doctest::Approx(expect).epsilon(0.1));
    CHECK(rep.p_star.mean() == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("spiked Q gives a discrete support") {
    auto sp = make_grid(201, false);
    auto Q = lognormal_spike_distribution(sp, 5.0, 100, 1);
    auto K = gaussian_kernel(sp, sp, 0.05);
    auto rep = minimize_harm(Q, K, power(1.0));
    CHECK(rep.converged);
    CHECK(rep.kkt_residual <= 1e-4);
    CHECK(rep.support_size < 50);
    CHECK(rep.support_size == support_size(rep.p_star.p, 1e-6));
    CHECK(rep.objective == doctest::Approx(harm_of(Q, rep.p_star.p, K, power(1.0))).epsilon(1e-10));
    check_simplex(rep.p_star, 1e-12);
}

TEST_CASE("kkt residual flags a suboptimal uniform defense") {
    auto sp = make_grid(201, false);
    auto Q = lognormal_spike_distribution(sp, 5.0, 100, 1);
    auto K = gaussian_kernel(sp, sp, 0.05);
    CHECK(kkt_residual(uniform_distribution(sp), Q, K, power(1.0)) > 0.1);
    CHECK(kkt_residual(minimize_harm(Q, K, power(1.0)).p_star, Q, K, power(1.0)) <= 1e-4);
}

TEST_CASE("kkt residual of a single atom matches brute-force profitability") {
    // Q has two equal spikes equidistant from the atom at the center; the residual is positive
    // exactly when moving a sliver of mass to some other bin lowers the harm.
    auto sp = make_grid(51, false);
    const std::size_t c = 25;
    for (double sigma : {0.05, 0.1, 0.2}) {
        for (std::size_t k : {2u, 5u, 10u, 15u}) {
            std::vector<double> w(51, 0.0);
            w[c - k] = w[c + k] = 1.0;
            auto Q = normalized(sp, w);
            auto K = gaussian_kernel(sp, sp, sigma);
            auto atom = one_hot(sp, c);
            double base = harm_of(Q, atom.p, K, power(1.0));
            bool profitable = false;
            const double eps = 1e-7;
            for (std::size_t d = 0; d < 51; ++d) {
                if (d == c) continue;
                auto p = atom.p;
                p[c] -= eps;
                p[d] += eps;
                if (harm_of(Q, p, K, power(1.0)) < base - 1e-12 * base) profitable = true;
            }
            double r = kkt_residual(atom, Q, K, power(1.0));
            CHECK(r >= 0.0);
            CHECK((r > 1e-9) == profitable);
            // The support part vanishes by construction for a single atom.
            auto g = descent_signal(atom.p, Q, K, power(1.0));
            CHECK(g[c - 3] == doctest::Approx(g[c + 3]).epsilon(1e-12));
        }
    }
}

TEST_CASE("kkt residual is infinite with an uncovered attacker") {
    auto sp = make_grid(51, false);
    auto Q = one_hot(sp, 0);
    auto K = gaussian_kernel(sp, sp, 0.001);
    CHECK(std::isinf(kkt_residual(one_hot(sp, 50), Q, K, power(1.0))));
}

TEST_CASE("single-spike Q gives the matching one-hot") {
    auto sp = make_grid(101, false);
    auto Q = one_hot(sp, 30);
    auto rep = minimize_harm(Q, gaussian_kernel(sp, sp, 0.05), power(1.0));
    CHECK(rep.converged);
    CHECK(rep.p_star.p[30] > 0.99);
}

TEST_CASE("objective trace is non-increasing") {
    auto sp = make_grid(101, false);
    auto Q = lognormal_spike_distribution(sp, 5.0, 40, 3);
    OptimizerOptions o;
    o.record_trace = true;
    auto rep = minimize_harm(Q, gaussian_kernel(sp, sp, 0.05), power(1.0), o);
    REQUIRE(rep.objective_trace.size() > 2);
    for (std::size_t i = 1; i < rep.objective_trace.size(); ++i)
        CHECK(rep.objective_trace[i] <= rep.objective_trace[i - 1] + 1e-12 * rep.objective_trace[i - 1]);
}

TEST_CASE("warm start reaches the same optimum") {
    auto sp = make_grid(101, false);
    auto Q = gaussian_distribution(sp, 0.4, 0.08);
    auto K = gaussian_kernel(sp, sp, 0.03);
    auto cold = minimize_harm(Q, K, power(1.0));
    OptimizerOptions o;
    o.initial = gaussian_distribution(sp, 0.6, 0.2).p;
    auto warm = minimize_harm(Q, K, power(1.0), o);
    CHECK(warm.converged);
    CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-4));
}

TEST_CASE("saturating harm is optimized too") {
    auto sp = make_grid(101, false);
    auto Q = lognormal_spike_distribution(sp, 3.0, 30, 5);
    HarmParams sat;
    sat.form = HarmForm::Saturating;
    sat.beta = 0.5;
    auto K = gaussian_kernel(sp, sp, 0.05);
    auto rep = minimize_harm(Q, K, sat);
    CHECK(rep.converged);
    CHECK(rep.objective <= harm_of(Q, uniform_distribution(sp).p, K, sat));
}

TEST_CASE("f_max scaling rescales the objective and keeps the argmin") {
    auto sp = make_grid(101, false);
    auto Q = lognormal_spike_distribution(sp, 5.0, 40, 2);
    for (double alpha : {1.0, 2.0}) {
        auto a = minimize_harm(Q, gaussian_kernel(sp, sp, 0.05, 1.0), power(alpha));
        auto b = minimize_harm(Q, gaussian_kernel(sp, sp, 0.05, 0.5), power(alpha));
        CHECK(b.objective == doctest::Approx(a.objective * std::pow(0.5, -alpha)).epsilon(1e-6));
        CHECK(wasserstein1(a.p_star, b.p_star) <= 1e-6);
    }
}

TEST_CASE("periodic shift equivariance") {
    auto sp = make_grid(101, true);
    auto Q = von_mises_distribution(sp, 0.3, 4.0);
    std::vector<double> w = Q.p;
    w[10] += 0.05;  // break the reflection symmetry
    Q = normalized(sp, w);
    auto K = gaussian_kernel(sp, sp, 0.05);
    auto base = minimize_harm(Q, K, power(1.0));
    for (long k : {7L, 33L}) {
        auto shifted = minimize_harm(shift_distribution(Q, k), K, power(1.0));
        CHECK(wasserstein1(shifted.p_star, shift_distribution(base.p_star, k)) <= 1e-3);
    }
}

TEST_CASE("fourier solve with a one-bin kernel gives sqrt(Q)") {
    auto sp = make_grid(21, true);
    auto Q = lognormal_spike_distribution(sp, 1.0, 21, 4);
    auto K = gaussian_kernel(sp, sp, 1e-4);
    auto fr = fourier_solve(Q, K, power(1.0));
    CHECK(fr.feasible);
    auto oracle = normalized(sp, brute_force_identity(Q.p, 200000));
    CHECK(wasserstein1(fr.p, oracle) <= 1e-4);
    std::vector<double> root(21);
    for (std::size_t i = 0; i < 21; ++i) root[i] = std::sqrt(Q.p[i]);
    CHECK(wasserstein1(fr.p, normalized(sp, root)) <= 1e-12);
}

TEST_CASE("fourier solve of uniform Q is uniform") {
    auto sp = make_grid(51, true);
    auto fr = fourier_solve(uniform_distribution(sp), gaussian_kernel(sp, sp, 0.03), power(1.5));
    CHECK(fr.feasible);
    for (double x : fr.p.p) CHECK(x == doctest::Approx(1.0 / 51).epsilon(1e-9));
}

TEST_CASE("fourier solve agrees with minimize_harm on a smooth instance") {
    // A von Mises profile stands in for the Gaussian on the circle: it is smooth across the wrap.
    auto sp = make_grid(201, true);
    auto Q = von_mises_distribution(sp, 0.5, 1.0 / (4 * M_PI * M_PI * 0.01));
    auto K = gaussian_kernel(sp, sp, 0.02);
    auto fr = fourier_solve(Q, K, power(1.0));
    REQUIRE(fr.feasible);
    OptimizerOptions o;
    o.kkt_tolerance = 1e-8;
    auto rep = minimize_harm(Q, K, power(1.0), o);
    CHECK(wasserstein1(fr.p, rep.p_star) <= 1e-3);
    double hf = harm_of(Q, fr.p.p, K, power(1.0));
    CHECK(std::fabs(hf - rep.objective) / rep.objective <= 0.005);
}

TEST_CASE("fourier solve flags infeasible and ill-conditioned cases") {
    auto sp = make_grid(101, true);
    auto Q = lognormal_spike_distribution(sp, 5.0, 20, 1);
    auto fr = fourier_solve(Q, gaussian_kernel(sp, sp, 0.02), power(1.0));
    CHECK(!fr.feasible);
    CHECK(fr.min_entry < -1e-9);
    // At sigma = 0.05 the kernel spectrum underflows long before the broadband target spectrum does.
    CHECK_THROWS_AS(fourier_solve(Q, gaussian_kernel(sp, sp, 0.05), power(1.0)), ill_conditioned_deconvolution);
    auto line = make_grid(101, false);
    CHECK_THROWS_AS(fourier_solve(uniform_distribution(line), gaussian_kernel(line, line, 0.05), power(1.0)),
                    unsupported_topology);
}

TEST_CASE("report serializes to JSON") {
    auto sp = make_grid(21, false);
    auto rep = minimize_harm(gaussian_distribution(sp, 0.5, 0.2), gaussian_kernel(sp, sp, 0.1), power(1.0));
    auto j = to_json(rep);
    CHECK(j.find("\"kkt_residual\"") != std::string::npos);
    CHECK(j.find("\"p_star\"") != std::string::npos);
}
