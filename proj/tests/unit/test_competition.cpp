#include <doctest.h>

#include <cmath>
#include <numeric>

#include "repertoire/competition.hpp"
#include "repertoire/optimizer.hpp"

using namespace repertoire;

namespace {

HarmParams power(double alpha) {
    HarmParams p;
    p.alpha = alpha;
    return p;
}

Kernel flat_kernel(std::size_t M, double v) {
    Kernel k;
    k.n_def = k.n_att = M;
    k.f.assign(M * M, v);
    k.sigma.assign(M, 1.0);
    k.f_max = v;
    return k;
}

std::vector<double> scaled(const std::vector<double>& p, double s) {
    std::vector<double> out(p);
    for (auto& x : out) x *= s;
    return out;
}

}  // namespace

TEST_CASE("phi examples") {
    CHECK(phi(1.0, 1.0, 1.0, power(1.0)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(phi(2.0, 1.0, 1.0, power(1.0)) / phi(1.0, 1.0, 1.0, power(1.0)) == doctest::Approx(0.25).epsilon(1e-14));
    // 0.5 * Gamma(1.5) * 4^(-1.5) with Gamma(1.5) = sqrt(pi) / 2.
    double expect = 0.5 * (std::sqrt(M_PI) / 2.0) / 8.0;
    CHECK(phi(4.0, 1.0, 1.0, power(0.5)) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect == doctest::Approx(0.05539).epsilon(1e-4));
    // Coverage enters relative to n_st.
    CHECK(phi(4.0, 1.0, 2.0, power(1.0)) == doctest::Approx(phi(2.0, 1.0, 1.0, power(1.0))).epsilon(1e-14));
    CHECK_THROWS_AS(phi(0.0, 1.0, 1.0, power(1.0)), std::invalid_argument);
}

TEST_CASE("flat kernel leaves the induced distribution unchanged") {
    auto sp = make_grid(21, false);
    auto Q = lognormal_spike_distribution(sp, 3.0, 8, 1);
    CompetitionState st;
    st.N = scaled(gaussian_distribution(sp, 0.3, 0.1).p, 1.0);
    st.params.b_prime = 0.7;
    st.params.dt = 1e-3;
    auto K = flat_kernel(21, 0.6);
    auto start = st.N;
    for (int i = 0; i < 1000; ++i) st = step_dynamics(st, Q, K);
    double s0 = std::accumulate(start.begin(), start.end(), 0.0);
    double s1 = std::accumulate(st.N.begin(), st.N.end(), 0.0);
    for (std::size_t d = 0; d < 21; ++d) CHECK(std::fabs(st.N[d] / s1 - start[d] / s0) <= 1e-12);
}

TEST_CASE("dynamics keep zeros, stay positive and reject extinction") {
    auto sp = make_grid(31, false);
    auto Q = lognormal_spike_distribution(sp, 3.0, 10, 2);
    auto K = gaussian_kernel(sp, sp, 0.05);
    CompetitionState st;
    st.N = uniform_distribution(sp).p;
    st.N[4] = 0.0;
    st.params.b_prime = 0.1;
    st.params.dt = 1e-3;
    for (int i = 0; i < 2000; ++i) {
        st = step_dynamics(st, Q, K);
        REQUIRE(st.N[4] == 0.0);
    }
    for (std::size_t d = 0; d < 31; ++d)
        if (d != 4) CHECK(st.N[d] >= 0.0);
    CompetitionState dead;
    dead.N.assign(31, 0.0);
    CHECK_THROWS_AS(step_dynamics(dead, Q, K), std::domain_error);
    CHECK_THROWS_AS(run_to_fixed_point(dead.N, Q, K, CompetitionParams{}, 10), std::domain_error);
}

TEST_CASE("scaling b' and c together keeps the fixed point") {
    auto sp = make_grid(31, false);
    auto Q = lognormal_spike_distribution(sp, 3.0, 10, 2);
    auto K = gaussian_kernel(sp, sp, 0.05);
    CompetitionParams a;
    a.b_prime = 0.05;
    a.c = 1.0;
    a.dt = 1e-2;
    CompetitionParams b = a;
    b.b_prime = 0.1;
    b.c = 2.0;
    b.dt = 5e-3;
    auto init = uniform_distribution(sp).p;
    auto ra = run_to_fixed_point(init, Q, K, a, 400000);
    auto rb = run_to_fixed_point(init, Q, K, b, 800000);
    CHECK(ra.converged);
    CHECK(rb.converged);
    CHECK(wasserstein1(ra.P_d, rb.P_d) <= 1e-6);
}

TEST_CASE("uniform Q on a circle gives a uniform population") {
    auto sp = make_grid(41, true);
    auto Q = uniform_distribution(sp);
    auto K = gaussian_kernel(sp, sp, 0.05);
    CompetitionParams p;
    p.dt = 1e-2;
    auto init = gaussian_distribution(sp, 0.5, 0.2).p;
    auto r = run_to_fixed_point(init, Q, K, p, 400000);
    CHECK(wasserstein1(r.P_d, uniform_distribution(sp)) <= 1e-3);
    CHECK(stationarity_cv(r.N, Q, K, p) < 1e-3);
}

TEST_CASE("fixed point harm is never below the optimum") {
    auto sp = make_grid(41, false);
    auto Q = lognormal_spike_distribution(sp, 3.0, 12, 5);
    auto K = gaussian_kernel(sp, sp, 0.05);
    CompetitionParams p;
    p.dt = 1e-2;
    auto r = run_to_fixed_point(uniform_distribution(sp).p, Q, K, p, 1000000);
    auto opt = minimize_harm(Q, K, power(1.0));
    CHECK(r.final_harm >= opt.objective - 1e-9);
    for (const auto& row : r.trajectory) CHECK(row.total_harm >= opt.objective - 1e-9);
    CHECK(r.b_prime > 0.0);
    // With a calibrated b' the fixed-point total sits near n_st.
    double tot = std::accumulate(r.N.begin(), r.N.end(), 0.0);
    CHECK(r.converged);
    CHECK(tot == doctest::Approx(p.n_st).epsilon(0.05));
}

TEST_CASE("rescaling the initial population leaves the fixed point") {
    auto sp = make_grid(31, false);
    auto Q = lognormal_spike_distribution(sp, 3.0, 10, 7);
    auto K = gaussian_kernel(sp, sp, 0.05);
    CompetitionParams p;
    p.b_prime = 0.05;
    p.dt = 1e-2;
    auto init = gaussian_distribution(sp, 0.4, 0.2).p;
    auto r1 = run_to_fixed_point(init, Q, K, p, 400000);
    auto r2 = run_to_fixed_point(scaled(init, 3.0), Q, K, p, 400000);
    CHECK(r1.converged);
    CHECK(r2.converged);
    CHECK(wasserstein1(r1.P_d, r2.P_d) <= 1e-4);
}
