#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "repertoire/shape_space.hpp"

using namespace repertoire;

namespace {

void require_simplex(const Distribution& d) {
    double s = 0.0;
    for (double x : d.p) {
        REQUIRE(x >= 0.0);
        s += x;
    }
    REQUIRE(s == doctest::Approx(1.0).epsilon(1e-12));
}

Distribution random_distribution(const ShapeSpace& sp, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(sp.M);
    for (auto& x : w) x = u(gen) < 0.3 ? u(gen) : 0.0;
    w[gen() % sp.M] += 0.5;
    return normalized(sp, w);
}

}  // namespace

TEST_CASE("make_grid places centers at (i+0.5)/M") {
    auto g5 = make_grid(5, false);
    std::vector<double> expect = {0.1, 0.3, 0.5, 0.7, 0.9};
    for (std::size_t i = 0; i < 5; ++i) CHECK(g5.centers[i] == doctest::Approx(expect[i]).epsilon(1e-15));
    auto g2 = make_grid(2, false);
    CHECK(g2.centers[0] == 0.25);
    CHECK(g2.centers[1] == 0.75);
    auto g = make_grid(201, true);
    CHECK(g.M == 201);
    CHECK(g.periodic);
    CHECK(g.bin_width() == 1.0 / 201.0);
    for (std::size_t i = 1; i < g.M; ++i) CHECK(g.centers[i] > g.centers[i - 1]);
    CHECK(g.centers.front() > 0.0);
    CHECK(g.centers.back() < 1.0);
    CHECK_THROWS_AS(make_grid(1, false), std::invalid_argument);
}

TEST_CASE("gaussian_distribution") {
    auto sp = make_grid(201, false);
    auto dirac = gaussian_distribution(sp, 0.5, 0.0);
    CHECK(dirac.p[100] == 1.0);
    require_simplex(dirac);

    auto g = gaussian_distribution(sp, 0.5, 0.1);
    require_simplex(g);
    for (std::size_t i = 0; i < 100; ++i) CHECK(g.p[i] == doctest::Approx(g.p[200 - i]).epsilon(1e-12));

    // Oracle: the largest density ratio over [0,1] for sigma = 10 is exp(0.5^2 / (2 * 100)).
    auto wide = gaussian_distribution(sp, 0.5, 10.0);
    double mx = *std::max_element(wide.p.begin(), wide.p.end());
    double mn = *std::min_element(wide.p.begin(), wide.p.end());
    CHECK(mx / mn <= std::exp(0.25 / 200.0) + 1e-12);
    CHECK(mx / mn < 1.01);
    CHECK_THROWS_AS(gaussian_distribution(sp, 0.5, -1.0), std::invalid_argument);
}

TEST_CASE("lognormal spikes") {
    auto sp = make_grid(201, false);
    auto one = lognormal_spike_distribution(sp, 5.0, 1, 3);
    CHECK(std::count(one.p.begin(), one.p.end(), 1.0) == 1);
    auto d = lognormal_spike_distribution(sp, 5.0, 100, 7);
    CHECK(std::count_if(d.p.begin(), d.p.end(), [](double x) { return x > 0.0; }) == 100);
    require_simplex(d);
    CHECK_THROWS_AS(lognormal_spike_distribution(sp, 5.0, 202, 1), std::invalid_argument);
    // Same seed, same distribution.
    CHECK(lognormal_spike_distribution(sp, 5.0, 100, 7).p == d.p);
}

TEST_CASE("log-normal sampler has the requested coefficient of variation") {
    // The sample CV of a heavy-tailed log-normal is noisy; estimate it through the
    // log-moments instead: for log X ~ N(m, s^2), CV^2 = exp(s^2) - 1.
    const double kappa = 5.0;
    auto x = lognormal_draws(kappa, 10000, 11);
    double m = 0.0;
    for (double v : x) m += std::log(v);
    m /= static_cast<double>(x.size());
    double s2 = 0.0;
    for (double v : x) s2 += (std::log(v) - m) * (std::log(v) - m);
    s2 /= static_cast<double>(x.size() - 1);
    double cv = std::sqrt(std::exp(s2) - 1.0);
    CHECK(cv == doctest::Approx(kappa).epsilon(0.2));
}

TEST_CASE("shift_distribution") {
    auto sp = make_grid(10, true);
    auto d = one_hot(sp, 3);
    CHECK(shift_distribution(d, 2).p == one_hot(sp, 5).p);
    CHECK(shift_distribution(d, 0).p == d.p);
    CHECK(shift_distribution(d, 10).p == d.p);
    CHECK(shift_distribution(d, -4).p == one_hot(sp, 9).p);
    CHECK_THROWS_AS(shift_distribution(one_hot(make_grid(10, false), 1), 1), unsupported_topology);
}

TEST_CASE("shift preserves W1 between wrap-free distributions") {
    auto sp = make_grid(50, true);
    std::mt19937_64 gen(5);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> a(50, 0.0), b(50, 0.0);
        for (std::size_t i = 5; i < 30; ++i) {
            a[i] = static_cast<double>(gen() % 100);
            b[i] = static_cast<double>(gen() % 100) + 1.0;
        }
        auto p = normalized(sp, a), q = normalized(sp, b);
        long k = static_cast<long>(gen() % 15);
        CHECK(wasserstein1(shift_distribution(p, k), shift_distribution(q, k)) ==
              doctest::Approx(wasserstein1(p, q)).epsilon(1e-12));
    }
}

TEST_CASE("gaussian_kernel values") {
    auto sp = make_grid(201, false);
    auto k = gaussian_kernel(sp, sp, 0.05);
    for (std::size_t d = 0; d < sp.M; ++d) CHECK(k(d, d) == 1.0);
    // Two bins at distance 10/201 are not 0.05 apart; evaluate at the exact distance.
    double dist = sp.centers[110] - sp.centers[100];
    CHECK(k(100, 110) == doctest::Approx(std::exp(-dist * dist / (2 * 0.05 * 0.05))).epsilon(1e-14));
    auto g = make_grid(20, false);  // adjacent centers are 0.05 apart
    auto k2 = gaussian_kernel(g, g, 0.05);
    CHECK(k2(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(k2(0, 1) == doctest::Approx(0.6065).epsilon(1e-4));
    CHECK_THROWS_AS(gaussian_kernel(sp, sp, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_kernel(sp, sp, 0.05, 1.5), std::invalid_argument);
    for (std::size_t d = 0; d < sp.M; d += 17)
        for (std::size_t a = 0; a < sp.M; a += 13) {
            CHECK(k(d, a) >= 0.0);
            CHECK(k(d, a) <= 1.0);
            CHECK(k(d, a) == k(a, d));
        }
}

TEST_CASE("periodic kernel wraps distances") {
    auto sp = make_grid(100, true);
    auto k = gaussian_kernel(sp, sp, 0.05);
    CHECK(k(0, 99) == doctest::Approx(k(0, 1)).epsilon(1e-14));
    CHECK(k(3, 90) == doctest::Approx(k(13, 0)).epsilon(1e-14));
}

TEST_CASE("kernel row sums match the Riemann estimate") {
    for (double sigma : {0.02, 0.05, 0.1}) {
        auto sp = make_grid(201, true);
        auto k = gaussian_kernel(sp, sp, sigma, 0.8);
        double expect = 0.8 * sigma * std::sqrt(2.0 * M_PI) / sp.bin_width();
        for (std::size_t d = 0; d < sp.M; d += 25) {
            double s = std::accumulate(k.row(d), k.row(d) + sp.M, 0.0);
            CHECK(s == doctest::Approx(expect).epsilon(0.01));
        }
    }
}

TEST_CASE("piecewise bandwidths give three regimes") {
    auto sp = make_grid(201, false);
    auto sig = piecewise_sigma(sp, {0.05, 0.01, 0.001});
    CHECK(sig.front() == 0.05);
    CHECK(sig[100] == 0.01);
    CHECK(sig.back() == 0.001);
    auto k = gaussian_kernel(sp, sp, sig);
    CHECK(!k.scalar_sigma());
    // Bandwidth ratio 50: a left-third row at 50 bins equals a right-third row at 1 bin.
    CHECK(k(10, 60) == doctest::Approx(k(190, 191)).epsilon(1e-12));
    CHECK(k(100, 110) == doctest::Approx(k(190, 191)).epsilon(1e-12));  // middle-third ratio is 10
    CHECK(k(10, 12) > k(190, 192));
}

TEST_CASE("wasserstein1 examples and metric properties") {
    auto sp = make_grid(10, false);  // centers 0.05, 0.15, ..., 0.95
    auto p = one_hot(sp, 2), q = one_hot(sp, 5);
    CHECK(wasserstein1(p, q) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(wasserstein1(p, p) == 0.0);
    std::vector<double> ends(10, 0.0);
    ends[0] = ends[9] = 0.5;
    // Half the mass moves 0.4 and half moves 0.5 to reach the center bin at 0.45.
    CHECK(wasserstein1(normalized(sp, ends), one_hot(sp, 4)) == doctest::Approx(0.45).epsilon(1e-12));

    auto sp2 = make_grid(40, false);
    std::mt19937_64 gen(3);
    for (int t = 0; t < 100; ++t) {
        auto a = random_distribution(sp2, gen), b = random_distribution(sp2, gen), c = random_distribution(sp2, gen);
        double ab = wasserstein1(a, b), bc = wasserstein1(b, c), ac = wasserstein1(a, c);
        CHECK(ab == doctest::Approx(wasserstein1(b, a)).epsilon(1e-14));
        CHECK(ac <= ab + bc + 1e-12);
        CHECK(ab >= 0.0);
        CHECK(wasserstein1(a, a) < 1e-12);
    }
    CHECK_THROWS_AS(wasserstein1(one_hot(make_grid(5, false), 0), one_hot(make_grid(6, false), 0)),
                    std::invalid_argument);
}

TEST_CASE("distribution serialization round-trips") {
    auto sp = make_grid(21, false);
    auto d = gaussian_distribution(sp, 0.3, 0.1);
    std::stringstream ss;
    write_csv(ss, d);
    auto back = read_csv(ss);
    CHECK(back.p.size() == d.p.size());
    for (std::size_t i = 0; i < d.p.size(); ++i) CHECK(back.p[i] == doctest::Approx(d.p[i]).epsilon(1e-15));
    auto j = distribution_from_json(to_json(d));
    CHECK(j.p == d.p);
}

TEST_CASE("constructors satisfy the simplex invariant") {
    auto sp = make_grid(31, true);
    require_simplex(uniform_distribution(sp));
    require_simplex(one_hot(sp, 4));
    require_simplex(gaussian_distribution(sp, 0.2, 0.05));
    require_simplex(lognormal_spike_distribution(sp, 2.0, 10, 4));
    require_simplex(shift_distribution(gaussian_distribution(sp, 0.2, 0.05), 7));
    CHECK(nearest_bin(sp, 0.5) == 15);
    CHECK_THROWS_AS(normalized(sp, std::vector<double>(31, 0.0)), std::invalid_argument);
}
