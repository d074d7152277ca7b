#include <doctest.h>

#include <cmath>
#include <numeric>

#include "repertoire/encounter.hpp"
#include "repertoire/optimizer.hpp"
#include "repertoire/rng.hpp"

using namespace repertoire;

namespace {

Kernel flat_kernel(std::size_t M, double p) {
    Kernel k;
    k.n_def = k.n_att = M;
    k.f.assign(M * M, p);
    k.sigma.assign(M, 1.0);
    k.f_max = p;
    return k;
}

}  // namespace

TEST_CASE("counter rng is reproducible and stream-separated") {
    CounterRng a(1, RngTag::Encounter, 3), b(1, RngTag::Encounter, 3), c(1, RngTag::Encounter, 4),
        d(1, RngTag::Estimator, 3);
    bool differs_stream = false, differs_tag = false;
    for (int i = 0; i < 100; ++i) {
        auto x = a(), y = b(), z = c(), w = d();
        CHECK(x == y);
        differs_stream |= x != z;
        differs_tag |= x != w;
    }
    CHECK(differs_stream);
    CHECK(differs_tag);
    CounterRng u(9, RngTag::Mobile);
    for (int i = 0; i < 1000; ++i) {
        double v = u.uniform();
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("geometric failures match (1-p)/p") {
    CounterRng rng(4, RngTag::Encounter, 0);
    for (double p : {0.1, 0.5, 0.9}) {
        double s = 0.0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) s += rng.geometric_failures(p);
        CHECK(s / n == doctest::Approx((1 - p) / p).epsilon(0.02));
    }
    CHECK(std::isinf(rng.geometric_failures(0.0)));
    CHECK(rng.geometric_failures(1.0) == 0.0);
}

TEST_CASE("multinomial draws sum to n") {
    CounterRng rng(2, RngTag::Encounter, 0);
    auto c = rng.multinomial(1000, {0.2, 0.0, 0.5, 0.3});
    CHECK(std::accumulate(c.begin(), c.end(), std::uint64_t{0}) == 1000);
    CHECK(c[1] == 0);
}

TEST_CASE("matched one-hot defense is never harmed") {
    // Per-pair recognition is f / N_a, so certainty needs a single attacker in finite mode;
    // rate mode recognizes with the coverage, which is f_max = 1 here.
    auto sp = make_grid(51, false);
    auto K = gaussian_kernel(sp, sp, 0.05);
    SimParams p;
    p.n_a_total = 1;
    p.n_d_total = 100;
    SimParams rate = p;
    rate.mode = SimMode::PoissonRates;
    rate.n_a_total = 100;
    for (std::uint64_t e = 0; e < 20; ++e) {
        auto r = run_episode(one_hot(sp, 20), one_hot(sp, 20), K, p, e);
        CHECK(r.total_harm == 0.0);
        CHECK(!r.truncated);
        CHECK(r.steps == 1);
        auto q = run_episode(one_hot(sp, 20), one_hot(sp, 20), K, rate, e);
        CHECK(q.total_harm == 0.0);
        CHECK(!q.truncated);
    }
}

TEST_CASE("flat kernel in rate mode gives geometric harm") {
    auto sp = make_grid(5, false);
    for (double pr : {0.2, 0.5}) {
        auto K = flat_kernel(5, pr);
        SimParams p;
        p.mode = SimMode::PoissonRates;
        p.n_a_total = 1;
        p.seed = 8;
        double s = 0.0;
        const int n = 10000;
        for (int e = 0; e < n; ++e) {
            auto r = run_episode(one_hot(sp, 2), uniform_distribution(sp), K, p, static_cast<std::uint64_t>(e));
            REQUIRE(!r.truncated);
            s += r.total_harm;
        }
        CHECK(s / n == doctest::Approx((1 - pr) / pr).epsilon(0.05));
    }
}

TEST_CASE("finite-agent harm is an integer count of unsuccessful interactions") {
    auto sp = make_grid(101, false);
    auto Q = lognormal_spike_distribution(sp, 5.0, 30, 2);
    auto K = gaussian_kernel(sp, sp, 0.05);
    SimParams p;
    p.n_a_total = 50;
    p.n_d_total = 50;
    p.seed = 3;
    for (std::uint64_t e = 0; e < 20; ++e) {
        auto r = run_episode(Q, uniform_distribution(sp), K, p, e);
        CHECK(r.total_harm == std::floor(r.total_harm));
        CHECK(r.total_harm == doctest::Approx(std::accumulate(r.type_harm.begin(), r.type_harm.end(), 0.0)));
        std::uint64_t spawned = std::accumulate(r.initial_counts.begin(), r.initial_counts.end(), std::uint64_t{0});
        CHECK(spawned == 50);
        for (std::size_t j = 0; j < r.types.size(); ++j)
            if (std::isfinite(r.recognition_time[j])) CHECK(r.final_counts[j] == 0.0);
    }
}

TEST_CASE("episodes are deterministic given the seed") {
    auto sp = make_grid(101, false);
    auto Q = lognormal_spike_distribution(sp, 5.0, 30, 2);
    auto K = gaussian_kernel(sp, sp, 0.05);
    SimParams p;
    p.seed = 77;
    for (auto mode : {SimMode::FiniteAgents, SimMode::PoissonRates}) {
        p.mode = mode;
        auto a = run_episode(Q, uniform_distribution(sp), K, p, 5);
        auto b = run_episode(Q, uniform_distribution(sp), K, p, 5);
        CHECK(a.total_harm == b.total_harm);
        CHECK(a.recognition_time == b.recognition_time);
        CHECK(a.final_counts == b.final_counts);
        auto c = run_episode(Q, uniform_distribution(sp), K, p, 6);
        CHECK((c.total_harm != a.total_harm || c.recognition_time != a.recognition_time));
    }
}

TEST_CASE("unrecognized counts follow exponential growth") {
    auto sp = make_grid(3, false);
    auto K = flat_kernel(3, 0.0);
    for (auto mode : {SimMode::PoissonRates, SimMode::FiniteAgents}) {
        SimParams p;
        p.mode = mode;
        p.nu = 0.8;
        p.n_a_total = 1000000;
        CounterRng rng(1, RngTag::Encounter, 0);
        EpisodeEngine eng(K, p, rng);
        eng.spawn({1000000, 0, 0});
        eng.set_defender_distribution({1.0, 0.0, 0.0});
        if (mode == SimMode::FiniteAgents) eng.set_defender_counts({10, 0, 0});
        while (eng.time() < 5.0 - 1e-9) {
            eng.step();
            double ratio = eng.counts()[0] / 1e6;
            CHECK(ratio == doctest::Approx(std::exp(0.8 * eng.time())).epsilon(0.01));
        }
    }
}

TEST_CASE("dt guard and truncation") {
    SimParams p;
    p.dt = 0.2;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    auto sp = make_grid(3, false);
    auto K = flat_kernel(3, 0.0);
    SimParams q;
    q.mode = SimMode::PoissonRates;
    q.t_max = 1.0;
    q.n_a_total = 5;
    auto r = run_episode(one_hot(sp, 0), one_hot(sp, 0), K, q, 0);
    CHECK(r.truncated);
}

TEST_CASE("no attackers means no harm") {
    auto sp = make_grid(51, false);
    auto K = gaussian_kernel(sp, sp, 0.05);
    SimParams p;
    p.n_a_total = 0;
    auto r = run_episode(uniform_distribution(sp), uniform_distribution(sp), K, p, 0);
    CHECK(r.total_harm == 0.0);
    CHECK(!r.truncated);
    auto t = sweep_agents(uniform_distribution(sp), uniform_distribution(sp), K, {0}, {10, 100}, 5, p);
    for (const auto& c : t.cells) CHECK(c.mean_harm == 0.0);
}

TEST_CASE("raising f_max never raises the mean harm") {
    auto sp = make_grid(101, false);
    auto Q = lognormal_spike_distribution(sp, 5.0, 30, 4);
    SimParams p;
    p.seed = 12;
    auto P = uniform_distribution(sp);
    double prev = std::numeric_limits<double>::infinity();
    for (double fm : {0.25, 0.5, 1.0}) {
        auto K = gaussian_kernel(sp, sp, 0.05, fm);
        double s = 0.0;
        for (std::uint64_t e = 0; e < 100; ++e) s += run_episode(Q, P, K, p, e).weighted_harm;
        CHECK(s / 100 <= prev);
        prev = s / 100;
    }
}

TEST_CASE("sweep table shape and reproducibility") {
    auto sp = make_grid(51, false);
    auto Q = lognormal_spike_distribution(sp, 5.0, 20, 4);
    auto K = gaussian_kernel(sp, sp, 0.05);
    SimParams p;
    p.seed = 5;
    auto a = sweep_agents(Q, uniform_distribution(sp), K, {10, 30}, {10, 30, 100}, 8, p, 1);
    auto b = sweep_agents(Q, uniform_distribution(sp), K, {10, 30}, {10, 30, 100}, 8, p, 3);
    CHECK(a.cells.size() == 6);
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        CHECK(a.cells[i].mean_harm == b.cells[i].mean_harm);
        CHECK(a.cells[i].std_harm == b.cells[i].std_harm);
    }
    CHECK(a.at(30, 100).n_d == 100);
    CHECK_THROWS_AS(a.at(7, 7), std::out_of_range);
}

TEST_CASE("zero perturbation noise reproduces the optimum") {
    auto sp = make_grid(101, false);
    auto Q = lognormal_spike_distribution(sp, 5.0, 30, 2);
    auto K = gaussian_kernel(sp, sp, 0.05);
    HarmParams h;
    auto rep = minimize_harm(Q, K, h);
    SimParams p;
    auto rows = harm_vs_wasserstein(Q, rep.p_star, K, h, 5, 0.0, 3, p);
    for (const auto& r : rows) {
        CHECK(r.w1 == 0.0);
        CHECK(r.analytical_harm == doctest::Approx(rep.objective).epsilon(1e-12));
    }
    auto noisy = harm_vs_wasserstein(Q, rep.p_star, K, h, 5, 1.0, 3, p);
    for (const auto& r : noisy) CHECK(r.analytical_harm >= rep.objective * (1 - 1e-9));
}

TEST_CASE("sample stats use the unbiased variance") {
    auto s = sample_stats({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == 2.5);
    CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(sample_stats({}).n == 0);
}
