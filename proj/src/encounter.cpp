#include "repertoire/encounter.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "repertoire/parallel.hpp"

namespace repertoire {

void SimParams::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("SimParams: dt must be positive");
    double g = std::max(std::fabs(nu), std::fabs(nu_prime));
    for (double x : nu_type) g = std::max(g, std::fabs(x));
    for (double x : nu_prime_type) g = std::max(g, std::fabs(x));
    if (dt * g >= 0.1) throw std::invalid_argument("SimParams: dt * max growth exponent must be below 0.1");
    if (!(t_max > 0.0)) throw std::invalid_argument("SimParams: t_max must be positive");
}

std::vector<double> pairwise_recognition(const std::vector<std::uint64_t>& nd, const Kernel& kernel,
                                         const std::vector<std::size_t>& types, std::size_t n_a_total) {
    std::vector<double> s(types.size(), 0.0);
    if (n_a_total == 0) return s;
    double inv = 1.0 / static_cast<double>(n_a_total);
    for (std::size_t j = 0; j < types.size(); ++j) {
        double log_miss = 0.0;
        for (std::size_t d = 0; d < nd.size(); ++d) {
            if (nd[d] == 0) continue;
            double f = kernel(d, types[j]) * inv;
            log_miss += static_cast<double>(nd[d]) * std::log1p(-std::min(f, 1.0));
        }
        s[j] = -std::expm1(log_miss);
    }
    return s;
}

EpisodeEngine::EpisodeEngine(const Kernel& kernel, const SimParams& params, CounterRng& rng)
    : kernel_(kernel), params_(params), rng_(rng) {
    params_.validate();
}

void EpisodeEngine::spawn(const std::vector<std::uint64_t>& counts_per_bin) {
    types_.clear();
    k0_.clear();
    for (std::size_t a = 0; a < counts_per_bin.size(); ++a) {
        if (counts_per_bin[a] > 0) {
            types_.push_back(a);
            k0_.push_back(counts_per_bin[a]);
        }
    }
    const std::size_t n = types_.size();
    count_.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) count_[j] = static_cast<double>(k0_[j]);
    rate_ = count_;
    alive_.assign(n, true);
    harm_.assign(n, 0.0);
    rec_time_.assign(n, std::numeric_limits<double>::infinity());
    s_.assign(n, 0.0);
    last_interacting_.assign(n, 0.0);
    alive_count_ = n;
    t_ = 0.0;
    steps_ = 0;
}

void EpisodeEngine::set_defender_counts(const std::vector<std::uint64_t>& nd) {
    if (nd.size() != kernel_.n_def) throw std::invalid_argument("set_defender_counts: dimension mismatch");
    s_ = pairwise_recognition(nd, kernel_, types_, params_.n_a_total);
}

void EpisodeEngine::set_defender_distribution(const std::vector<double>& P) {
    auto cov = coverage(P, kernel_);
    s_.resize(types_.size());
    for (std::size_t j = 0; j < types_.size(); ++j) s_[j] = cov.ptilde[types_[j]];
}

std::size_t EpisodeEngine::step() {
    const double dt = params_.dt;
    for (std::size_t j = 0; j < types_.size(); ++j) {
        last_interacting_[j] = 0.0;
        if (!alive_[j]) continue;
        // Number of encounters this step: every live agent (FiniteAgents) or a Poisson draw.
        double trials;
        if (params_.mode == SimMode::FiniteAgents)
            trials = count_[j];
        else
            trials = static_cast<double>(rng_.poisson(rate_[j] * dt));
        last_interacting_[j] = trials;
        if (trials <= 0.0) continue;
        double failures = rng_.geometric_failures(s_[j]);
        if (failures < trials) {
            harm_[j] += failures;
            alive_[j] = false;
            count_[j] = 0.0;
            rec_time_[j] = t_ + dt;
            --alive_count_;
        } else {
            harm_[j] += trials;
        }
    }
    for (std::size_t j = 0; j < types_.size(); ++j) {
        if (!alive_[j]) continue;
        std::size_t a = types_[j];
        double x = count_[j] * std::exp(params_.nu_of(a) * dt);
        if (params_.mode == SimMode::FiniteAgents) {
            // Stochastic rounding keeps agent counts integral with the right mean.
            double fl = std::floor(x);
            x = fl + (rng_.uniform() <= x - fl && x > fl ? 1.0 : 0.0);
            x = std::min(x, params_.count_cap);
        }
        count_[j] = x;
        rate_[j] *= std::exp(params_.nu_prime_of(a) * dt);
    }
    t_ += dt;
    ++steps_;
    return alive_count_;
}

EpisodeResult EpisodeEngine::result() const {
    EpisodeResult r;
    r.types = types_;
    r.initial_counts = k0_;
    r.type_harm = harm_;
    r.recognition_time = rec_time_;
    r.final_counts = count_;
    r.duration = t_;
    r.steps = steps_;
    r.truncated = alive_count_ > 0;
    double na = static_cast<double>(params_.n_a_total);
    for (std::size_t j = 0; j < types_.size(); ++j) {
        r.total_harm += harm_[j];
        if (na > 0) r.weighted_harm += static_cast<double>(k0_[j]) / na * harm_[j];
    }
    return r;
}

EpisodeResult run_episode(const Distribution& Q_a, const Distribution& P_d, const Kernel& kernel,
                          const SimParams& params, std::uint64_t episode) {
    if (Q_a.p.size() != kernel.n_att || P_d.p.size() != kernel.n_def)
        throw std::invalid_argument("run_episode: distribution and kernel dimensions differ");
    CounterRng rng(params.seed, RngTag::Encounter, episode);
    EpisodeEngine eng(kernel, params, rng);
    eng.spawn(rng.multinomial(params.n_a_total, Q_a.p));
    if (params.mode == SimMode::FiniteAgents)
        eng.set_defender_counts(rng.multinomial(params.n_d_total, P_d.p));
    else
        eng.set_defender_distribution(P_d.p);
    while (!eng.finished()) eng.step();
    return eng.result();
}

SampleStats sample_stats(const std::vector<double>& x) {
    SampleStats s;
    s.n = x.size();
    if (x.empty()) return s;
    for (double v : x) s.mean += v;
    s.mean /= static_cast<double>(x.size());
    if (x.size() > 1) {
        double acc = 0.0;
        for (double v : x) acc += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(acc / static_cast<double>(x.size() - 1));
    }
    return s;
}

const HarmCell& HarmTable::at(std::size_t n_a, std::size_t n_d) const {
    for (const auto& c : cells)
        if (c.n_a == n_a && c.n_d == n_d) return c;
    throw std::out_of_range("HarmTable: no such cell");
}

HarmTable sweep_agents(const Distribution& Q_a, const Distribution& P_d, const Kernel& kernel,
                       const std::vector<std::size_t>& na_list, const std::vector<std::size_t>& nd_list,
                       std::size_t reps, const SimParams& params, std::size_t jobs) {
    HarmTable table;
    for (auto na : na_list)
        for (auto nd : nd_list) table.cells.push_back(HarmCell{na, nd, 0.0, 0.0, 0, 0});
    const std::size_t ncell = table.cells.size();
    std::vector<EpisodeResult> results(ncell * reps);
    parallel_for(ncell * reps, jobs, [&](std::size_t k) {
        const auto& cell = table.cells[k / reps];
        SimParams p = params;
        p.n_a_total = cell.n_a;
        p.n_d_total = cell.n_d;
        // Stream keyed by the cell so each (cell, rep) is reproducible on its own.
        p.seed = mix64(params.seed ^ mix64(cell.n_a * 1000003ULL + cell.n_d));
        results[k] = run_episode(Q_a, P_d, kernel, p, k % reps);
    });
    for (std::size_t c = 0; c < ncell; ++c) {
        std::vector<double> h;
        std::size_t trunc = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& e = results[c * reps + r];
            if (e.truncated)
                ++trunc;
            else
                h.push_back(e.weighted_harm);
        }
        auto st = sample_stats(h);
        table.cells[c].mean_harm = st.mean;
        table.cells[c].std_harm = st.std;
        table.cells[c].truncated = trunc;
        table.cells[c].episodes = reps;
    }
    return table;
}

std::vector<PerturbationRow> harm_vs_wasserstein(const Distribution& Q_a, const Distribution& P_d_star,
                                                 const Kernel& kernel, const HarmParams& harm,
                                                 std::size_t n_perturbations, double noise_scale,
                                                 std::size_t episodes_per_perturbation, const SimParams& params,
                                                 std::size_t jobs) {
    std::vector<PerturbationRow> rows(n_perturbations);
    parallel_for(n_perturbations, jobs, [&](std::size_t i) {
        double scale = noise_scale * static_cast<double>(i + 1) / static_cast<double>(n_perturbations);
        CounterRng rng(params.seed, RngTag::Perturbation, i);
        std::vector<double> w(P_d_star.p.size());
        for (std::size_t d = 0; d < w.size(); ++d) w[d] = P_d_star.p[d] * std::exp(scale * rng.normal());
        Distribution P = normalized(P_d_star.space, std::move(w));
        PerturbationRow row;
        row.noise_scale = scale;
        row.w1 = wasserstein1(P, P_d_star);
        row.analytical_harm = harm_of(Q_a, P.p, kernel, harm);
        std::vector<double> h;
        SimParams sp = params;
        sp.seed = mix64(params.seed + 0x5bd1e995ULL * (i + 1));
        for (std::size_t e = 0; e < episodes_per_perturbation; ++e) {
            auto r = run_episode(Q_a, P, kernel, sp, e);
            if (r.truncated)
                ++row.truncated;
            else
                h.push_back(r.weighted_harm);
        }
        auto st = sample_stats(h);
        row.empirical_mean = st.mean;
        row.empirical_std = st.std;
        rows[i] = row;
    });
    return rows;
}

void write_csv(std::ostream& os, const HarmTable& table) {
    os << "n_a,n_d,mean_harm,std_harm,truncated_count\n" << std::setprecision(17);
    for (const auto& c : table.cells)
        os << c.n_a << ',' << c.n_d << ',' << c.mean_harm << ',' << c.std_harm << ',' << c.truncated << '\n';
}

void write_csv(std::ostream& os, const std::vector<PerturbationRow>& rows) {
    os << "noise_scale,w1,analytical_harm,empirical_harm_mean,empirical_harm_std,truncated_count\n"
       << std::setprecision(17);
    for (const auto& r : rows)
        os << r.noise_scale << ',' << r.w1 << ',' << r.analytical_harm << ',' << r.empirical_mean << ','
           << r.empirical_std << ',' << r.truncated << '\n';
}

}  // namespace repertoire
