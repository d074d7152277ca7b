#include "repertoire/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "repertoire/parallel.hpp"
#include "repertoire/rng.hpp"

namespace repertoire {

namespace {
constexpr double kMuFloor = 1e-9;
}

FilterState kalman_update(const FilterState& state, const std::vector<Observation>& obs) {
    if (!(state.noise_var > 0.0)) throw std::invalid_argument("kalman_update: observation noise must be positive");
    FilterState out = state;
    for (const auto& o : obs) {
        if (o.i >= out.tracks.size()) throw std::invalid_argument("kalman_update: unknown track index");
        if (o.c == 0.0) continue;
        Track& tr = out.tracks[o.i];
        double k = tr.var * o.c / (o.c * o.c * tr.var + state.noise_var);
        tr.mu = std::max(kMuFloor, tr.mu + k * (o.y - o.c * tr.mu));
        tr.var = (1.0 - k * o.c) * tr.var;
        ++tr.n_obs;
        tr.last_obs_time = state.t;
    }
    return out;
}

GrowthEstimate estimate_growth(const FilterState& state, const FilterState& prev) {
    if (prev.tracks.size() > state.tracks.size())
        throw std::invalid_argument("estimate_growth: previous state tracks attackers the current one lost");
    GrowthEstimate g;
    const std::size_t n = state.tracks.size();
    g.nu_i.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Track& tr = state.tracks[i];
        if (i < prev.tracks.size()) {
            const Track& pt = prev.tracks[i];
            if (pt.type != tr.type) throw std::invalid_argument("estimate_growth: track types differ");
            g.nu_i[i] = tr.n_obs > pt.n_obs ? std::log(tr.mu / pt.mu) : tr.nu_hat;
        } else {
            g.nu_i[i] = tr.nu_hat;
        }
    }
    double gsum = 0.0;
    std::size_t gcount = 0;
    std::map<std::size_t, double> mu_sum, nu_sum, el_sum;
    std::map<std::size_t, std::size_t> cnt, nu_cnt;
    for (std::size_t i = 0; i < n; ++i) {
        const Track& tr = state.tracks[i];
        mu_sum[tr.type] += tr.mu;
        el_sum[tr.type] += tr.last_obs_time - tr.spawn_time;
        ++cnt[tr.type];
        if (tr.n_obs >= 2) {
            nu_sum[tr.type] += g.nu_i[i];
            ++nu_cnt[tr.type];
            gsum += g.nu_i[i];
            ++gcount;
        }
    }
    double global = gcount > 0 ? gsum / static_cast<double>(gcount) : 0.0;
    for (const auto& [a, c] : cnt) {
        g.mu_a[a] = mu_sum[a] / static_cast<double>(c);
        g.elapsed_a[a] = el_sum[a] / static_cast<double>(c);
        auto it = nu_cnt.find(a);
        g.nu_a[a] = it != nu_cnt.end() ? nu_sum[a] / static_cast<double>(it->second) : global;
    }
    return g;
}

namespace {

Distribution floor_normalize(const ShapeSpace& space, const std::map<std::size_t, double>& score, double eps) {
    const std::size_t M = space.M;
    if (eps <= 0.0) eps = 1e-4 / static_cast<double>(M);
    double total = 0.0;
    for (const auto& [a, s] : score) {
        if (a >= M) throw std::invalid_argument("estimate_Q: type outside the space");
        total += s;
    }
    std::vector<double> p(M, eps);
    if (!(total > 0.0)) return normalized(space, std::move(p));
    std::size_t unobserved = M - score.size();
    double observed_mass = 1.0 - eps * static_cast<double>(unobserved);
    for (const auto& [a, s] : score) p[a] = observed_mass * s / total;
    return normalized(space, std::move(p));
}

}  // namespace

Distribution estimate_Q(const ShapeSpace& space, const GrowthEstimate& growth, double floor_eps) {
    std::map<std::size_t, double> score;
    for (const auto& [a, mu] : growth.mu_a) {
        double el = growth.elapsed_a.count(a) ? growth.elapsed_a.at(a) : 0.0;
        score[a] = mu * std::exp(-growth.nu_a.at(a) * el);
    }
    return floor_normalize(space, score, floor_eps);
}

Distribution estimate_Q(const ShapeSpace& space, const GrowthEstimate& growth, double t, double floor_eps) {
    if (t < 0.0) throw std::invalid_argument("estimate_Q: t must be nonnegative");
    std::map<std::size_t, double> score;
    for (const auto& [a, mu] : growth.mu_a) score[a] = mu * std::exp(-growth.nu_a.at(a) * t);
    return floor_normalize(space, score, floor_eps);
}

Distribution Schedule::at(std::size_t episode) const {
    if (kind == Kind::Stationary) return Q;
    return shift_distribution(Q, k * static_cast<long>(episode));
}

namespace {

std::vector<double> blend(const std::vector<double>& a, const std::vector<double>& b, double w) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - w) * a[i] + w * b[i];
    return out;
}

std::vector<std::uint64_t> roll_counts(const std::vector<std::uint64_t>& c, long shift) {
    long M = static_cast<long>(c.size());
    long s = ((shift % M) + M) % M;
    std::vector<std::uint64_t> out(c.size());
    for (long i = 0; i < M; ++i) out[static_cast<std::size_t>((i + s) % M)] = c[static_cast<std::size_t>(i)];
    return out;
}

}  // namespace

AdaptiveResult run_adaptive_experiment(const Schedule& schedule, std::size_t episodes, const Kernel& kernel,
                                       const AdaptiveParams& params, const std::optional<EstimatorSnapshot>& resume) {
    const ShapeSpace& space = schedule.Q.space;
    const std::size_t M = space.M;
    if (schedule.kind == Schedule::Kind::ShiftPerEpisode && !space.periodic)
        throw unsupported_topology("shift-per-episode schedule requires a periodic space");
    if (kernel.n_def != M || kernel.n_att != M) throw std::invalid_argument("run_adaptive_experiment: kernel size");
    params.sim.validate();
    const double eps = params.floor_eps > 0.0 ? params.floor_eps : 1e-4 / static_cast<double>(M);

    std::vector<double> q_carry(M, 1.0 / static_cast<double>(M));
    std::size_t first = 0;
    FilterState filter;
    filter.noise_var = params.noise_var;
    if (resume) {
        if (resume->q_hat.size() != M) throw std::invalid_argument("snapshot does not match the space");
        q_carry = resume->q_hat;
        first = resume->next_episode;
        filter = resume->filter;
    }

    // Full-information optimum; shifted copies serve later episodes of a cyclic schedule.
    OptimizerReport full = minimize_harm(schedule.Q, kernel, params.harm, params.optimizer);
    std::vector<double> p_prev = full.p_star.p;

    AdaptiveResult out;
    for (std::size_t e = first; e < first + episodes; ++e) {
        Distribution Q_e = schedule.at(e);
        Distribution P_opt = schedule.kind == Schedule::Kind::Stationary
                                 ? full.p_star
                                 : shift_distribution(full.p_star, schedule.k * static_cast<long>(e));
        EpisodeRecord rec;
        rec.episode = e;
        rec.optimal_harm = harm_of(Q_e, P_opt.p, kernel, params.harm);

        Distribution q_start{space, q_carry};
        auto plan = minimize_harm(q_start, kernel, params.harm, params.optimizer);
        std::vector<double> P = plan.converged ? plan.p_star.p : p_prev;
        if (!plan.converged) ++rec.optimizer_failures;
        Distribution P_start{space, P};
        rec.analytical_harm = harm_of(Q_e, P, kernel, params.harm);
        rec.w1_p = wasserstein1(P_start, P_opt);

        CounterRng rng(params.sim.seed, RngTag::Estimator, e);
        SimParams sp = params.sim;
        EpisodeEngine eng(kernel, sp, rng);
        // Draws come from the unshifted Q and are then rotated, so a cyclic schedule
        // sees the same attacker sample pattern as the stationary run on matched seeds.
        auto counts = rng.multinomial(sp.n_a_total, schedule.Q.p);
        if (schedule.kind == Schedule::Kind::ShiftPerEpisode) counts = roll_counts(counts, schedule.k * static_cast<long>(e));
        eng.spawn(counts);
        eng.set_defender_counts(rng.multinomial(sp.n_d_total, P));

        filter = FilterState{};
        filter.noise_var = params.noise_var;
        for (auto a : eng.types()) {
            Track tr;
            tr.type = a;
            filter.tracks.push_back(tr);
        }
        const double w = std::max(1.0 / static_cast<double>(e + 1), params.carry_min);
        const double sd = std::sqrt(params.noise_var);
        GrowthEstimate growth;
        while (!eng.finished()) {
            eng.step();
            FilterState prev = filter;
            filter.t += 1.0;
            std::vector<Observation> obs;
            const auto& inter = eng.last_interacting();
            for (std::size_t j = 0; j < inter.size(); ++j) {
                if (inter[j] > 0.0) obs.push_back({j, inter[j] + sd * rng.normal(), 1.0});
            }
            filter = kalman_update(filter, obs);
            growth = estimate_growth(filter, prev);
            for (std::size_t i = 0; i < filter.tracks.size(); ++i) filter.tracks[i].nu_hat = growth.nu_i[i];
            if (eng.steps() % params.replan_every == 0 && !eng.finished()) {
                Distribution q_now{space, blend(q_carry, estimate_Q(space, growth, eps).p, w)};
                OptimizerOptions oo = params.optimizer;
                oo.initial = P;
                auto re = minimize_harm(q_now, kernel, params.harm, oo);
                if (re.converged)
                    P = re.p_star.p;
                else
                    ++rec.optimizer_failures;
                eng.set_defender_counts(rng.multinomial(sp.n_d_total, P));
            }
        }
        if (filter.tracks.empty()) growth = estimate_growth(filter, filter);
        auto res = eng.result();
        rec.truncated = res.truncated;
        rec.experienced_harm = res.weighted_harm;
        q_carry = blend(q_carry, estimate_Q(space, growth, eps).p, w);
        rec.w1_q = wasserstein1(Distribution{space, q_carry}, Q_e);

        // Replicate episodes with the episode's opening defense give the harm spread.
        if (params.eval_reps > 0) {
            std::vector<double> h(params.eval_reps, 0.0);
            std::vector<char> trunc(params.eval_reps, 0);
            parallel_for(params.eval_reps, params.jobs, [&](std::size_t r) {
                SimParams ep = params.sim;
                ep.seed = mix64(params.sim.seed ^ (0x9e37ULL + e));
                auto er = run_episode(Q_e, P_start, kernel, ep, r);
                h[r] = er.weighted_harm;
                trunc[r] = er.truncated;
            });
            std::vector<double> kept;
            for (std::size_t r = 0; r < h.size(); ++r)
                if (!trunc[r]) kept.push_back(h[r]);
            auto st = sample_stats(kept);
            rec.empirical_harm_mean = st.mean;
            rec.empirical_harm_std = st.std;
        }
        p_prev = P;
        out.trajectory.push_back(rec);
    }
    out.q_hat = normalized(space, q_carry);
    auto final_plan = minimize_harm(out.q_hat, kernel, params.harm, params.optimizer);
    out.p_d = final_plan.converged ? final_plan.p_star : Distribution{space, p_prev};
    out.snapshot.next_episode = first + episodes;
    out.snapshot.q_hat = q_carry;
    out.snapshot.filter = filter;
    return out;
}

std::string to_json(const EstimatorSnapshot& snap) {
    nlohmann::json j;
    j["next_episode"] = snap.next_episode;
    j["q_hat"] = snap.q_hat;
    j["noise_var"] = snap.filter.noise_var;
    j["t"] = snap.filter.t;
    auto& tracks = j["tracks"] = nlohmann::json::array();
    for (const auto& tr : snap.filter.tracks) {
        tracks.push_back({{"mu", tr.mu},
                          {"var", tr.var},
                          {"type", tr.type},
                          {"n_obs", tr.n_obs},
                          {"spawn_time", tr.spawn_time},
                          {"last_obs_time", tr.last_obs_time},
                          {"nu_hat", tr.nu_hat}});
    }
    return j.dump(2);
}

EstimatorSnapshot snapshot_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    EstimatorSnapshot s;
    s.next_episode = j.at("next_episode").get<std::size_t>();
    s.q_hat = j.at("q_hat").get<std::vector<double>>();
    s.filter.noise_var = j.at("noise_var").get<double>();
    s.filter.t = j.at("t").get<double>();
    for (const auto& tj : j.at("tracks")) {
        Track tr;
        tr.mu = tj.at("mu").get<double>();
        tr.var = tj.at("var").get<double>();
        tr.type = tj.at("type").get<std::size_t>();
        tr.n_obs = tj.at("n_obs").get<std::size_t>();
        tr.spawn_time = tj.at("spawn_time").get<double>();
        tr.last_obs_time = tj.at("last_obs_time").get<double>();
        tr.nu_hat = tj.at("nu_hat").get<double>();
        s.filter.tracks.push_back(tr);
    }
    return s;
}

void write_csv(std::ostream& os, const std::vector<EpisodeRecord>& trajectory) {
    os << "episode,w1_q,w1_p,analytical_harm,empirical_harm_mean,empirical_harm_std,experienced_harm,optimal_harm,"
          "optimizer_failures,truncated\n"
       << std::setprecision(17);
    for (const auto& r : trajectory)
        os << r.episode << ',' << r.w1_q << ',' << r.w1_p << ',' << r.analytical_harm << ',' << r.empirical_harm_mean
           << ',' << r.empirical_harm_std << ',' << r.experienced_harm << ',' << r.optimal_harm << ','
           << r.optimizer_failures << ',' << (r.truncated ? 1 : 0) << '\n';
}

}  // namespace repertoire
