#include "repertoire/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "repertoire/competition.hpp"
#include "repertoire/encounter.hpp"
#include "repertoire/estimator.hpp"
#include "repertoire/mobile.hpp"
#include "repertoire/optimizer.hpp"
#include "repertoire/parallel.hpp"

namespace repertoire {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

ShapeSpace config_space(const ExperimentConfig& cfg) { return make_grid(cfg.space_M, cfg.space_periodic); }

Distribution von_mises_distribution(const ShapeSpace& space, double mean, double kappa) {
    std::vector<double> w(space.M);
    for (std::size_t i = 0; i < space.M; ++i)
        w[i] = std::exp(kappa * (std::cos(2.0 * std::numbers::pi * (space.centers[i] - mean)) - 1.0));
    return normalized(space, std::move(w));
}

namespace {

Distribution read_distribution_file(const std::string& path, const ShapeSpace& space) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read distribution file '" + path + "'");
    Distribution d;
    try {
        d = read_csv(in);
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("distribution file '") + path + "': " + e.what());
    }
    if (d.p.size() != space.M)
        throw config_error("distribution file '" + path + "' has " + std::to_string(d.p.size()) +
                           " bins but space.M is " + std::to_string(space.M));
    return normalized(space, d.p);
}

}  // namespace

Distribution config_q(const ExperimentConfig& cfg) {
    auto space = config_space(cfg);
    if (cfg.q_kind == "gaussian") return gaussian_distribution(space, cfg.q_mean, cfg.q_sigma);
    if (cfg.q_kind == "lognormal_spikes")
        return lognormal_spike_distribution(space, cfg.q_kappa, cfg.q_n_spikes, cfg.q_seed);
    if (cfg.q_kind == "von_mises") return von_mises_distribution(space, cfg.q_mean, cfg.q_kappa);
    return read_distribution_file(cfg.q_file, space);
}

Kernel config_kernel(const ExperimentConfig& cfg, const ShapeSpace& space) {
    if (cfg.kernel_kind == "per_bin")
        return gaussian_kernel(space, space, piecewise_sigma(space, cfg.kernel_sigmas), cfg.kernel_f_max);
    return gaussian_kernel(space, space, cfg.kernel_sigma, cfg.kernel_f_max);
}

HarmParams config_harm(const ExperimentConfig& cfg) {
    HarmParams h;
    h.form = cfg.harm_form == "saturating" ? HarmForm::Saturating : HarmForm::PowerLaw;
    h.alpha = cfg.harm_alpha;
    h.beta = cfg.harm_beta;
    return h;
}

std::string provenance_line(const ExperimentConfig& cfg) {
    return "#config-hash=" + config_hash(cfg) + ",seed=" + std::to_string(cfg.seed) + ",version=" + kVersion;
}

namespace {

OptimizerOptions optimizer_options(const ExperimentConfig& cfg) {
    OptimizerOptions o;
    o.kkt_tolerance = cfg.optimizer_kkt_tol;
    o.max_iters = cfg.optimizer_max_iters;
    return o;
}

SimParams sim_params(const ExperimentConfig& cfg, std::size_t n_a, std::size_t n_d) {
    SimParams s;
    s.mode = cfg.sim_mode == "poisson" ? SimMode::PoissonRates : SimMode::FiniteAgents;
    s.n_a_total = n_a;
    s.n_d_total = n_d;
    s.nu = cfg.sim_nu;
    s.nu_prime = cfg.sim_nu_prime;
    s.dt = cfg.sim_dt;
    s.t_max = cfg.sim_t_max;
    s.seed = cfg.seed;
    return s;
}

ordered_json provenance_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["config_hash"] = config_hash(cfg);
    j["seed"] = cfg.seed;
    j["version"] = kVersion;
    return j;
}

class OutDir {
public:
    OutDir(const std::string& dir, const ExperimentConfig& cfg) : dir_(dir), cfg_(cfg) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw io_error("cannot create output directory '" + dir + "'");
    }

    /// Writes a CSV file with the provenance comment as its first line.
    void csv(const std::string& name, const std::function<void(std::ostream&)>& body) const {
        write(name, [&](std::ostream& os) {
            os << provenance_line(cfg_) << '\n';
            body(os);
        });
    }

    void json(const std::string& name, ordered_json j) const {
        j["provenance"] = provenance_json(cfg_);
        write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    }

    void raw(const std::string& name, const std::string& text) const {
        write(name, [&](std::ostream& os) { os << text; });
    }

private:
    void write(const std::string& name, const std::function<void(std::ostream&)>& body) const {
        fs::path p = dir_ / name;
        std::ofstream os(p, std::ios::binary | std::ios::trunc);
        if (!os) throw io_error("cannot open '" + p.string() + "' for writing");
        body(os);
        os.flush();
        if (!os) throw io_error("failed writing '" + p.string() + "'");
    }

    fs::path dir_;
    const ExperimentConfig& cfg_;
};

void cmd_optimize(const ExperimentConfig& cfg, const OutDir& out) {
    auto Q = config_q(cfg);
    auto K = config_kernel(cfg, Q.space);
    auto harm = config_harm(cfg);
    auto rep = minimize_harm(Q, K, harm, optimizer_options(cfg));

    out.csv("p_star.csv", [&](std::ostream& os) { write_csv(os, rep.p_star); });
    auto cov = coverage(rep.p_star, K);
    HarmVector hv;
    hv.fbar.resize(cov.ptilde.size());
    hv.infinite.resize(cov.ptilde.size());
    for (std::size_t a = 0; a < cov.ptilde.size(); ++a) {
        hv.fbar[a] = fbar_closed(cov.ptilde[a], harm);
        hv.infinite[a] = !std::isfinite(hv.fbar[a]);
    }
    out.csv("harm.csv", [&](std::ostream& os) { write_harm_csv(os, Q, cov, hv); });
    auto j = ordered_json::parse(to_json(rep));
    out.json("report.json", j);
    if (!rep.converged)
        throw nonconvergence_error("optimize: KKT residual " + std::to_string(rep.kkt_residual) + " above tolerance");
}

void cmd_simulate(const ExperimentConfig& cfg, const OutDir& out, std::size_t jobs) {
    auto Q = config_q(cfg);
    auto K = config_kernel(cfg, Q.space);
    auto harm = config_harm(cfg);
    auto rep = minimize_harm(Q, K, harm, optimizer_options(cfg));
    if (!rep.converged) throw nonconvergence_error("simulate: optimizer did not converge for P_d*");
    const double analytical = rep.objective;
    auto sp = sim_params(cfg, cfg.sim_n_a, cfg.sim_n_d);
    sp.validate();

    std::vector<EpisodeResult> eps(cfg.sim_episodes);
    parallel_for(eps.size(), jobs, [&](std::size_t e) { eps[e] = run_episode(Q, rep.p_star, K, sp, e); });
    out.csv("episodes.csv", [&](std::ostream& os) {
        os << "episode,n_a,n_d,total_harm,weighted_harm,analytical_harm,duration,steps,truncated\n"
           << std::setprecision(17);
        for (std::size_t e = 0; e < eps.size(); ++e)
            os << e << ',' << cfg.sim_n_a << ',' << cfg.sim_n_d << ',' << eps[e].total_harm << ','
               << eps[e].weighted_harm << ',' << analytical << ',' << eps[e].duration << ',' << eps[e].steps << ','
               << (eps[e].truncated ? 1 : 0) << '\n';
    });
    std::vector<double> w;
    std::size_t truncated = 0;
    for (const auto& r : eps) {
        w.push_back(r.weighted_harm);
        truncated += r.truncated ? 1 : 0;
    }
    auto st = sample_stats(w);

    ordered_json j;
    j["n_a"] = cfg.sim_n_a;
    j["n_d"] = cfg.sim_n_d;
    j["episodes"] = cfg.sim_episodes;
    j["analytical_harm"] = analytical;
    j["empirical_harm_mean"] = st.mean;
    j["empirical_harm_std"] = st.std;
    j["truncated"] = truncated;

    if (!cfg.sim_sweep_na.empty()) {
        auto table = sweep_agents(Q, rep.p_star, K, cfg.sim_sweep_na, cfg.sim_sweep_nd, cfg.sim_sweep_reps, sp, jobs);
        out.csv("sweep.csv", [&](std::ostream& os) { write_csv(os, table); });
        j["sweep_cells"] = table.cells.size();
    }
    if (cfg.sim_perturbations > 0) {
        auto rows = harm_vs_wasserstein(Q, rep.p_star, K, harm, cfg.sim_perturbations, cfg.sim_noise_scale,
                                        cfg.sim_perturbation_episodes, sp, jobs);
        out.csv("perturbations.csv", [&](std::ostream& os) { write_csv(os, rows); });
        j["perturbations"] = rows.size();
    }
    out.json("summary.json", j);
}

void cmd_estimate(const ExperimentConfig& cfg, const OutDir& out, std::size_t jobs) {
    if (cfg.estimator_schedule == "shift" && !cfg.space_periodic)
        throw config_error("estimator.schedule = shift requires space.periodic = true");
    Schedule sched;
    sched.Q = config_q(cfg);
    sched.kind = cfg.estimator_schedule == "shift" ? Schedule::Kind::ShiftPerEpisode : Schedule::Kind::Stationary;
    sched.k = cfg.estimator_shift_k;
    auto K = config_kernel(cfg, sched.Q.space);

    AdaptiveParams ap;
    ap.sim = sim_params(cfg, cfg.estimator_n_a, cfg.estimator_n_d);
    ap.harm = config_harm(cfg);
    ap.optimizer = optimizer_options(cfg);
    ap.noise_var = cfg.estimator_noise_var;
    ap.replan_every = cfg.estimator_replan_every;
    ap.carry_min = cfg.estimator_carry_min;
    ap.eval_reps = cfg.estimator_eval_reps;
    ap.jobs = jobs;

    std::optional<EstimatorSnapshot> resume;
    if (!cfg.estimator_resume.empty()) {
        std::ifstream in(cfg.estimator_resume);
        if (!in) throw io_error("cannot read snapshot '" + cfg.estimator_resume + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            resume = snapshot_from_json(ss.str());
        } catch (const nlohmann::json::exception& e) {
            throw config_error(std::string("snapshot '") + cfg.estimator_resume + "' is malformed: " + e.what());
        }
        if (resume->q_hat.size() != sched.Q.space.M) throw config_error("snapshot does not match space.M");
    }

    auto res = run_adaptive_experiment(sched, cfg.estimator_episodes, K, ap, resume);
    out.csv("trajectory.csv", [&](std::ostream& os) { write_csv(os, res.trajectory); });
    out.csv("q_hat_final.csv", [&](std::ostream& os) { write_csv(os, res.q_hat); });
    out.csv("p_d_final.csv", [&](std::ostream& os) { write_csv(os, res.p_d); });
    auto j = ordered_json::parse(to_json(res.snapshot));
    out.json("filter_snapshot.json", j);
}

void cmd_compete(const ExperimentConfig& cfg, const OutDir& out) {
    auto space = config_space(cfg);
    Distribution Q = cfg.competition_q_file.empty() ? config_q(cfg) : read_distribution_file(cfg.competition_q_file, space);
    auto K = config_kernel(cfg, space);
    CompetitionParams cp;
    cp.c = cfg.competition_c;
    cp.b_prime = cfg.competition_b_prime;
    cp.dt = cfg.competition_dt;
    cp.n_st = cfg.competition_n_st;
    cp.harm = config_harm(cfg);
    std::vector<double> init(space.M, cfg.competition_n_st / static_cast<double>(space.M));

    CompetitionResult res;
    try {
        res = run_to_fixed_point(init, Q, K, cp, cfg.competition_steps);
    } catch (const std::runtime_error& e) {
        throw nonconvergence_error(std::string("compete: ") + e.what());
    }
    auto opt = minimize_harm(Q, K, cp.harm, optimizer_options(cfg));

    out.csv("trajectory.csv", [&](std::ostream& os) { write_csv(os, res.trajectory); });
    out.csv("p_d_final.csv", [&](std::ostream& os) { write_csv(os, res.P_d); });
    ordered_json j;
    j["steps"] = res.steps;
    j["converged"] = res.converged;
    j["dt"] = res.dt;
    j["b_prime"] = res.b_prime;
    j["final_harm"] = res.final_harm;
    j["optimal_harm"] = opt.objective;
    j["harm_ratio"] = res.final_harm / opt.objective;
    j["stationarity_cv"] = stationarity_cv(res.N, Q, K, cp);
    j["support_size"] = support_size(res.P_d.p);
    j["population_total"] = std::accumulate(res.N.begin(), res.N.end(), 0.0);
    out.json("summary.json", j);
}

void cmd_mobile(const ExperimentConfig& cfg, const OutDir& out, std::size_t jobs) {
    auto Q = config_q(cfg);
    auto harm = config_harm(cfg);
    auto opts = optimizer_options(cfg);

    auto rows = mobile_regimes(Q, cfg.mobile_sigma, cfg.q_sigma, cfg.mobile_speeds, harm, opts, jobs);
    out.csv("regimes.csv", [&](std::ostream& os) { write_csv(os, rows); });

    auto mk = mobile_kernel(Q.space, cfg.mobile_speeds, Q.space, cfg.mobile_sigma, cfg.kernel_f_max);
    auto sol = optimal_mobile_distribution(Q, mk, harm, opts);
    out.csv("p_du.csv", [&](std::ostream& os) { write_joint_csv(os, mk, sol.joint); });

    // Ordering check: uniform (d, u) starts so every speed and gap is sampled.
    PerimeterScenario sc;
    sc.epsilon = cfg.mobile_epsilon;
    std::vector<double> uniform_du(mk.flat.n_def, 1.0 / static_cast<double>(mk.flat.n_def));
    auto uni = perimeter_sim(mk, uniform_du, Q, sc, cfg.mobile_trials, cfg.seed);
    auto opt_run = perimeter_sim(mk, sol.joint, Q, sc, cfg.mobile_trials, mix64(cfg.seed + 1));

    const std::size_t U = cfg.mobile_speeds.size();
    std::vector<std::size_t> n_u(U, 0), c_u(U, 0);
    const std::size_t n_gap = 10;
    std::vector<std::size_t> n_g(n_gap, 0), c_g(n_gap, 0);
    for (const auto& t : uni.trials) {
        std::size_t u = static_cast<std::size_t>(
            std::find(cfg.mobile_speeds.begin(), cfg.mobile_speeds.end(), t.u) - cfg.mobile_speeds.begin());
        ++n_u[u];
        c_u[u] += t.captured ? 1 : 0;
        auto g = std::min(n_gap - 1, static_cast<std::size_t>(std::fabs(t.d0 - t.a) * static_cast<double>(n_gap)));
        ++n_g[g];
        c_g[g] += t.captured ? 1 : 0;
    }
    out.csv("ordering.csv", [&](std::ostream& os) {
        os << "group,value,trials,capture_rate\n" << std::setprecision(17);
        for (std::size_t u = 0; u < U; ++u)
            os << "speed," << cfg.mobile_speeds[u] << ',' << n_u[u] << ','
               << (n_u[u] ? static_cast<double>(c_u[u]) / static_cast<double>(n_u[u]) : 0.0) << '\n';
        for (std::size_t g = 0; g < n_gap; ++g)
            os << "gap," << (static_cast<double>(g) + 0.5) / static_cast<double>(n_gap) << ',' << n_g[g] << ','
               << (n_g[g] ? static_cast<double>(c_g[g]) / static_cast<double>(n_g[g]) : 0.0) << '\n';
    });

    ordered_json j;
    j["joint_objective"] = sol.report.objective;
    j["joint_converged"] = sol.report.converged;
    j["speed_marginal"] = sol.u_marginal;
    j["optimal_recognition_rate"] = opt_run.recognition_rate;
    j["uniform_recognition_rate"] = uni.recognition_rate;
    j["trials"] = cfg.mobile_trials;
    out.json("summary.json", j);
    if (!sol.report.converged) throw nonconvergence_error("mobile: joint optimization did not converge");
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"optimize", "simulate", "estimate", "compete", "mobile"};
    return names;
}

void run_command(const std::string& command, const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    std::size_t jobs = std::max<std::size_t>(1, opts.jobs);
    OutDir out(opts.out_dir.empty() ? cfg.out : opts.out_dir, cfg);
    out.raw("config.txt", provenance_line(cfg) + "\n" + serialize_config(cfg));
    if (command == "optimize")
        cmd_optimize(cfg, out);
    else if (command == "simulate")
        cmd_simulate(cfg, out, jobs);
    else if (command == "estimate")
        cmd_estimate(cfg, out, jobs);
    else if (command == "compete")
        cmd_compete(cfg, out);
    else if (command == "mobile")
        cmd_mobile(cfg, out, jobs);
    else
        throw config_error("unknown command '" + command + "'");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const config_error*>(&e)) return 1;
    if (dynamic_cast<const nonconvergence_error*>(&e)) return 2;
    if (dynamic_cast<const io_error*>(&e)) return 3;
    if (dynamic_cast<const unsupported_topology*>(&e)) return 1;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return 1;
    if (dynamic_cast<const std::domain_error*>(&e)) return 2;
    if (dynamic_cast<const std::ios_base::failure*>(&e)) return 3;
    return 2;
}

}  // namespace repertoire
