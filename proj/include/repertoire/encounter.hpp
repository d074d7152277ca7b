#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "repertoire/harm_model.hpp"
#include "repertoire/rng.hpp"
#include "repertoire/shape_space.hpp"

namespace repertoire {

enum class SimMode { FiniteAgents, PoissonRates };

struct SimParams {
    SimMode mode = SimMode::FiniteAgents;
    std::size_t n_a_total = 100;
    std::size_t n_d_total = 100;
    double nu = 1.0;
    double nu_prime = 1.0;
    /// Optional per-type growth exponents; override nu / nu_prime when non-empty.
    std::vector<double> nu_type;
    std::vector<double> nu_prime_type;
    double dt = 0.01;
    double t_max = 50.0;
    std::uint64_t seed = 0;
    /// Upper bound on integer agent counts so runaway growth cannot overflow.
    double count_cap = 1e15;

    void validate() const;
    double nu_of(std::size_t a) const { return nu_type.empty() ? nu : nu_type[a]; }
    double nu_prime_of(std::size_t a) const { return nu_prime_type.empty() ? nu_prime : nu_prime_type[a]; }
};

struct EpisodeResult {
    /// Unsuccessful interactions, one unit of harm each.
    double total_harm = 0.0;
    /// sum_a (k_a / N_a) H_a, the per-attacker harm comparable to the analytical value.
    double weighted_harm = 0.0;
    double duration = 0.0;
    std::size_t steps = 0;
    bool truncated = false;
    std::vector<std::size_t> types;
    std::vector<std::uint64_t> initial_counts;
    std::vector<double> type_harm;
    /// Recognition time per sampled type; +inf if never recognized.
    std::vector<double> recognition_time;
    std::vector<double> final_counts;
};

/// Per-attacker recognition probability in one all-pairs iteration: each of the
/// nd[d] defenders recognizes a given attacker with probability f[d][a] / n_a_total.
std::vector<double> pairwise_recognition(const std::vector<std::uint64_t>& nd, const Kernel& kernel,
                                         const std::vector<std::size_t>& types, std::size_t n_a_total);

/// Stepping engine shared by the simulator and the adaptive estimator loop.
class EpisodeEngine {
public:
    EpisodeEngine(const Kernel& kernel, const SimParams& params, CounterRng& rng);

    void spawn(const std::vector<std::uint64_t>& counts_per_bin);
    /// FiniteAgents: defender counts per bin. PoissonRates: pass the defender distribution instead.
    void set_defender_counts(const std::vector<std::uint64_t>& nd);
    void set_defender_distribution(const std::vector<double>& P);
    /// One iteration of length dt; returns the number of types still alive.
    std::size_t step();

    bool finished() const { return alive_count_ == 0 || t_ >= params_.t_max - 1e-12; }
    double time() const { return t_; }
    std::size_t steps() const { return steps_; }

    const std::vector<std::size_t>& types() const { return types_; }
    const std::vector<double>& counts() const { return count_; }
    const std::vector<bool>& alive() const { return alive_; }
    /// Counts of live attackers at the start of the last step, per type (0 if the type was already dead).
    const std::vector<double>& last_interacting() const { return last_interacting_; }

    EpisodeResult result() const;

private:
    const Kernel& kernel_;
    SimParams params_;
    CounterRng& rng_;
    std::vector<std::size_t> types_;
    std::vector<std::uint64_t> k0_;
    std::vector<double> count_;
    std::vector<double> rate_;
    std::vector<bool> alive_;
    std::vector<double> harm_;
    std::vector<double> rec_time_;
    std::vector<double> s_;
    std::vector<double> last_interacting_;
    std::size_t alive_count_ = 0;
    double t_ = 0.0;
    std::size_t steps_ = 0;
};

EpisodeResult run_episode(const Distribution& Q_a, const Distribution& P_d, const Kernel& kernel,
                          const SimParams& params, std::uint64_t episode = 0);

struct HarmCell {
    std::size_t n_a = 0;
    std::size_t n_d = 0;
    double mean_harm = 0.0;
    double std_harm = 0.0;
    std::size_t truncated = 0;
    std::size_t episodes = 0;
};

struct HarmTable {
    std::vector<HarmCell> cells;
    const HarmCell& at(std::size_t n_a, std::size_t n_d) const;
};

HarmTable sweep_agents(const Distribution& Q_a, const Distribution& P_d, const Kernel& kernel,
                       const std::vector<std::size_t>& na_list, const std::vector<std::size_t>& nd_list,
                       std::size_t reps, const SimParams& params, std::size_t jobs = 1);

struct PerturbationRow {
    double noise_scale = 0.0;
    double w1 = 0.0;
    double analytical_harm = 0.0;
    double empirical_mean = 0.0;
    double empirical_std = 0.0;
    std::size_t truncated = 0;
};

/// Perturbation i multiplies P_d_star by log-normal noise of scale noise_scale*(i+1)/n.
std::vector<PerturbationRow> harm_vs_wasserstein(const Distribution& Q_a, const Distribution& P_d_star,
                                                 const Kernel& kernel, const HarmParams& harm,
                                                 std::size_t n_perturbations, double noise_scale,
                                                 std::size_t episodes_per_perturbation, const SimParams& params,
                                                 std::size_t jobs = 1);

struct SampleStats {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};
SampleStats sample_stats(const std::vector<double>& x);

void write_csv(std::ostream& os, const HarmTable& table);
void write_csv(std::ostream& os, const std::vector<PerturbationRow>& rows);

}  // namespace repertoire
