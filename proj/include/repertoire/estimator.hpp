#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repertoire/encounter.hpp"
#include "repertoire/harm_model.hpp"
#include "repertoire/optimizer.hpp"
#include "repertoire/shape_space.hpp"

namespace repertoire {

/// One tracked attacker cohort: a scalar Gaussian belief over its live count.
struct Track {
    double mu = 1.0;
    double var = 1.0;
    std::size_t type = 0;
    std::size_t n_obs = 0;
    /// Filter-step clock values.
    double spawn_time = 0.0;
    double last_obs_time = 0.0;
    /// Latest per-step growth estimate log(mu+/mu).
    double nu_hat = 0.0;
};

struct FilterState {
    std::vector<Track> tracks;
    double noise_var = 0.25;
    double t = 0.0;
};

struct Observation {
    std::size_t i = 0;
    double y = 0.0;
    double c = 1.0;
};

/// Scalar Kalman update per observed track; c = 0 leaves a track unchanged.
FilterState kalman_update(const FilterState& state, const std::vector<Observation>& obs);

struct GrowthEstimate {
    std::vector<double> nu_i;
    std::map<std::size_t, double> mu_a;
    std::map<std::size_t, double> nu_a;
    /// Mean time since spawn (up to the last observation) of each type's tracks.
    std::map<std::size_t, double> elapsed_a;
};

/// nu_i = log(mu_i / mu_i^prev) for tracks observed since prev, else the stored value.
/// Type means of nu use tracks observed at least twice; other types inherit the global mean.
GrowthEstimate estimate_growth(const FilterState& state, const FilterState& prev);

/// Scores mu_a exp(-nu_a * elapsed) on observed types, floor on the rest, normalized.
Distribution estimate_Q(const ShapeSpace& space, const GrowthEstimate& growth, double floor_eps);
/// Same with a common elapsed time t for every type.
Distribution estimate_Q(const ShapeSpace& space, const GrowthEstimate& growth, double t, double floor_eps);

struct Schedule {
    enum class Kind { Stationary, ShiftPerEpisode };
    Kind kind = Kind::Stationary;
    Distribution Q;
    long k = 0;

    Distribution at(std::size_t episode) const;
};

struct AdaptiveParams {
    SimParams sim;
    HarmParams harm;
    OptimizerOptions optimizer;
    double noise_var = 0.25;
    std::size_t replan_every = 10;
    /// Lower bound on the weight of the newest episode in the carried estimate.
    double carry_min = 0.0;
    /// Unobserved-bin floor; 1e-4 / M when nonpositive.
    double floor_eps = 0.0;
    /// Replicate evaluation episodes per episode for the harm mean/std columns.
    std::size_t eval_reps = 20;
    std::size_t jobs = 1;
};

struct EpisodeRecord {
    std::size_t episode = 0;
    double w1_q = 0.0;
    double w1_p = 0.0;
    double analytical_harm = 0.0;
    double optimal_harm = 0.0;
    double experienced_harm = 0.0;
    double empirical_harm_mean = 0.0;
    double empirical_harm_std = 0.0;
    std::size_t optimizer_failures = 0;
    bool truncated = false;
};

/// Resumable experiment state between episodes.
struct EstimatorSnapshot {
    std::size_t next_episode = 0;
    std::vector<double> q_hat;
    FilterState filter;
};

struct AdaptiveResult {
    std::vector<EpisodeRecord> trajectory;
    Distribution q_hat;
    Distribution p_d;
    EstimatorSnapshot snapshot;
};

AdaptiveResult run_adaptive_experiment(const Schedule& schedule, std::size_t episodes, const Kernel& kernel,
                                       const AdaptiveParams& params,
                                       const std::optional<EstimatorSnapshot>& resume = std::nullopt);

std::string to_json(const EstimatorSnapshot& snap);
EstimatorSnapshot snapshot_from_json(const std::string& text);

void write_csv(std::ostream& os, const std::vector<EpisodeRecord>& trajectory);

}  // namespace repertoire
