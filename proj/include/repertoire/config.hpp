#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace repertoire {

/// Invalid or unknown configuration; maps to exit code 1.
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
    std::string name = "default";

    std::size_t space_M = 201;
    bool space_periodic = false;

    /// gaussian | lognormal_spikes | von_mises | file
    std::string q_kind = "lognormal_spikes";
    double q_mean = 0.5;
    double q_sigma = 0.1;
    double q_kappa = 5.0;
    std::size_t q_n_spikes = 100;
    std::uint64_t q_seed = 1;
    std::string q_file;

    /// scalar | per_bin
    std::string kernel_kind = "scalar";
    double kernel_sigma = 0.05;
    std::vector<double> kernel_sigmas = {0.05, 0.01, 0.001};
    double kernel_f_max = 1.0;

    /// power_law | saturating
    std::string harm_form = "power_law";
    double harm_alpha = 1.0;
    double harm_beta = 1.0;

    double optimizer_kkt_tol = 1e-4;
    std::size_t optimizer_max_iters = 50000;

    /// finite | poisson
    std::string sim_mode = "finite";
    std::size_t sim_n_a = 100;
    std::size_t sim_n_d = 100;
    double sim_nu = 1.0;
    double sim_nu_prime = 1.0;
    double sim_dt = 0.01;
    double sim_t_max = 50.0;
    std::size_t sim_episodes = 100;
    std::vector<std::size_t> sim_sweep_na;
    std::vector<std::size_t> sim_sweep_nd;
    std::size_t sim_sweep_reps = 100;
    std::size_t sim_perturbations = 0;
    double sim_noise_scale = 1.0;
    std::size_t sim_perturbation_episodes = 100;

    std::size_t estimator_episodes = 100;
    double estimator_noise_var = 0.25;
    std::size_t estimator_replan_every = 10;
    /// stationary | shift
    std::string estimator_schedule = "stationary";
    long estimator_shift_k = 1;
    double estimator_carry_min = 0.0;
    std::size_t estimator_eval_reps = 20;
    std::size_t estimator_n_a = 100;
    std::size_t estimator_n_d = 100;
    std::string estimator_resume;

    double competition_c = 1.0;
    double competition_b_prime = 0.0;
    double competition_dt = 1e-3;
    std::size_t competition_steps = 1000000;
    double competition_n_st = 1.0;
    std::string competition_q_file;

    double mobile_sigma = 0.01;
    std::vector<double> mobile_speeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    double mobile_epsilon = 0.01;
    std::size_t mobile_trials = 100000;

    std::uint64_t seed = 0;
    std::string out = "out";

    bool operator==(const ExperimentConfig&) const = default;

    /// Throws config_error on values outside their domains.
    void validate() const;
};

/// Applies "key = value" lines (dotted keys, '#' comments) on top of the defaults.
ExperimentConfig parse_config_text(const std::string& text);
/// Accepts a flat object with dotted keys or nested sections.
ExperimentConfig parse_config_json(const std::string& text);
/// Chooses JSON when the first non-space character is '{'.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Sets one dotted key from its textual value.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

std::string serialize_config(const ExperimentConfig& cfg);
std::string serialize_config_json(const ExperimentConfig& cfg);
std::vector<std::string> config_keys();

/// FNV-1a of the canonical text form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace repertoire
