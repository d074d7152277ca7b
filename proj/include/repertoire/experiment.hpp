#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "repertoire/config.hpp"
#include "repertoire/harm_model.hpp"
#include "repertoire/shape_space.hpp"

namespace repertoire {

/// A numerical routine did not converge; maps to exit code 2.
class nonconvergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reading or writing a file failed; maps to exit code 3.
class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
    std::string out_dir;
    std::size_t jobs = 1;
};

const std::vector<std::string>& command_names();

/// Runs one subcommand and writes its files into opts.out_dir.
/// Throws config_error, nonconvergence_error (after writing outputs) or io_error.
void run_command(const std::string& command, const ExperimentConfig& cfg, const RunOptions& opts);

/// Exit code for an exception escaping run_command.
int exit_code_for(const std::exception& e);

/// Builders shared by the subcommands.
ShapeSpace config_space(const ExperimentConfig& cfg);
Distribution config_q(const ExperimentConfig& cfg);
Kernel config_kernel(const ExperimentConfig& cfg, const ShapeSpace& space);
HarmParams config_harm(const ExperimentConfig& cfg);

/// "#config-hash=<hash>,seed=<seed>,version=<version>"
std::string provenance_line(const ExperimentConfig& cfg);

/// Von Mises weights exp(kappa cos(2 pi (x - mean))), normalized.
Distribution von_mises_distribution(const ShapeSpace& space, double mean, double kappa);

}  // namespace repertoire
