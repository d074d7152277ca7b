#include "repertoire/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

#include <json.hpp>

namespace repertoire {

namespace {

using C = ExperimentConfig;
using Member = std::variant<std::string C::*, double C::*, std::size_t C::*, long C::*, bool C::*,
                            std::vector<double> C::*, std::vector<std::size_t> C::*>;

struct Field {
    const char* key;
    Member member;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        {"experiment.name", &C::name},
        {"space.M", &C::space_M},
        {"space.periodic", &C::space_periodic},
        {"q.kind", &C::q_kind},
        {"q.mean", &C::q_mean},
        {"q.sigma", &C::q_sigma},
        {"q.kappa", &C::q_kappa},
        {"q.n_spikes", &C::q_n_spikes},
        {"q.seed", &C::q_seed},
        {"q.file", &C::q_file},
        {"kernel.kind", &C::kernel_kind},
        {"kernel.sigma", &C::kernel_sigma},
        {"kernel.sigmas", &C::kernel_sigmas},
        {"kernel.f_max", &C::kernel_f_max},
        {"harm.form", &C::harm_form},
        {"harm.alpha", &C::harm_alpha},
        {"harm.beta", &C::harm_beta},
        {"optimizer.kkt_tol", &C::optimizer_kkt_tol},
        {"optimizer.max_iters", &C::optimizer_max_iters},
        {"sim.mode", &C::sim_mode},
        {"sim.n_a", &C::sim_n_a},
        {"sim.n_d", &C::sim_n_d},
        {"sim.nu", &C::sim_nu},
        {"sim.nu_prime", &C::sim_nu_prime},
        {"sim.dt", &C::sim_dt},
        {"sim.t_max", &C::sim_t_max},
        {"sim.episodes", &C::sim_episodes},
        {"sim.sweep_na", &C::sim_sweep_na},
        {"sim.sweep_nd", &C::sim_sweep_nd},
        {"sim.sweep_reps", &C::sim_sweep_reps},
        {"sim.perturbations", &C::sim_perturbations},
        {"sim.noise_scale", &C::sim_noise_scale},
        {"sim.perturbation_episodes", &C::sim_perturbation_episodes},
        {"estimator.episodes", &C::estimator_episodes},
        {"estimator.noise_var", &C::estimator_noise_var},
        {"estimator.replan_every", &C::estimator_replan_every},
        {"estimator.schedule", &C::estimator_schedule},
        {"estimator.shift_k", &C::estimator_shift_k},
        {"estimator.carry_min", &C::estimator_carry_min},
        {"estimator.eval_reps", &C::estimator_eval_reps},
        {"estimator.n_a", &C::estimator_n_a},
        {"estimator.n_d", &C::estimator_n_d},
        {"estimator.resume", &C::estimator_resume},
        {"competition.c", &C::competition_c},
        {"competition.b_prime", &C::competition_b_prime},
        {"competition.dt", &C::competition_dt},
        {"competition.steps", &C::competition_steps},
        {"competition.n_st", &C::competition_n_st},
        {"competition.q_file", &C::competition_q_file},
        {"mobile.sigma", &C::mobile_sigma},
        {"mobile.speeds", &C::mobile_speeds},
        {"mobile.epsilon", &C::mobile_epsilon},
        {"mobile.trials", &C::mobile_trials},
        {"seed", &C::seed},
        {"out", &C::out},
    };
    return f;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double x) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    auto s = trim(v);
    auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(x))
        throw config_error("config: '" + key + "' expects a number, got '" + v + "'");
    return x;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
    Int x{};
    auto s = trim(v);
    auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw config_error("config: '" + key + "' expects an integer, got '" + v + "'");
    return x;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    auto s = trim(v);
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = trim(s.substr(1, s.size() - 2));
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (key == f.key) return f;
    throw config_error("config: unknown key '" + key + "'");
}

std::string value_text(const ExperimentConfig& cfg, const Field& f) {
    return std::visit(
        [&](auto m) -> std::string {
            using T = std::decay_t<decltype(cfg.*m)>;
            const T& v = cfg.*m;
            if constexpr (std::is_same_v<T, std::string>) {
                return v;
            } else if constexpr (std::is_same_v<T, double>) {
                return fmt_double(v);
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                std::string s;
                for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
                return s;
            } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
                std::string s;
                for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
                return s;
            } else {
                return std::to_string(v);
            }
        },
        f.member);
}

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const Field& f = find_field(key);
    std::visit(
        [&](auto m) {
            using T = std::decay_t<decltype(cfg.*m)>;
            T& dst = cfg.*m;
            if constexpr (std::is_same_v<T, std::string>) {
                dst = trim(value);
            } else if constexpr (std::is_same_v<T, double>) {
                dst = parse_double(key, value);
            } else if constexpr (std::is_same_v<T, bool>) {
                auto s = trim(value);
                if (s == "true" || s == "1")
                    dst = true;
                else if (s == "false" || s == "0")
                    dst = false;
                else
                    throw config_error("config: '" + key + "' expects true or false, got '" + value + "'");
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                dst.clear();
                for (const auto& item : split_list(value)) dst.push_back(parse_double(key, item));
            } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
                dst.clear();
                for (const auto& item : split_list(value)) dst.push_back(parse_int<std::size_t>(key, item));
            } else {
                dst = parse_int<T>(key, value);
            }
        },
        f.member);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.emplace_back(f.key);
    return k;
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config: line " + std::to_string(lineno) + " is not 'key = value'");
        set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

namespace {

void apply_json(ExperimentConfig& cfg, const nlohmann::json& j, const std::string& prefix) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        const auto& v = it.value();
        if (v.is_object()) {
            apply_json(cfg, v, key);
        } else if (v.is_array()) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!v[i].is_number()) throw config_error("config: '" + key + "' must hold numbers");
                s += (i ? "," : "") + v[i].dump();
            }
            set_config_value(cfg, key, s);
        } else if (v.is_string()) {
            set_config_value(cfg, key, v.get<std::string>());
        } else if (v.is_boolean()) {
            set_config_value(cfg, key, v.get<bool>() ? "true" : "false");
        } else if (v.is_number()) {
            set_config_value(cfg, key, v.dump());
        } else {
            throw config_error("config: '" + key + "' has an unsupported value");
        }
    }
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw config_error("config: JSON config must be an object");
    ExperimentConfig cfg;
    apply_json(cfg, j, "");
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
    auto s = trim(text);
    if (!s.empty() && s.front() == '{') return parse_config_json(text);
    return parse_config_text(text);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + value_text(cfg, f) + "\n";
    return out;
}

std::string serialize_config_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    for (const auto& f : fields()) {
        std::visit(
            [&](auto m) {
                using T = std::decay_t<decltype(cfg.*m)>;
                j[f.key] = static_cast<const T&>(cfg.*m);
            },
            f.member);
    }
    return j.dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : serialize_config(cfg)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& m) { throw config_error("config: " + m); };
    if (space_M < 2) fail("space.M must be at least 2");
    if (q_kind != "gaussian" && q_kind != "lognormal_spikes" && q_kind != "von_mises" && q_kind != "file")
        fail("q.kind must be gaussian, lognormal_spikes, von_mises or file");
    if (q_kind == "file" && q_file.empty()) fail("q.file is required when q.kind = file");
    if (q_sigma < 0.0) fail("q.sigma must be nonnegative");
    if (!(q_kappa > 0.0)) fail("q.kappa must be positive");
    if (q_kind == "lognormal_spikes" && (q_n_spikes == 0 || q_n_spikes > space_M))
        fail("q.n_spikes must be in [1, space.M]");
    if (q_mean < 0.0 || q_mean > 1.0) fail("q.mean must be in [0,1]");
    if (kernel_kind != "scalar" && kernel_kind != "per_bin") fail("kernel.kind must be scalar or per_bin");
    if (!(kernel_sigma > 0.0)) fail("kernel.sigma must be positive");
    if (kernel_kind == "per_bin" && kernel_sigmas.empty()) fail("kernel.sigmas must not be empty");
    for (double s : kernel_sigmas)
        if (!(s > 0.0)) fail("kernel.sigmas entries must be positive");
    if (!(kernel_f_max > 0.0 && kernel_f_max <= 1.0)) fail("kernel.f_max must be in (0,1]");
    if (harm_form != "power_law" && harm_form != "saturating") fail("harm.form must be power_law or saturating");
    if (!(harm_alpha > 0.0)) fail("harm.alpha must be positive");
    if (!(harm_beta > 0.0)) fail("harm.beta must be positive");
    if (!(optimizer_kkt_tol > 0.0)) fail("optimizer.kkt_tol must be positive");
    if (optimizer_max_iters == 0) fail("optimizer.max_iters must be positive");
    if (sim_mode != "finite" && sim_mode != "poisson") fail("sim.mode must be finite or poisson");
    if (!(sim_dt > 0.0) || sim_dt * std::max(std::fabs(sim_nu), std::fabs(sim_nu_prime)) >= 0.1)
        fail("sim.dt must be positive with dt * max(nu, nu_prime) < 0.1");
    if (!(sim_t_max > 0.0)) fail("sim.t_max must be positive");
    if (sim_sweep_na.empty() != sim_sweep_nd.empty()) fail("sim.sweep_na and sim.sweep_nd must both be set");
    if (sim_noise_scale < 0.0) fail("sim.noise_scale must be nonnegative");
    if (estimator_schedule != "stationary" && estimator_schedule != "shift")
        fail("estimator.schedule must be stationary or shift");
    if (estimator_schedule == "shift" && !space_periodic) fail("estimator.schedule = shift requires space.periodic");
    if (!(estimator_noise_var > 0.0)) fail("estimator.noise_var must be positive");
    if (estimator_replan_every == 0) fail("estimator.replan_every must be positive");
    if (estimator_carry_min < 0.0 || estimator_carry_min > 1.0) fail("estimator.carry_min must be in [0,1]");
    if (!(competition_c > 0.0) || !(competition_dt > 0.0) || !(competition_n_st > 0.0))
        fail("competition.c, competition.dt and competition.n_st must be positive");
    if (competition_b_prime < 0.0) fail("competition.b_prime must be nonnegative (0 calibrates)");
    if (!(mobile_sigma > 0.0)) fail("mobile.sigma must be positive");
    if (mobile_speeds.empty()) fail("mobile.speeds must not be empty");
    for (double u : mobile_speeds)
        if (!(u > 0.0)) fail("mobile.speeds entries must be positive");
    if (!(mobile_epsilon > 0.0 && mobile_epsilon < 1.0)) fail("mobile.epsilon must be in (0,1)");
}

}  // namespace repertoire
