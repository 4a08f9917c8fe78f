#pragma once

#include "hhsplit/harness.hpp"
#include "hhsplit/model.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace hhsplit::cli {

/// Invalid configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kOutDirEnv = "HHSPLIT_OUT_DIR";

struct RunConfig {
    std::string command;

    // model
    std::string model = "hh-bm";  // hh-bm | hh-ou | hh-det | custom
    std::string preset = "unit";  // unit | spiking
    HHParams params = HHParams::unit();
    std::string sigma_shape = "additive";  // additive | quadratic
    double sigma = 1.0;
    double ou_theta = 1.0;
    double ou_mu = 0.0;
    double ou_sigma = 1.0;
    int custom_dim = 1;
    double custom_a = -1.0;
    double custom_b = 0.0;
    double custom_alpha = 1.0;
    double custom_beta = 1.0;

    // start state; unset v0 means V_rest (0 for custom), unset u0 means U_inf(v0)
    std::optional<double> v0;
    std::vector<double> u0;
    std::optional<double> z0;
    std::vector<double> v0_list;  // compare: one start per value

    // discretization
    std::vector<std::string> schemes;
    std::vector<double> dt_list;
    double t_end = 1.0;
    std::int64_t n_paths = 1;
    double base_dt = 0.0;

    // references
    std::string ref_scheme = "auto";
    double ref_dt = 0.0;
    std::string chi = "increment";

    // consistency / escape start region
    double v_min = -5.0, v_max = 5.0;
    double u_min = 0.0, u_max = 1.0;
    double radius = 50.0;

    // density
    double burn_in = -1.0;
    int bins = 200;
    double sample_dt = 0.0;

    // escape
    std::int64_t n_steps = 100;

    // lyapunov
    std::vector<double> v_probes;
    std::int64_t n_mc = 10000;

    // moments
    std::vector<double> p_list{1.0};
    std::vector<double> t_ladder{1.0, 2.0, 4.0};

    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir;
};

/// Builds the model described by the configuration.
ModelSpec<double> build_model(const RunConfig& cfg);

/// The configured start state (x0) for the model.
State<double> start_state(const RunConfig& cfg, const ModelSpec<double>& spec);

/// Checks every invariant of the configuration; throws ConfigError.
void validate(const RunConfig& cfg);

/// Full configuration as JSON for metadata sidecars.
nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Parsed command line. `exit_code` is set when parsing ended the run
/// (help output or a parse error) and nothing should be dispatched.
struct ParseResult {
    RunConfig config;
    std::optional<int> exit_code;
};

/// Parses flags and an optional --config file (flags take precedence) and
/// validates the result. Messages go to the given streams.
ParseResult parse_config(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Runs the study and writes its CSV files. Returns the process exit code:
/// 0 on success, 1 on a validation error, 2 when a reference path exploded.
int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// parse_config + dispatch.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Parses "0.125", "2^-3" or "1/8".
double parse_number(const std::string& text);

}  // namespace hhsplit::cli
