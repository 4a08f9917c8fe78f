#include "hhsplit/cli.hpp"
#include "hhsplit/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <ostream>

#include "CLI11.hpp"

namespace hhsplit::cli {

double parse_number(const std::string& text) {
    auto plain = [&](const std::string& s) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + text + "'");
        }
        if (used != s.size()) throw ConfigError("not a number: '" + text + "'");
        return x;
    };
    double x = 0.0;
    if (auto p = text.find('^'); p != std::string::npos)
        x = std::pow(plain(text.substr(0, p)), plain(text.substr(p + 1)));
    else if (auto q = text.find('/'); q != std::string::npos)
        x = plain(text.substr(0, q)) / plain(text.substr(q + 1));
    else
        x = plain(text);
    if (!std::isfinite(x)) throw ConfigError("not a finite number: '" + text + "'");
    return x;
}

namespace {

std::vector<std::string> all_scheme_names() {
    std::vector<std::string> out;
    for (SchemeKind k : kAllSchemes) out.emplace_back(scheme_name(k));
    return out;
}

std::vector<double> pow2_ladder(int finest, int coarsest) {
    std::vector<double> out;
    for (int k = finest; k >= coarsest; --k) out.push_back(std::ldexp(1.0, -k));
    return out;
}

struct ParamOverrides {
    std::optional<double> C, g_K, g_Na, g_L, E_K, E_Na, E_L, I, V_rest;

    void apply(HHParams& p) const {
        auto set = [](double& dst, const std::optional<double>& src) {
            if (src) dst = *src;
        };
        set(p.C, C);
        set(p.g_K, g_K);
        set(p.g_Na, g_Na);
        set(p.g_L, g_L);
        set(p.E_K, E_K);
        set(p.E_Na, E_Na);
        set(p.E_L, E_L);
        set(p.I, I);
        set(p.V_rest, V_rest);
    }
};

RunConfig defaults_for(const std::string& command) {
    RunConfig c;
    c.command = command;
    if (command == "simulate") {
        c.schemes = {"strang"};
        c.dt_list = {1e-3};
    } else if (command == "convergence") {
        c.schemes = all_scheme_names();
        c.dt_list = pow2_ladder(11, 6);
        c.n_paths = 256;
        c.ref_dt = 0x1.0p-15;
    } else if (command == "consistency") {
        c.schemes = {"lt2"};
        c.dt_list = pow2_ladder(12, 7);
        c.n_paths = 10000;
        c.ref_dt = 0x1.0p-18;
        c.chi = "weighted";
    } else if (command == "density") {
        c.preset = "spiking";
        c.schemes = {"strang"};
        c.dt_list = {1e-3};
        c.t_end = 200.0;
        c.burn_in = 40.0;
        c.ref_dt = 1e-5;
        c.sample_dt = 1e-3;
    } else if (command == "escape") {
        c.schemes = all_scheme_names();
        c.dt_list = {1e-2};
        c.n_paths = 100;
    } else if (command == "lyapunov") {
        c.schemes = {"lt1", "lt2", "strang"};
        c.dt_list = {1e-2, 1e-3};
        c.v_probes = {50.0, 500.0};
    } else if (command == "compare") {
        c.preset = "spiking";
        c.schemes = {"strang", "em"};
        c.dt_list = {1e-3, 1e-2, 2e-2};
        c.t_end = 20.0;
        c.ref_dt = 1e-5;
    } else if (command == "moments") {
        c.schemes = {"strang"};
        c.dt_list = {1e-3};
        c.n_paths = 100;
    }
    return c;
}

struct Subcommand {
    CLI::App* app = nullptr;
    RunConfig cfg;
    ParamOverrides over;
};

const CLI::Validator& number_check() {
    static const CLI::Validator v(
        [](std::string& s) {
            try {
                s = format_double(parse_number(s));
            } catch (const ConfigError& e) {
                return std::string(e.what());
            }
            return std::string();
        },
        "NUMBER");
    return v;
}

void add_model_options(Subcommand& s) {
    auto* app = s.app;
    auto& c = s.cfg;
    auto& o = s.over;
    app->add_option("--model", c.model, "Model: hh-bm | hh-ou | hh-det | custom")
        ->check(CLI::IsMember({"hh-bm", "hh-ou", "hh-det", "custom"}))
        ->capture_default_str();
    app->add_option("--preset", c.preset, "Hodgkin-Huxley parameter preset: unit | spiking")
        ->check(CLI::IsMember({"unit", "spiking"}))
        ->capture_default_str();
    app->add_option("--C", o.C, "Membrane capacitance [uF/cm^2] (default: preset)")->transform(number_check());
    app->add_option("--g-k", o.g_K, "Potassium conductance [mS/cm^2] (default: preset)")->transform(number_check());
    app->add_option("--g-na", o.g_Na, "Sodium conductance [mS/cm^2] (default: preset)")->transform(number_check());
    app->add_option("--g-l", o.g_L, "Leak conductance [mS/cm^2] (default: preset)")->transform(number_check());
    app->add_option("--e-k", o.E_K, "Potassium reversal potential [mV] (default: preset)")->transform(number_check());
    app->add_option("--e-na", o.E_Na, "Sodium reversal potential [mV] (default: preset)")->transform(number_check());
    app->add_option("--e-l", o.E_L, "Leak reversal potential [mV] (default: preset)")->transform(number_check());
    app->add_option("--i-ext", o.I, "Input current [uA/cm^2] (default: preset)")->transform(number_check());
    app->add_option("--v-rest", o.V_rest, "Resting potential [mV] (default: preset)")->transform(number_check());
    app->add_option("--sigma", c.sigma, "Noise intensity of Sigma(u) [mV/ms^(1/2)]")
        ->transform(number_check())
        ->capture_default_str();
    app->add_option("--sigma-shape", c.sigma_shape, "Sigma(u): additive (sigma) | quadratic (sigma |u|^2)")
        ->check(CLI::IsMember({"additive", "quadratic"}))
        ->capture_default_str();
    app->add_option("--ou-theta", c.ou_theta, "OU mean reversion rate [1/ms]")->transform(number_check())->capture_default_str();
    app->add_option("--ou-mu", c.ou_mu, "OU long-run mean [mV/ms]")->transform(number_check())->capture_default_str();
    app->add_option("--ou-sigma", c.ou_sigma, "OU noise intensity")->transform(number_check())->capture_default_str();
    app->add_option("--custom-dim", c.custom_dim, "custom model: number of gates")->capture_default_str();
    app->add_option("--custom-a", c.custom_a, "custom model: constant a (negative) [1/ms]")
        ->transform(number_check())
        ->capture_default_str();
    app->add_option("--custom-b", c.custom_b, "custom model: constant b [mV/ms]")->transform(number_check())->capture_default_str();
    app->add_option("--custom-alpha", c.custom_alpha, "custom model: constant opening rate [1/ms]")
        ->transform(number_check())
        ->capture_default_str();
    app->add_option("--custom-beta", c.custom_beta, "custom model: constant closing rate [1/ms]")
        ->transform(number_check())
        ->capture_default_str();
}

void add_start_options(Subcommand& s) {
    auto* app = s.app;
    auto& c = s.cfg;
    app->add_option("--v0", c.v0, "Initial V [mV] (default: V_rest, 0 for custom)")->transform(number_check());
    app->add_option("--u0", c.u0, "Initial gates, comma separated (default: U_inf(v0))")
        ->delimiter(',')
        ->transform(number_check());
    app->add_option("--z0", c.z0, "Initial OU component (default: ou-mu)")->transform(number_check());
}

void add_grid_options(Subcommand& s, bool with_t_end, bool with_paths) {
    auto* app = s.app;
    auto& c = s.cfg;
    app->add_option("--scheme,--schemes", c.schemes,
                    "Schemes, comma separated: lt1 lt2 strang em tem dtem trem dtrem, or all")
        ->delimiter(',')
        ->capture_default_str();
    app->add_option("--dt", c.dt_list, "Step sizes [ms], comma separated; accepts 2^-k")
        ->delimiter(',')
        ->transform(number_check())
        ->capture_default_str();
    if (with_t_end)
        app->add_option("--t-end", c.t_end, "Time horizon [ms]")->transform(number_check())->capture_default_str();
    if (with_paths) app->add_option("--paths", c.n_paths, "Number of sample paths")->capture_default_str();
}

void add_reference_options(Subcommand& s) {
    auto* app = s.app;
    auto& c = s.cfg;
    app->add_option("--ref-scheme", c.ref_scheme, "Reference scheme (auto: trem, or strang if deterministic)")
        ->capture_default_str();
    app->add_option("--ref-dt", c.ref_dt, "Reference step size [ms]; also the Brownian base grid")
        ->transform(number_check())
        ->capture_default_str();
}

void add_region_options(Subcommand& s) {
    auto* app = s.app;
    auto& c = s.cfg;
    app->add_option("--v-min", c.v_min, "Lower bound of sampled start V [mV]")->transform(number_check())->capture_default_str();
    app->add_option("--v-max", c.v_max, "Upper bound of sampled start V [mV]")->transform(number_check())->capture_default_str();
    app->add_option("--u-min", c.u_min, "Lower bound of sampled start gates")->transform(number_check())->capture_default_str();
    app->add_option("--u-max", c.u_max, "Upper bound of sampled start gates")->transform(number_check())->capture_default_str();
}

void add_run_options(Subcommand& s) {
    auto* app = s.app;
    auto& c = s.cfg;
    app->add_option("--seed", c.seed, "Master seed of all random streams")->capture_default_str();
    app->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")->capture_default_str();
    app->add_option("--out", c.out_dir, std::string("Output directory (default: $") + kOutDirEnv + " or .)");
}

void build_subcommands(CLI::App& app, std::map<std::string, Subcommand>& subs) {
    auto make = [&](const std::string& name, const std::string& help) -> Subcommand& {
        auto& s = subs[name];
        s.cfg = defaults_for(name);
        s.app = app.add_subcommand(name, help);
        add_model_options(s);
        return s;
    };

    {
        auto& s = make("simulate", "Simulate one path per scheme and step size");
        add_start_options(s);
        add_grid_options(s, true, false);
        s.app->add_option("--base-dt", s.cfg.base_dt, "Brownian base grid [ms] (default: smallest dt)")
            ->transform(number_check())
            ->capture_default_str();
        s.app->add_option("--chi", s.cfg.chi, "Ito integral draw: increment | weighted")->capture_default_str();
        add_run_options(s);
    }
    {
        auto& s = make("convergence", "Strong convergence study (RMSE against a fine reference)");
        add_start_options(s);
        add_grid_options(s, true, true);
        add_reference_options(s);
        s.app->add_option("--chi", s.cfg.chi, "Ito integral draw: increment | weighted")->capture_default_str();
        add_run_options(s);
    }
    {
        auto& s = make("consistency", "One-step consistency study over sampled start states");
        add_grid_options(s, false, true);
        add_reference_options(s);
        add_region_options(s);
        s.app->add_option("--radius", s.cfg.radius, "Truncation radius R for |V| [mV]")
            ->transform(number_check())
            ->capture_default_str();
        s.app->add_option("--chi", s.cfg.chi, "Ito integral draw: increment | weighted")->capture_default_str();
        add_run_options(s);
    }
    {
        auto& s = make("density", "Long-run histogram of V and KS distance to a reference");
        add_start_options(s);
        add_grid_options(s, true, false);
        add_reference_options(s);
        s.app->add_option("--burn-in", s.cfg.burn_in, "Discarded initial time [ms] (negative: 20% of t-end)")
            ->transform(number_check())
            ->capture_default_str();
        s.app->add_option("--bins", s.cfg.bins, "Histogram bins")->capture_default_str();
        s.app->add_option("--sample-dt", s.cfg.sample_dt, "Spacing of recorded samples [ms] (at least dt)")
            ->transform(number_check())
            ->capture_default_str();
        add_run_options(s);
    }
    {
        auto& s = make("escape", "Count steps whose gates leave [0,1]");
        add_grid_options(s, false, true);
        add_region_options(s);
        s.app->add_option("--steps", s.cfg.n_steps, "Steps per path")->capture_default_str();
        add_run_options(s);
    }
    {
        auto& s = make("lyapunov", "Monte-Carlo check of the discrete Lyapunov bound for L(x) = 1 + |v|");
        add_grid_options(s, false, false);
        s.app->add_option("--u0", s.cfg.u0, "Probe gates (default: U_inf(v) per probe)")
            ->delimiter(',')
            ->transform(number_check());
        s.app->add_option("--v-probe", s.cfg.v_probes, "Probe voltages [mV], comma separated")
            ->delimiter(',')
            ->transform(number_check())
            ->capture_default_str();
        s.app->add_option("--mc-draws", s.cfg.n_mc, "Monte-Carlo draws per probe")->capture_default_str();
        add_run_options(s);
    }
    {
        auto& s = make("compare", "Paths of several schemes on one Brownian path against a reference");
        add_start_options(s);
        s.app->add_option("--v0-list", s.cfg.v0_list, "Several initial V [mV], comma separated (overrides v0)")
            ->delimiter(',')
            ->transform(number_check());
        add_grid_options(s, true, false);
        add_reference_options(s);
        add_run_options(s);
    }
    {
        auto& s = make("moments", "Empirical E[max_t |V_t|^(2p)] over growing horizons");
        add_start_options(s);
        add_grid_options(s, false, true);
        s.app->add_option("--p", s.cfg.p_list, "Moment orders p >= 1, comma separated")
            ->delimiter(',')
            ->transform(number_check())
            ->capture_default_str();
        s.app->add_option("--t-ladder", s.cfg.t_ladder, "Increasing horizons [ms], comma separated")
            ->delimiter(',')
            ->transform(number_check())
            ->capture_default_str();
        add_run_options(s);
    }
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key + ": " + what);
}

std::vector<SchemeKind> schemes_of(const RunConfig& cfg) {
    std::vector<SchemeKind> out;
    for (const auto& name : cfg.schemes) {
        if (name == "all") {
            out.insert(out.end(), std::begin(kAllSchemes), std::end(kAllSchemes));
            continue;
        }
        try {
            out.push_back(parse_scheme(name));
        } catch (const std::invalid_argument&) {
            throw ConfigError("scheme: unknown scheme '" + name + "'");
        }
    }
    return out;
}

ReferenceConfig reference_of(const RunConfig& cfg) {
    ReferenceConfig r;
    r.ref_dt = cfg.ref_dt;
    if (cfg.ref_scheme != "auto") r.scheme = parse_scheme(cfg.ref_scheme);
    return r;
}

std::string dt_tag(double dt) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", dt);
    return buf;
}

}  // namespace

ModelSpec<double> build_model(const RunConfig& cfg) {
    ModelSpec<double> spec;
    auto sigma = cfg.sigma_shape == "quadratic" ? quadratic_sigma<double>(cfg.sigma) : additive_sigma<double>(cfg.sigma);
    if (cfg.model == "custom") {
        CoefficientSet<double> c;
        c.dim = cfg.custom_dim;
        c.a = [a = cfg.custom_a](const GateVector<double>&) { return a; };
        c.b = [b = cfg.custom_b](const GateVector<double>&) { return b; };
        GateRates<double> rates{GateVector<double>::Constant(cfg.custom_dim, cfg.custom_alpha),
                                GateVector<double>::Constant(cfg.custom_dim, cfg.custom_beta)};
        c.rates = [rates](double) { return rates; };
        c.sigma = sigma;
        spec.coefficients = c;
    } else {
        spec.coefficients = hh_coefficients<double>(cfg.params, sigma);
    }
    if (cfg.model == "hh-ou")
        spec.noise = OrnsteinUhlenbeck{cfg.ou_theta, cfg.ou_mu, cfg.ou_sigma};
    else if (cfg.model == "hh-det")
        spec.noise = Deterministic{};
    return spec;
}

State<double> start_state(const RunConfig& cfg, const ModelSpec<double>& spec) {
    State<double> x;
    x.v = cfg.v0 ? *cfg.v0 : (cfg.model == "custom" ? 0.0 : cfg.params.V_rest);
    if (cfg.u0.empty()) {
        x.u = u_infinity(x.v, spec.coefficients);
    } else {
        x.u = Eigen::Map<const Eigen::VectorXd>(cfg.u0.data(), static_cast<Eigen::Index>(cfg.u0.size()));
    }
    if (spec.is_ou()) x.z = cfg.z0 ? *cfg.z0 : cfg.ou_mu;
    return x;
}

void validate(const RunConfig& cfg) {
    static const std::vector<std::string> commands{"simulate", "escape",   "convergence", "consistency",
                                                   "density",  "lyapunov", "compare",     "moments"};
    require(std::find(commands.begin(), commands.end(), cfg.command) != commands.end(), "command",
            "unknown subcommand '" + cfg.command + "'");
    require(cfg.model == "hh-bm" || cfg.model == "hh-ou" || cfg.model == "hh-det" || cfg.model == "custom", "model",
            "must be hh-bm, hh-ou, hh-det or custom");
    require(cfg.sigma_shape == "additive" || cfg.sigma_shape == "quadratic", "sigma-shape",
            "must be additive or quadratic");
    require(std::isfinite(cfg.sigma) && cfg.sigma >= 0, "sigma", "must be finite and nonnegative");
    try {
        validate(cfg.params);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("params: ") + e.what());
    }
    if (cfg.model == "hh-ou") {
        require(cfg.ou_theta > 0, "ou-theta", "must be positive");
        require(cfg.ou_sigma > 0, "ou-sigma", "must be positive");
    }
    if (cfg.model == "custom") {
        require(cfg.custom_dim >= 1 && cfg.custom_dim <= kMaxGates, "custom-dim",
                "must lie in [1, " + std::to_string(kMaxGates) + "]");
        require(cfg.custom_a < 0, "custom-a", "must be negative");
        require(cfg.custom_alpha > 0 && cfg.custom_beta > 0, "custom-alpha", "rates must be positive");
    }
    const int dim = cfg.model == "custom" ? cfg.custom_dim : 3;
    require(cfg.u0.empty() || static_cast<int>(cfg.u0.size()) == dim, "u0",
            "needs " + std::to_string(dim) + " components");
    if (cfg.v0) require(std::isfinite(*cfg.v0), "v0", "must be finite");

    const auto kinds = schemes_of(cfg);
    require(!kinds.empty(), "scheme", "at least one scheme is required");
    require(!cfg.dt_list.empty(), "dt", "at least one step size is required");
    for (double dt : cfg.dt_list) require(std::isfinite(dt) && dt > 0, "dt", "step sizes must be positive");
    require(std::isfinite(cfg.t_end) && cfg.t_end > 0, "t-end", "must be positive");
    require(cfg.threads >= 1, "threads", "must be at least 1");
    require(cfg.chi == "increment" || cfg.chi == "weighted", "chi", "must be increment or weighted");
    if (cfg.ref_scheme != "auto") {
        try {
            parse_scheme(cfg.ref_scheme);
        } catch (const std::invalid_argument&) {
            throw ConfigError("ref-scheme: unknown scheme '" + cfg.ref_scheme + "'");
        }
    }

    auto aligned = [](double a, double b) {
        try {
            aligned_ratio(a, b);
            return true;
        } catch (const std::invalid_argument&) {
            return false;
        }
    };
    const bool stochastic = cfg.model != "hh-det";
    const std::string& cmd = cfg.command;
    if (cmd == "simulate" || cmd == "convergence" || cmd == "compare" || cmd == "density")
        for (double dt : cfg.dt_list) require(aligned(cfg.t_end, dt), "t-end", "must be a multiple of every dt");
    if (cmd == "convergence" || cmd == "consistency" || cmd == "compare" || cmd == "density") {
        require(std::isfinite(cfg.ref_dt) && cfg.ref_dt > 0, "ref-dt", "must be positive");
        for (double dt : cfg.dt_list) require(aligned(dt, cfg.ref_dt), "ref-dt", "must divide every dt");
    }
    if (cmd == "simulate" && cfg.base_dt > 0 && stochastic)
        for (double dt : cfg.dt_list) require(aligned(dt, cfg.base_dt), "base-dt", "must divide every dt");
    if (cmd == "convergence") require(cfg.n_paths >= 2, "paths", "must be at least 2");
    if (cmd == "consistency" || cmd == "escape" || cmd == "moments")
        require(cfg.n_paths >= 1, "paths", "must be at least 1");
    if (cmd == "consistency" || cmd == "escape") {
        require(cfg.v_min <= cfg.v_max, "v-min", "must not exceed v-max");
        require(cfg.u_min <= cfg.u_max, "u-min", "must not exceed u-max");
    }
    if (cmd == "consistency") {
        require(cfg.radius > std::max(std::abs(cfg.v_min), std::abs(cfg.v_max)), "radius",
                "must exceed every sampled |V|");
        require(cfg.dt_list.size() >= 4, "dt", "a slope needs at least four step sizes");
    }
    if (cmd == "density") {
        require(cfg.bins >= 1, "bins", "must be positive");
        const double burn = cfg.burn_in < 0 ? 0.2 * cfg.t_end : cfg.burn_in;
        require(burn < cfg.t_end, "burn-in", "must be shorter than t-end");
        require(cfg.sample_dt >= 0, "sample-dt", "must be nonnegative");
        if (cfg.sample_dt > 0) require(aligned(cfg.sample_dt, cfg.ref_dt), "sample-dt", "must be a multiple of ref-dt");
    }
    if (cmd == "escape") require(cfg.n_steps >= 1, "steps", "must be positive");
    if (cmd == "lyapunov") {
        require(cfg.model != "hh-ou", "model", "the Lyapunov check covers hh-bm, hh-det and custom models");
        require(!cfg.v_probes.empty(), "v-probe", "at least one probe is required");
        require(cfg.n_mc >= 2, "mc-draws", "must be at least 2");
        for (SchemeKind k : kinds) require(is_splitting(k), "scheme", "the Lyapunov check applies to lt1, lt2, strang");
    }
    if (cmd == "moments") {
        require(!cfg.p_list.empty(), "p", "at least one order is required");
        for (double p : cfg.p_list) require(p >= 1.0, "p", "orders must be at least 1");
        require(!cfg.t_ladder.empty() && std::is_sorted(cfg.t_ladder.begin(), cfg.t_ladder.end()), "t-ladder",
                "must be nonempty and increasing");
        for (double t : cfg.t_ladder)
            for (double dt : cfg.dt_list) require(t > 0 && aligned(t, dt), "t-ladder", "must be multiples of every dt");
    }
    if (cmd == "simulate" || cmd == "convergence" || cmd == "compare" || cmd == "moments" || cmd == "density")
        if (cfg.model == "hh-ou")
            for (SchemeKind k : kinds)
                if (k == SchemeKind::strang) {
                    const double finest = *std::min_element(cfg.dt_list.begin(), cfg.dt_list.end());
                    const double base = cmd == "simulate" ? (cfg.base_dt > 0 ? cfg.base_dt : finest) : cfg.ref_dt;
                    for (double dt : cfg.dt_list)
                        require(aligned_ratio(dt, base) % 2 == 0, "dt",
                                "strang on hh-ou needs an even number of base steps per dt");
                }
}

nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["command"] = c.command;
    j["model"] = c.model;
    j["preset"] = c.preset;
    j["params"] = {{"C", c.params.C},     {"g_K", c.params.g_K}, {"g_Na", c.params.g_Na},
                   {"g_L", c.params.g_L}, {"E_K", c.params.E_K}, {"E_Na", c.params.E_Na},
                   {"E_L", c.params.E_L}, {"I", c.params.I},     {"V_rest", c.params.V_rest}};
    j["sigma"] = c.sigma;
    j["sigma_shape"] = c.sigma_shape;
    j["ou"] = {{"theta", c.ou_theta}, {"mu", c.ou_mu}, {"sigma", c.ou_sigma}};
    if (c.model == "custom")
        j["custom"] = {{"dim", c.custom_dim}, {"a", c.custom_a}, {"b", c.custom_b},
                       {"alpha", c.custom_alpha}, {"beta", c.custom_beta}};
    j["v0"] = c.v0 ? nlohmann::ordered_json(*c.v0) : nlohmann::ordered_json(nullptr);
    j["u0"] = c.u0;
    j["z0"] = c.z0 ? nlohmann::ordered_json(*c.z0) : nlohmann::ordered_json(nullptr);
    j["v0_list"] = c.v0_list;
    j["schemes"] = c.schemes;
    j["dt"] = c.dt_list;
    j["t_end"] = c.t_end;
    j["n_paths"] = c.n_paths;
    j["base_dt"] = c.base_dt;
    j["ref_scheme"] = c.ref_scheme;
    j["ref_dt"] = c.ref_dt;
    j["chi"] = c.chi;
    j["start_region"] = {{"v_min", c.v_min}, {"v_max", c.v_max}, {"u_min", c.u_min}, {"u_max", c.u_max}};
    j["radius"] = c.radius;
    j["burn_in"] = c.burn_in;
    j["bins"] = c.bins;
    j["sample_dt"] = c.sample_dt;
    j["n_steps"] = c.n_steps;
    j["v_probes"] = c.v_probes;
    j["n_mc"] = c.n_mc;
    j["p"] = c.p_list;
    j["t_ladder"] = c.t_ladder;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    return j;
}

ParseResult parse_config(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Splitting integrators for conditionally linear Hodgkin-Huxley SDEs"};
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "INI file with one [section] per subcommand; flags take precedence");
    app.require_subcommand(1);
    app.get_formatter()->column_width(36);
    std::map<std::string, Subcommand> subs;
    build_subcommands(app, subs);

    ParseResult result;
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        result.exit_code = code == 0 ? 0 : 1;
        return result;
    }

    for (auto& [name, s] : subs) {
        if (!s.app->parsed()) continue;
        RunConfig cfg = s.cfg;
        cfg.params = cfg.preset == "spiking" ? HHParams::spiking() : HHParams::unit();
        s.over.apply(cfg.params);
        if (cfg.out_dir.empty()) {
            const char* env = std::getenv(kOutDirEnv);
            cfg.out_dir = env && *env ? env : ".";
        }
        try {
            validate(cfg);
        } catch (const ConfigError& e) {
            err << "configuration error: " << e.what() << '\n';
            result.exit_code = 1;
            return result;
        }
        result.config = std::move(cfg);
        return result;
    }
    err << "no subcommand given\n";
    result.exit_code = 1;
    return result;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json base_meta(const RunConfig& cfg) {
    nlohmann::ordered_json m;
    m["seed"] = cfg.seed;
    m["config"] = to_json(cfg);
    return m;
}

std::vector<std::string> state_columns(const ModelSpec<double>& spec) {
    std::vector<std::string> cols{"t", "v"};
    for (int l = 0; l < spec.dim(); ++l) cols.push_back("u" + std::to_string(l + 1));
    if (spec.is_ou()) cols.push_back("z");
    return cols;
}

ChiRealization chi_of(const RunConfig& cfg) { return parse_chi(cfg.chi); }

void fit_row(CsvTable& t, const std::string& scheme, const std::string& component, const SlopeFit& f) {
    t.cell(scheme).cell(component).cell(f.slope).cell(f.intercept).cell(f.residual).cell(f.n_levels);
    t.end_row();
}

int run_simulate(const RunConfig& cfg, const ModelSpec<double>& spec, std::ostream& out) {
    const State<double> x0 = start_state(cfg, spec);
    const double base = cfg.base_dt > 0 ? cfg.base_dt : *std::min_element(cfg.dt_list.begin(), cfg.dt_list.end());
    std::optional<PathNoise> noise;
    if (!spec.is_deterministic()) noise.emplace(NoisePlan{cfg.seed, 1, cfg.t_end, base}, 0, true);
    for (SchemeKind k : schemes_of(cfg))
        for (double dt : cfg.dt_list) {
            CsvTable t(state_columns(spec));
            const auto outcome = simulate(
                k, spec, x0, dt, aligned_ratio(cfg.t_end, dt), noise ? &*noise : nullptr,
                [&](std::int64_t i, const State<double>& s) {
                    if (!s.all_finite()) return;
                    t.cell(static_cast<double>(i) * dt).cell(s.v);
                    for (int l = 0; l < spec.dim(); ++l) t.cell(s.u(l));
                    if (s.z) t.cell(*s.z);
                    t.end_row();
                },
                {chi_of(cfg)});
            auto meta = base_meta(cfg);
            meta["scheme"] = scheme_name(k);
            meta["dt"] = dt;
            meta["base_dt"] = base;
            meta["exploded"] = outcome.exploded_at.has_value();
            meta["exploded_at_time"] =
                outcome.exploded_at ? nlohmann::ordered_json(static_cast<double>(*outcome.exploded_at) * dt)
                                    : nlohmann::ordered_json(nullptr);
            const auto path = write_csv(cfg.out_dir, "simulate_" + std::string(scheme_name(k)) + "_dt" + dt_tag(dt) + ".csv",
                                        t, meta);
            out << scheme_name(k) << " dt=" << dt_tag(dt) << (outcome.exploded_at ? " exploded" : " finite") << " -> "
                << path.string() << '\n';
        }
    return 0;
}

int run_convergence_cmd(const RunConfig& cfg, const ModelSpec<double>& spec, std::ostream& out) {
    ConvergenceConfig c;
    c.spec = spec;
    c.x0 = start_state(cfg, spec);
    c.t_end = cfg.t_end;
    c.dt_list = cfg.dt_list;
    c.schemes = schemes_of(cfg);
    c.n_paths = cfg.n_paths;
    c.reference = reference_of(cfg);
    c.seed = cfg.seed;
    c.threads = cfg.threads;
    c.chi = chi_of(cfg);
    const auto report = run_convergence(c);

    CsvTable cells({"scheme", "dt", "rmse", "n_paths", "n_exploded", "seed"});
    for (const auto& r : report.cells) {
        cells.cell(scheme_name(r.scheme)).cell(r.dt).cell(r.rmse).cell(r.n_paths).cell(r.n_exploded);
        cells.cell(std::to_string(cfg.seed));
        cells.end_row();
    }
    CsvTable fits({"scheme", "component", "slope", "intercept", "residual", "n_levels"});
    for (const auto& f : report.fits) fit_row(fits, f.label, "state", f);
    auto meta = base_meta(cfg);
    meta["reference_scheme"] = scheme_name(reference_scheme(spec, c.reference));
    write_csv(cfg.out_dir, "convergence.csv", cells, meta);
    write_csv(cfg.out_dir, "convergence_fits.csv", fits, meta);
    for (const auto& f : report.fits) out << f.label << " slope " << format_double(f.slope) << '\n';
    return 0;
}

int run_consistency_cmd(const RunConfig& cfg, const ModelSpec<double>& spec, std::ostream& out) {
    CsvTable levels({"scheme", "dt", "rms_error", "rms_error_v", "rms_error_u", "n_kept", "n_discarded"});
    CsvTable fits({"scheme", "component", "slope", "intercept", "residual", "n_levels"});
    auto meta = base_meta(cfg);
    for (SchemeKind k : schemes_of(cfg)) {
        ConsistencyConfig c;
        c.spec = spec;
        c.scheme = k;
        c.starts.v_min = cfg.v_min;
        c.starts.v_max = cfg.v_max;
        c.starts.u_min = cfg.u_min;
        c.starts.u_max = cfg.u_max;
        c.dt_list = cfg.dt_list;
        c.n_paths = cfg.n_paths;
        c.truncation_radius = cfg.radius;
        c.reference = reference_of(cfg);
        c.seed = cfg.seed;
        c.threads = cfg.threads;
        c.chi = chi_of(cfg);
        const auto report = run_consistency(c);
        const std::string name(scheme_name(k));
        for (const auto& l : report.levels) {
            levels.cell(name).cell(l.dt).cell(l.rms_error).cell(l.rms_error_v).cell(l.rms_error_u);
            levels.cell(l.n_kept).cell(l.n_discarded);
            levels.end_row();
        }
        fit_row(fits, name, "state", report.fit);
        fit_row(fits, name, "v", report.fit_v);
        fit_row(fits, name, "u", report.fit_u);
        meta["discard_fraction"][name] = report.discard_fraction;
        out << name << " slope state " << format_double(report.fit.slope) << " v " << format_double(report.fit_v.slope)
            << " u " << format_double(report.fit_u.slope) << " discarded " << report.discard_fraction << '\n';
    }
    write_csv(cfg.out_dir, "consistency.csv", levels, meta);
    write_csv(cfg.out_dir, "consistency_fits.csv", fits, meta);
    return 0;
}

CsvTable histogram_table(const DensityReport& r) {
    CsvTable t({"bin_left", "bin_right", "frequency"});
    for (std::size_t k = 0; k < r.frequencies.size(); ++k) {
        t.cell(r.edges[k]).cell(r.edges[k + 1]).cell(r.frequencies[k]);
        t.end_row();
    }
    return t;
}

int run_density_cmd(const RunConfig& cfg, const ModelSpec<double>& spec, std::ostream& out) {
    const State<double> x0 = start_state(cfg, spec);
    const ReferenceConfig ref = reference_of(cfg);
    const double sample_dt = cfg.sample_dt > 0 ? cfg.sample_dt : 0.0;

    DensityConfig rc{spec, reference_scheme(spec, ref), x0, ref.ref_dt, cfg.t_end, cfg.burn_in, cfg.bins, cfg.seed};
    rc.base_dt = ref.ref_dt;
    rc.sample_dt = sample_dt;
    const auto reference = run_density(rc);
    if (reference.exploded)
        throw ReferenceExplosion("density reference became non-finite at t = " + format_double(reference.exploded_at_time));
    auto meta = base_meta(cfg);
    meta["scheme"] = scheme_name(rc.scheme);
    meta["dt"] = ref.ref_dt;
    meta["n_samples"] = reference.n_samples;
    write_csv(cfg.out_dir, "density_reference.csv", histogram_table(reference), meta);

    CsvTable summary({"scheme", "dt", "exploded", "exploded_at_time", "n_samples", "n_below", "n_above", "ks"});
    for (SchemeKind k : schemes_of(cfg))
        for (double dt : cfg.dt_list) {
            DensityConfig dc = rc;
            dc.scheme = k;
            dc.dt = dt;
            dc.sample_dt = sample_dt > dt ? sample_dt : dt;
            const auto r = run_density(dc, &reference);
            const std::string name(scheme_name(k));
            summary.cell(name).cell(dt).cell(r.exploded).cell(r.exploded ? r.exploded_at_time : std::nan(""));
            summary.cell(r.n_samples).cell(r.n_below).cell(r.n_above).cell(r.ks ? *r.ks : std::nan(""));
            summary.end_row();
            if (!r.exploded) {
                auto m = base_meta(cfg);
                m["scheme"] = name;
                m["dt"] = dt;
                m["n_samples"] = r.n_samples;
                m["ks"] = *r.ks;
                write_csv(cfg.out_dir, "density_" + name + "_dt" + dt_tag(dt) + ".csv", histogram_table(r), m);
            }
            out << name << " dt=" << dt_tag(dt) << ' '
                << (r.exploded ? "exploded at t=" + format_double(r.exploded_at_time) : "ks " + format_double(*r.ks))
                << '\n';
        }
    write_csv(cfg.out_dir, "density_summary.csv", summary, base_meta(cfg));
    return 0;
}

int run_escape_cmd(const RunConfig& cfg, const ModelSpec<double>& spec, std::ostream& out) {
    CsvTable t({"scheme", "dt", "n_steps", "n_paths", "total_steps", "escape_steps", "escape_rate", "paths_with_escape",
                "n_exploded", "mean_first_escape", "min_first_escape"});
    for (SchemeKind k : schemes_of(cfg))
        for (double dt : cfg.dt_list) {
            EscapeConfig c;
            c.spec = spec;
            c.scheme = k;
            c.dt = dt;
            c.n_steps = cfg.n_steps;
            c.n_paths = cfg.n_paths;
            c.starts.v_min = cfg.v_min;
            c.starts.v_max = cfg.v_max;
            c.starts.u_min = cfg.u_min;
            c.starts.u_max = cfg.u_max;
            c.seed = cfg.seed;
            c.threads = cfg.threads;
            const auto r = run_escape(c);
            t.cell(scheme_name(k)).cell(dt).cell(cfg.n_steps).cell(cfg.n_paths).cell(r.total_steps).cell(r.escape_steps);
            t.cell(r.escape_rate()).cell(r.paths_with_escape).cell(r.n_exploded).cell(r.mean_first_escape);
            t.cell(r.min_first_escape);
            t.end_row();
            out << scheme_name(k) << " dt=" << dt_tag(dt) << " escapes " << r.escape_steps << '/' << r.total_steps << '\n';
        }
    write_csv(cfg.out_dir, "escape.csv", t, base_meta(cfg));
    return 0;
}

int run_lyapunov_cmd(const RunConfig& cfg, const ModelSpec<double>& spec, std::ostream& out) {
    CsvTable t({"scheme", "dt", "v", "lhs", "std_error", "bound", "c2", "holds"});
    auto meta = base_meta(cfg);
    for (SchemeKind k : schemes_of(cfg))
        for (double dt : cfg.dt_list) {
            LyapunovConfig c;
            c.spec = spec;
            c.scheme = k;
            c.v_probes = cfg.v_probes;
            c.dt = dt;
            c.n_mc = cfg.n_mc;
            c.seed = cfg.seed;
            if (!cfg.u0.empty())
                c.u_probe = Eigen::Map<const Eigen::VectorXd>(cfg.u0.data(), static_cast<Eigen::Index>(cfg.u0.size()));
            const auto r = run_lyapunov(c);
            meta["constants"] = {{"c_a", r.constants.c_a}, {"c_b", r.constants.c_b}, {"c_sigma", r.constants.c_sigma}};
            for (const auto& p : r.probes) {
                t.cell(scheme_name(k)).cell(dt).cell(p.v).cell(p.lhs).cell(p.std_error).cell(p.bound).cell(r.c2);
                t.cell(p.holds());
                t.end_row();
                out << scheme_name(k) << " dt=" << dt_tag(dt) << " v=" << p.v << (p.holds() ? " holds" : " VIOLATED")
                    << '\n';
            }
        }
    write_csv(cfg.out_dir, "lyapunov.csv", t, meta);
    return 0;
}

int run_compare_cmd(const RunConfig& cfg, const ModelSpec<double>& spec, std::ostream& out) {
    CompareConfig c;
    c.spec = spec;
    c.schemes = schemes_of(cfg);
    c.dt_list = cfg.dt_list;
    if (cfg.v0_list.empty()) {
        c.x0_list.push_back(start_state(cfg, spec));
    } else {
        for (double v : cfg.v0_list) {
            RunConfig one = cfg;
            one.v0 = v;
            c.x0_list.push_back(start_state(one, spec));
        }
    }
    c.t_end = cfg.t_end;
    c.reference = reference_of(cfg);
    c.seed = cfg.seed;
    c.threads = cfg.threads;
    const auto report = run_path_compare(c);

    CsvTable paths({"scheme", "reference", "dt", "x0_index", "t", "v"});
    CsvTable summary({"scheme", "reference", "dt", "x0_index", "v0", "exploded", "exploded_at_time", "sup_deviation"});
    for (const auto& p : report.paths) {
        const std::string name(scheme_name(p.scheme));
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            paths.cell(name).cell(p.is_reference).cell(p.dt).cell(static_cast<std::int64_t>(p.x0_index));
            paths.cell(static_cast<double>(i) * p.dt).cell(p.v[i]);
            paths.end_row();
        }
        summary.cell(name).cell(p.is_reference).cell(p.dt).cell(static_cast<std::int64_t>(p.x0_index));
        summary.cell(c.x0_list[p.x0_index].v).cell(p.exploded).cell(p.exploded ? p.exploded_at_time : std::nan(""));
        summary.cell(p.sup_deviation);
        summary.end_row();
        if (!p.is_reference)
            out << name << " dt=" << dt_tag(p.dt) << " x0#" << p.x0_index << ' '
                << (p.exploded ? "exploded" : "sup deviation " + format_double(p.sup_deviation)) << '\n';
    }
    auto meta = base_meta(cfg);
    meta["reference_scheme"] = scheme_name(reference_scheme(spec, c.reference));
    write_csv(cfg.out_dir, "compare_paths.csv", paths, meta);
    write_csv(cfg.out_dir, "compare_summary.csv", summary, meta);
    return 0;
}

int run_moments_cmd(const RunConfig& cfg, const ModelSpec<double>& spec, std::ostream& out) {
    CsvTable t({"scheme", "dt", "p", "t_end", "value", "n_exploded", "superlinear_growth"});
    for (SchemeKind k : schemes_of(cfg))
        for (double dt : cfg.dt_list) {
            MomentConfig c{spec, k, start_state(cfg, spec), cfg.p_list, dt, cfg.t_ladder, cfg.n_paths, cfg.seed,
                           cfg.threads};
            const auto r = run_moment_check(c);
            for (const auto& row : r.rows) {
                t.cell(scheme_name(k)).cell(dt).cell(row.p).cell(row.t_end).cell(row.value).cell(row.n_exploded);
                t.cell(row.superlinear_growth);
                t.end_row();
            }
            out << scheme_name(k) << " dt=" << dt_tag(dt) << (r.exploded() ? " exploded" : " finite") << '\n';
        }
    write_csv(cfg.out_dir, "moments.csv", t, base_meta(cfg));
    return 0;
}

}  // namespace

int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        validate(cfg);
        const auto spec = build_model(cfg);
        hhsplit::validate(spec);
        const std::string& c = cfg.command;
        if (c == "simulate") return run_simulate(cfg, spec, out);
        if (c == "convergence") return run_convergence_cmd(cfg, spec, out);
        if (c == "consistency") return run_consistency_cmd(cfg, spec, out);
        if (c == "density") return run_density_cmd(cfg, spec, out);
        if (c == "escape") return run_escape_cmd(cfg, spec, out);
        if (c == "lyapunov") return run_lyapunov_cmd(cfg, spec, out);
        if (c == "compare") return run_compare_cmd(cfg, spec, out);
        if (c == "moments") return run_moments_cmd(cfg, spec, out);
        throw ConfigError("command: unknown subcommand '" + c + "'");
    } catch (const ReferenceExplosion& e) {
        err << "reference explosion: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    auto parsed = parse_config(argc, argv, out, err);
    if (parsed.exit_code) return *parsed.exit_code;
    return dispatch(parsed.config, out, err);
}

}  // namespace hhsplit::cli
