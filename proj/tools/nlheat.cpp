// Experiment driver: subcommand dispatch over the core library. Exit codes:
// 0 success, 2 parameter-gate violation, 3 numerical failure.

#include "nlheat/experiment.hpp"
#include "nlheat/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

struct GlobalArgs {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";
    int ensemble = 1;
    std::string config_path;
};

// CLI flags collected as strings so missing flags fall back to schema defaults
struct FlagBag {
    std::map<std::string, std::string> str_flags;
    std::map<std::string, double> num_flags;
    std::map<std::string, long long> int_flags;
    std::map<std::string, std::vector<double>> arr_flags;

    json to_params() const {
        json p = json::object();
        for (const auto& [k, v] : str_flags) p[k] = v;
        for (const auto& [k, v] : num_flags) p[k] = v;
        for (const auto& [k, v] : int_flags) p[k] = v;
        for (const auto& [k, v] : arr_flags) p[k] = v;
        return p;
    }
};

void add_num(CLI::App* cmd, FlagBag& bag, const std::string& name, const std::string& desc) {
    cmd->add_option_function<double>(
        "--" + name, [&bag, name](double v) { bag.num_flags[name] = v; }, desc);
}
void add_int(CLI::App* cmd, FlagBag& bag, const std::string& name, const std::string& desc) {
    cmd->add_option_function<long long>(
        "--" + name, [&bag, name](long long v) { bag.int_flags[name] = v; }, desc);
}
void add_str(CLI::App* cmd, FlagBag& bag, const std::string& name, const std::string& desc) {
    cmd->add_option_function<std::string>(
        "--" + name, [&bag, name](const std::string& v) { bag.str_flags[name] = v; }, desc);
}
void add_arr(CLI::App* cmd, FlagBag& bag, const std::string& name, const std::string& desc) {
    cmd->add_option_function<std::vector<double>>(
        "--" + name, [&bag, name](const std::vector<double>& v) { bag.arr_flags[name] = v; },
        desc);
}

int run(const std::string& sub, const GlobalArgs& g, const FlagBag& bag) {
    json raw;
    if (!g.config_path.empty()) {
        std::ifstream is(g.config_path);
        if (!is) throw nlheat::ConfigError("cannot open config file " + g.config_path);
        json file_cfg;
        is >> file_cfg;
        if (file_cfg.contains("params"))
            raw = file_cfg.at("params");
        else
            raw = file_cfg;
        if (file_cfg.contains("subcommand") &&
            file_cfg.at("subcommand").get<std::string>() != sub)
            throw nlheat::ConfigError("config file targets subcommand '" +
                                      file_cfg.at("subcommand").get<std::string>() + "'");
    }
    const json cli_params = bag.to_params();
    for (const auto& [k, v] : cli_params.items()) raw[k] = v;
    raw["seed"] = g.seed;
    raw["threads"] = g.threads;
    raw["out_dir"] = g.out_dir;
    raw["ensemble"] = g.ensemble;

    const nlheat::ExperimentConfig cfg = nlheat::parse_config(sub, raw);
    std::printf("config %s -> %s (hash %s)\n", sub.c_str(), cfg.out_dir.c_str(),
                nlheat::config_hash_hex(cfg).c_str());
    const nlheat::RunManifest manifest = nlheat::run_ensemble(cfg);
    int failures = 0;
    for (const auto& st : manifest.status)
        if (!st.ok) {
            ++failures;
            std::fprintf(stderr, "seed %llu failed: %s\n",
                         static_cast<unsigned long long>(st.seed), st.note.c_str());
        }
    std::printf("%zu output file(s), %d/%zu seeds ok, manifest at %s/manifest.json\n",
                manifest.outputs.size(), static_cast<int>(manifest.status.size()) - failures,
                manifest.status.size(), cfg.out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for the focusing nonlinear heat equation"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs g;
    app.add_option("--seed", g.seed, "base seed, seed+i for ensemble member i");
    app.add_option("--threads", g.threads, "worker threads for ensembles");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--ensemble", g.ensemble, "number of seeds to run");
    app.add_option("--config", g.config_path, "JSON config file (flags override)");

    std::map<std::string, FlagBag> bags;

    auto* profile = app.add_subcommand("profile", "expander profile by shooting");
    {
        FlagBag& b = bags["profile"];
        add_int(profile, b, "d", "spatial dimension");
        add_num(profile, b, "p", "nonlinearity power");
        add_num(profile, b, "alpha", "U(0)");
        add_num(profile, b, "rho-max", "outer radius");
        add_int(profile, b, "n", "grid nodes");
        add_str(profile, b, "out", "output stem");
    }
    auto* spectrum = app.add_subcommand("spectrum", "linearized operator eigenpairs");
    {
        FlagBag& b = bags["spectrum"];
        add_int(spectrum, b, "d", "spatial dimension");
        add_num(spectrum, b, "p", "nonlinearity power");
        add_num(spectrum, b, "alpha", "profile amplitude");
        add_arr(spectrum, b, "alpha-sweep", "sweep of alphas");
        add_num(spectrum, b, "eta", "integrability exponent for the threshold");
        add_int(spectrum, b, "k", "number of eigenpairs");
        add_num(spectrum, b, "rho-max", "spectral domain radius");
        add_int(spectrum, b, "n", "spectral grid nodes");
        add_num(spectrum, b, "find-eps", "when > 0, search for 0 < lambda < eps");
        add_str(spectrum, b, "out", "output stem");
    }
    auto* simvar = app.add_subcommand("simvar", "similarity-variable flows");
    {
        FlagBag& b = bags["simvar"];
        add_str(simvar, b, "mode", "perturb | ancient");
        add_int(simvar, b, "d", "spatial dimension");
        add_num(simvar, b, "p", "nonlinearity power");
        add_num(simvar, b, "alpha", "profile amplitude");
        add_num(simvar, b, "amplitude", "perturbation amplitude (perturb mode)");
        add_num(simvar, b, "tau0", "start time");
        add_num(simvar, b, "tau1", "end time");
        add_num(simvar, b, "dt", "time step");
        add_num(simvar, b, "eta", "intersection-norm lower exponent");
        add_num(simvar, b, "gamma", "intersection-norm upper exponent");
        add_num(simvar, b, "eps", "amplitude bound (ancient mode)");
        add_num(simvar, b, "rho-max", "evolution domain radius");
        add_int(simvar, b, "n", "evolution grid nodes");
        add_str(simvar, b, "out", "output stem");
    }
    auto* noise = app.add_subcommand("noise", "colored noise and stochastic convolution");
    {
        FlagBag& b = bags["noise"];
        add_int(noise, b, "d", "spatial dimension");
        add_num(noise, b, "p", "nonlinearity power");
        add_num(noise, b, "q", "integrability exponent");
        add_num(noise, b, "s", "Sobolev smoothness target (negative = auto)");
        add_num(noise, b, "beta", "spectral decay exponent (0 = auto)");
        add_num(noise, b, "roughness", "subtracted from beta, exploratory");
        add_num(noise, b, "horizon", "time horizon");
        add_num(noise, b, "dt", "time step");
        add_int(noise, b, "paths", "paths per seed");
        add_num(noise, b, "rho-max", "domain radius");
        add_int(noise, b, "n", "grid nodes");
        add_num(noise, b, "grading", "grid grading");
        add_int(noise, b, "cutoff", "retained modes");
        add_str(noise, b, "out", "output stem");
    }
    auto* branch = app.add_subcommand("branch", "two mild solutions from one datum");
    {
        FlagBag& b = bags["branch"];
        add_int(branch, b, "d", "spatial dimension");
        add_num(branch, b, "p", "nonlinearity power");
        add_num(branch, b, "q", "solution space exponent");
        add_num(branch, b, "alpha", "profile amplitude (0 = search)");
        add_num(branch, b, "lambda-eps", "eigenvalue bound for the search");
        add_num(branch, b, "Rbar", "datum truncation radius");
        add_num(branch, b, "horizon", "stopping-time cap");
        add_num(branch, b, "theta", "geometric mesh ratio");
        add_int(branch, b, "steps", "geometric mesh steps");
        add_num(branch, b, "rho-max", "domain radius");
        add_int(branch, b, "n", "grid nodes");
        add_num(branch, b, "grading", "grid grading");
        add_num(branch, b, "noise-amplitude", "noise scale (0 = deterministic control)");
        add_int(branch, b, "noise-cutoff", "retained noise modes");
        add_num(branch, b, "scheme-constant", "C in the stopping clauses");
        add_num(branch, b, "contraction-constant", "C' in the contraction clause");
        add_num(branch, b, "sim-rho-max", "similarity domain radius");
        add_int(branch, b, "sim-n", "similarity grid nodes");
        add_num(branch, b, "sim-dt", "similarity time step");
        add_num(branch, b, "ancient-eps", "ancient-surrogate amplitude bound");
        add_str(branch, b, "out", "output stem");
    }
    auto* randomize = app.add_subcommand("randomize", "frequency-block randomization");
    {
        FlagBag& b = bags["randomize"];
        add_str(randomize, b, "mode", "moments | tails | solve | success-curve");
        add_int(randomize, b, "d", "lattice dimension");
        add_num(randomize, b, "L", "half box size");
        add_int(randomize, b, "n", "lattice points per axis");
        add_int(randomize, b, "K", "block cutoff");
        add_num(randomize, b, "q", "data integrability exponent");
        add_num(randomize, b, "p", "nonlinearity power");
        add_int(randomize, b, "samples", "Monte Carlo samples");
        add_num(randomize, b, "T", "horizon");
        add_arr(randomize, b, "T-list", "success-curve probe horizons");
        add_num(randomize, b, "gamma", "time weight exponent");
        add_num(randomize, b, "sigma", "smoothing derivatives");
        add_num(randomize, b, "theta2", "space exponent");
        add_num(randomize, b, "theta3", "time exponent");
        add_num(randomize, b, "alpha-reg", "negative-regularity index of the datum");
        add_num(randomize, b, "u0-amp", "datum amplitude");
        add_num(randomize, b, "u0-width", "datum spectral width");
        add_int(randomize, b, "time-steps", "solver mesh steps");
        add_num(randomize, b, "scheme-constant", "C fixing the ball radius");
        add_str(randomize, b, "out", "output stem");
    }
    auto* report = app.add_subcommand("report", "aggregate summaries in a directory");
    {
        FlagBag& b = bags["report"];
        add_str(report, b, "dir", "directory of per-seed summaries");
    }

    try {
        app.parse(argc, argv);
        for (auto& [name, bag] : bags) {
            // CLI flag names use dashes, schema keys use underscores
            FlagBag fixed;
            auto fix = [](std::string s) {
                for (auto& c : s)
                    if (c == '-') c = '_';
                return s;
            };
            for (const auto& [k, v] : bag.str_flags) fixed.str_flags[fix(k)] = v;
            for (const auto& [k, v] : bag.num_flags) fixed.num_flags[fix(k)] = v;
            for (const auto& [k, v] : bag.int_flags) fixed.int_flags[fix(k)] = v;
            for (const auto& [k, v] : bag.arr_flags) fixed.arr_flags[fix(k)] = v;
            bag = fixed;
        }
        for (CLI::App* sub : app.get_subcommands())
            return run(sub->get_name(), g, bags[sub->get_name()]);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const nlheat::ConfigError& e) {
        std::fprintf(stderr, "gate violation: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
}
