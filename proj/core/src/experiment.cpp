#include "nlheat/experiment.hpp"

#include "nlheat/branch.hpp"
#include "nlheat/noise.hpp"
#include "nlheat/profile.hpp"
#include "nlheat/randomize.hpp"
#include "nlheat/simvar.hpp"
#include "nlheat/spectrum.hpp"
#include "nlheat/util.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <atomic>
#include <thread>

namespace nlheat {

const char* const kArtifactVersion = "0.1.0";

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct FieldSpec {
    enum Type { Int, Num, Str, Arr, Bool } type = Num;
    json def;
};
using Schema = std::map<std::string, FieldSpec>;

const std::map<std::string, Schema>& schemas() {
    static const std::map<std::string, Schema> s = {
        {"profile",
         {{"d", {FieldSpec::Int, 3}},
          {"p", {FieldSpec::Num, 3.0}},
          {"alpha", {FieldSpec::Num, 1.0}},
          {"rho_max", {FieldSpec::Num, 40.0}},
          {"n", {FieldSpec::Int, 20000}},
          {"out", {FieldSpec::Str, "profile"}}}},
        {"spectrum",
         {{"d", {FieldSpec::Int, 3}},
          {"p", {FieldSpec::Num, 3.0}},
          {"alpha", {FieldSpec::Num, 1.0}},
          {"alpha_sweep", {FieldSpec::Arr, json::array()}},
          {"eta", {FieldSpec::Num, 1.0}},
          {"k", {FieldSpec::Int, 3}},
          {"rho_max", {FieldSpec::Num, 30.0}},
          {"n", {FieldSpec::Int, 2048}},
          {"find_eps", {FieldSpec::Num, 0.0}},
          {"out", {FieldSpec::Str, "spectrum"}}}},
        {"simvar",
         {{"mode", {FieldSpec::Str, "perturb"}},
          {"d", {FieldSpec::Int, 3}},
          {"p", {FieldSpec::Num, 3.0}},
          {"alpha", {FieldSpec::Num, 1.0}},
          {"amplitude", {FieldSpec::Num, 1e-6}},
          {"tau0", {FieldSpec::Num, 0.0}},
          {"tau1", {FieldSpec::Num, 10.0}},
          {"dt", {FieldSpec::Num, 1e-3}},
          {"eta", {FieldSpec::Num, 1.0}},
          {"gamma", {FieldSpec::Num, 12.0}},
          {"eps", {FieldSpec::Num, 0.02}},
          {"rho_max", {FieldSpec::Num, 30.0}},
          {"n", {FieldSpec::Int, 1536}},
          {"out", {FieldSpec::Str, "simvar"}}}},
        {"noise",
         {{"d", {FieldSpec::Int, 3}},
          {"p", {FieldSpec::Num, 3.0}},
          {"q", {FieldSpec::Num, 1.0}},
          {"s", {FieldSpec::Num, -1.0}},
          {"beta", {FieldSpec::Num, 0.0}},
          {"roughness", {FieldSpec::Num, 0.0}},
          {"horizon", {FieldSpec::Num, 0.5}},
          {"dt", {FieldSpec::Num, 1e-3}},
          {"paths", {FieldSpec::Int, 4}},
          {"rho_max", {FieldSpec::Num, 20.0}},
          {"n", {FieldSpec::Int, 1024}},
          {"grading", {FieldSpec::Num, 2.0}},
          {"cutoff", {FieldSpec::Int, 192}},
          {"out", {FieldSpec::Str, "noise"}}}},
        {"branch",
         {{"d", {FieldSpec::Int, 3}},
          {"p", {FieldSpec::Num, 3.0}},
          {"q", {FieldSpec::Num, 1.0}},
          {"alpha", {FieldSpec::Num, 0.0}},
          {"lambda_eps", {FieldSpec::Num, 0.05}},
          {"Rbar", {FieldSpec::Num, 1.0}},
          {"horizon", {FieldSpec::Num, 0.25}},
          {"theta", {FieldSpec::Num, 1.02}},
          {"steps", {FieldSpec::Int, 1200}},
          {"rho_max", {FieldSpec::Num, 16.0}},
          {"n", {FieldSpec::Int, 1024}},
          {"grading", {FieldSpec::Num, 2.0}},
          {"noise_amplitude", {FieldSpec::Num, 1.0}},
          {"noise_cutoff", {FieldSpec::Int, 192}},
          {"scheme_constant", {FieldSpec::Num, 0.05}},
          {"contraction_constant", {FieldSpec::Num, 0.05}},
          {"sim_rho_max", {FieldSpec::Num, 30.0}},
          {"sim_n", {FieldSpec::Int, 1536}},
          {"sim_dt", {FieldSpec::Num, 2e-3}},
          {"ancient_eps", {FieldSpec::Num, 0.02}},
          {"out", {FieldSpec::Str, "branch"}}}},
        {"randomize",
         {{"mode", {FieldSpec::Str, "moments"}},
          {"d", {FieldSpec::Int, 3}},
          {"L", {FieldSpec::Num, 12.0}},
          {"n", {FieldSpec::Int, 48}},
          {"K", {FieldSpec::Int, 8}},
          {"q", {FieldSpec::Num, 2.0}},
          {"p", {FieldSpec::Num, 3.0}},
          {"samples", {FieldSpec::Int, 2000}},
          {"T", {FieldSpec::Num, 0.5}},
          {"T_list", {FieldSpec::Arr, json::array()}},
          {"gamma", {FieldSpec::Num, 0.0}},
          {"sigma", {FieldSpec::Num, 0.5}},
          {"theta2", {FieldSpec::Num, 2.0}},
          {"theta3", {FieldSpec::Num, 2.0}},
          {"alpha_reg", {FieldSpec::Num, 0.0}},
          {"u0_amp", {FieldSpec::Num, 8.0}},
          {"u0_width", {FieldSpec::Num, 2.0}},
          {"time_steps", {FieldSpec::Int, 96}},
          {"scheme_constant", {FieldSpec::Num, 1.0}},
          {"out", {FieldSpec::Str, "randomize"}}}},
        {"report", {{"dir", {FieldSpec::Str, ""}}}},
    };
    return s;
}

void check_type(const std::string& sub, const std::string& key, const FieldSpec& spec,
                const json& v) {
    bool ok = false;
    switch (spec.type) {
        case FieldSpec::Int: ok = v.is_number_integer(); break;
        case FieldSpec::Num: ok = v.is_number(); break;
        case FieldSpec::Str: ok = v.is_string(); break;
        case FieldSpec::Arr: ok = v.is_array(); break;
        case FieldSpec::Bool: ok = v.is_boolean(); break;
    }
    if (!ok)
        throw ConfigError(sub + ": parameter '" + key + "' has the wrong type");
}

void validate_gates(const std::string& sub, const json& p) {
    const auto fujita = [](int d) { return 1.0 + 2.0 / d; };
    if (sub == "profile" || sub == "simvar") {
        const int d = p.at("d");
        const double pw = p.at("p");
        if (d < 3) throw ConfigError(sub + ": gate violated: d >= 3");
        if (!(pw > fujita(d)))
            throw ConfigError(sub + ": gate violated: 1+2/d < p");
        if (sub == "profile" && !(p.at("alpha").get<double>() > 0.0))
            throw ConfigError("profile: gate violated: alpha > 0");
    } else if (sub == "spectrum") {
        const int d = p.at("d");
        const double pw = p.at("p");
        const double eta = p.at("eta");
        if (d < 3) throw ConfigError("spectrum: gate violated: d >= 3");
        if (!(pw > fujita(d))) throw ConfigError("spectrum: gate violated: 1+2/d < p");
        if (!(eta >= 1.0 && eta < critical_exponent(d, pw)))
            throw ConfigError("spectrum: gate violated: 1 <= eta < d(p-1)/2");
    } else if (sub == "noise") {
        const int d = p.at("d");
        const double pw = p.at("p");
        const double q = p.at("q");
        if (d < 3) throw ConfigError("noise: gate violated: d >= 3");
        if (!(pw > fujita(d))) throw ConfigError("noise: gate violated: 1+2/d < p");
        if (!(q >= 1.0)) throw ConfigError("noise: gate violated: q >= 1");
    } else if (sub == "branch") {
        const int d = p.at("d");
        const double pw = p.at("p");
        const double q = p.at("q");
        if (d < 3) throw ConfigError("branch: gate violated: d >= 3");
        if (!(pw > fujita(d))) throw ConfigError("branch: gate violated: 1+2/d < p");
        if (!validate_power_range(d, pw).jl_subcritical)
            throw ConfigError("branch: gate violated: p < p_JL");
        pick_branch_exponents(d, pw, q); // throws when 1 <= q < q_c fails
    } else if (sub == "randomize") {
        const std::string mode = p.at("mode");
        if (mode != "moments" && mode != "tails" && mode != "solve" && mode != "success-curve")
            throw ConfigError("randomize: unknown mode '" + mode + "'");
        const int d = p.at("d");
        if (d < 1 || d > 3) throw ConfigError("randomize: gate violated: d in {1,2,3}");
        if (mode == "solve" || mode == "success-curve")
            validate_mild_gate(d, p.at("p"), p.at("q"));
        if (mode == "tails") {
            const double lhs = (p.at("sigma").get<double>() + p.at("alpha_reg").get<double>() -
                                2.0 * p.at("gamma").get<double>()) *
                               p.at("theta3").get<double>();
            if (!(lhs < 2.0))
                throw ConfigError("randomize: gate violated: (sigma+alpha-2gamma) theta3 < 2");
        }
    } else if (sub == "report") {
        if (p.at("dir").get<std::string>().empty())
            throw ConfigError("report: 'dir' is required");
    }
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw NumericalError("cannot open " + path + " for writing");
    os << text;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_text(const std::string& hash, const std::vector<std::string>& cols,
                     const std::vector<std::vector<double>>& rows) {
    std::string out = "# config=" + hash + "\n";
    for (std::size_t i = 0; i < cols.size(); ++i)
        out += cols[i] + (i + 1 < cols.size() ? "," : "\n");
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out += fmt(row[i]) + (i + 1 < row.size() ? "," : "\n");
    }
    return out;
}

// deterministic band-limited datum: positive Gaussian spectral profile
// truncated inside the partition range, normalized so || u0 ||_{L^2} = amp
LatticeField builtin_datum(int d, double L, int n, int K, double amp, double width) {
    LatticeField f = LatticeField::zeros(d, L, n);
    std::array<int, 3> m;
    const double cut = K - 1.2;
    for (std::size_t i = 0; i < f.size(); ++i) {
        unravel(f, i, m);
        double xi2 = 0.0, xi_inf = 0.0;
        bool nyq = false;
        for (int ax = 0; ax < d; ++ax) {
            if (m[ax] == -n / 2) nyq = true;
            const double xi = m[ax] * M_PI / L;
            xi2 += xi * xi;
            xi_inf = std::max(xi_inf, std::fabs(xi));
        }
        if (nyq || xi_inf > cut) continue;
        f.spec[i] = Cplx(std::exp(-xi2 / (2.0 * width * width)), 0.0);
    }
    const double norm = lattice_l2_spectral(f);
    if (norm > 0.0)
        for (auto& c : f.spec) c *= amp / norm;
    return f;
}

struct SeedRun {
    json summary;
    std::vector<std::string> files;
};

SeedRun run_profile(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash);
SeedRun run_spectrum(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash);
SeedRun run_simvar(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash);
SeedRun run_noise(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash);
SeedRun run_branch(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash);
SeedRun run_randomize(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash);
SeedRun run_report(const ExperimentConfig& cfg);

std::string out_path(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& stem,
                     const std::string& ext) {
    return cfg.out_dir + "/" + cfg.params.at("out").get<std::string>() + "_" + stem + "_seed" +
           std::to_string(seed) + ext;
}

SeedRun run_profile(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash) {
    const json& p = cfg.params;
    const ProfileSolution ps = integrate_profile(p.at("alpha"), p.at("p"), p.at("d"),
                                                 p.at("rho_max"), p.at("n"));
    if (!ps.integration_ok)
        throw NumericalError("profile: integrator blew up at rho=" +
                             std::to_string(ps.last_valid_rho));
    const double decay = 2.0 / (ps.p - 1.0);
    std::vector<std::vector<double>> rows;
    for (int j = 0; j < ps.grid->n(); ++j) {
        const double rho = ps.grid->nodes[j];
        rows.push_back({rho, ps.U.values[j], ps.dU.values[j],
                        std::pow(rho, decay) * ps.U.values[j]});
    }
    SeedRun run;
    const std::string csv = out_path(cfg, seed, "U", ".csv");
    write_text(csv, csv_text(hash, {"rho", "U", "dU", "rho_pow_U"}, rows));
    run.files.push_back(csv);
    run.summary = {{"alpha", ps.alpha},
                   {"ell", ps.ell},
                   {"residual", ps.residual},
                   {"tail_oscillation", ps.tail_oscillation},
                   {"tail_converged", ps.tail_converged}};
    const std::string js = out_path(cfg, seed, "summary", ".json");
    write_text(js, run.summary.dump(2) + "\n");
    run.files.push_back(js);
    return run;
}

SeedRun run_spectrum(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash) {
    const json& p = cfg.params;
    const int d = p.at("d");
    const double pw = p.at("p");
    const double eta = p.at("eta");
    const int k = p.at("k");
    SpectrumOptions opt;
    opt.rho_max = p.at("rho_max");
    opt.n = p.at("n");

    SeedRun run;
    if (p.at("find_eps").get<double>() > 0.0) {
        const UnstableAlpha ua = find_small_unstable_alpha(pw, d, p.at("find_eps"), eta, opt);
        run.summary = {{"alpha_star", ua.alpha},
                       {"lambda_star", ua.lambda},
                       {"bracket_lo", ua.bracket_lo},
                       {"bracket_hi", ua.bracket_hi},
                       {"iterations", ua.iterations}};
    } else if (!p.at("alpha_sweep").empty()) {
        std::vector<double> alphas;
        for (const auto& a : p.at("alpha_sweep")) alphas.push_back(a.get<double>());
        const SweepResult sweep = unstable_eigenvalue_sweep(pw, d, alphas, eta, opt);
        std::vector<std::vector<double>> rows;
        for (const auto& row : sweep.rows)
            rows.push_back({row.alpha, row.lambda_max, row.ok ? 1.0 : 0.0});
        const std::string csv = out_path(cfg, seed, "sweep", ".csv");
        write_text(csv, csv_text(hash, {"alpha", "lambda_max", "ok"}, rows));
        run.files.push_back(csv);
        run.summary = {{"unstable_count", sweep.unstable_alphas.size()}};
        if (sweep.min_positive_lambda)
            run.summary["min_positive_lambda"] = *sweep.min_positive_lambda;
    } else {
        const ProfileSolution ps = integrate_profile(p.at("alpha"), pw, d);
        const LinearizedOperator lin = assemble_linearized(ps, eta, opt);
        const SpectralReport rep = top_eigenpairs(lin, k);
        std::vector<std::vector<double>> rows;
        std::vector<double> one_row{ps.alpha};
        for (double lam : rep.eigenvalues) one_row.push_back(lam);
        rows.push_back(one_row);
        std::vector<std::string> cols{"alpha"};
        for (int i = 1; i <= k; ++i) cols.push_back("lambda_" + std::to_string(i));
        const std::string csv = out_path(cfg, seed, "eigs", ".csv");
        write_text(csv, csv_text(hash, cols, rows));
        run.files.push_back(csv);
        for (int i = 0; i < std::min(k, 3); ++i) {
            const std::string fpath = out_path(cfg, seed, "mode" + std::to_string(i), ".csv");
            std::ofstream os(fpath, std::ios::binary);
            write_radial_csv(os, rep.eigenfields[i]);
            run.files.push_back(fpath);
        }
        run.summary = {{"alpha", ps.alpha},
                       {"lambda_max", rep.eigenvalues[0]},
                       {"threshold", rep.threshold},
                       {"converged", rep.converged[0]}};
    }
    const std::string js = out_path(cfg, seed, "summary", ".json");
    write_text(js, run.summary.dump(2) + "\n");
    run.files.push_back(js);
    return run;
}

SeedRun run_simvar(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash) {
    const json& p = cfg.params;
    const std::string mode = p.at("mode");
    const int d = p.at("d");
    const double pw = p.at("p");
    const double eta = p.at("eta");
    const double gamma = p.at("gamma");
    const ProfileSolution ps = integrate_profile(p.at("alpha"), pw, d);
    SpectrumOptions sopt;
    sopt.rho_max = p.at("rho_max");
    sopt.n = p.at("n");
    const LinearizedOperator lin = assemble_linearized(ps, eta, sopt);
    const SpectralReport rep = top_eigenpairs(lin, 1);

    Trajectory tr;
    if (mode == "ancient") {
        if (!(rep.eigenvalues[0] > 0.0))
            throw NumericalError("simvar: ancient mode needs an unstable alpha");
        AncientOptions aopt;
        aopt.eta = eta;
        aopt.gamma = gamma;
        aopt.dt = p.at("dt");
        tr = approximate_ancient_solution(ps, rep.eigenfields[0], rep.eigenvalues[0],
                                          p.at("eps"), p.at("tau0"), p.at("tau1"), aopt);
    } else if (mode == "perturb") {
        RadialField w0 = rep.eigenfields[0];
        const double amp = p.at("amplitude");
        for (auto& v : w0.values) v *= amp;
        EvolveOptions eopt;
        eopt.norms = {{"L_eta", eta}, {"L_gamma", gamma}, {"L_gamma_over_p", gamma / pw}};
        tr = evolve_perturbation(w0, ps, p.at("tau0"), p.at("tau1"), p.at("dt"), eopt);
    } else {
        throw ConfigError("simvar: unknown mode '" + mode + "'");
    }

    std::vector<std::vector<double>> rows;
    const auto& nt = tr.norm_table;
    for (std::size_t i = 0; i < nt.times.size(); ++i)
        rows.push_back({nt.times[i], nt.values.at("L_eta")[i], nt.values.at("L_gamma")[i],
                        nt.values.at("L_gamma_over_p")[i]});
    SeedRun run;
    const std::string csv = out_path(cfg, seed, "norms", ".csv");
    write_text(csv, csv_text(hash, {"tau", "L_eta", "L_gamma", "L_gamma_over_p"}, rows));
    run.files.push_back(csv);
    const GrowthFit fit = growth_rate(tr, "L_gamma_over_p");
    run.summary = {{"rate", fit.rate},
                   {"r2", fit.r2},
                   {"lambda_max", rep.eigenvalues[0]},
                   {"truncated", tr.truncated},
                   {"flag", tr.flag}};
    const std::string js = out_path(cfg, seed, "summary", ".json");
    write_text(js, run.summary.dump(2) + "\n");
    run.files.push_back(js);
    return run;
}

SeedRun run_noise(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash) {
    const json& p = cfg.params;
    const int d = p.at("d");
    const double pw = p.at("p");
    const double q = p.at("q");
    bool binds_zero = false;
    double s = p.at("s");
    if (s < 0.0) s = default_noise_smoothness(d, pw, q, &binds_zero);
    double beta = p.at("beta");
    if (beta <= 0.0) beta = s + 0.5 * d + 1.0;
    beta -= p.at("roughness").get<double>();

    GridPtr grid = build_radial_grid(d, p.at("rho_max"), p.at("n"), p.at("grading"));
    const NoiseColoring nc = build_noise_coloring(grid, s, q, beta, p.at("cutoff"));
    const BranchExponents be = pick_branch_exponents(d, pw, q);

    ConvolutionOptions copt;
    copt.monitor_norms = {{"L_q", q}, {"L_r", be.r}, {"L_pr", pw * be.r}};

    SeedRun run;
    json paths = json::array();
    const int npaths = p.at("paths");
    for (int path = 0; path < npaths; ++path) {
        CounterRng rng(seed, static_cast<std::uint64_t>(path));
        auto [tr, mon] = stochastic_convolution(nc, p.at("horizon"), p.at("dt"), rng, copt);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < mon.times.size(); ++i)
            rows.push_back({mon.times[i], mon.norms.at("L_q")[i], mon.norms.at("L_r")[i],
                            mon.norms.at("L_pr")[i]});
        const std::string csv =
            out_path(cfg, seed, "path" + std::to_string(path), ".csv");
        write_text(csv, csv_text(hash, {"t", "L_q", "L_r", "L_pr"}, rows));
        run.files.push_back(csv);
        paths.push_back({{"sup_L_q", mon.running_max.at("L_q").back()},
                         {"sup_L_r", mon.running_max.at("L_r").back()},
                         {"sup_L_pr", mon.running_max.at("L_pr").back()}});
    }
    run.summary = {{"s", s},
                   {"beta", beta},
                   {"s_max_binds_at_zero", binds_zero},
                   {"tail_ratio", nc.tail_ratio},
                   {"paths", paths}};
    const std::string js = out_path(cfg, seed, "summary", ".json");
    write_text(js, run.summary.dump(2) + "\n");
    run.files.push_back(js);
    return run;
}

SeedRun run_branch(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash) {
    const json& p = cfg.params;
    BranchConfig bc;
    bc.d = p.at("d");
    bc.p = p.at("p");
    bc.q = p.at("q");
    const BranchExponents be = pick_branch_exponents(bc.d, bc.p, bc.q);
    bc.eps = be.eps;
    bc.r = be.r;
    bc.q_a = be.q_a;
    bc.Rbar = p.at("Rbar");
    bc.horizon = p.at("horizon");
    bc.mesh_theta = p.at("theta");
    bc.mesh_steps = p.at("steps");
    bc.grid = build_radial_grid(bc.d, p.at("rho_max"), p.at("n"), p.at("grading"));
    bc.noise_amplitude = p.at("noise_amplitude");
    bc.noise_cutoff = p.at("noise_cutoff");
    bc.scheme_constant = p.at("scheme_constant");
    bc.contraction_constant = p.at("contraction_constant");
    bc.sim_rho_max = p.at("sim_rho_max");
    bc.sim_n = p.at("sim_n");
    bc.sim_dt = p.at("sim_dt");
    bc.ancient_eps = p.at("ancient_eps");

    double alpha = p.at("alpha");
    double lambda = 0.0;
    SpectrumOptions sopt;
    sopt.rho_max = bc.sim_rho_max;
    sopt.n = bc.sim_n;
    if (alpha <= 0.0) {
        const UnstableAlpha ua =
            find_small_unstable_alpha(bc.p, bc.d, p.at("lambda_eps"), 1.0, sopt);
        alpha = ua.alpha;
        lambda = ua.lambda;
    } else {
        const ProfileSolution ps0 = integrate_profile(alpha, bc.p, bc.d);
        lambda = top_eigenpairs(assemble_linearized(ps0, 1.0, sopt), 1).eigenvalues[0];
    }
    bc.alpha_star = alpha;
    bc.lambda_star = lambda;
    bc.profile = std::make_shared<ProfileSolution>(integrate_profile(alpha, bc.p, bc.d));

    const BranchResult br = assemble_branches(bc, seed);

    SeedRun run;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < br.sep_times.size(); ++i)
        rows.push_back({br.sep_times[i], br.separation[i]});
    const std::string csv = out_path(cfg, seed, "separation", ".csv");
    write_text(csv, csv_text(hash, {"t", "sep_Lr"}, rows));
    run.files.push_back(csv);

    double duh_max = 0.0;
    json duh = json::array();
    for (std::size_t i = 0; i < br.duhamel_times.size(); ++i) {
        duh.push_back({{"t", br.duhamel_times[i]},
                       {"res1", br.duhamel_res1[i]},
                       {"res2", br.duhamel_res2[i]}});
        duh_max = std::max({duh_max, br.duhamel_res1[i], br.duhamel_res2[i]});
    }
    run.summary = {{"alpha_star", bc.alpha_star},
                   {"lambda_star", bc.lambda_star},
                   {"fitted_slope", br.fitted_slope},
                   {"predicted_slope", br.predicted_slope},
                   {"slope_r2", br.slope_r2},
                   {"T_stop", br.stop.value},
                   {"stop_trigger", br.stop.trigger},
                   {"picard_max_ratio_1", br.cert1.max_ratio_after_2},
                   {"picard_max_ratio_2", br.cert2.max_ratio_after_2},
                   {"duhamel_max", duh_max},
                   {"boundary_ratio", br.boundary_ratio},
                   {"duhamel", duh}};
    const std::string js = out_path(cfg, seed, "summary", ".json");
    write_text(js, run.summary.dump(2) + "\n");
    run.files.push_back(js);
    return run;
}

SeedRun run_randomize(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash) {
    const json& p = cfg.params;
    const std::string mode = p.at("mode");
    const int d = p.at("d");
    const int K = p.at("K");
    const LatticeField u0 =
        builtin_datum(d, p.at("L"), p.at("n"), K, p.at("u0_amp"), p.at("u0_width"));
    const BlockPartition bp = build_block_partition(d, K);
    CounterRng rng(seed, 0);

    MildOptions mopt;
    mopt.time_steps = p.at("time_steps");
    mopt.scheme_constant = p.at("scheme_constant");

    SeedRun run;
    if (mode == "moments") {
        const MomentReport rep = lq_moment_check(u0, p.at("q"), p.at("samples"), rng, bp);
        run.summary = {{"q", rep.q},
                       {"empirical_second_moment", rep.empirical_second_moment},
                       {"bound_side", rep.bound_side},
                       {"ratio", rep.ratio},
                       {"growth_slope", rep.growth_slope}};
    } else if (mode == "tails") {
        const TailReport rep =
            smoothing_tail_estimate(u0, p.at("gamma"), p.at("sigma"), p.at("theta2"),
                                    p.at("theta3"), p.at("T"), p.at("samples"), rng, bp,
                                    p.at("alpha_reg"));
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < rep.lambdas.size(); ++i) {
            const double model = rep.fit_a - rep.fit_b * rep.lambdas[i] * rep.lambdas[i];
            rows.push_back({rep.lambdas[i], rep.log_survival[i], model});
        }
        const std::string csv = out_path(cfg, seed, "survival", ".csv");
        write_text(csv, csv_text(hash, {"lambda", "log_surv_emp", "bound_fit"}, rows));
        run.files.push_back(csv);
        run.summary = {{"fit_a", rep.fit_a},
                       {"fit_b", rep.fit_b},
                       {"dominated", rep.dominated},
                       {"mean_norm", rep.mean_norm},
                       {"mean_norm_small_T", rep.mean_norm_small_T}};
    } else if (mode == "solve") {
        const RandomizedDatum rd = randomize(u0, bp, rng);
        const MildSolveResult sol =
            mild_fixed_point(rd, p.at("p"), d, p.at("q"), p.at("T"), mopt);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < sol.times.size(); ++i)
            rows.push_back({sol.times[i], sol.v_lr[i], sol.v_lq[i]});
        const std::string csv = out_path(cfg, seed, "solution", ".csv");
        write_text(csv, csv_text(hash, {"t", "v_Lr", "v_Lq"}, rows));
        run.files.push_back(csv);
        run.summary = {{"stopping_time", sol.stopping_time},
                       {"trigger", sol.trigger},
                       {"picard_max_ratio", sol.certificate.max_ratio_after_2},
                       {"contraction_ok", sol.certificate.contraction_ok},
                       {"M", sol.M},
                       {"r", sol.r}};
    } else { // success-curve
        std::vector<double> T_list;
        for (const auto& t : p.at("T_list")) T_list.push_back(t.get<double>());
        if (T_list.empty()) {
            const double T = p.at("T");
            for (int i = 0; i < 10; ++i)
                T_list.push_back(T * std::pow(10.0, -2.0 + 2.0 * i / 9.0));
        }
        const SuccessCurve curve = success_probability(u0, p.at("q"), p.at("p"), d, T_list,
                                                       cfg.ensemble > 1 ? cfg.ensemble
                                                                        : p.at("samples").get<int>(),
                                                       rng, bp, mopt);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < curve.T_list.size(); ++i)
            rows.push_back({curve.T_list[i], curve.p_emp[i]});
        const std::string csv = out_path(cfg, seed, "success", ".csv");
        write_text(csv, csv_text(hash, {"T", "P_emp"}, rows));
        run.files.push_back(csv);
        run.summary = {{"kappa", curve.kappa},
                       {"fit_slope", curve.fit_slope},
                       {"fit_r2", curve.fit_r2},
                       {"ensemble", curve.ensemble}};
    }
    const std::string js = out_path(cfg, seed, "summary", ".json");
    write_text(js, run.summary.dump(2) + "\n");
    run.files.push_back(js);
    return run;
}

SeedRun run_report(const ExperimentConfig& cfg) {
    const std::string dir = cfg.params.at("dir");
    json merged = json::array();
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 5 && name.find("summary") != std::string::npos &&
            name.ends_with(".json")) {
            std::ifstream is(entry.path());
            json j;
            is >> j;
            merged.push_back({{"file", name}, {"summary", j}});
        }
    }
    SeedRun run;
    run.summary = {{"collected", merged.size()}, {"entries", merged}};
    const std::string js = cfg.out_dir + "/report.json";
    write_text(js, run.summary.dump(2) + "\n");
    run.files.push_back(js);
    return run;
}

} // namespace

ExperimentConfig parse_config(const std::string& subcommand, const nlohmann::json& raw) {
    const auto sit = schemas().find(subcommand);
    if (sit == schemas().end()) throw ConfigError("unknown subcommand '" + subcommand + "'");
    const Schema& schema = sit->second;

    ExperimentConfig cfg;
    cfg.subcommand = subcommand;
    for (const auto& [key, value] : raw.items()) {
        if (key == "seed") {
            cfg.seed = value.get<std::uint64_t>();
            continue;
        }
        if (key == "threads") {
            cfg.threads = value.get<int>();
            continue;
        }
        if (key == "out_dir") {
            cfg.out_dir = value.get<std::string>();
            continue;
        }
        if (key == "ensemble") {
            cfg.ensemble = value.get<int>();
            continue;
        }
        if (key == "schema_version") {
            if (value.get<int>() != 1) throw ConfigError("unsupported schema_version");
            continue;
        }
        const auto it = schema.find(key);
        if (it == schema.end())
            throw ConfigError(subcommand + ": unknown parameter '" + key + "'");
        check_type(subcommand, key, it->second, value);
        cfg.params[key] = value;
    }
    for (const auto& [key, spec] : schema)
        if (!cfg.params.contains(key)) cfg.params[key] = spec.def;
    if (cfg.ensemble < 1) throw ConfigError("ensemble >= 1 required");
    if (cfg.threads < 1) throw ConfigError("threads >= 1 required");
    validate_gates(subcommand, cfg.params);
    return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    return {{"subcommand", cfg.subcommand}, {"schema_version", cfg.schema_version},
            {"seed", cfg.seed},             {"threads", cfg.threads},
            {"out_dir", cfg.out_dir},       {"ensemble", cfg.ensemble},
            {"params", cfg.params}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    nlohmann::json raw = j.value("params", nlohmann::json::object());
    for (const char* key : {"seed", "threads", "out_dir", "ensemble", "schema_version"})
        if (j.contains(key)) raw[key] = j.at(key);
    return parse_config(j.at("subcommand").get<std::string>(), raw);
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
    // out_dir and threads do not influence the numbers; the hash identifies
    // the experiment
    const nlohmann::json j = {{"subcommand", cfg.subcommand},
                              {"schema_version", cfg.schema_version},
                              {"seed", cfg.seed},
                              {"ensemble", cfg.ensemble},
                              {"params", cfg.params}};
    return hash_hex(fnv1a64(j.dump()));
}

nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json status = nlohmann::json::array();
    for (const auto& st : m.status)
        status.push_back({{"seed", st.seed}, {"ok", st.ok}, {"note", st.note}});
    return {{"config_hash", m.config_hash},
            {"artifact_version", m.artifact_version},
            {"seeds", m.seeds},
            {"status", status},
            {"outputs", m.outputs},
            {"aggregate", m.aggregate}};
}

void write_manifest(const RunManifest& m, const std::string& path) {
    write_text(path, manifest_to_json(m).dump(2) + "\n");
}

RunManifest run_ensemble(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    const std::string hash = config_hash_hex(cfg);

    RunManifest manifest;
    manifest.config_hash = hash;
    manifest.artifact_version = kArtifactVersion;

    std::vector<SeedRun> runs(cfg.ensemble);
    std::vector<RunStatus> status(cfg.ensemble);
    for (int i = 0; i < cfg.ensemble; ++i) {
        manifest.seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
    }

    auto work = [&](int i) {
        const std::uint64_t seed = manifest.seeds[i];
        status[i].seed = seed;
        try {
            if (cfg.subcommand == "profile")
                runs[i] = run_profile(cfg, seed, hash);
            else if (cfg.subcommand == "spectrum")
                runs[i] = run_spectrum(cfg, seed, hash);
            else if (cfg.subcommand == "simvar")
                runs[i] = run_simvar(cfg, seed, hash);
            else if (cfg.subcommand == "noise")
                runs[i] = run_noise(cfg, seed, hash);
            else if (cfg.subcommand == "branch")
                runs[i] = run_branch(cfg, seed, hash);
            else if (cfg.subcommand == "randomize")
                runs[i] = run_randomize(cfg, seed, hash);
            else if (cfg.subcommand == "report")
                runs[i] = run_report(cfg);
            else
                throw ConfigError("unknown subcommand '" + cfg.subcommand + "'");
            status[i].ok = true;
        } catch (const std::exception& e) {
            status[i].ok = false;
            status[i].note = e.what();
        }
    };

    if (cfg.threads <= 1 || cfg.ensemble == 1) {
        for (int i = 0; i < cfg.ensemble; ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < std::min(cfg.threads, cfg.ensemble); ++t)
            pool.emplace_back([&] {
                for (int i = next++; i < cfg.ensemble; i = next++) work(i);
            });
        for (auto& th : pool) th.join();
    }

    manifest.status = status;
    int ok_count = 0;
    for (int i = 0; i < cfg.ensemble; ++i) {
        if (!status[i].ok) continue;
        ++ok_count;
        for (const auto& f : runs[i].files) manifest.outputs.push_back(f);
    }
    if (ok_count * 5 < cfg.ensemble * 4) {
        std::string first_err;
        for (const auto& st : status)
            if (!st.ok) {
                first_err = st.note;
                break;
            }
        throw NumericalError("run_ensemble: fewer than 80% of seeds succeeded (" +
                             std::to_string(ok_count) + "/" + std::to_string(cfg.ensemble) +
                             "); first failure: " + first_err);
    }

    // aggregate numeric summary fields: mean and quartiles; slope-like fields
    // also get a normal-theory confidence halfwidth
    std::map<std::string, std::vector<double>> columns;
    for (int i = 0; i < cfg.ensemble; ++i) {
        if (!status[i].ok) continue;
        for (const auto& [key, value] : runs[i].summary.items())
            if (value.is_number()) columns[key].push_back(value.get<double>());
    }
    nlohmann::json agg;
    for (const auto& [key, vals] : columns) {
        nlohmann::json entry = {{"mean", mean(vals)},
                                {"q25", quantile(vals, 0.25)},
                                {"q50", quantile(vals, 0.50)},
                                {"q75", quantile(vals, 0.75)},
                                {"count", vals.size()}};
        if (key.find("slope") != std::string::npos || key.find("rate") != std::string::npos)
            entry["ci95_halfwidth"] =
                vals.size() > 1 ? 1.96 * std::sqrt(variance(vals) / vals.size()) : 0.0;
        agg[key] = entry;
    }
    manifest.aggregate = agg;
    write_manifest(manifest, cfg.out_dir + "/manifest.json");
    return manifest;
}

} // namespace nlheat
