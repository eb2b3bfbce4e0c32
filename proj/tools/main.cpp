// Command-line front end: eigensystem tables, bridge simulation, functional
// quantization, oracle verification, and quantization-rate studies.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oubridge/bridge_sim.hpp"
#include "oubridge/json_io.hpp"
#include "oubridge/kl_solver.hpp"
#include "oubridge/oracle.hpp"
#include "oubridge/ou_model.hpp"
#include "oubridge/quantizer.hpp"

using nlohmann::json;
using namespace oubridge;

namespace {

constexpr int kExitBadParams = 2;
constexpr int kExitSolverFailure = 3;

struct RunConfig {
    OuParams params;
    double z = 0.0;
    std::uint64_t seed = 42;
    std::string out;
    std::string format = "csv";  // csv | json
    int n_modes = 10;
    int grid = 256;
    int paths = 1000;
    std::string scheme = "euler";
    int N = 10;
    int m_max = 10;
    std::int64_t mc_budget = 0;
    std::vector<int> N_list;

    json echo() const {
        json j;
        j["params"] = params;
        j["z"] = z;
        j["seed"] = seed;
        j["format"] = format;
        j["n_modes"] = n_modes;
        j["grid"] = grid;
        j["paths"] = paths;
        j["scheme"] = scheme;
        j["N"] = N;
        j["m_max"] = m_max;
        j["mc_budget"] = mc_budget;
        j["N_list"] = N_list;
        return j;
    }
};

// No partial files: write to a temp sibling, then rename.
void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string());
        os << content;
        if (!os.good()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

std::string csv_preamble(const RunConfig& cfg) {
    std::ostringstream os;
    os << "# config " << cfg.echo().dump() << "\n";
    return os.str();
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

QuantOptions quant_options(const RunConfig& cfg) {
    QuantOptions opt;
    opt.seed = cfg.seed;
    if (cfg.mc_budget > 0) {
        opt.mc_budget = cfg.mc_budget;
        opt.eval_budget = cfg.mc_budget;
    }
    return opt;
}

int cmd_eigen(const RunConfig& cfg) {
    const KlBasis basis = kl_basis(cfg.params, cfg.n_modes);
    const auto brackets = frequency_brackets(cfg.params, cfg.n_modes);
    if (cfg.format == "json") {
        json j;
        j["config"] = cfg.echo();
        j["basis"] = basis;
        json table = json::array();
        for (std::size_t i = 0; i < basis.modes.size(); ++i) {
            const KlMode& m = basis.modes[i];
            table.push_back({{"n", m.n},
                             {"omega", m.omega},
                             {"lambda", m.lambda},
                             {"bracket", {brackets[i].lo, brackets[i].hi}},
                             {"residual", frequency_residual(cfg.params, m.omega)},
                             {"case", to_string(basis.freq_case)}});
        }
        j["table"] = table;
        write_file(cfg.out, j.dump(2) + "\n");
    } else {
        std::ostringstream os;
        os << csv_preamble(cfg);
        os << "n,omega,lambda,norm,bracket_lo,bracket_hi,residual,case\n";
        for (std::size_t i = 0; i < basis.modes.size(); ++i) {
            const KlMode& m = basis.modes[i];
            os << m.n << ',' << format_double(m.omega) << ',' << format_double(m.lambda) << ','
               << format_double(m.norm) << ',' << format_double(brackets[i].lo) << ','
               << format_double(brackets[i].hi) << ','
               << format_double(frequency_residual(cfg.params, m.omega)) << ','
               << to_string(basis.freq_case) << "\n";
        }
        write_file(cfg.out, os.str());
    }
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    BridgeSpec spec{cfg.params, cfg.z};
    const TimeGrid grid = TimeGrid::uniform(cfg.params.T, cfg.grid);
    const Scheme scheme = cfg.scheme == "exact" ? Scheme::Exact : Scheme::Euler;
    const auto paths = simulate_paths(spec, grid, cfg.paths, cfg.seed, scheme);

    if (cfg.format == "json") {
        json j;
        j["config"] = cfg.echo();
        j["t"] = grid.points;
        j["paths"] = paths;
        write_file(cfg.out, j.dump() + "\n");
    } else {
        std::ostringstream os;
        os << csv_preamble(cfg);
        os << "t,value,path_id\n";
        for (std::size_t p = 0; p < paths.size(); ++p)
            for (std::size_t i = 0; i < grid.size(); ++i)
                os << format_double(grid.points[i]) << ',' << format_double(paths[p][i]) << ','
                   << p << "\n";
        write_file(cfg.out, os.str());
    }
    return 0;
}

int cmd_quantize(const RunConfig& cfg) {
    BridgeSpec spec{cfg.params, cfg.z};
    const QuantOptions opt = quant_options(cfg);
    auto [d, reports] = select_dimension(cfg.params, cfg.N, cfg.m_max, opt);
    const FunctionalQuantizer fq = functional_quantizer(spec, cfg.N, cfg.m_max, opt);
    const TimeGrid grid = TimeGrid::uniform(cfg.params.T, cfg.grid);
    const auto paths = quantizer_paths(fq, grid);

    json j;
    j["config"] = cfg.echo();
    j["quantizer"] = fq;
    j["selected_dimension"] = d;
    j["reports"] = json::array();
    for (const DistortionReport& r : reports) j["reports"].push_back(r);
    write_file(cfg.out + ".json", j.dump(2) + "\n");

    std::ostringstream os;
    os << csv_preamble(cfg);
    os << "t,value,path_id,probability\n";
    for (std::size_t p = 0; p < paths.size(); ++p)
        for (std::size_t i = 0; i < grid.size(); ++i)
            os << format_double(grid.points[i]) << ',' << format_double(paths[p][i]) << ',' << p
               << ',' << format_double(fq.codebook.probabilities[p]) << "\n";
    write_file(cfg.out, os.str());
    return 0;
}

struct Check {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
};

int cmd_verify(const RunConfig& cfg) {
    std::vector<Check> checks;
    auto add = [&](const std::string& name, double measured, double bound) {
        checks.push_back({name, measured < bound, measured, bound});
    };

    const std::vector<std::pair<double, double>> sets = {
        {1.0, 0.5}, {1.0, 2.0}, {-0.5, 1.0}, {0.0, 1.0}};

    for (const auto& [theta, s02] : sets) {
        OuParams p;
        p.theta = theta;
        p.sigma0 = std::sqrt(s02);
        const std::string tag =
            " (theta=" + std::to_string(theta) + ", sigma0^2=" + std::to_string(s02) + ")";

        const TimeGrid grid = TimeGrid::uniform(p.T, 100);
        const auto kernel = oracle::conditioned_kernel(p, grid);
        double max_diff = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (std::size_t j = 0; j < grid.size(); ++j)
                max_diff = std::max(max_diff, std::abs(kernel.matrix[i][j] -
                                                       bridge_cov(p, grid.points[i],
                                                                  grid.points[j])));
        add("kernel mutual consistency" + tag, max_diff, 1e-10);

        const TimeGrid fine = TimeGrid::uniform(p.T, 2000);
        const auto nkernel = oracle::conditioned_kernel(p, fine);
        const auto npairs = oracle::nystrom_eigen(nkernel, 5);
        const KlBasis basis = kl_basis(p, 5);
        double max_rel = 0.0;
        for (int n = 0; n < 5; ++n)
            max_rel = std::max(max_rel,
                               std::abs(npairs[static_cast<std::size_t>(n)].lambda -
                                        basis.modes[static_cast<std::size_t>(n)].lambda) /
                                   basis.modes[static_cast<std::size_t>(n)].lambda);
        add("Nystrom eigenvalue agreement" + tag, max_rel, 5e-3);
    }

    {  // simulator law at t = T/2, Euler on a fine grid
        OuParams p;
        BridgeSpec spec{p, 1.0};
        const int n_paths = std::max(cfg.paths, 10000);
        const TimeGrid grid = TimeGrid::uniform(p.T, 513);
        const auto paths = simulate_paths(spec, grid, n_paths, cfg.seed, Scheme::Euler);
        const std::size_t mid = 256;
        double mean = 0.0, var = 0.0;
        for (const auto& path : paths) mean += path[mid];
        mean /= n_paths;
        for (const auto& path : paths) var += (path[mid] - mean) * (path[mid] - mean);
        var /= (n_paths - 1);
        const double se = std::sqrt(var / n_paths);
        add("Euler bridge mean at T/2",
            std::abs(mean - bridge_mean(spec, grid.points[mid])) / se, 3.0);
        double pin = 0.0;
        for (const auto& path : paths) pin = std::max(pin, std::abs(path.back() - spec.z));
        add("Euler path pinning", pin, 1e-15);
    }

    {  // 1-D Lloyd anchor
        const Codebook cb = lloyd({1.0}, 2);
        const double a = std::sqrt(2.0 / M_PI);
        add("Lloyd N=2 codepoints", std::max(std::abs(cb.points[0][0] + a),
                                             std::abs(cb.points[1][0] - a)), 1e-6);
        add("Lloyd N=2 distortion",
            std::abs(distortion_1d({-a, a}, 1.0) - (1.0 - 2.0 / M_PI)), 1e-12);
    }

    {  // Brownian-bridge closed forms
        OuParams p;
        p.theta = 0.0;
        double worst = 0.0;
        for (double s : {0.1, 0.3, 0.5, 0.9})
            for (double t : {0.2, 0.5, 0.8})
                worst = std::max(worst, std::abs(bridge_cov(p, s, t) -
                                                 (std::min(s, t) - s * t)));
        add("Brownian bridge closed form", worst, 1e-10);
        const KlBasis basis = kl_basis(p, 3);
        double spec_err = 0.0;
        for (int n = 1; n <= 3; ++n)
            spec_err = std::max(spec_err,
                                std::abs(basis.modes[static_cast<std::size_t>(n - 1)].lambda -
                                         1.0 / (n * n * M_PI * M_PI)));
        add("Brownian bridge spectrum", spec_err, 1e-10);
    }

    bool all_pass = true;
    std::ostringstream os;
    os << csv_preamble(cfg);
    os << "check,pass,measured,bound\n";
    for (const Check& c : checks) {
        all_pass = all_pass && c.pass;
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << "  measured="
                  << c.measured << " bound=" << c.bound << "\n";
        os << '"' << c.name << "\"," << (c.pass ? 1 : 0) << ',' << format_double(c.measured)
           << ',' << format_double(c.bound) << "\n";
    }
    if (!cfg.out.empty()) write_file(cfg.out, os.str());
    return all_pass ? 0 : 1;
}

int cmd_rate(const RunConfig& cfg) {
    if (cfg.N_list.size() < 4) {
        std::cerr << "rate: --N-list needs at least 4 increasing values\n";
        return kExitBadParams;
    }
    BridgeSpec spec{cfg.params, cfg.z};
    const RateResult res = rate_check(spec, cfg.N_list, cfg.m_max, quant_options(cfg));
    if (cfg.format == "json") {
        json j;
        j["config"] = cfg.echo();
        j["slope"] = res.slope;
        j["K_estimate"] = res.K_estimate;
        json pts = json::array();
        for (const RatePoint& pt : res.points)
            pts.push_back({{"N", pt.N}, {"E_N", pt.error}, {"se", pt.std_error}});
        j["points"] = pts;
        write_file(cfg.out, j.dump(2) + "\n");
    } else {
        std::ostringstream os;
        os << csv_preamble(cfg);
        os << "# slope=" << format_double(res.slope)
           << " K=" << format_double(res.K_estimate) << "\n";
        os << "N,E_N,se\n";
        for (const RatePoint& pt : res.points)
            os << pt.N << ',' << format_double(pt.error) << ',' << format_double(pt.std_error)
               << "\n";
        write_file(cfg.out, os.str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ornstein-Uhlenbeck bridge toolkit: Karhunen-Loeve eigensystems, bridge "
                 "simulation, and optimal functional quantization"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
        sub->add_option("--theta", cfg.params.theta, "mean-reversion rate");
        sub->add_option("--mu", cfg.params.mu, "long-term mean");
        sub->add_option("--sigma", cfg.params.sigma, "volatility");
        sub->add_option("--sigma0", cfg.params.sigma0, "initial std dev");
        sub->add_option("--x0", cfg.params.x0, "initial mean");
        sub->add_option("--T", cfg.params.T, "horizon");
        sub->add_option("--z", cfg.z, "conditioning endpoint X_T = z");
        sub->add_option("--seed", cfg.seed, "RNG master seed");
        sub->add_option("--out", cfg.out, "output file");
        sub->add_option("--format", cfg.format, "csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
        return sub;
    };

    auto* eigen = add_common(app.add_subcommand("eigen", "compute the KL eigensystem"));
    eigen->add_option("--n-modes", cfg.n_modes, "number of modes");

    auto* simulate = add_common(app.add_subcommand("simulate", "simulate bridge paths"));
    simulate->add_option("--grid", cfg.grid, "grid points");
    simulate->add_option("--paths", cfg.paths, "number of paths");
    simulate->add_option("--scheme", cfg.scheme, "euler or exact")
        ->check(CLI::IsMember({"euler", "exact"}));

    auto* quantize = add_common(app.add_subcommand("quantize", "build a functional quantizer"));
    quantize->add_option("--N", cfg.N, "codebook size");
    quantize->add_option("--m-max", cfg.m_max, "max truncation order searched");
    quantize->add_option("--mc-budget", cfg.mc_budget, "Monte-Carlo training/eval budget");
    quantize->add_option("--grid", cfg.grid, "output path grid points");

    auto* verify = add_common(app.add_subcommand("verify", "run the oracle check suite"));
    verify->add_option("--paths", cfg.paths, "simulation paths for the law check");

    auto* rate = add_common(app.add_subcommand("rate", "quantization error rate study"));
    rate->add_option("--N-list", cfg.N_list, "codebook sizes (at least 4, increasing)")
        ->delimiter(',');
    rate->add_option("--m-max", cfg.m_max, "max truncation order searched");
    rate->add_option("--mc-budget", cfg.mc_budget, "Monte-Carlo training/eval budget");

    CLI11_PARSE(app, argc, argv);
    CLI::App* sub = app.get_subcommands().front();

    try {
        if (!config_path.empty()) {
            // Flags given on the command line win over config-file values.
            std::ifstream is(config_path);
            if (!is) throw std::invalid_argument("cannot open config file " + config_path);
            const json j = json::parse(is);
            auto set_if_unset = [&](const char* flag, auto& target, const char* key) {
                const CLI::Option* opt = sub->get_option_no_throw(flag);
                if (j.contains(key) && (opt == nullptr || opt->count() == 0))
                    j.at(key).get_to(target);
            };
            set_if_unset("--theta", cfg.params.theta, "theta");
            set_if_unset("--mu", cfg.params.mu, "mu");
            set_if_unset("--sigma", cfg.params.sigma, "sigma");
            set_if_unset("--sigma0", cfg.params.sigma0, "sigma0");
            set_if_unset("--x0", cfg.params.x0, "x0");
            set_if_unset("--T", cfg.params.T, "T");
            set_if_unset("--z", cfg.z, "z");
            set_if_unset("--seed", cfg.seed, "seed");
            set_if_unset("--out", cfg.out, "out");
            set_if_unset("--format", cfg.format, "format");
            set_if_unset("--n-modes", cfg.n_modes, "n_modes");
            set_if_unset("--grid", cfg.grid, "grid");
            set_if_unset("--paths", cfg.paths, "paths");
            set_if_unset("--scheme", cfg.scheme, "scheme");
            set_if_unset("--N", cfg.N, "N");
            set_if_unset("--m-max", cfg.m_max, "m_max");
            set_if_unset("--mc-budget", cfg.mc_budget, "mc_budget");
            set_if_unset("--N-list", cfg.N_list, "N_list");
        }
        cfg.params.validate();
        if (cfg.out.empty() && sub->get_name() != "verify")
            throw std::invalid_argument("--out is required");

        if (sub->get_name() == "eigen") return cmd_eigen(cfg);
        if (sub->get_name() == "simulate") return cmd_simulate(cfg);
        if (sub->get_name() == "quantize") return cmd_quantize(cfg);
        if (sub->get_name() == "verify") return cmd_verify(cfg);
        if (sub->get_name() == "rate") return cmd_rate(cfg);
        return kExitBadParams;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolverFailure;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid parameters: " << e.what() << "\n";
        return kExitBadParams;
    } catch (const std::domain_error& e) {
        std::cerr << "invalid parameters: " << e.what() << "\n";
        return kExitBadParams;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolverFailure;
    }
}
