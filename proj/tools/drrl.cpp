// Command-line front end: validate specs, solve them exactly, run experiments.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "drrl/environments.hpp"
#include "drrl/errors.hpp"
#include "drrl/harness.hpp"
#include "drrl/io.hpp"
#include "drrl/robust_eval.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kIo = 2;

int cmd_validate(const std::string& path) {
    const auto spec = drrl::load_spec(path);
    const auto violations = drrl::validate_spec(spec);
    if (violations.empty()) {
        std::cout << path << ": ok (" << spec.n_states << " states, " << spec.n_actions << " actions, H="
                  << spec.horizon << ", d=" << spec.dim << ")\n";
        return kOk;
    }
    for (const auto& v : violations) std::cout << path << ": " << drrl::to_string(v.kind) << ": " << v.message << '\n';
    return kValidation;
}

int cmd_solve(const std::string& path, std::optional<double> rho, const std::string& q_csv, const std::string& v_csv) {
    auto spec = drrl::load_spec(path);
    if (rho) spec = drrl::with_homogeneous_rho(spec, *rho);
    drrl::require_valid(spec);
    const auto sol = drrl::solve_robust_optimal(spec);
    std::cout << "h,s,v_star,pi_star\n";
    for (int h = 0; h < spec.horizon; ++h)
        for (int s = 0; s < spec.n_states; ++s)
            std::cout << h + 1 << ',' << s << ',' << drrl::format_double(sol.v_star(h, s)) << ',' << sol.pi_star[h][s]
                      << '\n';
    if (!q_csv.empty()) drrl::write_q_star_csv(sol, q_csv);
    if (!v_csv.empty()) drrl::write_v_star_csv(sol, v_csv);
    return kOk;
}

int cmd_run(const std::string& path, bool is_sweep) {
    const auto config = drrl::parse_config(path);
    const auto result = is_sweep ? drrl::sweep(config) : drrl::run_experiment(config);
    std::cout << "wrote " << result.aggregate.size() << " aggregate rows to " << (config.output_dir / "aggregate.csv").string()
              << '\n';
    return kOk;
}

int cmd_plot_data(const std::string& dir) {
    for (const auto& p : drrl::emit_plot_data(dir)) std::cout << p.string() << '\n';
    return kOk;
}

struct ExportOptions {
    std::string kind = "five-state";
    std::string out;
    double xi_l1 = 0.3;
    double p = 0.3;
    double delta_env = 0.3;
    double q = 0.5;
    double rho = 0.5;
    int d = 2;
    int horizon = 6;
    int episodes = 100;
    std::uint64_t seed = 7;
    bool target = false;
};

int cmd_export(const ExportOptions& o) {
    drrl::LinearDrmdpSpec spec;
    if (o.kind == "five-state") {
        drrl::FiveStateParams params;
        params.xi = drrl::uniform_xi(o.xi_l1);
        params.p = o.p;
        params.delta_env = o.delta_env;
        params.q = o.q;
        params.rho_14 = o.rho;
        auto [source, target] = drrl::build_five_state_env(params);
        spec = o.target ? target : source;
    } else if (o.kind == "hard-instance") {
        drrl::HardInstanceParams params;
        params.d = o.d;
        params.horizon = o.horizon;
        params.episodes = o.episodes;
        params.rho = o.rho;
        drrl::Rng rng(o.seed);
        params.xi_signs = drrl::random_xi_signs(o.horizon, o.d, rng);
        spec = drrl::build_hard_instance(params);
    } else if (o.kind == "support-shift") {
        auto [m0, m1] = drrl::build_support_shift_pair(o.p, o.q, o.rho, o.horizon);
        spec = o.target ? m1 : m0;
    } else {
        throw drrl::ValidationError("unknown environment '" + o.kind + "'");
    }
    drrl::save_spec(spec, o.out);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributionally robust linear RL experiments"};
    app.require_subcommand(1);

    std::string spec_path, config_path, results_dir, q_csv, v_csv;
    std::optional<double> rho;
    ExportOptions exp;

    auto* validate = app.add_subcommand("validate", "Check a spec file");
    validate->add_option("spec-file", spec_path)->required();

    auto* solve = app.add_subcommand("solve", "Print the exact robust optimal values of a spec");
    solve->add_option("spec-file", spec_path)->required();
    solve->add_option("--rho", rho, "Override every uncertainty level");
    solve->add_option("--q-csv", q_csv, "Also write Q* to this CSV");
    solve->add_option("--v-csv", v_csv, "Also write V* and pi* to this CSV");

    auto* run = app.add_subcommand("run", "Run an experiment config");
    run->add_option("config", config_path)->required();

    auto* sweep = app.add_subcommand("sweep", "Run the (xi, rho, q) grid of a config");
    sweep->add_option("config", config_path)->required();

    auto* plot = app.add_subcommand("plot-data", "Write plot-ready CSVs from a results directory");
    plot->add_option("results-dir", results_dir)->required();

    auto* exporter = app.add_subcommand("export-env", "Write a built-in environment as a spec file");
    exporter->add_option("kind", exp.kind, "five-state | hard-instance | support-shift")->required();
    exporter->add_option("--out", exp.out)->required();
    exporter->add_option("--xi-l1", exp.xi_l1);
    exporter->add_option("--p", exp.p);
    exporter->add_option("--delta-env", exp.delta_env);
    exporter->add_option("--q", exp.q);
    exporter->add_option("--rho", exp.rho);
    exporter->add_option("--d", exp.d);
    exporter->add_option("--horizon", exp.horizon);
    exporter->add_option("--episodes", exp.episodes);
    exporter->add_option("--seed", exp.seed);
    exporter->add_flag("--target", exp.target, "Export the target instead of the source");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*validate) return cmd_validate(spec_path);
        if (*solve) return cmd_solve(spec_path, rho, q_csv, v_csv);
        if (*run) return cmd_run(config_path, false);
        if (*sweep) return cmd_run(config_path, true);
        if (*plot) return cmd_plot_data(results_dir);
        if (*exporter) return cmd_export(exp);
    } catch (const drrl::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const drrl::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const drrl::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const drrl::PreconditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
    return kOk;
}
