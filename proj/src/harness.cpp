#include "drrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "drrl/errors.hpp"
#include "drrl/io.hpp"
#include "drrl/robust_eval.hpp"

namespace drrl {

using nlohmann::json;
namespace fs = std::filesystem;

// --- config ----------------------------------------------------------------

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ValidationError("config: unknown key '" + key + "'" + (where.empty() ? "" : " in " + where));
}

template <class T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config: cannot parse value of '" + key + "'");
    }
}

std::vector<double> number_list(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (v.is_number()) return {v.get<double>()};
    auto out = get_as<std::vector<double>>(j, key);
    if (out.empty()) throw ValidationError("config: '" + key + "' must not be empty");
    return out;
}

} // namespace

ExperimentConfig parse_config_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    reject_unknown(j,
                   {"environment", "rho_mode", "env", "variants", "K", "replications", "base_seed", "rho", "xi_l1",
                    "q", "checkpoints", "target_episodes", "threads", "output_dir", "learner"},
                   "");
    for (const char* key : {"environment", "K", "variants"})
        if (!j.contains(key)) throw ValidationError(std::string("config: missing required key '") + key + "'");

    ExperimentConfig c;
    const auto env_name = get_as<std::string>(j, "environment");
    if (env_name == "five-state") {
        c.environment = EnvironmentKind::five_state;
    } else if (env_name == "hard-instance") {
        c.environment = EnvironmentKind::hard_instance;
    } else if (env_name == "support-shift") {
        c.environment = EnvironmentKind::support_shift;
        c.horizon = 3;
    } else {
        throw ValidationError("config: unknown environment '" + env_name + "'");
    }

    if (j.contains("env")) {
        const json& e = j.at("env");
        if (!e.is_object()) throw ValidationError("config: 'env' must be an object");
        switch (c.environment) {
        case EnvironmentKind::five_state:
            reject_unknown(e, {"p", "delta_env"}, "env");
            if (e.contains("p")) c.p = get_as<double>(e, "p");
            if (e.contains("delta_env")) c.delta_env = get_as<double>(e, "delta_env");
            break;
        case EnvironmentKind::hard_instance:
            reject_unknown(e, {"d", "horizon", "sign_seed"}, "env");
            if (e.contains("d")) c.hard_d = get_as<int>(e, "d");
            if (e.contains("horizon")) c.horizon = get_as<int>(e, "horizon");
            if (e.contains("sign_seed")) c.sign_seed = get_as<std::uint64_t>(e, "sign_seed");
            break;
        case EnvironmentKind::support_shift:
            reject_unknown(e, {"p", "horizon"}, "env");
            if (e.contains("p")) c.p = get_as<double>(e, "p");
            if (e.contains("horizon")) c.horizon = get_as<int>(e, "horizon");
            break;
        }
    }

    if (j.contains("rho_mode")) {
        const auto mode = get_as<std::string>(j, "rho_mode");
        if (mode == "heterogeneous") c.rho_mode = RhoMode::heterogeneous;
        else if (mode == "homogeneous") c.rho_mode = RhoMode::homogeneous;
        else throw ValidationError("config: unknown rho_mode '" + mode + "'");
    }

    const json& variants = j.at("variants");
    std::vector<std::string> names;
    if (variants.is_string()) names.push_back(variants.get<std::string>());
    else names = get_as<std::vector<std::string>>(j, "variants");
    if (names.empty()) throw ValidationError("config: 'variants' must not be empty");
    for (const auto& n : names) {
        try {
            c.variants.push_back(parse_variant(n));
        } catch (const InputError&) {
            throw ValidationError("config: unknown variant '" + n + "'");
        }
    }

    c.episodes = get_as<int>(j, "K");
    if (c.episodes < 1) throw ValidationError("config: K must be at least 1");
    if (j.contains("replications")) c.replications = get_as<int>(j, "replications");
    if (c.replications < 1) throw ValidationError("config: replications must be at least 1");
    if (j.contains("base_seed")) c.base_seed = get_as<std::uint64_t>(j, "base_seed");
    if (j.contains("rho")) c.rho = number_list(j, "rho");
    if (j.contains("xi_l1")) c.xi_l1 = number_list(j, "xi_l1");
    if (j.contains("q")) c.q = number_list(j, "q");
    if (j.contains("checkpoints")) {
        c.checkpoints = get_as<std::vector<int>>(j, "checkpoints");
        for (int k : c.checkpoints)
            if (k < 1 || k > c.episodes) throw ValidationError("config: checkpoints must lie in [1, K]");
    }
    if (j.contains("target_episodes")) c.target_episodes = get_as<int>(j, "target_episodes");
    if (c.target_episodes < 0) throw ValidationError("config: target_episodes must be nonnegative");
    if (j.contains("threads")) c.threads = get_as<int>(j, "threads");
    if (c.threads < 1) throw ValidationError("config: threads must be at least 1");
    if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j, "output_dir");

    if (j.contains("learner")) {
        const json& l = j.at("learner");
        if (!l.is_object()) throw ValidationError("config: 'learner' must be an object");
        reject_unknown(l, {"c", "delta", "lambda", "beta", "beta_bar", "beta_tilde", "weight_scale", "refactor_every"},
                       "learner");
        auto& o = c.learner;
        if (l.contains("c")) o.c = get_as<double>(l, "c");
        if (l.contains("delta")) o.delta = get_as<double>(l, "delta");
        if (l.contains("lambda")) o.lambda = get_as<double>(l, "lambda");
        if (l.contains("beta")) o.beta = get_as<double>(l, "beta");
        if (l.contains("beta_bar")) o.beta_bar = get_as<double>(l, "beta_bar");
        if (l.contains("beta_tilde")) o.beta_tilde = get_as<double>(l, "beta_tilde");
        if (l.contains("weight_scale")) o.weight_scale = get_as<double>(l, "weight_scale");
        if (l.contains("refactor_every")) o.refactor_every = get_as<int>(l, "refactor_every");
        if (!(o.delta > 0.0 && o.delta < 1.0)) throw ValidationError("config: learner.delta must lie in (0, 1)");
        if (o.lambda && !(*o.lambda > 0.0)) throw ValidationError("config: learner.lambda must be positive");
        if (o.refactor_every < 1) throw ValidationError("config: learner.refactor_every must be at least 1");
    }
    return c;
}

ExperimentConfig parse_config(const fs::path& path) {
    const std::string text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return parse_config_json(j);
}

std::uint64_t replication_seed(std::uint64_t base_seed, int replication) {
    return base_seed * 1000000ULL + static_cast<std::uint64_t>(replication);
}

std::vector<int> checkpoint_grid(const ExperimentConfig& config) {
    std::vector<int> grid = config.checkpoints;
    if (grid.empty())
        for (int k = 25; k < config.episodes; k *= 2) grid.push_back(k);
    grid.push_back(config.episodes);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

// --- environments and runs ---------------------------------------------------

CellEnvironment build_cell_environment(const ExperimentConfig& config, double xi_l1, double rho) {
    CellEnvironment env;
    switch (config.environment) {
    case EnvironmentKind::five_state: {
        FiveStateParams params;
        params.xi = uniform_xi(xi_l1);
        params.p = config.p;
        params.delta_env = config.delta_env;
        params.rho_14 = config.rho_mode == RhoMode::heterogeneous ? rho : 0.0;
        for (std::size_t j = 0; j < config.q.size(); ++j) {
            params.q = config.q[j];
            auto [source, target] = build_five_state_env(params);
            if (j == 0) env.source = config.rho_mode == RhoMode::homogeneous ? with_homogeneous_rho(source, rho) : source;
            env.targets.push_back(std::move(target));
            env.target_labels.push_back(config.q[j]);
        }
        break;
    }
    case EnvironmentKind::hard_instance: {
        HardInstanceParams params;
        params.d = config.hard_d;
        params.horizon = config.horizon;
        params.episodes = config.episodes;
        params.rho = rho;
        Rng sign_rng(config.sign_seed);
        params.xi_signs = random_xi_signs(params.horizon, params.d, sign_rng);
        env.source = build_hard_instance(params);
        break;
    }
    case EnvironmentKind::support_shift:
        for (std::size_t j = 0; j < config.q.size(); ++j) {
            auto [m0, m1] = build_support_shift_pair(config.p, config.q[j], rho, config.horizon);
            if (j == 0) env.source = std::move(m0);
            env.targets.push_back(std::move(m1));
            env.target_labels.push_back(config.q[j]);
        }
        break;
    }
    return env;
}

LearnerConfig learner_config_for(const ExperimentConfig& config, Variant variant, const LinearDrmdpSpec& spec) {
    const auto& o = config.learner;
    LearnerConfig lc = make_default_config(variant, spec, config.episodes, o.c, o.delta);
    if (o.lambda) {
        lc.lambda = *o.lambda;
        const auto widths = default_betas(spec.dim, spec.horizon, config.episodes, lc.lambda, o.delta, o.c);
        lc.beta = widths.beta;
        lc.beta_bar = widths.beta_bar;
        lc.beta_tilde = widths.beta_tilde;
    }
    if (o.beta) lc.beta = *o.beta;
    if (o.beta_bar) lc.beta_bar = *o.beta_bar;
    if (o.beta_tilde) lc.beta_tilde = *o.beta_tilde;
    lc.weight_scale = o.weight_scale;
    lc.refactor_every = o.refactor_every;
    return lc;
}

ReplicationResult run_replication(const ExperimentConfig& config, Variant variant, const CellEnvironment& env,
                                  const RobustSolution& truth, int replication) {
    ReplicationResult out;
    out.replication = replication;
    out.seed = replication_seed(config.base_seed, replication);
    Rng rng(out.seed);
    out.record = run(learner_config_for(config, variant, env.source), env.source, config.episodes, rng, &truth);
    // Target rollouts draw from their own stream so adding Monte Carlo episodes never shifts the learner.
    Rng mc(out.seed ^ 0x9E3779B97F4A7C15ULL);
    for (const auto& target : env.targets)
        out.targets.push_back(evaluate_on_target(out.record.final_policy(), target, config.target_episodes, mc));
    return out;
}

std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

namespace {

std::vector<ReplicationResult> run_replications(const ExperimentConfig& config, Variant variant,
                                                const CellEnvironment& env, const RobustSolution& truth) {
    std::vector<ReplicationResult> results(config.replications);
    const int workers = std::min(config.threads, config.replications);
    if (workers <= 1) {
        for (int r = 0; r < config.replications; ++r) results[r] = run_replication(config, variant, env, truth, r);
        return results;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int r = next++; r < config.replications; r = next++) {
                try {
                    results[r] = run_replication(config, variant, env, truth, r);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return results;
}

std::string cell_tag(double value) { return format_double(value); }

void write_summary_csv(const std::vector<ReplicationResult>& results, const CellEnvironment& env,
                       const std::string& variant, double xi_l1, double rho, const fs::path& path) {
    std::ostringstream out;
    out << "variant,xi_l1,rho,replication,seed,ave_subopt,switches,update_episodes,policy_changes,oracle_calls,q,"
           "target_exact,target_mc_mean,target_mc_stderr\n";
    for (const auto& r : results) {
        const auto& rec = r.record;
        std::ostringstream prefix;
        prefix << variant << ',' << format_double(xi_l1) << ',' << format_double(rho) << ',' << r.replication << ','
               << r.seed << ',' << format_double(rec.ave_subopt()) << ',' << rec.total_switches << ','
               << rec.total_update_episodes << ',' << rec.total_policy_changes << ',' << rec.total_oracle_calls;
        if (env.targets.empty()) {
            out << prefix.str() << ",,,,\n";
            continue;
        }
        for (std::size_t j = 0; j < env.targets.size(); ++j) {
            const auto& t = r.targets[j];
            out << prefix.str() << ',' << format_double(env.target_labels[j]) << ',' << format_double(t.exact) << ','
                << format_double(t.mc_mean) << ',' << format_double(t.mc_stderr) << '\n';
        }
    }
    write_text_file(path, out.str());
}

} // namespace

CellResult run_cell(const ExperimentConfig& config, double xi_l1, double rho, const fs::path& run_dir) {
    const CellEnvironment env = build_cell_environment(config, xi_l1, rho);
    const RobustSolution truth = solve_robust_optimal(env.source);
    const auto grid = checkpoint_grid(config);

    CellResult cell;
    for (Variant variant : config.variants) {
        const std::string name = to_string(variant);
        const auto results = run_replications(config, variant, env, truth);

        const fs::path dir = run_dir / name / ("rho=" + cell_tag(rho));
        for (const auto& r : results) {
            char tag[32];
            std::snprintf(tag, sizeof(tag), "rep%03d", r.replication);
            write_run_csv(r.record, dir / (std::string(tag) + ".csv"));
            write_policy_csv(r.record.final_policy(), dir / (std::string(tag) + "_policy.csv"));
        }
        write_summary_csv(results, env, name, xi_l1, rho, dir / "summary.csv");

        std::vector<double> subopt, switches, updates, oracle;
        for (const auto& r : results) {
            subopt.push_back(r.record.ave_subopt());
            switches.push_back(static_cast<double>(r.record.total_switches));
            updates.push_back(static_cast<double>(r.record.total_update_episodes));
            oracle.push_back(static_cast<double>(r.record.total_oracle_calls));
        }
        AggregateRow base;
        base.variant = name;
        base.xi_l1 = xi_l1;
        base.rho = rho;
        base.replications = config.replications;
        std::tie(base.ave_subopt_mean, base.ave_subopt_stderr) = mean_stderr(subopt);
        std::tie(base.switches_mean, base.switches_stderr) = mean_stderr(switches);
        std::tie(base.update_episodes_mean, base.update_episodes_stderr) = mean_stderr(updates);
        std::tie(base.oracle_calls_mean, base.oracle_calls_stderr) = mean_stderr(oracle);
        if (env.targets.empty()) cell.aggregate.push_back(base);
        for (std::size_t j = 0; j < env.targets.size(); ++j) {
            AggregateRow row = base;
            row.q = env.target_labels[j];
            std::vector<double> returns;
            for (const auto& r : results) returns.push_back(r.targets[j].exact);
            std::tie(row.target_return_mean, row.target_return_stderr) = mean_stderr(returns);
            cell.aggregate.push_back(row);
        }

        for (int k : grid) {
            CheckpointRow row;
            row.variant = name;
            row.xi_l1 = xi_l1;
            row.rho = rho;
            row.k = k;
            std::vector<double> s, sw, oc;
            for (const auto& r : results) {
                s.push_back(r.record.ave_subopt_at(static_cast<std::size_t>(k)));
                sw.push_back(static_cast<double>(r.record.episodes[k - 1].cumulative_switches));
                oc.push_back(static_cast<double>(r.record.episodes[k - 1].cumulative_oracle_calls));
            }
            std::tie(row.ave_subopt_mean, row.ave_subopt_stderr) = mean_stderr(s);
            std::tie(row.switches_mean, row.switches_stderr) = mean_stderr(sw);
            std::tie(row.oracle_calls_mean, row.oracle_calls_stderr) = mean_stderr(oc);
            cell.checkpoints.push_back(row);
        }
    }
    return cell;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const fs::path& path) {
    std::ostringstream out;
    out << "variant,xi_l1,rho,q,replications,ave_subopt_mean,ave_subopt_stderr,switches_mean,switches_stderr,"
           "update_episodes_mean,update_episodes_stderr,oracle_calls_mean,oracle_calls_stderr,"
           "target_return_mean,target_return_stderr\n";
    for (const auto& r : rows) {
        out << r.variant << ',' << format_double(r.xi_l1) << ',' << format_double(r.rho) << ','
            << (r.q ? format_double(*r.q) : "") << ',' << r.replications << ',' << format_double(r.ave_subopt_mean)
            << ',' << format_double(r.ave_subopt_stderr) << ',' << format_double(r.switches_mean) << ','
            << format_double(r.switches_stderr) << ',' << format_double(r.update_episodes_mean) << ','
            << format_double(r.update_episodes_stderr) << ',' << format_double(r.oracle_calls_mean) << ','
            << format_double(r.oracle_calls_stderr) << ',';
        if (r.q) out << format_double(r.target_return_mean) << ',' << format_double(r.target_return_stderr);
        else out << ',';
        out << '\n';
    }
    write_text_file(path, out.str());
}

void write_checkpoint_csv(const std::vector<CheckpointRow>& rows, const fs::path& path) {
    std::ostringstream out;
    out << "variant,xi_l1,rho,k,ave_subopt_mean,ave_subopt_stderr,switches_mean,switches_stderr,"
           "oracle_calls_mean,oracle_calls_stderr\n";
    for (const auto& r : rows)
        out << r.variant << ',' << format_double(r.xi_l1) << ',' << format_double(r.rho) << ',' << r.k << ','
            << format_double(r.ave_subopt_mean) << ',' << format_double(r.ave_subopt_stderr) << ','
            << format_double(r.switches_mean) << ',' << format_double(r.switches_stderr) << ','
            << format_double(r.oracle_calls_mean) << ',' << format_double(r.oracle_calls_stderr) << '\n';
    write_text_file(path, out.str());
}

namespace {

void ensure_output_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const fs::path probe = dir / ".write_probe";
    write_text_file(probe, "");
    fs::remove(probe, ec);
}

void append(CellResult& into, CellResult&& from) {
    for (auto& r : from.aggregate) into.aggregate.push_back(std::move(r));
    for (auto& r : from.checkpoints) into.checkpoints.push_back(std::move(r));
}

} // namespace

CellResult run_experiment(const ExperimentConfig& config) {
    ensure_output_dir(config.output_dir);
    CellResult all;
    for (double rho : config.rho) append(all, run_cell(config, config.xi_l1.front(), rho, config.output_dir / "runs"));
    write_aggregate_csv(all.aggregate, config.output_dir / "aggregate.csv");
    write_checkpoint_csv(all.checkpoints, config.output_dir / "checkpoints.csv");
    return all;
}

CellResult sweep(const ExperimentConfig& config) {
    if (config.rho.empty() || config.xi_l1.empty() || config.q.empty())
        throw ValidationError("sweep: rho, xi_l1 and q lists must be non-empty");
    ensure_output_dir(config.output_dir);
    CellResult all;
    for (double xi : config.xi_l1) {
        for (double rho : config.rho) {
            const fs::path cell_dir = config.output_dir / "cells" / ("xi=" + cell_tag(xi) + "_rho=" + cell_tag(rho));
            CellResult cell = run_cell(config, xi, rho, cell_dir / "runs");
            write_aggregate_csv(cell.aggregate, cell_dir / "aggregate.csv");
            write_checkpoint_csv(cell.checkpoints, cell_dir / "checkpoints.csv");
            append(all, std::move(cell));
        }
    }
    write_aggregate_csv(all.aggregate, config.output_dir / "aggregate.csv");
    write_checkpoint_csv(all.checkpoints, config.output_dir / "checkpoints.csv");
    return all;
}

// --- plot data -----------------------------------------------------------------

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name, const fs::path& path) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw InputError(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

CsvTable read_csv(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("missing input " + path.string());
    std::istringstream in(read_text_file(path));
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
    table.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = split_csv_line(line);
        row.resize(table.header.size());
        table.rows.push_back(std::move(row));
    }
    return table;
}

struct PlotRow {
    std::string x, mean, stderr_, series;
};

void write_plot(const std::vector<PlotRow>& rows, const fs::path& path, std::vector<fs::path>& written) {
    std::ostringstream out;
    out << "x,mean,stderr,series\n";
    for (const auto& r : rows) out << r.x << ',' << r.mean << ',' << r.stderr_ << ',' << r.series << '\n';
    write_text_file(path, out.str());
    written.push_back(path);
}

} // namespace

std::vector<fs::path> emit_plot_data(const fs::path& dir) {
    const fs::path agg_path = dir / "aggregate.csv";
    const fs::path cp_path = dir / "checkpoints.csv";
    const CsvTable agg = read_csv(agg_path);
    const CsvTable cp = read_csv(cp_path);
    const fs::path plots = dir / "plots";
    std::vector<fs::path> written;

    using Key = std::pair<std::string, std::string>;  // (xi_l1, rho) as written
    auto suffix = [](const Key& key) { return "xi=" + key.first + "_rho=" + key.second + ".csv"; };

    {
        const auto variant = agg.column("variant", agg_path), xi = agg.column("xi_l1", agg_path),
                   rho = agg.column("rho", agg_path), q = agg.column("q", agg_path),
                   mean = agg.column("target_return_mean", agg_path),
                   se = agg.column("target_return_stderr", agg_path);
        std::map<Key, std::vector<PlotRow>> groups;
        for (const auto& row : agg.rows)
            if (!row[q].empty()) groups[{row[xi], row[rho]}].push_back({row[q], row[mean], row[se], row[variant]});
        for (const auto& [key, rows] : groups) write_plot(rows, plots / ("target_return_vs_q_" + suffix(key)), written);
    }
    {
        const auto variant = cp.column("variant", cp_path), xi = cp.column("xi_l1", cp_path),
                   rho = cp.column("rho", cp_path), k = cp.column("k", cp_path);
        const std::vector<std::pair<std::string, std::string>> metrics{
            {"ave_subopt", "ave_subopt_vs_k_"}, {"switches", "switches_vs_k_"}, {"oracle_calls", "oracle_calls_vs_k_"}};
        for (const auto& [metric, prefix] : metrics) {
            const auto mean = cp.column(metric + "_mean", cp_path), se = cp.column(metric + "_stderr", cp_path);
            std::map<Key, std::vector<PlotRow>> groups;
            for (const auto& row : cp.rows)
                groups[{row[xi], row[rho]}].push_back({row[k], row[mean], row[se], row[variant]});
            for (const auto& [key, rows] : groups) write_plot(rows, plots / (prefix + suffix(key)), written);
        }
    }
    return written;
}

} // namespace drrl
