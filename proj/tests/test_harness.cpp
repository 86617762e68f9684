#include "doctest.h"

#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "drrl/errors.hpp"
#include "drrl/harness.hpp"
#include "drrl/io.hpp"

using namespace drrl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("drrl_test_harness_" + name);
    fs::remove_all(dir);
    return dir;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_text_file(path));
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> fields;
        std::istringstream ls(line);
        for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        rows.push_back(fields);
    }
    return rows;
}

std::size_t col(const std::vector<std::vector<std::string>>& rows, const std::string& name) {
    const auto& h = rows.at(0);
    const auto it = std::find(h.begin(), h.end(), name);
    REQUIRE(it != h.end());
    return static_cast<std::size_t>(it - h.begin());
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file()) files[fs::relative(entry.path(), root).string()] = read_text_file(entry.path());
    return files;
}

json small_config(const fs::path& out) {
    return json{{"environment", "five-state"},
                {"K", 40},
                {"variants", {"we-drive-u", "dr-lsvi-ucb", "lsvi-ucb"}},
                {"replications", 3},
                {"rho", {0.2}},
                {"q", {0.3, 0.9}},
                {"output_dir", out.string()}};
}

} // namespace

TEST_CASE("minimal config fills defaults") {
    const auto c = parse_config_json(json{{"environment", "five-state"}, {"K", 200}, {"variants", "we-drive-u"}});
    CHECK(c.environment == EnvironmentKind::five_state);
    CHECK(c.episodes == 200);
    CHECK(c.variants == std::vector<Variant>{Variant::we_drive_u});
    CHECK(c.replications == 10);
    CHECK(c.base_seed == 1);
    CHECK(c.threads == 1);
    CHECK(c.rho_mode == RhoMode::heterogeneous);
    CHECK(c.learner.c == 0.04);
    CHECK(c.learner.weight_scale == 0.001);
    CHECK(checkpoint_grid(c) == std::vector<int>{25, 50, 100, 200});
}

TEST_CASE("config validation") {
    const json base{{"environment", "five-state"}, {"K", 200}, {"variants", {"we-drive-u"}}};
    auto with = [&](const std::string& key, const json& value) {
        json j = base;
        j[key] = value;
        return j;
    };
    CHECK_THROWS_AS(parse_config_json(with("replications", 0)), ValidationError);
    CHECK_THROWS_AS(parse_config_json(with("q", json::array())), ValidationError);
    CHECK_THROWS_AS(parse_config_json(with("rho", json::array())), ValidationError);
    CHECK_THROWS_AS(parse_config_json(with("K", 0)), ValidationError);
    CHECK_THROWS_AS(parse_config_json(with("K", "many")), ValidationError);
    CHECK_THROWS_AS(parse_config_json(with("variants", {"ppo"})), ValidationError);
    CHECK_THROWS_AS(parse_config_json(with("environment", "gridworld")), ValidationError);
    CHECK_THROWS_AS(parse_config_json(with("checkpoints", {300})), ValidationError);
    CHECK_THROWS_AS(parse_config_json(with("env", {{"d", 3}})), ValidationError);
    json missing = base;
    missing.erase("K");
    CHECK_THROWS_AS(parse_config_json(missing), ValidationError);

    try {
        parse_config_json(with("episodes_total", 5));
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("episodes_total") != std::string::npos);
    }
    try {
        parse_config_json(with("learner", {{"gamma", 0.9}}));
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("gamma") != std::string::npos);
    }

    const auto dir = scratch_dir("parse");
    CHECK_THROWS_AS(parse_config(dir / "absent.json"), IoError);
    write_text_file(dir / "bad.json", "{");
    CHECK_THROWS_AS(parse_config(dir / "bad.json"), ValidationError);
}

TEST_CASE("seeds and checkpoints") {
    CHECK(replication_seed(1, 0) == 1000000);
    CHECK(replication_seed(7, 3) == 7000003);
    ExperimentConfig c;
    c.episodes = 2000;
    CHECK(checkpoint_grid(c) == std::vector<int>{25, 50, 100, 200, 400, 800, 1600, 2000});
    c.checkpoints = {10, 5};
    c.episodes = 30;
    CHECK(checkpoint_grid(c) == std::vector<int>{5, 10, 30});
}

TEST_CASE("mean and standard error") {
    auto [m, se] = mean_stderr({1.0, 2.0, 3.0, 4.0});
    CHECK(m == doctest::Approx(2.5));
    CHECK(se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    std::tie(m, se) = mean_stderr({3.0});
    CHECK(m == 3.0);
    CHECK(se == 0.0);
}

TEST_CASE("cell environments") {
    auto c = parse_config_json(json{{"environment", "five-state"}, {"K", 10}, {"variants", "lsvi-ucb"}, {"q", {0.2, 0.6}}});
    auto env = build_cell_environment(c, 0.2, 0.3);
    CHECK(env.targets.size() == 2);
    CHECK(env.source.rho(0, 3) == 0.3);
    CHECK(env.source.rho.sum() == doctest::Approx(0.3));
    c.rho_mode = RhoMode::homogeneous;
    env = build_cell_environment(c, 0.2, 0.1);
    CHECK((env.source.rho.array() == 0.1).all());

    c = parse_config_json(json{{"environment", "hard-instance"}, {"K", 100}, {"variants", "lsvi-ucb"}});
    env = build_cell_environment(c, 0.0, 0.5);
    CHECK(env.targets.empty());
    CHECK(env.source.dim == 6);

    c = parse_config_json(json{{"environment", "support-shift"}, {"K", 10}, {"variants", "lsvi-ucb"}});
    env = build_cell_environment(c, 0.0, 0.2);
    CHECK(env.source.horizon == 3);
    CHECK(env.targets.size() == 1);
}

TEST_CASE("run_experiment is deterministic across reruns and thread counts") {
    const auto a = scratch_dir("det_a"), b = scratch_dir("det_b"), t = scratch_dir("det_t");
    run_experiment(parse_config_json(small_config(a)));
    run_experiment(parse_config_json(small_config(b)));
    auto threaded = small_config(t);
    threaded["threads"] = 3;
    run_experiment(parse_config_json(threaded));
    const auto sa = snapshot(a);
    CHECK(sa.size() > 10);
    CHECK(sa == snapshot(b));
    CHECK(sa == snapshot(t));
}

TEST_CASE("aggregates are recomputable from the per-run files") {
    const auto dir = scratch_dir("agg");
    const auto config = parse_config_json(small_config(dir));
    run_experiment(config);
    const auto agg = read_rows(dir / "aggregate.csv");
    CHECK(agg.size() == 1 + 3 * 2);

    for (const char* variant : {"we-drive-u", "dr-lsvi-ucb", "lsvi-ucb"}) {
        const fs::path run_dir = dir / "runs" / variant / "rho=0.2";
        const auto summary = read_rows(run_dir / "summary.csv");
        std::vector<double> subopt, switches, returns_q9;
        for (std::size_t r = 1; r < summary.size(); ++r) {
            const auto& row = summary[r];
            if (row[col(summary, "q")] != "0.9") continue;
            subopt.push_back(std::stod(row[col(summary, "ave_subopt")]));
            switches.push_back(std::stod(row[col(summary, "switches")]));
            returns_q9.push_back(std::stod(row[col(summary, "target_exact")]));

            // per-episode subopt column averages to the summary value
            char tag[32];
            std::snprintf(tag, sizeof(tag), "rep%03d.csv", std::stoi(row[col(summary, "replication")]));
            const auto run = read_rows(run_dir / tag);
            CHECK(run.size() == 41);
            double sum = 0.0;
            for (std::size_t k = 1; k < run.size(); ++k) sum += std::stod(run[k][col(run, "subopt")]);
            CHECK(std::abs(sum / 40.0 - subopt.back()) <= 1e-12);
            for (std::size_t k = 2; k < run.size(); ++k) {
                CHECK(std::stoul(run[k][2]) >= std::stoul(run[k - 1][2]));
                CHECK(std::stoul(run[k][3]) >= std::stoul(run[k - 1][3]));
            }
        }
        REQUIRE(subopt.size() == 3);
        for (std::size_t r = 1; r < agg.size(); ++r) {
            const auto& row = agg[r];
            if (row[col(agg, "variant")] != variant || row[col(agg, "q")] != "0.9") continue;
            const auto [m, se] = mean_stderr(subopt);
            CHECK(std::abs(std::stod(row[col(agg, "ave_subopt_mean")]) - m) <= 1e-12);
            CHECK(std::abs(std::stod(row[col(agg, "ave_subopt_stderr")]) - se) <= 1e-12);
            const auto [ms, ses] = mean_stderr(switches);
            CHECK(std::abs(std::stod(row[col(agg, "switches_mean")]) - ms) <= 1e-12);
            CHECK(std::abs(std::stod(row[col(agg, "switches_stderr")]) - ses) <= 1e-12);
            const auto [mr, ser] = mean_stderr(returns_q9);
            CHECK(std::abs(std::stod(row[col(agg, "target_return_mean")]) - mr) <= 1e-12);
            CHECK(std::abs(std::stod(row[col(agg, "target_return_stderr")]) - ser) <= 1e-12);
        }
        if (std::string(variant) != "we-drive-u") CHECK(switches == std::vector<double>(3, 40.0));
    }
}

TEST_CASE("sweep layout and plot data") {
    const auto dir = scratch_dir("sweep");
    auto j = small_config(dir);
    j["K"] = 30;
    j["replications"] = 2;
    j["xi_l1"] = {0.1, 0.3};
    j["rho"] = {0.1, 0.3};
    j["q"] = {0.1, 0.5, 0.9};
    j["checkpoints"] = {10, 20};
    sweep(parse_config_json(j));

    const auto agg = read_rows(dir / "aggregate.csv");
    CHECK(agg.size() == 1 + 4 * 3 * 3);
    for (const char* cell : {"xi=0.1_rho=0.1", "xi=0.1_rho=0.3", "xi=0.3_rho=0.1", "xi=0.3_rho=0.3"}) {
        CHECK(fs::exists(dir / "cells" / cell / "aggregate.csv"));
        CHECK(read_rows(dir / "cells" / cell / "aggregate.csv").size() == 1 + 3 * 3);
    }

    const auto written = emit_plot_data(dir);
    CHECK(written.size() == 4 * 4);
    const auto target = read_rows(dir / "plots" / "target_return_vs_q_xi=0.3_rho=0.1.csv");
    CHECK(target[0] == std::vector<std::string>{"x", "mean", "stderr", "series"});
    std::set<std::string> series;
    for (std::size_t r = 1; r < target.size(); ++r) series.insert(target[r][3]);
    CHECK(series == std::set<std::string>{"we-drive-u", "dr-lsvi-ucb", "lsvi-ucb"});
    CHECK(target.size() == 1 + 3 * 3);

    const auto subopt = read_rows(dir / "plots" / "ave_subopt_vs_k_xi=0.1_rho=0.3.csv");
    CHECK(subopt.size() == 1 + 3 * 3);  // k in {10, 20, 30} per variant
    const auto sw = read_rows(dir / "plots" / "switches_vs_k_xi=0.1_rho=0.3.csv");
    double prev = -1.0;
    for (std::size_t r = 1; r < sw.size(); ++r) {
        if (sw[r][3] != "we-drive-u") continue;
        CHECK(std::stod(sw[r][1]) >= prev);
        prev = std::stod(sw[r][1]);
    }
    CHECK(fs::exists(dir / "plots" / "oracle_calls_vs_k_xi=0.3_rho=0.3.csv"));

    CHECK_THROWS_AS(emit_plot_data(scratch_dir("empty")), IoError);
}
