#include "drrl/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "drrl/errors.hpp"

namespace drrl {

using nlohmann::json;

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

json spec_to_json(const LinearDrmdpSpec& spec) {
    json j;
    j["n_states"] = spec.n_states;
    j["n_actions"] = spec.n_actions;
    j["horizon"] = spec.horizon;
    j["dim"] = spec.dim;
    j["initial_state"] = spec.initial_state;

    json features = json::object();
    for (int s = 0; s < spec.n_states; ++s) {
        for (int a = 0; a < spec.n_actions; ++a) {
            const auto phi = spec.phi(s, a);
            json row = json::array();
            for (int i = 0; i < spec.dim; ++i) row.push_back(phi(i));
            features[std::to_string(s) + "," + std::to_string(a)] = std::move(row);
        }
    }
    j["features"] = std::move(features);

    json factors = json::array();
    for (const auto& mu : spec.factors) {
        json rows = json::array();
        for (int i = 0; i < mu.rows(); ++i) {
            json row = json::array();
            for (int s = 0; s < mu.cols(); ++s) row.push_back(mu(i, s));
            rows.push_back(std::move(row));
        }
        factors.push_back(std::move(rows));
    }
    j["factors"] = std::move(factors);

    json rewards = json::array();
    for (const auto& theta : spec.reward_params) rewards.push_back(std::vector<double>(theta.data(), theta.data() + theta.size()));
    j["reward_params"] = std::move(rewards);

    json rho = json::array();
    for (int h = 0; h < spec.rho.rows(); ++h) {
        json row = json::array();
        for (int i = 0; i < spec.rho.cols(); ++i) row.push_back(spec.rho(h, i));
        rho.push_back(std::move(row));
    }
    j["rho"] = std::move(rho);
    j["fail_state"] = spec.fail_state ? json(*spec.fail_state) : json(nullptr);
    return j;
}

namespace {

const json& require(const json& j, const char* key) {
    if (!j.contains(key)) throw InputError(std::string("spec file: missing field '") + key + "'");
    return j.at(key);
}

} // namespace

LinearDrmdpSpec spec_from_json(const json& j) {
    static const std::vector<std::string> known{"n_states", "n_actions", "horizon", "dim", "initial_state",
                                                "features", "factors", "reward_params", "rho", "fail_state"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw InputError("spec file: unknown field '" + key + "'");
    try {
        auto spec = make_empty_spec(require(j, "n_states").get<int>(), require(j, "n_actions").get<int>(),
                                    require(j, "horizon").get<int>(), require(j, "dim").get<int>());
        spec.initial_state = j.value("initial_state", 0);

        const auto& features = require(j, "features");
        for (int s = 0; s < spec.n_states; ++s) {
            for (int a = 0; a < spec.n_actions; ++a) {
                const std::string key = std::to_string(s) + "," + std::to_string(a);
                if (!features.contains(key)) throw InputError("spec file: missing feature '" + key + "'");
                const auto row = features.at(key).get<std::vector<double>>();
                if (static_cast<int>(row.size()) != spec.dim) throw InputError("spec file: feature '" + key + "' has wrong length");
                for (int i = 0; i < spec.dim; ++i) spec.features(spec.sa_index(s, a), i) = row[i];
            }
        }
        if (static_cast<int>(features.size()) != spec.n_states * spec.n_actions)
            throw InputError("spec file: unexpected feature keys");

        const auto& factors = require(j, "factors");
        if (static_cast<int>(factors.size()) != spec.horizon) throw InputError("spec file: one factor table per stage");
        for (int h = 0; h < spec.horizon; ++h) {
            const auto rows = factors.at(h).get<std::vector<std::vector<double>>>();
            if (static_cast<int>(rows.size()) != spec.dim) throw InputError("spec file: factor table needs dim rows");
            for (int i = 0; i < spec.dim; ++i) {
                if (static_cast<int>(rows[i].size()) != spec.n_states) throw InputError("spec file: factor row length");
                for (int s = 0; s < spec.n_states; ++s) spec.factors[h](i, s) = rows[i][s];
            }
        }

        const auto rewards = require(j, "reward_params").get<std::vector<std::vector<double>>>();
        const auto rho = require(j, "rho").get<std::vector<std::vector<double>>>();
        if (static_cast<int>(rewards.size()) != spec.horizon || static_cast<int>(rho.size()) != spec.horizon)
            throw InputError("spec file: reward_params and rho need one entry per stage");
        for (int h = 0; h < spec.horizon; ++h) {
            if (static_cast<int>(rewards[h].size()) != spec.dim || static_cast<int>(rho[h].size()) != spec.dim)
                throw InputError("spec file: reward_params/rho entries need dim values");
            for (int i = 0; i < spec.dim; ++i) {
                spec.reward_params[h](i) = rewards[h][i];
                spec.rho(h, i) = rho[h][i];
            }
        }
        const auto& fail = require(j, "fail_state");
        if (!fail.is_null()) spec.fail_state = fail.get<int>();
        return spec;
    } catch (const json::exception& e) {
        throw InputError(std::string("spec file: ") + e.what());
    }
}

void save_spec(const LinearDrmdpSpec& spec, const std::filesystem::path& path) {
    write_text_file(path, spec_to_json(spec).dump(2) + "\n");
}

LinearDrmdpSpec load_spec(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return spec_from_json(j);
}

void write_q_star_csv(const RobustSolution& sol, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "h,s,a,q_star\n";
    for (std::size_t h = 0; h < sol.q_star.size(); ++h)
        for (int s = 0; s < sol.q_star[h].rows(); ++s)
            for (int a = 0; a < sol.q_star[h].cols(); ++a)
                out << h + 1 << ',' << s << ',' << a << ',' << format_double(sol.q_star[h](s, a)) << '\n';
    write_text_file(path, out.str());
}

void write_v_star_csv(const RobustSolution& sol, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "h,s,v_star,pi_star\n";
    for (std::size_t h = 0; h < sol.pi_star.size(); ++h)
        for (std::size_t s = 0; s < sol.pi_star[h].size(); ++s)
            out << h + 1 << ',' << s << ',' << format_double(sol.v_star(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(s)))
                << ',' << sol.pi_star[h][s] << '\n';
    write_text_file(path, out.str());
}

void write_run_csv(const RunRecord& record, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "episode,switched,cumulative_switches,cumulative_oracle_calls,subopt,episode_nominal_return\n";
    for (std::size_t k = 0; k < record.episodes.size(); ++k) {
        const auto& e = record.episodes[k];
        out << e.episode << ',' << (e.switched ? 1 : 0) << ',' << e.cumulative_switches << ','
            << e.cumulative_oracle_calls << ',' << (k < record.subopt.size() ? format_double(record.subopt[k]) : "")
            << ',' << format_double(e.nominal_return) << '\n';
    }
    write_text_file(path, out.str());
}

void write_policy_csv(const Policy& policy, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "h,s,action\n";
    for (std::size_t h = 0; h < policy.size(); ++h)
        for (std::size_t s = 0; s < policy[h].size(); ++s) out << h + 1 << ',' << s << ',' << policy[h][s] << '\n';
    write_text_file(path, out.str());
}

} // namespace drrl
