#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "drrl/learners.hpp"
#include "drrl/model.hpp"
#include "drrl/robust_eval.hpp"

namespace drrl {

/**
 * JSON layout of a spec:
 *   n_states, n_actions, horizon, dim, initial_state: integers
 *   features:      object keyed "s,a" -> [phi_1, ..., phi_d]
 *   factors:       per stage, list of d rows (row-major), each a list of n_states probabilities
 *   reward_params: per stage, list of d numbers
 *   rho:           per stage, list of d numbers
 *   fail_state:    integer or null
 * Numbers are written with 17 significant digits so a round trip is exact.
 */
nlohmann::json spec_to_json(const LinearDrmdpSpec& spec);
LinearDrmdpSpec spec_from_json(const nlohmann::json& j);

void save_spec(const LinearDrmdpSpec& spec, const std::filesystem::path& path);
LinearDrmdpSpec load_spec(const std::filesystem::path& path);

/// Shortest decimal form that round-trips (at most 17 significant digits).
std::string format_double(double x);

/// Columns (h, s, a, q_star) with 1-based h.
void write_q_star_csv(const RobustSolution& sol, const std::filesystem::path& path);
/// Columns (h, s, v_star, pi_star) with 1-based h.
void write_v_star_csv(const RobustSolution& sol, const std::filesystem::path& path);

/// Columns (episode, switched, cumulative_switches, cumulative_oracle_calls, subopt, episode_nominal_return).
void write_run_csv(const RunRecord& record, const std::filesystem::path& path);
/// Columns (h, s, action) with 1-based h.
void write_policy_csv(const Policy& policy, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

} // namespace drrl
