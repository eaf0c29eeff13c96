#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "enkfcal/ensemble.hpp"
#include "enkfcal/forward_models.hpp"

namespace enkfcal {

// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

// Ensemble CSV: header theta_1..theta_<d_theta>,eta_1..eta_<d_eta>, then one
// member per row. When d_theta is given it must match the header. Parse
// errors report the 1-based line and column.
JointEnsemble read_ensemble_csv(std::istream& in, std::optional<Index> d_theta = {});
JointEnsemble load_tabulated_ensemble(const std::filesystem::path& path,
                                      std::optional<Index> d_theta = {});
void write_ensemble_csv(std::ostream& out, const JointEnsemble& ensemble);
void save_ensemble_csv(const std::filesystem::path& path, const JointEnsemble& ensemble);

// Plain numeric CSV, one matrix row per line. A first line that does not
// parse as numbers is treated as a header and skipped.
Eigen::MatrixXd read_matrix_csv(std::istream& in);
Eigen::MatrixXd load_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& matrix);

// Observation JSON:
//   { "y": [...],
//     "sigma_y": {"diag": [...]} | {"full_csv": "path"},
//     "h_indices": [...] }            zero-based indices into eta
// or "h_csv": "path" (an n x p matrix) in place of h_indices for a general
// operator. Relative paths resolve against the JSON file's directory.
ObservationModel load_observation_json(const std::filesystem::path& path, Index d_theta,
                                       Index d_eta);

// {"lower": [...], "upper": [...]}
ParameterBox load_parameter_box_json(const std::filesystem::path& path);
void save_parameter_box_json(const std::filesystem::path& path, const ParameterBox& box);

}  // namespace enkfcal
