#include "enkfcal/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "enkfcal/errors.hpp"

namespace enkfcal {
namespace {

using json = nlohmann::json;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                     : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

bool blank(std::string_view line) { return trim(line).empty(); }

// Header names "<prefix><k>" with k = 1, 2, ...; returns the block length.
Index count_prefixed(const std::vector<std::string_view>& names, std::size_t& pos,
                     std::string_view prefix) {
  Index count = 0;
  while (pos < names.size()) {
    const std::string_view name = trim(names[pos]);
    if (name != std::string(prefix) + std::to_string(count + 1)) break;
    ++count;
    ++pos;
  }
  return count;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("failed to format a number");
  return {buf, ptr};
}

JointEnsemble read_ensemble_csv(std::istream& in, std::optional<Index> d_theta) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank(line)) break;
  }
  if (blank(line)) throw ParseError("ensemble CSV is empty", line_no, 0);

  const auto names = split_fields(line);
  std::size_t pos = 0;
  const Index header_theta = count_prefixed(names, pos, "theta_");
  const Index header_eta = count_prefixed(names, pos, "eta_");
  if (pos != names.size() || header_theta < 1 || header_eta < 1) {
    throw ParseError("ensemble CSV header must be theta_1..theta_d,eta_1..eta_d (column " +
                         std::to_string(pos + 1) + " of line " + std::to_string(line_no) +
                         ")",
                     line_no, pos + 1);
  }
  if (d_theta && *d_theta != header_theta) {
    throw ValidationError("ensemble header declares " + std::to_string(header_theta) +
                          " parameters but d_theta = " + std::to_string(*d_theta));
  }
  const Index width = header_theta + header_eta;

  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (static_cast<Index>(fields.size()) != width) {
      throw ParseError("line " + std::to_string(line_no) + " has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(width),
                       line_no, std::min(fields.size(), static_cast<std::size_t>(width)) + 1);
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = parse_double(fields[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("line " + std::to_string(line_no) + ", column " +
                             std::to_string(c + 1) + ": not a finite number '" +
                             std::string(trim(fields[c])) + "'",
                         line_no, c + 1);
      }
      values.push_back(*v);
    }
    ++rows;
  }
  Eigen::MatrixXd members =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          values.data(), rows, width);
  return {std::move(members), header_theta};
}

JointEnsemble load_tabulated_ensemble(const std::filesystem::path& path,
                                      std::optional<Index> d_theta) {
  auto in = open_input(path);
  try {
    return read_ensemble_csv(in, d_theta);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.row(), e.column());
  }
}

void write_ensemble_csv(std::ostream& out, const JointEnsemble& ensemble) {
  for (Index j = 0; j < ensemble.dim(); ++j) {
    if (j > 0) out << ',';
    if (j < ensemble.d_theta()) {
      out << "theta_" << j + 1;
    } else {
      out << "eta_" << j - ensemble.d_theta() + 1;
    }
  }
  out << '\n';
  write_matrix_csv(out, ensemble.members());
}

void save_ensemble_csv(const std::filesystem::path& path, const JointEnsemble& ensemble) {
  auto out = open_output(path);
  write_ensemble_csv(out, ensemble);
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  Index rows = 0;
  Index width = -1;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    std::vector<double> row;
    row.reserve(fields.size());
    std::size_t bad_col = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = parse_double(fields[c]);
      if (!v || !std::isfinite(*v)) {
        bad_col = c + 1;
        break;
      }
      row.push_back(*v);
    }
    if (bad_col != 0) {
      if (first) {
        first = false;
        continue;
      }
      throw ParseError("line " + std::to_string(line_no) + ", column " +
                           std::to_string(bad_col) + ": not a finite number",
                       line_no, bad_col);
    }
    first = false;
    if (width < 0) width = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != width) {
      throw ParseError("line " + std::to_string(line_no) + " has " +
                           std::to_string(row.size()) + " fields, expected " +
                           std::to_string(width),
                       line_no, row.size() + 1);
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ParseError("matrix CSV has no data rows", line_no, 0);
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, width);
}

Eigen::MatrixXd load_matrix_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return read_matrix_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.row(), e.column());
  }
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& matrix) {
  std::string line;
  for (Index i = 0; i < matrix.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < matrix.cols(); ++j) {
      if (j > 0) line += ',';
      line += format_double(matrix(i, j));
    }
    line += '\n';
    out << line;
  }
}

namespace {

Eigen::VectorXd json_vector(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ValidationError(std::string(what) + "[" + std::to_string(i) + "] is not a number");
    }
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

json read_json(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0, e.byte);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  const std::filesystem::path p(rel);
  return p.is_absolute() ? p : base.parent_path() / p;
}

}  // namespace

ObservationModel load_observation_json(const std::filesystem::path& path, Index d_theta,
                                       Index d_eta) {
  const json doc = read_json(path);
  try {
    if (!doc.contains("y")) throw ValidationError("observation JSON lacks \"y\"");
    Eigen::VectorXd y = json_vector(doc.at("y"), "y");
    const Index n = y.size();

    if (!doc.contains("sigma_y") || !doc.at("sigma_y").is_object()) {
      throw ValidationError("observation JSON lacks a \"sigma_y\" object");
    }
    const json& sj = doc.at("sigma_y");
    Eigen::MatrixXd sigma_y;
    if (sj.contains("diag")) {
      const Eigen::VectorXd diag = json_vector(sj.at("diag"), "sigma_y.diag");
      if (diag.size() != n) throw ValidationError("sigma_y.diag length differs from y");
      sigma_y = diag.asDiagonal();
    } else if (sj.contains("full_csv")) {
      sigma_y = load_matrix_csv(resolve(path, sj.at("full_csv").get<std::string>()));
    } else {
      throw ValidationError("sigma_y needs \"diag\" or \"full_csv\"");
    }

    if (doc.contains("h_indices")) {
      std::vector<Index> idx;
      for (const auto& v : doc.at("h_indices")) {
        if (!v.is_number_integer()) throw ValidationError("h_indices must be integers");
        idx.push_back(v.get<Index>());
      }
      return ObservationModel::incidence(idx, d_theta, d_eta, std::move(y),
                                         std::move(sigma_y));
    }
    if (doc.contains("h_csv")) {
      Eigen::MatrixXd h = load_matrix_csv(resolve(path, doc.at("h_csv").get<std::string>()));
      return {std::move(h), std::move(y), std::move(sigma_y)};
    }
    throw ValidationError("observation JSON needs \"h_indices\" or \"h_csv\"");
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

ParameterBox load_parameter_box_json(const std::filesystem::path& path) {
  const json doc = read_json(path);
  try {
    return {json_vector(doc.at("lower"), "lower"), json_vector(doc.at("upper"), "upper")};
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_parameter_box_json(const std::filesystem::path& path, const ParameterBox& box) {
  json doc;
  doc["lower"] = std::vector<double>(box.lower.data(), box.lower.data() + box.dim());
  doc["upper"] = std::vector<double>(box.upper.data(), box.upper.data() + box.dim());
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

}  // namespace enkfcal
