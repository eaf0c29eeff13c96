#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>
#include <sys/wait.h>

namespace testing {

// Naive two-pass mean and m-1 covariance, written independently of the library.
inline void naive_moments(const Eigen::MatrixXd& x, Eigen::VectorXd& mean,
                          Eigen::MatrixXd& cov) {
  const Eigen::Index m = x.rows();
  const Eigen::Index p = x.cols();
  mean = Eigen::VectorXd::Zero(p);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index j = 0; j < p; ++j) mean(j) += x(k, j);
  mean /= static_cast<double>(m);
  cov = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j)
        cov(i, j) += (x(k, i) - mean(i)) * (x(k, j) - mean(j));
  cov /= static_cast<double>(m - 1);
}

// Reference draws for test fixtures only; the library has its own generator.
inline Eigen::MatrixXd gaussian_rows(Eigen::Index m, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& cov, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  const Eigen::MatrixXd l = cov.llt().matrixL();
  Eigen::MatrixXd out(m, mean.size());
  for (Eigen::Index k = 0; k < m; ++k) {
    Eigen::VectorXd e(mean.size());
    for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = z(gen);
    out.row(k) = (mean + l * e).transpose();
  }
  return out;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline double sample_skewness(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const double m2 = (v.array() - mean).square().mean();
  const double m3 = (v.array() - mean).cube().mean();
  return m3 / std::pow(m2, 1.5);
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "enkfcal-XXXXXX").string();
    path_ = mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

struct ProcessResult {
  int exit_code;
  std::string err;
};

// Runs the command-line tool as a separate process.
inline ProcessResult run_tool(const std::vector<std::string>& args,
                              const std::filesystem::path& stderr_file) {
  std::string cmd = shell_quote(ENKFCAL_CLI_PATH);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " >/dev/null 2>" + shell_quote(stderr_file.string());
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, read_file(stderr_file)};
}

}  // namespace testing
