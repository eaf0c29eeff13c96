#include "enkfcal/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "enkfcal/design.hpp"
#include "enkfcal/discrepancy.hpp"
#include "enkfcal/emulator.hpp"
#include "enkfcal/enkf.hpp"
#include "enkfcal/errors.hpp"
#include "enkfcal/forward_models.hpp"
#include "enkfcal/io.hpp"
#include "enkfcal/random.hpp"
#include "enkfcal/taper.hpp"

namespace enkfcal {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string ensemble;
  std::string obs;
  std::string method = "gaussian";
  std::string out;
  std::string out_dir;
  std::string format = "json";
  std::string forward;
  std::string final_repr = "ensemble";
  std::string grid;
  std::string pilot;
  std::string fields;
  std::string design_method = "exchange";
  std::string taper_target = "residual";
  std::size_t stages = 2;
  std::vector<double> weights;
  std::optional<std::uint64_t> seed;
  int restarts = 100;
  Index sites = 0;
  double noise_sd = 1.0;
  std::optional<double> taper_r;
  std::vector<double> candidates;
  Index outputs = 7;
  Index seasons = 4;
  Index k = 5;
  Index steps = 100000;
  double prior_a = 1.0;
  double prior_b = 0.001;
  double proposal_sd = 1.0;
  Index members = 200;
  double sigma_y = 0.1;
  double y = 0.8;
};

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Echo of every option given to the subcommand, output locations excluded.
json meta_for(const CLI::App& sub) {
  json config = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "out" || name == "out-dir" || opt->count() == 0) continue;
    const auto& results = opt->results();
    if (opt->get_expected_max() > 1) {
      config[name] = results;
    } else if (!results.empty()) {
      config[name] = results.back();
    }
  }
  return {{"tool", "enkfcal"}, {"version", kVersion}, {"command", sub.get_name()},
          {"config", config}};
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot write " + path);
  file << text;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::uint64_t require_seed(const Options& o, const char* what) {
  if (!o.seed) throw ValidationError(std::string(what) + " requires --seed");
  return *o.seed;
}

std::pair<Index, Index> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw ValidationError("--grid must look like 36x30");
  try {
    std::size_t used_a = 0;
    std::size_t used_b = 0;
    const long nx = std::stol(text.substr(0, x), &used_a);
    const long ny = std::stol(text.substr(x + 1), &used_b);
    if (used_a != x || used_b != text.size() - x - 1 || nx < 1 || ny < 1) {
      throw ValidationError("--grid must look like 36x30");
    }
    return {nx, ny};
  } catch (const std::logic_error&) {
    throw ValidationError("--grid must look like 36x30");
  }
}

ForwardModel forward_by_name(const std::string& name, const JointEnsemble& ensemble) {
  if (name == "toy") return toy_model();
  if (name == "identity") {
    if (ensemble.d_theta() != ensemble.d_eta()) {
      throw ValidationError("identity forward model needs d_theta == d_eta");
    }
    const Index d = ensemble.d_theta();
    return LinearForward(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d)).model();
  }
  if (name == "ice") {
    const Index de = ensemble.d_eta();
    if (de != 36 * 30) throw ValidationError("ice forward model expects 1080 outputs");
    return ice_model(36, 30);
  }
  throw ValidationError("--forward must be toy, identity or ice");
}

json theta_summary(const JointEnsemble& ens) {
  const MomentEstimate mom = compute_moments(ens);
  const Eigen::MatrixXd thetas = ens.thetas();
  const Eigen::MatrixXd centered = thetas.rowwise() - thetas.colwise().mean();
  const auto m = static_cast<double>(ens.size());
  Eigen::VectorXd skew(ens.d_theta());
  for (Index j = 0; j < ens.d_theta(); ++j) {
    const double m2 = centered.col(j).array().square().sum() / m;
    const double m3 = centered.col(j).array().cube().sum() / m;
    skew(j) = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  }
  return {{"members", ens.size()},
          {"d_theta", ens.d_theta()},
          {"d_eta", ens.d_eta()},
          {"theta_mean", to_json(Eigen::VectorXd(mom.mu_theta()))},
          {"theta_cov", to_json(Eigen::MatrixXd(mom.sigma_tt()))},
          {"theta_sd", to_json(Eigen::VectorXd(mom.sigma_tt().diagonal().cwiseSqrt()))},
          {"theta_skewness", to_json(skew)},
          {"mean", to_json(mom.mu())}};
}

json gaussian_json(const GaussianPosterior& post) {
  return {{"d_theta", post.d_theta},
          {"mu_post", to_json(post.mu_post)},
          {"sigma_post", to_json(post.sigma_post)},
          {"mu_post_theta", to_json(Eigen::VectorXd(post.mu_theta()))},
          {"sigma_post_theta", to_json(Eigen::MatrixXd(post.sigma_theta()))},
          {"kalman_gain", to_json(post.kalman_gain)}};
}

std::string density_csv(const DensityTable& table) {
  std::string text = "theta,density\n";
  for (std::size_t i = 0; i < table.grid().size(); ++i) {
    text += format_double(table.grid()[i]) + "," + format_double(table.density()[i]) + "\n";
  }
  return text;
}

fs::path summary_path(const std::string& out) {
  fs::path p(out);
  return p.replace_extension(".summary.json");
}

int cmd_moments(const CLI::App& sub, const Options& o, std::ostream& out) {
  const JointEnsemble ens = load_tabulated_ensemble(o.ensemble);
  const MomentEstimate mom = compute_moments(ens);
  if (o.format == "csv") {
    std::ostringstream text;
    write_matrix_csv(text, mom.mu().transpose());
    write_matrix_csv(text, mom.sigma());
    write_text(o.out, text.str(), out);
  } else {
    json doc = {{"meta", meta_for(sub)},   {"members", ens.size()},
                {"d_theta", ens.d_theta()}, {"d_eta", ens.d_eta()},
                {"mu", to_json(mom.mu())},  {"sigma", to_json(mom.sigma())}};
    write_text(o.out, dump(doc), out);
  }
  return kExitOk;
}

int cmd_calibrate(const CLI::App& sub, const Options& o, std::ostream& out) {
  const JointEnsemble ens = load_tabulated_ensemble(o.ensemble);
  const ObservationModel obs = load_observation_json(o.obs, ens.d_theta(), ens.d_eta());

  auto write_gaussian = [&](const GaussianPosterior& post) {
    if (o.format == "csv") {
      std::ostringstream text;
      write_matrix_csv(text, post.mu_post.transpose());
      write_matrix_csv(text, post.sigma_post);
      write_text(o.out, text.str(), out);
    } else {
      json doc = gaussian_json(post);
      doc["meta"] = meta_for(sub);
      write_text(o.out, dump(doc), out);
    }
  };

  if (o.method == "gaussian") {
    write_gaussian(gaussian_update(compute_moments(ens), obs));
    return kExitOk;
  }

  if (o.method != "ensemble" && o.method != "multistage") {
    throw ValidationError("--method must be gaussian, ensemble or multistage");
  }
  const std::uint64_t seed = require_seed(o, "this method");
  std::optional<UpdatedEnsemble> updated;
  if (o.method == "ensemble") {
    updated = ensemble_update(ens, obs, seed);
  } else {
    if (o.forward.empty()) throw ValidationError("--method multistage requires --forward");
    const StageSchedule schedule =
        o.weights.empty() ? StageSchedule::even(o.stages) : StageSchedule(o.weights);
    const ForwardModel forward = forward_by_name(o.forward, ens);
    if (o.final_repr == "gaussian") {
      write_gaussian(multistage_update_gaussian(ens, obs, schedule, forward, seed));
      return kExitOk;
    }
    if (o.final_repr != "ensemble") {
      throw ValidationError("--final must be ensemble or gaussian");
    }
    updated = multistage_update(ens, obs, schedule, forward, seed);
  }

  if (o.out.empty()) throw ValidationError("ensemble methods require --out <csv>");
  save_ensemble_csv(o.out, updated->members);
  json doc = theta_summary(updated->members);
  doc["meta"] = meta_for(sub);
  doc["seed"] = seed;
  write_text(summary_path(o.out).string(), dump(doc), out);
  return kExitOk;
}

int cmd_taper_fit(const CLI::App& sub, const Options& o, std::ostream& out) {
  const JointEnsemble ens = load_tabulated_ensemble(o.ensemble);
  const auto [nx, ny] = parse_grid(o.grid);
  const SpatialGrid grid = SpatialGrid::lattice(nx, ny);
  const TaperFit fit = fit_taper_range(
      ens.etas(), grid, o.candidates.empty() ? default_taper_candidates() : o.candidates);
  json curve = json::array();
  for (std::size_t c = 0; c < fit.candidates.size(); ++c) {
    const double ll = fit.log_likelihood[c];
    curve.push_back({{"r", fit.candidates[c]},
                     {"loglik", std::isfinite(ll) ? json(ll) : json(nullptr)}});
  }
  json doc = {{"meta", meta_for(sub)}, {"r_star", fit.r_star}, {"loglik_curve", curve}};
  write_text(o.out, dump(doc), out);
  return kExitOk;
}

int cmd_design(const CLI::App& sub, const Options& o, std::ostream& out) {
  if (o.sites < 1) throw ValidationError("--n must be at least 1");
  const JointEnsemble ens = load_tabulated_ensemble(o.ensemble);
  const auto [nx, ny] = parse_grid(o.grid);
  const SpatialGrid grid = SpatialGrid::lattice(nx, ny);
  if (grid.size() != ens.d_eta()) {
    throw ValidationError("grid " + o.grid + " has " + std::to_string(grid.size()) +
                          " sites but the ensemble has " + std::to_string(ens.d_eta()) +
                          " outputs");
  }
  if (!(o.noise_sd > 0.0)) throw ValidationError("--noise-sd must be positive");
  double r_star = 0.0;
  if (o.taper_r) {
    r_star = *o.taper_r;
  } else {
    r_star = fit_taper_range(ens.etas(), grid,
                             o.candidates.empty() ? default_taper_candidates() : o.candidates)
                 .r_star;
  }
  const DesignProblem problem = DesignProblem::from_ensemble(
      ens, grid, r_star, o.noise_sd * o.noise_sd, o.sites,
      o.taper_target == "sample" ? TaperTarget::sample : TaperTarget::residual);
  Design design;
  if (o.design_method == "exhaustive") {
    design = exhaustive_design(problem);
  } else if (o.design_method == "exchange") {
    design = fedorov_exchange(problem, o.restarts, require_seed(o, "design search"));
  } else {
    throw ValidationError("--search must be exchange or exhaustive");
  }
  json coords = json::array();
  for (Index s : design.site_indices) {
    const auto rc = grid.row_col(s);
    coords.push_back({rc[0], rc[1]});
  }
  json doc = {{"meta", meta_for(sub)},
              {"n", o.sites},
              {"site_indices", design.site_indices},
              {"row_col_coords", coords},
              {"log_det", design.criterion},
              {"r_star", r_star}};
  write_text(o.out, dump(doc), out);
  return kExitOk;
}

int cmd_lambda_fit(const CLI::App& sub, const Options& o, std::ostream& out) {
  const JointEnsemble ens = load_tabulated_ensemble(o.ensemble);
  std::ifstream in(o.obs);
  if (!in) throw ValidationError("cannot open " + o.obs);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(o.obs + ": " + e.what(), 0, e.byte);
  }
  if (!doc.contains("y")) throw ValidationError(o.obs + ": observation JSON lacks \"y\"");
  const auto yv = doc.at("y").get<std::vector<double>>();
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(),
                                                              static_cast<Index>(yv.size()));
  std::vector<Index> idx;
  if (doc.contains("h_indices")) {
    idx = doc.at("h_indices").get<std::vector<Index>>();
  } else {
    for (Index i = 0; i < ens.d_eta(); ++i) idx.push_back(i);
  }
  const Eigen::MatrixXd h = build_incidence(idx, 0, ens.d_eta());
  if (h.rows() != y.size()) throw ValidationError("y and h_indices lengths differ");
  const MomentEstimate mom = compute_moments(ens);
  const Eigen::VectorXd mu = h * mom.mu_eta();
  const Eigen::MatrixXd see = h * mom.sigma_ee() * h.transpose();
  const DiscrepancyPrecisions est =
      estimate_lambda(y, mu, see, o.outputs, o.steps, require_seed(o, "lambda-fit"),
                      {o.prior_a, o.prior_b}, o.proposal_sd);
  const Index block = y.size() / o.outputs;
  const Eigen::MatrixXd sy = sigma_y_from_lambda(est.lambda, block, 1);
  json result = {{"meta", meta_for(sub)},
                 {"lambda_mean", to_json(est.lambda)},
                 {"acceptance_rate", est.acceptance_rate},
                 {"kept_samples", est.kept_samples},
                 {"sigma_y_diag", to_json(Eigen::VectorXd(sy.diagonal()))}};
  write_text(o.out, dump(result), out);
  return kExitOk;
}

int cmd_eof_project(const CLI::App&, const Options& o, std::ostream& out) {
  const Index n_blocks = o.outputs * o.seasons;
  const Eigen::MatrixXd pilot = load_matrix_csv(o.pilot);
  const Eigen::MatrixXd fields = load_matrix_csv(o.fields);
  if (fields.cols() != pilot.cols()) {
    throw ValidationError("pilot and field CSVs have different widths");
  }
  const EofBasis basis =
      compute_eof_blocks(split_field_blocks(pilot, n_blocks), o.outputs, o.seasons, o.k);
  Eigen::MatrixXd weights(fields.rows(), basis.weight_size());
  for (Index i = 0; i < fields.rows(); ++i) {
    weights.row(i) = project_field(fields.row(i).transpose(), basis).transpose();
  }
  std::ostringstream text;
  write_matrix_csv(text, weights);
  write_text(o.out, text.str(), out);
  return kExitOk;
}

int cmd_toy_demo(const CLI::App& sub, const Options& o, std::ostream&) {
  if (o.out_dir.empty()) throw ValidationError("toy-demo requires --out-dir");
  if (o.members < 2) throw ValidationError("--members must be at least 2");
  if (!(o.sigma_y > 0.0)) throw ValidationError("--sigma-y must be positive");
  const std::uint64_t seed = o.seed.value_or(1);
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);

  const std::vector<double> grid = default_quadrature_grid();
  const DensityTable exact = quadrature_posterior(toy_forward, o.y, o.sigma_y, 0.0, 1.0, grid);

  DesignRuns runs;
  for (double t : {-2.0, -2.0 / 3.0, 2.0 / 3.0, 2.0}) {
    runs.theta_design.push_back(t);
    runs.eta_design.push_back(toy_forward(t));
  }
  const GpConfig gp{0.5, 0.1, 1.0, 0.0};
  const DensityTable gp_post = gp_posterior_density(o.y, o.sigma_y, gp, runs, 1.0, grid);

  const Eigen::MatrixXd thetas =
      GaussianSampler(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1))
          .draw_rows(o.members, derive_seed(seed, 1));
  const JointEnsemble prior = build_ensemble(toy_model(), thetas);
  const ObservationModel obs = ObservationModel::incidence(
      {0}, 1, 1, Eigen::VectorXd::Constant(1, o.y),
      Eigen::MatrixXd::Constant(1, 1, o.sigma_y * o.sigma_y));
  const GaussianPosterior gauss = gaussian_update(compute_moments(prior), obs);
  const double g_mean = gauss.mu_post(0);
  const double g_var = gauss.sigma_post(0, 0);
  std::vector<double> g_log(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    g_log[i] = -0.5 * (grid[i] - g_mean) * (grid[i] - g_mean) / g_var;
  }
  const DensityTable gauss_table = DensityTable::from_log_density(grid, g_log);
  const UpdatedEnsemble updated = ensemble_update(prior, obs, derive_seed(seed, 2));

  write_text((dir / "exact_posterior.csv").string(), density_csv(exact), std::cout);
  write_text((dir / "gp_posterior.csv").string(), density_csv(gp_post), std::cout);
  write_text((dir / "gaussian_enkf.csv").string(), density_csv(gauss_table), std::cout);
  std::string samples = "theta\n";
  for (Index k = 0; k < updated.members.size(); ++k) {
    samples += format_double(updated.members.members()(k, 0)) + "\n";
  }
  write_text((dir / "ensemble_enkf.csv").string(), samples, std::cout);

  auto stats = [](const DensityTable& t) {
    return json{{"mean", t.mean()}, {"variance", t.variance()}, {"skewness", t.skewness()},
                {"mode", t.mode()}, {"integral", t.integral()}};
  };
  const json ens_summary = theta_summary(updated.members);
  json doc = {{"meta", meta_for(sub)},
              {"exact", stats(exact)},
              {"gp", stats(gp_post)},
              {"gaussian_enkf",
               {{"mean", g_mean}, {"variance", g_var}, {"skewness", 0.0}}},
              {"ensemble_enkf",
               {{"mean", ens_summary["theta_mean"][0]},
                {"variance", ens_summary["theta_cov"][0][0]},
                {"skewness", ens_summary["theta_skewness"][0]}}},
              {"variance_comparison",
               {{"exact", exact.variance()}, {"gaussian_enkf", g_var}}}};
  write_text((dir / "summary.json").string(), dump(doc), std::cout);
  return kExitOk;
}

// Expands "--config file.json" into flags placed right after the subcommand
// so that flags given on the command line (which come later) win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty() || rest.size() < 2) return rest;

  std::ifstream in(config_path);
  if (!in) throw ValidationError("cannot open config " + config_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + config_path + ": " + e.what());
  }
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  std::vector<std::string> injected;
  for (const auto& [key, value] : doc.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) injected.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ',';
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      injected.push_back(flag);
      injected.push_back(joined);
    } else {
      injected.push_back(flag);
      injected.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  std::vector<std::string> out{rest[0], rest[1]};
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), rest.begin() + 2, rest.end());
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Computer model calibration with the ensemble Kalman filter", "enkfcal"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output path (stdout when omitted)");
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "RNG seed"); };
  auto add_list = [](CLI::App* sub, const std::string& name, std::vector<double>& target,
                     const std::string& help) {
    sub->add_option(name, target, help)
        ->delimiter(',')
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
        ->expected(1, 1 << 20);
  };

  auto* moments = app.add_subcommand("moments", "Sample mean and covariance of an ensemble");
  moments->add_option("--ensemble", o.ensemble, "Ensemble CSV")->required();
  moments->add_option("--format", o.format)->check(CLI::IsMember({"json", "csv"}));
  add_out(moments);

  auto* calibrate = app.add_subcommand("calibrate", "EnKF update of an ensemble");
  calibrate->add_option("--ensemble", o.ensemble, "Ensemble CSV")->required();
  calibrate->add_option("--obs", o.obs, "Observation JSON")->required();
  calibrate->add_option("--method", o.method)
      ->check(CLI::IsMember({"gaussian", "ensemble", "multistage"}));
  calibrate->add_option("--stages", o.stages, "Number of even stages")
      ->check(CLI::PositiveNumber);
  add_list(calibrate, "--weights", o.weights, "Stage information fractions");
  calibrate->add_option("--forward", o.forward, "Forward model for re-runs")
      ->check(CLI::IsMember({"toy", "identity", "ice"}));
  calibrate->add_option("--final", o.final_repr)
      ->check(CLI::IsMember({"ensemble", "gaussian"}));
  calibrate->add_option("--format", o.format)->check(CLI::IsMember({"json", "csv"}));
  add_seed(calibrate);
  add_out(calibrate);

  auto* design = app.add_subcommand("design", "D-optimal measurement sites");
  design->add_option("--ensemble", o.ensemble, "Ensemble CSV")->required();
  design->add_option("--grid", o.grid, "Lattice dimensions, e.g. 36x30")->required();
  design->add_option("--n", o.sites, "Number of sites")->required();
  design->add_option("--restarts", o.restarts)->check(CLI::PositiveNumber);
  design->add_option("--noise-sd", o.noise_sd, "Measurement standard deviation");
  design->add_option("--taper-r", o.taper_r, "Fixed taper range (skips the fit)");
  add_list(design, "--candidates", o.candidates, "Taper range candidates");
  design->add_option("--taper-target", o.taper_target,
                     "Taper the regression residual or the whole sample block")
      ->check(CLI::IsMember({"residual", "sample"}));
  design->add_option("--search", o.design_method)
      ->check(CLI::IsMember({"exchange", "exhaustive"}));
  add_seed(design);
  add_out(design);

  auto* taper = app.add_subcommand("taper-fit", "Maximum likelihood taper range");
  taper->add_option("--ensemble", o.ensemble, "Ensemble CSV")->required();
  taper->add_option("--grid", o.grid, "Lattice dimensions, e.g. 36x30")->required();
  add_list(taper, "--candidates", o.candidates, "Taper range candidates");
  add_out(taper);

  auto* lambda = app.add_subcommand("lambda-fit", "Discrepancy precision estimates");
  lambda->add_option("--ensemble", o.ensemble, "Ensemble CSV in weight space")->required();
  lambda->add_option("--obs", o.obs, "Observation JSON (y, optional h_indices)")
      ->required();
  lambda->add_option("--outputs", o.outputs, "Number of outputs (lambda entries)")
      ->check(CLI::PositiveNumber);
  lambda->add_option("--steps", o.steps)->check(CLI::PositiveNumber);
  lambda->add_option("--prior-a", o.prior_a);
  lambda->add_option("--prior-b", o.prior_b);
  lambda->add_option("--proposal-sd", o.proposal_sd);
  add_seed(lambda);
  add_out(lambda);

  auto* eof = app.add_subcommand("eof-project", "Project fields onto pilot-run EOFs");
  eof->add_option("--pilot", o.pilot, "Pilot snapshots CSV")->required();
  eof->add_option("--fields", o.fields, "Fields to project CSV")->required();
  eof->add_option("--k", o.k, "EOFs per block")->check(CLI::PositiveNumber);
  eof->add_option("--outputs", o.outputs)->check(CLI::PositiveNumber);
  eof->add_option("--seasons", o.seasons)->check(CLI::PositiveNumber);
  add_out(eof);

  auto* toy = app.add_subcommand("toy-demo", "1-d inverse problem densities for plotting");
  toy->add_option("--out-dir", o.out_dir, "Directory for the output files")->required();
  toy->add_option("--members", o.members, "Ensemble size");
  toy->add_option("--y", o.y, "Measurement");
  toy->add_option("--sigma-y", o.sigma_y, "Measurement standard deviation");
  add_seed(toy);

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? std::string(e.what()) + "\n"
                                                           : app.help());
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (moments->parsed()) return cmd_moments(*moments, o, out);
    if (calibrate->parsed()) return cmd_calibrate(*calibrate, o, out);
    if (design->parsed()) return cmd_design(*design, o, out);
    if (taper->parsed()) return cmd_taper_fit(*taper, o, out);
    if (lambda->parsed()) return cmd_lambda_fit(*lambda, o, out);
    if (eof->parsed()) return cmd_eof_project(*eof, o, out);
    if (toy->parsed()) return cmd_toy_demo(*toy, o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace enkfcal
