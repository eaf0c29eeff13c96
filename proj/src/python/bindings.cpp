#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "enkfcal/design.hpp"
#include "enkfcal/discrepancy.hpp"
#include "enkfcal/emulator.hpp"
#include "enkfcal/enkf.hpp"
#include "enkfcal/ensemble.hpp"
#include "enkfcal/errors.hpp"
#include "enkfcal/forward_models.hpp"
#include "enkfcal/io.hpp"
#include "enkfcal/random.hpp"
#include "enkfcal/taper.hpp"

namespace py = pybind11;
using namespace enkfcal;

namespace {

// Forward models run on worker threads, so only the built-in ones are
// reachable from Python.
ForwardModel builtin_forward(const std::string& name, Index d_theta, Index d_eta) {
  if (name == "toy") return toy_model();
  if (name == "ice") return ice_model();
  if (name == "identity") {
    return LinearForward(Eigen::VectorXd::Zero(d_eta), Eigen::MatrixXd::Identity(d_eta, d_theta))
        .model();
  }
  throw ValidationError("unknown forward model '" + name + "' (toy, ice, identity)");
}

TaperTarget parse_target(const std::string& s) {
  if (s == "residual") return TaperTarget::residual;
  if (s == "sample") return TaperTarget::sample;
  throw ValidationError("taper target must be 'residual' or 'sample'");
}

}  // namespace

PYBIND11_MODULE(_enkfcal, m) {
  m.doc() = "Ensemble Kalman filter calibration of computer models";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<InsufficientEnsembleError>(m, "InsufficientEnsembleError",
                                                    validation.ptr());
  py::register_exception<ParseError>(m, "ParseError", validation.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
  py::register_exception<ForwardModelError>(m, "ForwardModelError", error.ptr());

  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stream"));
  m.def(
      "gaussian_draws",
      [](const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Index rows, std::uint64_t seed) {
        return GaussianSampler(mean, cov).draw_rows(rows, seed);
      },
      py::arg("mean"), py::arg("cov"), py::arg("rows"), py::arg("seed"),
      py::call_guard<py::gil_scoped_release>());

  py::class_<JointEnsemble>(m, "JointEnsemble")
      .def(py::init<Eigen::MatrixXd, Index>(), py::arg("members"), py::arg("d_theta"))
      .def(py::init<const Eigen::MatrixXd&, const Eigen::MatrixXd&>(), py::arg("thetas"),
           py::arg("etas"))
      .def_property_readonly("size", &JointEnsemble::size)
      .def_property_readonly("dim", &JointEnsemble::dim)
      .def_property_readonly("d_theta", &JointEnsemble::d_theta)
      .def_property_readonly("d_eta", &JointEnsemble::d_eta)
      .def_property_readonly("members", &JointEnsemble::members)
      .def_property_readonly("thetas",
                             [](const JointEnsemble& e) { return Eigen::MatrixXd(e.thetas()); })
      .def_property_readonly("etas",
                             [](const JointEnsemble& e) { return Eigen::MatrixXd(e.etas()); });

  py::class_<MomentEstimate>(m, "MomentEstimate")
      .def(py::init<Eigen::VectorXd, Eigen::MatrixXd, Index>(), py::arg("mu"), py::arg("sigma"),
           py::arg("d_theta"))
      .def_property_readonly("mu", &MomentEstimate::mu)
      .def_property_readonly("sigma", &MomentEstimate::sigma)
      .def_property_readonly("d_theta", &MomentEstimate::d_theta)
      .def_property_readonly("d_eta", &MomentEstimate::d_eta);

  m.def("compute_moments", &compute_moments, py::arg("ensemble"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<ObservationModel>(m, "ObservationModel")
      .def(py::init<Eigen::MatrixXd, Eigen::VectorXd, Eigen::MatrixXd>(), py::arg("h"),
           py::arg("y"), py::arg("sigma_y"))
      .def_static("incidence", &ObservationModel::incidence, py::arg("eta_indices"),
                  py::arg("d_theta"), py::arg("d_eta"), py::arg("y"), py::arg("sigma_y"))
      .def_property_readonly("h", &ObservationModel::h)
      .def_property_readonly("y", &ObservationModel::y)
      .def_property_readonly("sigma_y", &ObservationModel::sigma_y);

  py::class_<GaussianPosterior>(m, "GaussianPosterior")
      .def_readonly("mu_post", &GaussianPosterior::mu_post)
      .def_readonly("sigma_post", &GaussianPosterior::sigma_post)
      .def_readonly("kalman_gain", &GaussianPosterior::kalman_gain)
      .def_readonly("d_theta", &GaussianPosterior::d_theta)
      .def_property_readonly("mu_theta",
                             [](const GaussianPosterior& g) { return Eigen::VectorXd(g.mu_theta()); })
      .def_property_readonly("sigma_theta", [](const GaussianPosterior& g) {
        return Eigen::MatrixXd(g.sigma_theta());
      });

  py::class_<UpdatedEnsemble>(m, "UpdatedEnsemble")
      .def_readonly("members", &UpdatedEnsemble::members)
      .def_readonly("perturbed_data", &UpdatedEnsemble::perturbed_data)
      .def_readonly("seed", &UpdatedEnsemble::seed);

  m.def("gaussian_update", &gaussian_update, py::arg("moments"), py::arg("obs"),
        py::call_guard<py::gil_scoped_release>());
  m.def("precision_form_update", &precision_form_update, py::arg("moments"), py::arg("obs"),
        py::call_guard<py::gil_scoped_release>());
  m.def("ensemble_update", &ensemble_update, py::arg("ensemble"), py::arg("obs"),
        py::arg("seed"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "multistage_update",
      [](const JointEnsemble& e, const ObservationModel& obs, const std::vector<double>& weights,
         const std::string& forward, std::uint64_t seed) {
        return multistage_update(e, obs, StageSchedule(weights),
                                 builtin_forward(forward, e.d_theta(), e.d_eta()), seed);
      },
      py::arg("ensemble"), py::arg("obs"), py::arg("weights"), py::arg("forward"),
      py::arg("seed"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "build_ensemble",
      [](const std::string& forward, const Eigen::MatrixXd& thetas, Index d_eta) {
        return build_ensemble(builtin_forward(forward, thetas.cols(), d_eta), thetas);
      },
      py::arg("forward"), py::arg("thetas"), py::arg("d_eta") = 0,
      py::call_guard<py::gil_scoped_release>());
  m.def("toy_forward", &toy_forward, py::arg("theta"));

  py::class_<DensityTable>(m, "DensityTable")
      .def_property_readonly("grid", &DensityTable::grid)
      .def_property_readonly("density", &DensityTable::density)
      .def("mean", &DensityTable::mean)
      .def("variance", &DensityTable::variance)
      .def("skewness", &DensityTable::skewness)
      .def("mode", &DensityTable::mode);
  m.def(
      "toy_quadrature_posterior",
      [](double y, double sigma_y, double prior_mean, double prior_sd) {
        return quadrature_posterior(toy_forward, y, sigma_y, prior_mean, prior_sd,
                                    default_quadrature_grid());
      },
      py::arg("y") = 0.8, py::arg("sigma_y") = 0.1, py::arg("prior_mean") = 0.0,
      py::arg("prior_sd") = 1.0, py::call_guard<py::gil_scoped_release>());

  py::class_<SpatialGrid>(m, "SpatialGrid")
      .def_static("lattice", &SpatialGrid::lattice, py::arg("nx"), py::arg("ny"))
      .def_property_readonly("size", &SpatialGrid::size)
      .def("row_col", &SpatialGrid::row_col, py::arg("site"))
      .def("distances", &SpatialGrid::distances);

  py::class_<TaperFit>(m, "TaperFit")
      .def_readonly("r_star", &TaperFit::r_star)
      .def_readonly("candidates", &TaperFit::candidates)
      .def_readonly("log_likelihood", &TaperFit::log_likelihood);

  m.def(
      "exponential_taper",
      [](const SpatialGrid& g, double r) { return exponential_taper(g, r).matrix; },
      py::arg("grid"), py::arg("r"));
  m.def("default_taper_candidates", &default_taper_candidates);
  m.def("fit_taper_range", &fit_taper_range, py::arg("samples"), py::arg("grid"),
        py::arg("candidates"), py::call_guard<py::gil_scoped_release>());
  m.def("fit_taper_range_known_base", &fit_taper_range_known_base, py::arg("samples"),
        py::arg("base_cov"), py::arg("grid"), py::arg("candidates"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<DesignProblem>(m, "DesignProblem")
      .def_static(
          "from_ensemble",
          [](const JointEnsemble& e, const SpatialGrid& g, double r, double noise_var, Index n,
             const std::string& target) {
            return DesignProblem::from_ensemble(e, g, r, noise_var, n, parse_target(target));
          },
          py::arg("ensemble"), py::arg("grid"), py::arg("taper_range"),
          py::arg("obs_noise_var"), py::arg("n"), py::arg("target") = "residual")
      .def_readonly("n", &DesignProblem::n)
      .def_readonly("tapered_cov", &DesignProblem::tapered_cov);

  py::class_<Design>(m, "Design")
      .def_readonly("site_indices", &Design::site_indices)
      .def_readonly("criterion", &Design::criterion);

  m.def("d_criterion", &d_criterion, py::arg("problem"), py::arg("sites"));
  m.def("exhaustive_design", &exhaustive_design, py::arg("problem"),
        py::call_guard<py::gil_scoped_release>());
  m.def("fedorov_exchange", &fedorov_exchange, py::arg("problem"), py::arg("restarts"),
        py::arg("seed"), py::call_guard<py::gil_scoped_release>());

  py::class_<DiscrepancyPrior>(m, "DiscrepancyPrior")
      .def(py::init([](double a, double b) { return DiscrepancyPrior{a, b}; }), py::arg("a") = 1.0,
           py::arg("b") = 0.001)
      .def_readonly("a", &DiscrepancyPrior::a)
      .def_readonly("b", &DiscrepancyPrior::b);
  py::class_<DiscrepancyPrecisions>(m, "DiscrepancyPrecisions")
      .def_readonly("lambda_mean", &DiscrepancyPrecisions::lambda)
      .def_readonly("acceptance_rate", &DiscrepancyPrecisions::acceptance_rate)
      .def_readonly("kept_samples", &DiscrepancyPrecisions::kept_samples);

  m.def("sigma_y_from_lambda", &sigma_y_from_lambda, py::arg("lam"), py::arg("n_seasons"),
        py::arg("k"));
  m.def("estimate_lambda", &estimate_lambda, py::arg("y"), py::arg("mu_eta"),
        py::arg("sigma_ee"), py::arg("n_outputs"), py::arg("steps"), py::arg("seed"),
        py::arg("prior") = DiscrepancyPrior{}, py::arg("proposal_sd") = 1.0,
        py::call_guard<py::gil_scoped_release>());

  m.def(
      "load_ensemble_csv",
      [](const std::string& path, Index d_theta) { return load_tabulated_ensemble(path, d_theta); },
      py::arg("path"), py::arg("d_theta"));
  m.def(
      "save_ensemble_csv",
      [](const std::string& path, const JointEnsemble& e) { save_ensemble_csv(path, e); },
      py::arg("path"), py::arg("ensemble"));
}
