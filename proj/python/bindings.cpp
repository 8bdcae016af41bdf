#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vector>

#include "mmaf/cli_io.hpp"

namespace py = pybind11;
using namespace mmaf;

PYBIND11_MODULE(_mmaf, m) {
  m.doc() = "Coalescing Brownian particle flow: simulation and Monte Carlo "
            "experiments";
  m.attr("__version__") = cli::kVersion;

  // --- random streams and driving paths ------------------------------------
  py::class_<rng::TimeGrid>(m, "TimeGrid")
      .def_readonly("horizon", &rng::TimeGrid::horizon)
      .def_readonly("steps", &rng::TimeGrid::steps)
      .def_readonly("dt", &rng::TimeGrid::dt)
      .def("time", &rng::TimeGrid::time, py::arg("i"))
      .def("index_of", &rng::TimeGrid::index_of, py::arg("t"))
      .def("__eq__", [](const rng::TimeGrid& a, const rng::TimeGrid& b) {
        return a == b;
      });
  m.def("make_grid", &rng::make_grid, py::arg("horizon"), py::arg("steps"));

  py::class_<rng::DrivingEnsemble>(m, "DrivingEnsemble")
      .def_readonly("index_lo", &rng::DrivingEnsemble::index_lo)
      .def_readonly("index_hi", &rng::DrivingEnsemble::index_hi)
      .def_readonly("grid", &rng::DrivingEnsemble::grid)
      .def("path", &rng::DrivingEnsemble::path, py::arg("k"),
           py::return_value_policy::copy)
      .def("value", &rng::DrivingEnsemble::value, py::arg("k"), py::arg("i"))
      .def("contains", &rng::DrivingEnsemble::contains, py::arg("k"));
  m.def("sample_driving", &rng::sample_driving, py::arg("index_lo"),
        py::arg("index_hi"), py::arg("grid"), py::arg("master_seed"),
        py::arg("replication_id"),
        "Brownian driver paths started at each integer index, from "
        "counter-based streams");
  m.def("bridge_crossing_prob", &rng::bridge_crossing_prob, py::arg("d0"),
        py::arg("d1"), py::arg("sigma2"), py::arg("dt"),
        "Probability that a Brownian bridge with the given endpoint gaps "
        "crosses the barrier inside one step");

  // --- coalescing flow ------------------------------------------------------
  py::enum_<flow::Variant>(m, "Variant")
      .value("full", flow::Variant::full)
      .value("plus", flow::Variant::plus)
      .value("minus", flow::Variant::minus);

  py::class_<flow::IndexInterval>(m, "IndexInterval")
      .def(py::init<int, int>(), py::arg("lo"), py::arg("hi"))
      .def_readonly("lo", &flow::IndexInterval::lo)
      .def_readonly("hi", &flow::IndexInterval::hi)
      .def("size", &flow::IndexInterval::size)
      .def("contains", &flow::IndexInterval::contains, py::arg("k"));

  py::class_<flow::MergeEvent>(m, "MergeEvent")
      .def_readonly("grid_index", &flow::MergeEvent::grid_index)
      .def_readonly("left_members", &flow::MergeEvent::left_members)
      .def_readonly("right_members", &flow::MergeEvent::right_members)
      .def_readonly("new_mass", &flow::MergeEvent::new_mass)
      .def_readonly("new_representative",
                    &flow::MergeEvent::new_representative);

  py::class_<flow::FlowRealization>(m, "FlowRealization")
      .def_readonly("domain", &flow::FlowRealization::domain)
      .def_readonly("grid", &flow::FlowRealization::grid)
      .def_readonly("variant", &flow::FlowRealization::variant)
      .def_readonly("events", &flow::FlowRealization::events)
      .def("path", &flow::FlowRealization::path, py::arg("k"),
           py::return_value_policy::copy)
      .def("position", &flow::FlowRealization::position, py::arg("k"),
           py::arg("i"));

  m.def("representative_of", &flow::representative_of, py::arg("members"),
        py::arg("domain"), py::arg("variant"));
  m.def("apply_flow_map", &flow::apply_flow_map, py::arg("ensemble"),
        py::arg("domain"), py::arg("variant"), py::arg("bridge") = false,
        "Run the coalescing dynamics over the ensemble's grid");
  m.def("mass_at", &flow::mass_at, py::arg("flow"), py::arg("k"),
        py::arg("t"));
  m.def("quadratic_variation", &flow::quadratic_variation, py::arg("flow"),
        py::arg("k"), py::arg("t"));

  // --- occupation functionals ----------------------------------------------
  py::class_<occupation::OccupationSample>(m, "OccupationSample")
      .def_readonly("k_lo", &occupation::OccupationSample::k_lo)
      .def_readonly("k_hi", &occupation::OccupationSample::k_hi)
      .def_readonly("t", &occupation::OccupationSample::t)
      .def_readonly("offset", &occupation::OccupationSample::offset)
      .def_readonly("function_id", &occupation::OccupationSample::function_id)
      .def_readonly("values", &occupation::OccupationSample::values)
      .def("value", &occupation::OccupationSample::value, py::arg("k"));

  m.def("occupation_count", &occupation::occupation_count, py::arg("flow"),
        py::arg("a"), py::arg("b"), py::arg("t"),
        "Number of distinct cluster positions in (a, b] at time t");
  m.def(
      "functional_A",
      [](const flow::FlowRealization& fl, int k, double t,
         const std::string& function_id, double offset) {
        return occupation::functional_A(
            fl, k, t, occupation::builtin_function(function_id), offset);
      },
      py::arg("flow"), py::arg("k"), py::arg("t"), py::arg("function_id"),
      py::arg("offset") = 0.0,
      "Sum of the named function over distinct cluster positions in cell k");
  m.def(
      "occupation_sample",
      [](const flow::FlowRealization& fl, int k_lo, int k_hi, double t,
         const std::string& function_id, double offset) {
        return occupation::occupation_sample(
            fl, k_lo, k_hi, t, occupation::builtin_function(function_id),
            offset);
      },
      py::arg("flow"), py::arg("k_lo"), py::arg("k_hi"), py::arg("t"),
      py::arg("function_id"), py::arg("offset") = 0.0);
  m.def("clt_statistic", &occupation::clt_statistic, py::arg("sample"),
        py::arg("n"), py::arg("mean_A"));
  m.def(
      "sigma_series",
      [](double var0, const std::vector<double>& covs, int k_max) {
        return occupation::sigma_series(var0, covs, k_max);
      },
      py::arg("var0"), py::arg("covs"), py::arg("k_max"));

  // --- gap events and one-sided coupling ------------------------------------
  py::enum_<coupling::Side>(m, "Side")
      .value("plus", coupling::Side::plus)
      .value("minus", coupling::Side::minus);

  m.def("gap_event", &coupling::gap_event, py::arg("ensemble"), py::arg("l"),
        py::arg("j"), py::arg("t"), py::arg("side"),
        py::arg("bridge") = false);
  m.def("gap_union", &coupling::gap_union, py::arg("ensemble"), py::arg("l"),
        py::arg("N"), py::arg("t"), py::arg("side"), py::arg("bridge") = false);
  m.def("gap_event_streamed", &coupling::gap_event_streamed,
        py::arg("master_seed"), py::arg("replication_id"), py::arg("grid"),
        py::arg("l"), py::arg("j"), py::arg("side"), py::arg("bridge") = false);
  m.def("exact_gap_prob", &coupling::exact_gap_prob, py::arg("j"),
        py::arg("t"), "Closed-form probability of the width-j gap event");
  m.def("verify_coupling", &coupling::verify_coupling, py::arg("full"),
        py::arg("half"), py::arg("l"), py::arg("j"), py::arg("p"),
        py::arg("side"),
        "Bitwise agreement of the centered and one-sided maps beyond the gap");

  py::class_<coupling::DecaySeries>(m, "DecaySeries")
      .def_readonly("k_max", &coupling::DecaySeries::k_max)
      .def_readonly("reps", &coupling::DecaySeries::reps)
      .def_readonly("cov", &coupling::DecaySeries::cov)
      .def_readonly("se", &coupling::DecaySeries::se);
  m.def("covariance_decay", &coupling::covariance_decay, py::arg("samples"),
        py::arg("k_max"));

  // --- Monte Carlo experiments ----------------------------------------------
  py::class_<mc::Estimate>(m, "Estimate")
      .def_readonly("value", &mc::Estimate::value)
      .def_readonly("se", &mc::Estimate::se)
      .def_readonly("reps", &mc::Estimate::reps);

  py::class_<mc::KsResult>(m, "KsResult")
      .def_readonly("statistic", &mc::KsResult::statistic)
      .def_readonly("p_value", &mc::KsResult::p_value)
      .def_readonly("applicable", &mc::KsResult::applicable);

  m.def(
      "estimate",
      [](const std::vector<double>& v) { return mc::estimate(v); },
      py::arg("samples"));
  m.def(
      "variance_estimate",
      [](const std::vector<double>& v) { return mc::variance_estimate(v); },
      py::arg("samples"));
  m.def(
      "skewness",
      [](const std::vector<double>& v) { return mc::skewness(v); },
      py::arg("samples"));
  m.def(
      "excess_kurtosis",
      [](const std::vector<double>& v) { return mc::excess_kurtosis(v); },
      py::arg("samples"));
  m.def(
      "ks_normal_test",
      [](const std::vector<double>& v, uint64_t seed, int bootstrap) {
        return mc::ks_normal_test(v, seed, bootstrap);
      },
      py::arg("samples"), py::arg("seed") = uint64_t{0x6b73u},
      py::arg("bootstrap") = 2000);

  py::class_<mc::ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("T", &mc::ExperimentConfig::T)
      .def_readwrite("M", &mc::ExperimentConfig::M)
      .def_readwrite("t_values", &mc::ExperimentConfig::t_values)
      .def_readwrite("n", &mc::ExperimentConfig::n)
      .def_readwrite("reps", &mc::ExperimentConfig::reps)
      .def_readwrite("pad", &mc::ExperimentConfig::pad)
      .def_readwrite("function_id", &mc::ExperimentConfig::function_id)
      .def_readwrite("offset", &mc::ExperimentConfig::offset)
      .def_readwrite("master_seed", &mc::ExperimentConfig::master_seed)
      .def_readwrite("k_max", &mc::ExperimentConfig::k_max)
      .def_readwrite("bridge", &mc::ExperimentConfig::bridge)
      .def_readwrite("workers", &mc::ExperimentConfig::workers);
  m.def("default_pad", &mc::default_pad, py::arg("T"));
  m.def("resolved_pad", &mc::resolved_pad, py::arg("cfg"));

  py::class_<mc::CltReport>(m, "CltReport")
      .def_readonly("Y", &mc::CltReport::Y)
      .def_readonly("mean_A", &mc::CltReport::mean_A)
      .def_readonly("var_Y", &mc::CltReport::var_Y)
      .def_readonly("sigma_value", &mc::CltReport::sigma_value)
      .def_readonly("sigma_se", &mc::CltReport::sigma_se)
      .def_readonly("var0", &mc::CltReport::var0)
      .def_readonly("cov", &mc::CltReport::cov)
      .def_readonly("cov_se", &mc::CltReport::cov_se)
      .def_readonly("tail_max_ratio", &mc::CltReport::tail_max_ratio)
      .def_readonly("ks", &mc::CltReport::ks)
      .def_readonly("skew", &mc::CltReport::skew)
      .def_readonly("ex_kurtosis", &mc::CltReport::ex_kurtosis)
      .def_readonly("t_eval", &mc::CltReport::t_eval);
  m.def("run_clt", &mc::run_clt, py::arg("cfg"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<mc::MomentRow>(m, "MomentRow")
      .def_readonly("t", &mc::MomentRow::t)
      .def_readonly("p", &mc::MomentRow::p)
      .def_readonly("estimate", &mc::MomentRow::estimate)
      .def_readonly("se", &mc::MomentRow::se);
  py::class_<mc::MomentsReport>(m, "MomentsReport")
      .def_readonly("rows", &mc::MomentsReport::rows)
      .def_readonly("a", &mc::MomentsReport::a)
      .def_readonly("b", &mc::MomentsReport::b);
  m.def("run_moments", &mc::run_moments, py::arg("cfg"), py::arg("p_list"),
        py::arg("a") = 0.0, py::arg("b") = 3.0,
        py::call_guard<py::gil_scoped_release>());

  py::class_<mc::SmallTimeRow>(m, "SmallTimeRow")
      .def_readonly("t", &mc::SmallTimeRow::t)
      .def_readonly("sigma2_over_t", &mc::SmallTimeRow::sigma2_over_t)
      .def_readonly("se", &mc::SmallTimeRow::se)
      .def_readonly("var0_over_t", &mc::SmallTimeRow::var0_over_t)
      .def_readonly("tail_ratio", &mc::SmallTimeRow::tail_ratio);
  py::class_<mc::SmallTimeReport>(m, "SmallTimeReport")
      .def_readonly("rows", &mc::SmallTimeReport::rows);
  m.def("run_small_time", &mc::run_small_time, py::arg("cfg"), py::arg("ts"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<mc::DecayRegression>(m, "DecayRegression")
      .def_readonly("slope", &mc::DecayRegression::slope)
      .def_readonly("slope_se", &mc::DecayRegression::slope_se)
      .def_readonly("upper95", &mc::DecayRegression::upper95)
      .def_readonly("used_lags", &mc::DecayRegression::used_lags);
  py::class_<mc::DecayReport>(m, "DecayReport")
      .def_readonly("series", &mc::DecayReport::series)
      .def_readonly("var0", &mc::DecayReport::var0)
      .def_readonly("var0_se", &mc::DecayReport::var0_se)
      .def_readonly("regression", &mc::DecayReport::regression)
      .def_readonly("t_eval", &mc::DecayReport::t_eval);
  m.def("run_covariance_decay", &mc::run_covariance_decay, py::arg("cfg"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<mc::GapCase>(m, "GapCase")
      .def(py::init([](int j, double t, int M) {
             return mc::GapCase{j, t, M};
           }),
           py::arg("j"), py::arg("t") = 1.0, py::arg("M") = 2000)
      .def_readwrite("j", &mc::GapCase::j)
      .def_readwrite("t", &mc::GapCase::t)
      .def_readwrite("M", &mc::GapCase::M);
  py::class_<mc::GapProbRow>(m, "GapProbRow")
      .def_readonly("cfg", &mc::GapProbRow::cfg)
      .def_readonly("est_coarse", &mc::GapProbRow::est_coarse)
      .def_readonly("se_coarse", &mc::GapProbRow::se_coarse)
      .def_readonly("est_fine", &mc::GapProbRow::est_fine)
      .def_readonly("se_fine", &mc::GapProbRow::se_fine)
      .def_readonly("exact", &mc::GapProbRow::exact);
  m.def("run_gap_probabilities", &mc::run_gap_probabilities, py::arg("cfg"),
        py::arg("cases"), py::call_guard<py::gil_scoped_release>());

  py::class_<mc::CouplingRow>(m, "CouplingRow")
      .def_readonly("side", &mc::CouplingRow::side)
      .def_readonly("j", &mc::CouplingRow::j)
      .def_readonly("p", &mc::CouplingRow::p)
      .def_readonly("occurrences", &mc::CouplingRow::occurrences)
      .def_readonly("agreements", &mc::CouplingRow::agreements);
  py::class_<mc::CouplingReport>(m, "CouplingReport")
      .def_readonly("rows", &mc::CouplingReport::rows)
      .def_readonly("reps", &mc::CouplingReport::reps)
      .def_readonly("top", &mc::CouplingReport::top);
  m.def("run_coupling", &mc::run_coupling, py::arg("cfg"),
        py::arg("j_max") = 3, py::call_guard<py::gil_scoped_release>());

  py::class_<mc::MixingReport>(m, "MixingReport")
      .def_readonly("gap_rows", &mc::MixingReport::gap_rows)
      .def_readonly("coupling", &mc::MixingReport::coupling)
      .def_readonly("decay", &mc::MixingReport::decay);
  m.def("run_mixing", &mc::run_mixing, py::arg("cfg"),
        py::call_guard<py::gil_scoped_release>());
}
