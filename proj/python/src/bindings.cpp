#include "gemhp/config.hpp"
#include "gemhp/diagnostics.hpp"
#include "gemhp/error.hpp"
#include "gemhp/estimation.hpp"
#include "gemhp/simulator.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace gemhp;

namespace {

// Errors cross into Python as GemhpError (input errors also derive from ValueError).
PyObject* g_error = nullptr;
PyObject* g_input_error = nullptr;

ThetaVector as_theta(const ModelSpec& spec, const std::optional<ThetaVector>& theta) {
    if (!theta) return spec.initial();
    if (theta->size() != spec.n_params()) {
        throw Error(ErrorKind::InvalidInput, "theta has " + std::to_string(theta->size()) + " entries, expected " +
                                                 std::to_string(spec.n_params()));
    }
    return *theta;
}

py::dict named(const ModelSpec& spec, const Vector& v) {
    py::dict d;
    for (int j = 0; j < spec.n_params(); ++j) d[py::str(spec.parameters[static_cast<std::size_t>(j)].name)] = v(j);
    return d;
}

py::dict fit_to_dict(const ModelSpec& spec, const FitResult& f) {
    py::dict d;
    d["theta_hat"] = f.theta_hat;
    d["named"] = named(spec, f.theta_hat);
    d["l_value"] = f.l_value;
    d["gamma_T"] = f.gamma_T;
    d["cov_hat"] = f.cov_available ? py::cast(f.cov_hat) : py::none();
    d["n_events"] = f.n_events;
    d["horizon"] = f.horizon;
    d["converged"] = f.converged;
    d["n_restarts_used"] = f.n_restarts_used;
    d["score_norm"] = f.score_norm;
    d["evaluations"] = f.evaluations;
    d["warnings"] = f.warnings;
    return d;
}

} // namespace

PYBIND11_MODULE(_gemhp, m) {
    m.doc() = "Marked Hawkes processes with matrix-exponential kernels";

    g_error = PyErr_NewException("gemhp.GemhpError", PyExc_RuntimeError, nullptr);
    py::tuple bases = py::make_tuple(py::handle(g_error), py::handle(PyExc_ValueError));
    g_input_error = PyErr_NewException("gemhp.InputError", bases.ptr(), nullptr);
    m.attr("GemhpError") = py::handle(g_error);
    m.attr("InputError") = py::handle(g_input_error);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyObject* type = e.is_input_error() ? g_input_error : g_error;
            PyObject* value = Py_BuildValue("(ss)", e.what(), to_string(e.kind()));
            PyErr_SetObject(type, value);
            Py_XDECREF(value);
        }
    });

    py::class_<ModelSpec>(m, "ModelSpec")
        .def_static("from_json", [](const std::string& text) { return parse_model(text); }, py::arg("text"))
        .def_static("load", &load_model, py::arg("path"))
        .def_readonly("d", &ModelSpec::d)
        .def_property_readonly("n_params", &ModelSpec::n_params)
        .def_property_readonly("parameter_names",
                               [](const ModelSpec& s) {
                                   std::vector<std::string> out;
                                   for (const auto& p : s.parameters) out.push_back(p.name);
                                   return out;
                               })
        .def_property_readonly("lower", &ModelSpec::lower)
        .def_property_readonly("upper", &ModelSpec::upper)
        .def_property_readonly("initial", &ModelSpec::initial)
        .def_readonly("x0", &ModelSpec::x0);

    py::class_<EventStream>(m, "EventStream")
        .def(py::init([](double horizon, int d, std::vector<double> times, std::vector<int> labels,
                         std::vector<Mark> marks, Mark x0) {
                 if (times.size() != labels.size() || times.size() != marks.size()) {
                     throw Error(ErrorKind::InvalidInput, "times, labels and marks differ in length");
                 }
                 EventStream s;
                 s.horizon = horizon;
                 s.d = d;
                 s.x0 = std::move(x0);
                 for (std::size_t i = 0; i < times.size(); ++i) s.records.push_back({times[i], labels[i], marks[i]});
                 return s;
             }),
             py::arg("horizon"), py::arg("d"), py::arg("times"), py::arg("labels"), py::arg("marks"), py::arg("x0"))
        .def_readonly("horizon", &EventStream::horizon)
        .def_readonly("d", &EventStream::d)
        .def_readonly("x0", &EventStream::x0)
        .def_readonly("seed", &EventStream::seed)
        .def("__len__", &EventStream::size)
        .def("count", &EventStream::count, py::arg("component"))
        .def_property_readonly("times",
                               [](const EventStream& s) {
                                   Vector v(static_cast<Eigen::Index>(s.size()));
                                   for (std::size_t i = 0; i < s.size(); ++i) v(static_cast<Eigen::Index>(i)) = s.records[i].t;
                                   return v;
                               })
        .def_property_readonly("labels",
                               [](const EventStream& s) {
                                   std::vector<int> v;
                                   for (const auto& r : s.records) v.push_back(r.k);
                                   return v;
                               })
        .def_property_readonly("marks",
                               [](const EventStream& s) {
                                   std::vector<Mark> v;
                                   for (const auto& r : s.records) v.push_back(r.x);
                                   return v;
                               })
        .def("validate", &EventStream::validate, py::arg("space"));

    py::class_<MarkSpace>(m, "MarkSpace");
    m.def("mark_space", [](const ModelSpec& s) { return s.marks; }, py::arg("spec"));

    m.def("read_stream", &read_stream_file, py::arg("path"));
    m.def("write_stream",
          [](const std::string& path, const EventStream& s, const ModelSpec& spec) {
              write_stream_file(path, s, spec.marks);
          },
          py::arg("path"), py::arg("stream"), py::arg("spec"));

    m.def("simulate",
          [](const ModelSpec& spec, const std::optional<ThetaVector>& theta, double horizon, std::uint64_t seed,
             std::uint64_t stream, double warmup, bool allow_unstable) {
              SimulationOptions o;
              o.horizon = horizon;
              o.seed = seed;
              o.stream = stream;
              o.warmup = warmup;
              o.allow_unstable = allow_unstable;
              const ThetaVector th = as_theta(spec, theta);
              py::gil_scoped_release release;
              return simulate(spec, th, o);
          },
          py::arg("spec"), py::arg("theta") = py::none(), py::arg("horizon") = 1.0, py::arg("seed") = 0,
          py::arg("stream") = 0, py::arg("warmup") = -1.0, py::arg("allow_unstable") = false);

    m.def("log_likelihood",
          [](const EventStream& s, const ModelSpec& spec, const std::optional<ThetaVector>& theta) {
              const auto l = log_likelihood(s, spec, as_theta(spec, theta));
              py::dict d;
              d["total"] = l.total;
              d["ground"] = l.ground;
              d["mark"] = l.mark;
              d["compensators"] = l.compensators;
              d["finite"] = l.finite;
              d["flag"] = l.flag;
              return d;
          },
          py::arg("stream"), py::arg("spec"), py::arg("theta") = py::none());

    m.def("score",
          [](const EventStream& s, const ModelSpec& spec, const std::optional<ThetaVector>& theta) {
              const auto r = score(s, spec, as_theta(spec, theta));
              py::dict d;
              d["grad"] = r.grad;
              d["residual"] = r.residual;
              d["boundary_warning"] = r.boundary_warning;
              return d;
          },
          py::arg("stream"), py::arg("spec"), py::arg("theta") = py::none());

    m.def("observed_fisher",
          [](const EventStream& s, const ModelSpec& spec, const std::optional<ThetaVector>& theta) {
              const auto r = observed_fisher(s, spec, as_theta(spec, theta));
              py::dict d;
              d["gamma"] = r.gamma;
              d["asymmetry"] = r.asymmetry;
              d["boundary_warning"] = r.boundary_warning;
              return d;
          },
          py::arg("stream"), py::arg("spec"), py::arg("theta") = py::none());

    m.def("fit_qmle",
          [](const EventStream& s, const ModelSpec& spec, int n_starts, std::uint64_t seed,
             const std::optional<ThetaVector>& init, int workers) {
              FitOptions o;
              o.n_starts = n_starts;
              o.seed = seed;
              o.init = init;
              o.workers = workers;
              FitResult f;
              {
                  py::gil_scoped_release release;
                  f = fit_qmle(s, spec, o);
              }
              return fit_to_dict(spec, f);
          },
          py::arg("stream"), py::arg("spec"), py::arg("n_starts") = 8, py::arg("seed") = 0, py::arg("init") = py::none(),
          py::arg("workers") = 1);

    m.def("wald_intervals",
          [](const EventStream& s, const ModelSpec& spec, const ThetaVector& theta_hat, double level) -> py::object {
              FitResult f;
              f.theta_hat = theta_hat;
              const auto fi = observed_fisher(s, spec, theta_hat);
              f.gamma_T = fi.gamma;
              f.horizon = s.horizon;
              Eigen::LLT<Matrix> llt(fi.gamma * s.horizon);
              if (llt.info() != Eigen::Success) return py::none();
              f.cov_hat = llt.solve(Matrix::Identity(theta_hat.size(), theta_hat.size()));
              f.cov_available = true;
              const auto ci = wald_cis(f, level);
              py::list out;
              for (const auto& w : *ci) out.append(py::make_tuple(w.lower, w.upper));
              return out;
          },
          py::arg("stream"), py::arg("spec"), py::arg("theta_hat"), py::arg("level") = 0.95);

    m.def("fit_qbe",
          [](const EventStream& s, const ModelSpec& spec, int draws, int burn_in, int thin, std::uint64_t seed,
             const std::optional<ThetaVector>& init) {
              McmcOptions o;
              o.draws = draws;
              o.burn_in = burn_in;
              o.thin = thin;
              o.seed = seed;
              o.init = init;
              PosteriorResult r;
              {
                  py::gil_scoped_release release;
                  r = fit_qbe(s, spec, std::vector<Prior>(static_cast<std::size_t>(spec.n_params()), Prior::uniform()), o);
              }
              py::dict d;
              d["theta_tilde"] = r.theta_tilde;
              d["named"] = named(spec, r.theta_tilde);
              d["posterior_sd"] = r.posterior_sd;
              d["ess"] = r.ess;
              d["mc_std_err"] = r.mc_std_err;
              d["credible"] = r.credible;
              d["acceptance_rate"] = r.acceptance_rate;
              d["ess_ok"] = r.ess_ok;
              d["mixing_failure"] = r.mixing_failure;
              d["warnings"] = r.warnings;
              return d;
          },
          py::arg("stream"), py::arg("spec"), py::arg("draws") = 20000, py::arg("burn_in") = 5000, py::arg("thin") = 1,
          py::arg("seed") = 0, py::arg("init") = py::none());

    m.def("check_stability",
          [](const ModelSpec& spec, const std::optional<ThetaVector>& theta, std::optional<std::vector<Mark>> probe) {
              const std::vector<Mark> pr = probe ? *probe : stability_probe(spec, spec.default_mark());
              const auto r = check_stability_L3(spec, as_theta(spec, theta), pr);
              py::dict d;
              d["ok"] = r.ok;
              d["rho_bound"] = r.rho_bound;
              d["kappa"] = r.kappa;
              d["phi_bar"] = r.phi_bar;
              d["sup_certified"] = r.sup_certified;
              d["note"] = r.note;
              return d;
          },
          py::arg("spec"), py::arg("theta") = py::none(), py::arg("probe") = py::none());

    m.def("excitation_matrix",
          [](const ModelSpec& spec, const std::optional<ThetaVector>& theta, const Mark& x) {
              return excitation_matrix_phi(spec, as_theta(spec, theta), x);
          },
          py::arg("spec"), py::arg("theta"), py::arg("x"));

    m.def("rescaled_residuals",
          [](const EventStream& s, const ModelSpec& spec, const std::optional<ThetaVector>& theta) {
              py::list out;
              for (const auto& c : rescaled_residuals(s, spec, as_theta(spec, theta)).components) {
                  py::dict d;
                  d["component"] = c.component;
                  d["residuals"] = c.residuals;
                  d["ks"] = c.ks;
                  d["p_value"] = c.p_value;
                  d["lag1_acf"] = c.lag1_acf;
                  d["skipped"] = c.skipped;
                  d["note"] = c.note;
                  out.append(d);
              }
              return out;
          },
          py::arg("stream"), py::arg("spec"), py::arg("theta") = py::none());

    m.def("lan_profile",
          [](const EventStream& s, const ModelSpec& spec, const ThetaVector& theta_hat, std::vector<Vector> directions,
             std::vector<double> radii) {
              const auto r = lan_profile(s, spec, theta_hat, directions, radii);
              py::list out;
              for (const auto& dir : r.directions) {
                  py::dict d;
                  d["direction"] = dir.direction;
                  d["radii"] = dir.radii;
                  d["log_z"] = dir.log_z;
                  d["curvature"] = dir.c2;
                  d["predicted"] = dir.predicted;
                  d["relative_error"] = dir.relative_error;
                  d["dropped"] = dir.dropped;
                  out.append(d);
              }
              return out;
          },
          py::arg("stream"), py::arg("spec"), py::arg("theta_hat"), py::arg("directions"),
          py::arg("radii") = std::vector<double>{});

    m.def("mc_moment_study",
          [](const ModelSpec& spec, const std::optional<ThetaVector>& theta, std::vector<double> horizons,
             int replications, std::uint64_t seed, int workers, bool init_at_truth, long reference_samples) {
              StudyOptions o;
              o.horizons = std::move(horizons);
              o.replications = replications;
              o.seed = seed;
              o.workers = workers;
              o.init_at_truth = init_at_truth;
              o.reference_samples = reference_samples;
              const ThetaVector th = as_theta(spec, theta);
              StudyReport r;
              {
                  py::gil_scoped_release release;
                  r = mc_moment_study(spec, th, o);
              }
              py::list hs;
              for (const auto& h : r.horizons) {
                  py::dict d;
                  d["horizon"] = h.horizon;
                  d["n_ok"] = h.n_ok;
                  d["n_failed"] = h.n_failed;
                  d["failure_flag"] = h.failure_flag;
                  d["mean_s"] = h.mean_s;
                  d["se_mean_s"] = h.se_mean_s;
                  d["cov_s"] = h.cov_s;
                  d["gamma_bar"] = h.gamma_bar;
                  d["coverage"] = h.coverage;
                  py::dict mom;
                  for (const auto& row : h.moments) mom[py::str(row.name)] = py::make_tuple(row.empirical, row.std_err, row.reference);
                  d["moments"] = mom;
                  hs.append(d);
              }
              py::dict out;
              out["horizons"] = hs;
              out["table"] = format_study_table(r, spec);
              return out;
          },
          py::arg("spec"), py::arg("theta") = py::none(), py::arg("horizons") = std::vector<double>{500.0, 2000.0},
          py::arg("replications") = 200, py::arg("seed") = 0, py::arg("workers") = 1, py::arg("init_at_truth") = false,
          py::arg("reference_samples") = 1'000'000L);
}
