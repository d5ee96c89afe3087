#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>
#include <pybind11/numpy.h>

#include <sstream>

#include "pdenetpp/classical_schemes.hpp"
#include "pdenetpp/experiment.hpp"
#include "pdenetpp/moments.hpp"
#include "pdenetpp/pde_solvers.hpp"
#include "pdenetpp/pdnx.hpp"
#include "pdenetpp/training.hpp"

namespace py = pybind11;
using namespace pdenetpp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.begin(), t.end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array vector_to_numpy(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a one-dimensional array");
  return std::vector<double>(a.data(), a.data() + a.size());
}

schemes::Limiter parse_limiter(const std::string& name) {
  if (name == "minmod") return schemes::Limiter::Minmod;
  if (name == "vanleer") return schemes::Limiter::VanLeer;
  throw std::invalid_argument("unknown limiter '" + name + "' (expected minmod or vanleer)");
}

py::dict report_to_dict(const EvalReport& rep) {
  py::dict d;
  d["avg_l2_error"] = rep.avg_l2_error;
  d["sr_percent"] = rep.sr_percent;
  d["n_failed"] = rep.n_failed;
  d["errors"] = rep.errors;
  d["failed_step"] = rep.failed_step;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Compiled core: moment kernels, hybrid models, reference solvers and 1-D schemes.";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<pdnx::FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<experiment::ConfigError>(m, "ConfigError", PyExc_ValueError);

  // ---- moments ----
  py::class_<MomentSpec>(m, "MomentSpec")
      .def(py::init([](int p, int q, int r, int half_width, double dx, double dy) {
             MomentSpec s{p, q, r, half_width, dx, dy};
             s.validate();
             return s;
           }),
           py::arg("p"), py::arg("q"), py::arg("r") = 2, py::arg("half_width") = 2, py::arg("dx") = 1.0,
           py::arg("dy") = 1.0)
      .def_readonly("p", &MomentSpec::p)
      .def_readonly("q", &MomentSpec::q)
      .def_readonly("r", &MomentSpec::r)
      .def_readonly("half_width", &MomentSpec::half_width)
      .def_readonly("dx", &MomentSpec::dx)
      .def_readonly("dy", &MomentSpec::dy)
      .def_property_readonly("size", &MomentSpec::size)
      .def("__repr__", [](const MomentSpec& s) {
        std::ostringstream os;
        os << "MomentSpec(p=" << s.p << ", q=" << s.q << ", r=" << s.r << ", half_width=" << s.half_width
           << ", dx=" << s.dx << ", dy=" << s.dy << ")";
        return os.str();
      });
  m.def("moment_from_kernel", [](const Array& k, const MomentSpec& s) { return to_numpy(moment_from_kernel(from_numpy(k), s)); });
  m.def("kernel_from_moment", [](const Array& mo, const MomentSpec& s) { return to_numpy(kernel_from_moment(from_numpy(mo), s)); });
  m.def("free_indices", &free_indices);
  m.def("free_param_count", &free_param_count);
  m.def("assemble_constrained_kernel", [](const MomentSpec& s, const Array& free) {
    const auto v = to_vector(free);
    return to_numpy(assemble_constrained_kernel(s, v));
  });
  m.def("satisfies_moment_constraint",
        [](const Array& k, const MomentSpec& s, double tol) { return satisfies_moment_constraint(from_numpy(k), s, tol); },
        py::arg("kernel"), py::arg("spec"), py::arg("tol") = 1e-10);

  // ---- classical schemes ----
  m.def("upwind_step_1", [](const Array& u, double mu) { return vector_to_numpy(schemes::upwind_step_1(to_vector(u), mu)); });
  m.def("upwind_step_2", [](const Array& u, double mu) { return vector_to_numpy(schemes::upwind_step_2(to_vector(u), mu)); });
  m.def(
      "flux_limited_step",
      [](const Array& u, double mu, const std::string& limiter) {
        return vector_to_numpy(schemes::flux_limited_step(to_vector(u), mu, parse_limiter(limiter)));
      },
      py::arg("u"), py::arg("mu"), py::arg("limiter") = "minmod");
  m.def("weno3_reconstruct", [](const Array& a) {
    const auto r = schemes::weno3_reconstruct(to_vector(a));
    return py::make_tuple(vector_to_numpy(r.values), vector_to_numpy(r.w_left), vector_to_numpy(r.w_right));
  });
  m.def("weno3_step", [](const Array& u, double mu) { return vector_to_numpy(schemes::weno3_step(to_vector(u), mu)); });
  m.def("total_variation", [](const Array& u) { return schemes::total_variation(to_vector(u)); });

  // ---- reference solvers ----
  py::class_<PdeConfig>(m, "PdeConfig")
      .def(py::init([](const std::string& pde) { return PdeConfig::defaults(parse_pde(pde)); }), py::arg("pde"))
      .def_static("ns_hard", &PdeConfig::ns_hard)
      .def_property(
          "pde", [](const PdeConfig& c) { return std::string(to_string(c.pde)); },
          [](PdeConfig& c, const std::string& s) { c.pde = parse_pde(s); })
      .def_readwrite("length", &PdeConfig::length)
      .def_readwrite("coefficient", &PdeConfig::coefficient)
      .def_readwrite("alpha", &PdeConfig::alpha)
      .def_readwrite("beta", &PdeConfig::beta)
      .def_readwrite("fine_grid", &PdeConfig::fine_grid)
      .def_readwrite("coarse_grid", &PdeConfig::coarse_grid)
      .def_readwrite("fine_dt", &PdeConfig::fine_dt)
      .def_readwrite("substeps", &PdeConfig::substeps)
      .def_readwrite("forced", &PdeConfig::forced)
      .def_readwrite("forcing_seed", &PdeConfig::forcing_seed)
      .def_property_readonly("coarse_dt", &PdeConfig::coarse_dt)
      .def("validate", &PdeConfig::validate);
  m.def("sample_grf", [](std::uint64_t seed, std::size_t n, double length) { return to_numpy(sample_grf(seed, n, length)); },
        py::arg("seed"), py::arg("n"), py::arg("length"));
  m.def(
      "generate_dataset",
      [](const PdeConfig& c, std::size_t n, std::size_t steps, std::uint64_t seed) {
        Dataset ds;
        {
          py::gil_scoped_release release;
          ds = generate_dataset(c, n, steps, seed);
        }
        return to_numpy(ds.data);
      },
      py::arg("config"), py::arg("trajectories"), py::arg("steps"), py::arg("seed"));
  m.def("add_noise", [](const Array& d, double amplitude, std::uint64_t seed) {
    return to_numpy(add_noise(from_numpy(d), amplitude, seed));
  });
  py::class_<SpectralSolver>(m, "SpectralSolver")
      .def(py::init<std::size_t, double>(), py::arg("n"), py::arg("length"))
      .def("burgers_rhs", [](const SpectralSolver& s, const Array& u, double nu, bool forced) {
        return to_numpy(s.burgers_rhs(from_numpy(u), nu, forced));
      }, py::arg("u"), py::arg("nu"), py::arg("forced") = true)
      .def("fn_rhs", [](const SpectralSolver& s, const Array& u, double gamma, double alpha, double beta) {
        return to_numpy(s.fn_rhs(from_numpy(u), gamma, alpha, beta));
      }, py::arg("u"), py::arg("gamma"), py::arg("alpha") = 0.01, py::arg("beta") = 0.25)
      .def("laplacian", [](const SpectralSolver& s, const Array& u) { return to_numpy(s.laplacian(from_numpy(u))); });

  // ---- models, metrics and artifacts ----
  py::class_<HybridModel>(m, "HybridModel")
      .def(py::init([](const std::string& config_json) {
             return HybridModel(experiment::hybrid_config_from_json(config_json));
           }),
           py::arg("config_json"))
      .def_static("load", &experiment::load_checkpoint, py::arg("manifest"))
      .def("save", [](const HybridModel& model, const std::filesystem::path& dir) { experiment::save_checkpoint(model, dir); })
      .def("config_json", [](const HybridModel& model) { return experiment::hybrid_config_to_json(model.config()); })
      .def("parameter_names", [](const HybridModel& model) {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < model.params().size(); ++i) names.push_back(model.params().name(i));
        return names;
      })
      .def("step", [](const HybridModel& model, const Array& state) { return to_numpy(model.step(from_numpy(state))); })
      .def("evaluate", [](const HybridModel& model, const Array& data, double threshold) {
        const Tensor d = from_numpy(data);
        EvalReport rep;
        {
          py::gil_scoped_release release;
          rep = evaluate([&](const Tensor& u) { return model.step(u); }, d, threshold);
        }
        return report_to_dict(rep);
      }, py::arg("data"), py::arg("threshold") = 1.0);

  m.def("relative_l2", [](const Array& x, const Array& y) { return relative_l2(from_numpy(x), from_numpy(y)); });
  m.def("read_pdnx", [](const std::filesystem::path& p) { return to_numpy(pdnx::read(p)); });
  m.def("write_pdnx", [](const std::filesystem::path& p, const Array& a) { pdnx::write(p, from_numpy(a)); });

  m.def(
      "run",
      [](const std::string& command, const std::filesystem::path& config, std::optional<std::filesystem::path> out,
         std::optional<std::uint64_t> seed) {
        experiment::Options o;
        o.config = config;
        o.out = std::move(out);
        o.seed = seed;
        std::ostringstream log, err;
        int code;
        {
          py::gil_scoped_release release;
          code = experiment::run(command, o, log, err);
        }
        return py::make_tuple(code, err.str());
      },
      py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
      "Runs a CLI command in-process; returns (exit_code, error_text).");
}
