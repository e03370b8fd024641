#include <cstdint>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dhtv/data.hpp"
#include "dhtv/errors.hpp"
#include "dhtv/geometry.hpp"
#include "dhtv/metrics.hpp"
#include "dhtv/model.hpp"
#include "dhtv/operators.hpp"
#include "dhtv/solver.hpp"

namespace py = pybind11;
using namespace dhtv;

namespace {

Dataset make_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Dataset ds;
  ds.features = x;
  ds.targets = y;
  return ds;
}

SolveConfig make_config(double lambda, double tol, std::int64_t max_iters, const std::string& solver) {
  SolveConfig cfg;
  cfg.lambda = lambda;
  cfg.tol = tol;
  cfg.max_iters = max_iters;
  cfg.solver_kind = parse_solver_kind(solver);
  return cfg;
}

// (rows, cols, values) of a sparse operator.
py::tuple triplets(const SparseMatrix& m) {
  std::vector<std::int64_t> r, c;
  std::vector<double> v;
  for (const auto& t : m.to_triplets()) {
    r.push_back(t.row);
    c.push_back(t.col);
    v.push_back(t.value);
  }
  return py::make_tuple(r, c, v, py::make_tuple(m.rows(), m.cols()));
}

py::dict lambda_row(const LambdaResult& r) {
  py::dict d;
  d["lambda"] = r.lambda;
  d["train_mse"] = r.train_mse;
  d["validation_mse"] = r.validation_mse;
  d["htv"] = r.htv;
  d["objective"] = r.objective;
  d["iterations"] = r.iterations;
  d["termination"] = std::string(to_string(r.termination));
  d["solver"] = std::string(to_string(r.solver));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Delaunay CPWL regression with HTV regularization";

  // Leaked on purpose: the translator may run until interpreter shutdown.
  static const py::handle error_type =
      py::exception<Error>(m, "DhtvError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(std::string(error_name(e.code())) + ": " + e.what());
      exc.attr("code") = std::string(error_name(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<Triangulation>(m, "Triangulation")
      .def_property_readonly("dimension", &Triangulation::dimension)
      .def_property_readonly("vertices", [](const Triangulation& t) { return Eigen::MatrixXd(t.vertices().transpose()); })
      .def_property_readonly("simplices",
                             [](const Triangulation& t) {
                               std::vector<std::vector<VertexId>> out;
                               for (SimplexId s = 0; s < t.num_simplices(); ++s) {
                                 const auto v = t.simplex(s);
                                 out.emplace_back(v.begin(), v.end());
                               }
                               return out;
                             })
      .def_property_readonly("neighbor_pairs",
                             [](const Triangulation& t) {
                               std::vector<std::pair<SimplexId, SimplexId>> out;
                               for (const auto& p : t.neighbor_pairs()) out.emplace_back(p.first, p.second);
                               return out;
                             })
      .def_property_readonly("hull_vertices", &Triangulation::hull_vertices)
      .def("locate",
           [](const Triangulation& t, const Eigen::VectorXd& x) -> py::object {
             const BarycentricLocation loc = t.locate(x);
             if (!loc.inside()) return py::none();
             return py::make_tuple(*loc.simplex, loc.weights);
           })
      .def("project_to_hull", [](const Triangulation& t, const Eigen::VectorXd& x) { return t.project_to_hull(x); })
      .def("regularization", [](const Triangulation& t) { return triplets(build_regularization(t)); },
           "Sparse L as (rows, cols, values, shape).")
      .def("htv", [](const Triangulation& t, const Eigen::VectorXd& c) { return htv(build_regularization(t), c); });

  m.def("delaunay", [](const Eigen::MatrixXd& points) { return delaunay(points.transpose()); }, py::arg("points"),
        "Delaunay triangulation of an (n, d) array.");

  py::class_<CpwlModel>(m, "Model")
      .def_property_readonly("dimension", &CpwlModel::dimension)
      .def_property_readonly("num_parameters", &CpwlModel::num_parameters)
      .def_property_readonly("coefficients", &CpwlModel::coefficients)
      .def_property_readonly("lambda_", &CpwlModel::lambda)
      .def_property_readonly("htv", [](const CpwlModel& mdl) { return mdl.metadata().htv; })
      .def_property_readonly("iterations", [](const CpwlModel& mdl) { return mdl.metadata().iterations; })
      .def_property_readonly("triangulation", &CpwlModel::triangulation, py::return_value_policy::reference_internal)
      .def("predict", [](const CpwlModel& mdl, const Eigen::MatrixXd& x) { return mdl.predict(x); }, py::arg("x"))
      .def("save", &CpwlModel::save, py::arg("path"))
      .def("to_bytes",
           [](const CpwlModel& mdl) {
             const auto b = mdl.serialize();
             return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
           })
      .def_static("from_bytes",
                  [](const py::bytes& b) {
                    const std::string s = b;
                    return CpwlModel::deserialize(
                        std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
                  })
      .def_static("load", &CpwlModel::load, py::arg("path"));

  m.def(
      "fit",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lam, double tol, std::int64_t max_iters,
         const std::string& solver) {
        py::gil_scoped_release release;
        return fit(make_dataset(x, y), make_config(lam, tol, max_iters, solver));
      },
      py::arg("x"), py::arg("y"), py::arg("lam"), py::arg("tol") = 1e-8, py::arg("max_iters") = 200000,
      py::arg("solver") = "auto");

  m.def(
      "grid_search",
      [](const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train, const Eigen::MatrixXd& x_val,
         const Eigen::VectorXd& y_val, std::vector<double> lambdas, double tol, std::int64_t max_iters, int threads) {
        const Dataset train = make_dataset(x_train, y_train);
        const Dataset val = make_dataset(x_val, y_val);
        GridSearchResult r;
        {
          py::gil_scoped_release release;
          const FitProblem p = prepare_fit(train);
          if (lambdas.empty()) lambdas = default_lambda_grid(p);
          GridSearchOptions opts;
          opts.threads = threads;
          r = grid_search_lambda(p, train, val, lambdas, make_config(0.0, tol, max_iters, "auto"), opts);
        }
        py::list table;
        for (const auto& row : r.table) table.append(lambda_row(row));
        return py::make_tuple(r.best_lambda, r.models[r.best_index], table);
      },
      py::arg("x_train"), py::arg("y_train"), py::arg("x_val"), py::arg("y_val"),
      py::arg("lambdas") = std::vector<double>{}, py::arg("tol") = 1e-8, py::arg("max_iters") = 200000,
      py::arg("threads") = 0, "Returns (best_lambda, best_model, per-lambda rows).");

  m.def("mse", [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return mse(a, b); });

  m.def(
      "random_grid_metrics",
      [](const CpwlModel& mdl, int n_grid, std::uint64_t seed, double epsilon) {
        const GridSample g = sample_on_random_grid(as_regressor(mdl), mdl.dimension(), n_grid, seed);
        return py::make_tuple(g.htv, sparsity_metric(g.regularization, g.values, epsilon));
      },
      py::arg("model"), py::arg("n_grid") = 1000, py::arg("seed") = 0, py::arg("epsilon") = 0.1,
      "(HTV, sparsity percent) on a random standard-normal grid in standardized coordinates.");
}
