#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <memory>

#include "hdsl/constraint_gen.hpp"
#include "hdsl/evaluation.hpp"
#include "hdsl/fw_solver.hpp"
#include "hdsl/io_error.hpp"
#include "hdsl/synthetic.hpp"

namespace py = pybind11;
using namespace hdsl;

namespace {

SparseVector to_sparse(const std::map<FeatureIndex, double>& entries, std::size_t dim) {
  SparseVector x(dim);
  for (const auto& [i, v] : entries)
    if (v != 0.0) x.push_back(i, v);
  return x;
}

std::map<FeatureIndex, double> to_dict(const SparseVector& x) {
  std::map<FeatureIndex, double> d;
  for (std::size_t p = 0; p < x.nnz(); ++p) d[x.indices()[p]] = x.values()[p];
  return d;
}

Dataset make_dataset(const std::vector<std::map<FeatureIndex, double>>& rows, std::size_t dim,
                     std::optional<std::vector<int>> labels) {
  Dataset ds;
  ds.dim = dim;
  for (const auto& r : rows) ds.points.push_back(to_sparse(r, dim));
  ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

py::dict record_dict(const IterationRecord& r) {
  py::dict d;
  d["k"] = r.k;
  d["objective"] = r.objective;
  d["gap"] = r.gap;
  d["step"] = r.step == StepKind::Forward ? "F" : "A";
  d["gamma"] = r.gamma;
  d["atoms"] = r.atoms;
  d["features"] = r.features;
  if (r.val_metric) d["val_metric"] = *r.val_metric;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse bilinear similarity learning over rank-one 4-sparse bases";

  py::register_exception<SolverError>(m, "SolverError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);

  py::class_<Dataset, std::shared_ptr<Dataset>>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("rows"), py::arg("dim"), py::arg("labels") = py::none(),
           "Rows are {feature_index: value} dicts.")
      .def_readonly("dim", &Dataset::dim)
      .def_readwrite("labels", &Dataset::labels)
      .def("__len__", &Dataset::size)
      .def("row", [](const Dataset& ds, std::size_t r) { return to_dict(ds.points.at(r)); })
      .def("rows", [](const Dataset& ds) {
        std::vector<std::map<FeatureIndex, double>> out;
        for (const auto& x : ds.points) out.push_back(to_dict(x));
        return out;
      });

  m.def("load_libsvm", [](const std::string& path, std::optional<std::size_t> dim) {
    return std::make_shared<Dataset>(load_libsvm(path, dim));
  }, py::arg("path"), py::arg("dim") = py::none());
  m.def("save_libsvm", &save_libsvm, py::arg("dataset"), py::arg("path"));
  m.def("scale_to_unit_range", [](const Dataset& ds) { return std::make_shared<Dataset>(scale_to_unit_range(ds)); });

  py::class_<Model>(m, "Model")
      .def(py::init([](double lambda, std::size_t dim, const std::vector<std::tuple<std::string, FeatureIndex, FeatureIndex, double>>& atoms) {
             Model md(lambda, dim);
             for (const auto& [s, i, j, a] : atoms) {
               if (s != "P" && s != "N") throw ModelError("atom sign must be 'P' or 'N'");
               md.mutable_atoms()[BasisId::make(i, j, s == "P" ? Sign::Pos : Sign::Neg)] += a;
             }
             md.validate();
             return md;
           }),
           py::arg("lam"), py::arg("dim"), py::arg("atoms"), "Atoms are (sign, i, j, weight) with sign 'P' or 'N'.")
      .def_property_readonly("lam", &Model::lambda)
      .def_property_readonly("dim", &Model::dim)
      .def_property_readonly("atom_count", &Model::atom_count)
      .def_property_readonly("feature_count", &Model::feature_count)
      .def_property_readonly("atoms", [](const Model& md) {
        std::vector<std::tuple<std::string, FeatureIndex, FeatureIndex, double>> out;
        for (const auto& [b, a] : md.atoms()) out.emplace_back(b.sign == Sign::Pos ? "P" : "N", b.i, b.j, a);
        return out;
      })
      .def("similarity", [](const Model& md, const std::map<FeatureIndex, double>& x,
                            const std::map<FeatureIndex, double>& y) {
        return similarity(md, to_sparse(x, md.dim()), to_sparse(y, md.dim()));
      })
      .def("matrix_entries", [](const Model& md) {
        std::vector<std::tuple<FeatureIndex, FeatureIndex, double>> out;
        for (const auto& e : to_sparse_matrix(md)) out.emplace_back(e.row, e.col, e.value);
        return out;
      })
      .def("project", [](const Model& md, const Dataset& ds) {
        const ProjectionMap p = factorize(md);
        py::array_t<double> out({ds.size(), p.columns.size()});
        auto view = out.mutable_unchecked<2>();
        for (std::size_t r = 0; r < ds.size(); ++r) {
          const auto z = project(p, ds.points[r]);
          for (std::size_t c = 0; c < z.size(); ++c) view(r, c) = z[c];
        }
        return out;
      }, "Dense (n, atom_count) projection whose row dot products equal the similarity.")
      .def("save", [](const Model& md, const std::string& path) { save_model(md, path); })
      .def_static("load", &load_model)
      .def("serialize", [](const Model& md) { return serialize_model(md); })
      .def_static("deserialize", [](const std::string& text) { return deserialize_model(text); })
      .def("__eq__", [](const Model& a, const Model& b) { return a == b; })
      .def("__repr__", [](const Model& md) {
        return "<Model lam=" + std::to_string(md.lambda()) + " dim=" + std::to_string(md.dim()) +
               " atoms=" + std::to_string(md.atom_count()) + ">";
      });

  m.def("train", [](std::shared_ptr<Dataset> ds, const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& triplets,
                    double lam, std::size_t max_iters, const std::string& oracle, std::size_t batch_size,
                    std::uint64_t seed, double gap_tol, double line_search_tol) {
    std::vector<TripletConstraint> t;
    for (const auto& [a, b, c] : triplets) t.push_back({a, b, c});
    const ConstraintSet cs(ds, std::move(t));
    SolverConfig cfg;
    cfg.lambda = lam;
    cfg.max_iters = max_iters;
    cfg.oracle = parse_oracle(oracle);
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.gap_tol = gap_tol;
    cfg.line_search_tol = line_search_tol;
    TrainResult res;
    {
      py::gil_scoped_release release;
      res = train(cs, cfg);
    }
    py::list history;
    for (const auto& r : res.history) history.append(record_dict(r));
    return py::make_tuple(res.model, history);
  }, py::arg("dataset"), py::arg("triplets"), py::arg("lam") = 1.0, py::arg("max_iters") = 1000,
     py::arg("oracle") = "exact", py::arg("batch_size") = 0, py::arg("seed") = 0, py::arg("gap_tol") = 1e-5,
     py::arg("line_search_tol") = 1e-6, "Returns (model, history).");

  m.def("neighbors_triplets", [](const Dataset& ds, std::size_t targets, std::size_t impostors) {
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> out;
    for (const auto& t : neighbors_triplets(ds, targets, impostors).triplets) out.emplace_back(t.a, t.b, t.c);
    return out;
  }, py::arg("dataset"), py::arg("targets") = 3, py::arg("impostors") = 5);

  m.def("knn_error", [](const Model& md, const Dataset& train, const Dataset& test, std::size_t k, std::size_t threads) {
    py::gil_scoped_release release;
    return knn_error(md, train, test, k, threads);
  }, py::arg("model"), py::arg("train"), py::arg("test"), py::arg("k") = 3, py::arg("threads") = 1);

  m.def("feature_recovery_auc", [](const Model& md, const Model& truth) {
    return feature_recovery_auc(md, active_features(truth));
  }, py::arg("model"), py::arg("truth"));
  m.def("entry_recovery_auc", [](const Model& md, const Model& truth) {
    return entry_recovery_auc(md, active_entries(truth));
  }, py::arg("model"), py::arg("truth"));

  m.def("gen_uniform_sparse", [](std::size_t n, std::size_t dim, double sparsity, std::uint64_t seed) {
    Rng rng(seed);
    return std::make_shared<Dataset>(gen_uniform_sparse(n, dim, sparsity, rng));
  }, py::arg("n"), py::arg("dim"), py::arg("sparsity"), py::arg("seed") = 0);
  m.def("gen_truth", [](std::size_t dim, std::size_t n_bases, double concentration, std::uint64_t seed) {
    Rng rng(seed);
    return gen_truth(dim, n_bases, std::nullopt, concentration, rng);
  }, py::arg("dim"), py::arg("n_bases"), py::arg("concentration") = 9.0, py::arg("seed") = 0);
  m.def("truth_triplets", [](const Dataset& samples, const Model& truth, double alpha, std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> out;
    for (const auto& t : truth_triplets(samples, truth, alpha, count, rng).triplets) out.emplace_back(t.a, t.b, t.c);
    return out;
  }, py::arg("samples"), py::arg("truth"), py::arg("alpha"), py::arg("count"), py::arg("seed") = 0);

  m.def("convergence_bound", &convergence_bound, py::arg("lam"), py::arg("lipschitz"), py::arg("k"));
  m.def("smoothed_hinge", &smoothed_hinge);
  m.def("smoothed_hinge_deriv", &smoothed_hinge_deriv);
}
