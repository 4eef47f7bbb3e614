#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gdnn/config.hpp"
#include "gdnn/distance.hpp"
#include "gdnn/error.hpp"
#include "gdnn/graph.hpp"
#include "gdnn/pipeline.hpp"
#include "gdnn/train.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using PairArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

std::vector<gdnn::NodePair> to_pairs(const PairArray& a) {
  if (a.size() == 0) return {};
  if (a.ndim() != 2 || a.shape(1) != 2) throw gdnn::ConfigError("pairs must have shape (n, 2)");
  const auto r = a.unchecked<2>();
  std::vector<gdnn::NodePair> out;
  out.reserve(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    if (r(i, 0) < 0 || r(i, 1) < 0) throw gdnn::DataError("negative node id in pairs");
    out.emplace_back(static_cast<gdnn::NodeId>(r(i, 0)), static_cast<gdnn::NodeId>(r(i, 1)));
  }
  return out;
}

py::array_t<std::int64_t> from_pairs(const std::vector<gdnn::NodePair>& pairs) {
  py::array_t<std::int64_t> out({static_cast<py::ssize_t>(pairs.size()), py::ssize_t{2}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    w(i, 0) = pairs[i].first;
    w(i, 1) = pairs[i].second;
  }
  return out;
}

Array from_matrix(const gdnn::Matrix& m) {
  Array out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

gdnn::RunConfig config_with(const std::filesystem::path& path, const std::map<std::string, std::string>& set) {
  auto cfg = gdnn::load_config(path);
  for (const auto& [k, v] : set) gdnn::set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

py::dict aggregate_dict(const gdnn::Aggregate& a) {
  return py::dict("runs"_a = a.runs, "valid_mean"_a = a.valid_mean, "valid_std"_a = a.valid_std,
                  "test_mean"_a = a.test_mean, "test_std"_a = a.test_std);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph distance neural network link prediction";

  static py::exception<gdnn::Error> base(m, "GdnnError");
  static py::exception<gdnn::ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<gdnn::NumericError> numeric_error(m, "NumericError", base.ptr());
  static py::exception<gdnn::DataError> data_error(m, "DataError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const gdnn::ConfigError& e) {
      config_error(e.what());
    } catch (const gdnn::NumericError& e) {
      numeric_error(e.what());
    } catch (const gdnn::DataError& e) {
      data_error(e.what());
    } catch (const gdnn::Error& e) {
      base(e.what());
    }
  });

  py::class_<gdnn::Graph>(m, "Graph")
      .def(py::init([](const PairArray& edges, std::size_t num_nodes) {
             return gdnn::build_graph(to_pairs(edges), num_nodes);
           }),
           "edges"_a, "num_nodes"_a)
      .def_property_readonly("num_nodes", &gdnn::Graph::num_nodes)
      .def_property_readonly("num_edges", &gdnn::Graph::num_edges)
      .def_property_readonly("fingerprint", &gdnn::Graph::fingerprint)
      .def("degree", &gdnn::Graph::degree, "v"_a)
      .def("neighbors",
           [](const gdnn::Graph& g, gdnn::NodeId v) {
             const auto n = g.neighbors(v);
             return std::vector<gdnn::NodeId>(n.begin(), n.end());
           },
           "v"_a)
      .def("has_edge", &gdnn::Graph::has_edge, "u"_a, "v"_a)
      .def("edges", [](const gdnn::Graph& g) { return from_pairs(g.edges()); });

  m.def("bfs_distances",
        [](const gdnn::Graph& g, gdnn::NodeId source) {
          const auto d = gdnn::bfs_distances(g, source);
          return py::array_t<std::int32_t>(static_cast<py::ssize_t>(d.size()), d.data());
        },
        "graph"_a, "source"_a, "Hop distances from source; -1 marks unreachable nodes.");

  m.def("select_targets",
        [](const gdnn::Graph& g, std::size_t k, const std::string& strategy, std::uint64_t seed) {
          gdnn::Rng rng(seed);
          return gdnn::select_targets(g, {gdnn::parse_target_kind(strategy), k}, rng);
        },
        "graph"_a, "k"_a, "strategy"_a = "random", "seed"_a = 0);

  m.def("encode_features",
        [](const gdnn::Graph& g, const std::vector<gdnn::NodeId>& targets, bool standardize) {
          auto f = gdnn::encode_features(g, targets);
          if (standardize) gdnn::standardize_columns(f);
          return from_matrix(f.data);
        },
        "graph"_a, "targets"_a, "standardize"_a = false,
        "N x k hop-distance matrix; unreachable pairs hold N.");

  m.def("hits_at_k",
        [](const Array& pos, const Array& neg, std::size_t k) {
          return gdnn::hits_at_k({pos.data(), static_cast<std::size_t>(pos.size())},
                                 {neg.data(), static_cast<std::size_t>(neg.size())}, k);
        },
        "pos"_a, "neg"_a, "k"_a = 20);

  m.def("gradcheck",
        [](double eps, std::uint64_t seed) {
          py::list out;
          for (const auto& c : gdnn::run_gradcheck_suite(eps, seed)) {
            out.append(py::dict("name"_a = c.name, "max_rel_error"_a = c.report.max_rel_error,
                                "worst_param"_a = c.report.worst_param,
                                "coordinates"_a = c.report.coordinates,
                                "per_param"_a = c.report.per_param));
          }
          return out;
        },
        "eps"_a = 1e-6, "seed"_a = gdnn::kGradcheckPointSeed);

  m.def("import_dataset",
        [](std::optional<std::filesystem::path> edges, std::optional<std::filesystem::path> split_dir,
           const std::filesystem::path& out, double valid_frac, double test_frac, std::size_t negatives,
           std::uint64_t seed) {
          gdnn::ImportOptions o;
          if (edges) o.edges = *edges;
          if (split_dir) o.split_in = *split_dir;
          o.out_dir = out;
          o.valid_frac = valid_frac;
          o.test_frac = test_frac;
          o.negatives = negatives;
          o.seed = seed;
          const auto s = gdnn::import_dataset(o);
          return py::dict("num_nodes"_a = s.num_nodes, "train"_a = s.train, "valid"_a = s.valid,
                          "test"_a = s.test);
        },
        "edges"_a = py::none(), "split_dir"_a = py::none(), py::kw_only(), "out"_a, "valid_frac"_a = 0.1,
        "test_frac"_a = 0.1, "negatives"_a = 0, "seed"_a = 0);

  m.def("encode",
        [](const std::filesystem::path& config, const std::filesystem::path& out,
           const std::map<std::string, std::string>& set) {
          return from_matrix(gdnn::encode_to_dir(config_with(config, set), out).data);
        },
        "config"_a, "out"_a, "set"_a = std::map<std::string, std::string>{});

  m.def("train",
        [](const std::filesystem::path& config, const std::map<std::string, std::string>& set) {
          const auto result = gdnn::train_to_dir(config_with(config, set));
          auto d = aggregate_dict(result.summary);
          py::list runs;
          for (const auto& r : result.runs) {
            runs.append(py::dict("seed"_a = r.seed, "epoch"_a = r.selected.epoch,
                                 "valid"_a = r.selected.valid_hits_at_k.value_or(0.0),
                                 "test"_a = r.selected.test_hits_at_k.value_or(0.0)));
          }
          d["selected"] = runs;
          d["failure"] = result.failure ? py::cast(*result.failure) : py::none();
          return d;
        },
        "config"_a, "set"_a = std::map<std::string, std::string>{},
        "Trains every configured seed and writes metrics and checkpoints to output.dir.");

  m.def("evaluate",
        [](const std::filesystem::path& checkpoint, std::optional<std::filesystem::path> split) {
          const auto r = gdnn::eval_checkpoint(checkpoint, split);
          return py::dict("valid_hits"_a = r.valid_hits, "test_hits"_a = r.test_hits);
        },
        "checkpoint"_a, "split"_a = py::none());

  m.def("predict",
        [](const std::filesystem::path& checkpoint, const PairArray& pairs) {
          const auto scored = gdnn::predict_pairs(checkpoint, to_pairs(pairs));
          py::array_t<double> out(static_cast<py::ssize_t>(scored.size()));
          auto w = out.mutable_unchecked<1>();
          for (std::size_t i = 0; i < scored.size(); ++i) w(i) = scored[i].probability;
          return out;
        },
        "checkpoint"_a, "pairs"_a, "Edge probabilities in input order.");
}
