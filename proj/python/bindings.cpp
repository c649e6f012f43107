#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sur/episodes.hpp"
#include "sur/error.hpp"
#include "sur/feature_bank.hpp"
#include "sur/harness.hpp"
#include "sur/ncc.hpp"
#include "sur/selector.hpp"

namespace py = pybind11;
using namespace sur;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

FeatureBank make_bank(std::string dataset, const std::vector<std::string>& names,
                      py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast> labels,
                      const std::vector<FloatArray>& blocks, std::uint32_t label_cardinality) {
  if (names.size() != blocks.size()) {
    throw Error(ErrorKind::InvalidArgument, "got " + std::to_string(names.size()) + " names for " +
                                                std::to_string(blocks.size()) + " blocks");
  }
  std::vector<ExtractorMeta> metas;
  std::vector<std::vector<float>> data;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& b = blocks[k];
    if (b.ndim() != 2) throw Error(ErrorKind::DimensionMismatch, "block '" + names[k] + "' must be 2-d (n, dim)");
    metas.push_back({names[k], static_cast<std::size_t>(b.shape(1))});
    data.emplace_back(b.data(), b.data() + b.size());
  }
  if (labels.ndim() != 1) throw Error(ErrorKind::DimensionMismatch, "labels must be 1-d");
  std::vector<std::uint32_t> lab(labels.data(), labels.data() + labels.size());
  return FeatureBank(std::move(dataset), std::move(metas), std::move(lab), std::move(data), label_cardinality);
}

FloatArray block_array(const FeatureBank& bank, std::size_t k) {
  const auto dim = static_cast<py::ssize_t>(bank.extractor(k).dim);
  FloatArray out({static_cast<py::ssize_t>(bank.size()), dim});
  const auto src = bank.block(k);
  std::copy(src.begin(), src.end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const DoubleArray& a) { return {a.data(), a.data() + a.size()}; }

py::dict outcome_dict(const MethodOutcome& o) {
  py::dict d;
  d["dataset"] = o.row.dataset;
  d["method"] = o.row.method;
  d["episodes"] = o.row.episodes;
  d["mean_acc"] = o.row.mean_acc;
  d["ci95"] = o.row.ci95;
  d["accuracies"] = o.accuracies;
  if (o.trace) {
    d["extractors"] = o.trace->extractors;
    d["lambdas"] = o.trace->episodes;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Few-shot feature selection over multi-domain feature banks";

  static py::exception<Error> sur_error(m, "SurError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = sur_error;
      py::object instance = err(e.what());
      instance.attr("kind") = std::string(e.name());
      PyErr_SetObject(sur_error.ptr(), instance.ptr());
    }
  });

  py::class_<FeatureBank>(m, "FeatureBank")
      .def(py::init(&make_bank), py::arg("dataset_name"), py::arg("names"), py::arg("labels"), py::arg("blocks"),
           py::arg("label_cardinality") = 0,
           "Bank from per-extractor float32 arrays of shape (n, dim) and n labels.")
      .def_property_readonly("dataset_name", &FeatureBank::dataset_name)
      .def_property_readonly("size", &FeatureBank::size)
      .def_property_readonly("num_extractors", &FeatureBank::num_extractors)
      .def_property_readonly("names",
                             [](const FeatureBank& b) {
                               std::vector<std::string> out;
                               for (const auto& e : b.extractors()) out.push_back(e.name);
                               return out;
                             })
      .def_property_readonly("dims",
                             [](const FeatureBank& b) {
                               std::vector<std::size_t> out;
                               for (const auto& e : b.extractors()) out.push_back(e.dim);
                               return out;
                             })
      .def_property_readonly("labels",
                             [](const FeatureBank& b) {
                               const auto l = b.labels();
                               return py::array_t<std::uint32_t>(static_cast<py::ssize_t>(l.size()), l.data());
                             })
      .def_property_readonly("label_cardinality", &FeatureBank::label_cardinality)
      .def_property_readonly("classes", &FeatureBank::classes)
      .def("block", &block_array, py::arg("k"), "Raw features of extractor k, shape (n, dim).")
      .def("subset", [](const FeatureBank& b, const std::vector<std::string>& names) { return subset_extractors(b, names); })
      .def("__len__", &FeatureBank::size)
      .def("__eq__", [](const FeatureBank& a, const FeatureBank& b) { return a == b; })
      .def("__repr__", [](const FeatureBank& b) {
        return "<FeatureBank '" + b.dataset_name() + "' n=" + std::to_string(b.size()) +
               " K=" + std::to_string(b.num_extractors()) + ">";
      });

  m.def("load_bank", &load_bank, py::arg("path"), "Load a .surb or .csv bank.");
  m.def("save_bank", &save_bank, py::arg("bank"), py::arg("path"));
  m.def("encode_surb", [](const FeatureBank& b) {
    const auto bytes = encode_surb(b);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("decode_surb", [](py::bytes data, std::string name) {
    const std::string s = data;
    return decode_surb(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), name);
  }, py::arg("data"), py::arg("name") = "");

  m.def("normalize_block", [](const DoubleArray& v) { return normalize_block(to_vector(v)); });
  m.def("cosine_similarity", [](const DoubleArray& a, const DoubleArray& b) {
    return cosine_similarity(to_vector(a), to_vector(b));
  });
  m.def("class_probabilities",
        [](const DoubleArray& cosines, double temperature) { return class_probabilities(to_vector(cosines), temperature); },
        py::arg("cosines"), py::arg("temperature") = 1.0);

  py::class_<Episode>(m, "Episode")
      .def(py::init([](const std::vector<std::pair<std::size_t, std::uint32_t>>& support,
                       const std::vector<std::pair<std::size_t, std::uint32_t>>& query) {
             Episode ep;
             for (auto [i, l] : support) ep.support.push_back({i, l});
             for (auto [i, l] : query) ep.query.push_back({i, l});
             return ep;
           }),
           py::arg("support"), py::arg("query") = std::vector<std::pair<std::size_t, std::uint32_t>>{})
      .def_property_readonly("support",
                             [](const Episode& e) {
                               std::vector<std::pair<std::size_t, std::uint32_t>> out;
                               for (const auto& s : e.support) out.emplace_back(s.index, s.label);
                               return out;
                             })
      .def_property_readonly("query",
                             [](const Episode& e) {
                               std::vector<std::pair<std::size_t, std::uint32_t>> out;
                               for (const auto& s : e.query) out.emplace_back(s.index, s.label);
                               return out;
                             })
      .def_property_readonly("classes", &Episode::classes);

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init([](const std::string& way, const std::string& shots, std::uint32_t queries, std::uint32_t episodes,
                       std::uint64_t seed) {
             SamplerConfig c;
             c.way = CountRange::parse(way);
             c.shots = CountRange::parse(shots);
             c.queries_per_class = queries;
             c.episodes = episodes;
             c.seed = seed;
             c.validate();
             return c;
           }),
           py::arg("way") = "5", py::arg("shots") = "5", py::arg("queries") = 15, py::arg("episodes") = 1000,
           py::arg("seed") = 0)
      .def_property_readonly("way", [](const SamplerConfig& c) { return c.way.to_string(); })
      .def_property_readonly("shots", [](const SamplerConfig& c) { return c.shots.to_string(); })
      .def_readonly("queries", &SamplerConfig::queries_per_class)
      .def_readonly("episodes", &SamplerConfig::episodes)
      .def_readonly("seed", &SamplerConfig::seed);

  py::class_<SelectorConfig>(m, "SelectorConfig")
      .def(py::init([](int iterations, double lr, double rho, double eps, double temperature, double l1) {
             SelectorConfig c{iterations, lr, rho, eps, temperature, l1};
             c.validate();
             return c;
           }),
           py::arg("iterations") = 40, py::arg("learning_rate") = 100.0, py::arg("adadelta_rho") = 0.9,
           py::arg("adadelta_eps") = 1e-6, py::arg("temperature") = 1.0, py::arg("l1_penalty") = 0.0)
      .def_readwrite("iterations", &SelectorConfig::iterations)
      .def_readwrite("learning_rate", &SelectorConfig::learning_rate)
      .def_readwrite("adadelta_rho", &SelectorConfig::adadelta_rho)
      .def_readwrite("adadelta_eps", &SelectorConfig::adadelta_eps)
      .def_readwrite("temperature", &SelectorConfig::temperature)
      .def_readwrite("l1_penalty", &SelectorConfig::l1_penalty);

  m.def("sample_episode", [](const FeatureBank& b, const SamplerConfig& c, std::uint64_t index) {
    return sample_indexed_episode(b, c, index);
  }, py::arg("bank"), py::arg("sampler"), py::arg("index") = 0, "Episode `index` of the sampler's seeded stream.");

  m.def("accuracy", [](const FeatureBank& b, const Episode& e, const DoubleArray& lambda) {
    return accuracy(NormalizedView(b), e, SelectionVector(to_vector(lambda)));
  });
  m.def("predict_queries", [](const FeatureBank& b, const Episode& e, const DoubleArray& lambda) {
    return predict_queries(NormalizedView(b), e, SelectionVector(to_vector(lambda)));
  });
  m.def("support_nll", [](const FeatureBank& b, const Episode& e, const DoubleArray& lambda, double temperature,
                          double l1) {
    return support_nll(NormalizedView(b), e, SelectionVector(to_vector(lambda)), temperature, l1);
  }, py::arg("bank"), py::arg("episode"), py::arg("lambda_"), py::arg("temperature") = 1.0, py::arg("l1_penalty") = 0.0);
  m.def("nll_gradient", [](const FeatureBank& b, const Episode& e, const DoubleArray& alpha, const SelectorConfig& c) {
    return nll_gradient(NormalizedView(b), e, to_vector(alpha), c);
  }, py::arg("bank"), py::arg("episode"), py::arg("alpha"), py::arg("config") = SelectorConfig{},
        "Gradient of the support NLL with respect to the logits alpha (lambda = sigmoid(alpha)).");
  m.def("optimize_selection", [](const FeatureBank& b, const Episode& e, const SelectorConfig& c) {
    const auto r = optimize_selection(NormalizedView(b), e, c);
    py::dict d;
    d["lambda"] = r.lambda.values();
    d["loss_trace"] = r.loss_trace;
    d["converged_loss"] = r.converged_loss;
    return d;
  }, py::arg("bank"), py::arg("episode"), py::arg("config") = SelectorConfig{});

  m.def("make_synthetic_banks",
        [](std::size_t n_domains, std::size_t classes, std::size_t items, std::size_t dim, double signal, double noise,
           std::uint64_t seed, std::size_t generalist_blocks, double generalist_strength) {
          SyntheticSpec s{n_domains, classes, items, dim, signal, noise, seed, generalist_blocks, generalist_strength};
          return make_synthetic_banks(s);
        },
        py::arg("n_domains") = 3, py::arg("classes_per_domain") = 10, py::arg("items_per_class") = 20,
        py::arg("dim") = 16, py::arg("signal_strength") = 1.0, py::arg("noise_sigma") = 0.2, py::arg("seed") = 0,
        py::arg("generalist_blocks") = 0, py::arg("generalist_strength") = 0.5);

  m.def("aggregate_ci", [](const std::vector<double>& acc) {
    const auto i = aggregate_ci(acc);
    return std::make_pair(i.mean, i.ci95);
  }, "(mean, ci95) in percent of per-episode accuracies in [0, 1].");

  m.def("run_method", [](const FeatureBank& b, const std::string& method, const SamplerConfig& sampler,
                         const SelectorConfig& selector, unsigned workers) {
    const MethodSpec spec = MethodSpec::parse(method, selector);
    MethodOutcome outcome;
    {
      py::gil_scoped_release release;
      outcome = run_method(b, spec, sampler, RunOptions{workers});
    }
    return outcome_dict(outcome);
  }, py::arg("bank"), py::arg("method"), py::arg("sampler"), py::arg("selector") = SelectorConfig{},
        py::arg("workers") = 1);
}
