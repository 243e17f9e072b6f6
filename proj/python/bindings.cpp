#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "facelift/pipeline.hpp"

namespace py = pybind11;
using namespace facelift;

namespace {

Element element_arg(const std::string& name) {
  const auto e = element_from_name(name);
  if (!e) throw std::invalid_argument("unknown element '" + name + "'");
  return *e;
}

py::dict histogram_dict(const Scene& s) {
  const auto h = element_histogram(s);
  py::dict out;
  for (int c = 0; c < kNumElements; ++c) {
    out[py::str(std::string(element_name(static_cast<Element>(c))))] = h.fractions[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(facelift, m) {
  m.doc() = "Synthetic urban scene beautification pipeline";

  py::register_exception<MissingArtifact>(m, "MissingArtifact", PyExc_RuntimeError);
  py::register_exception<FingerprintMismatch>(m, "FingerprintMismatch", PyExc_RuntimeError);
  py::register_exception<InvalidScene>(m, "InvalidScene", PyExc_ValueError);

  m.attr("ELEMENTS") = [] {
    py::list names;
    for (int c = 0; c < kNumElements; ++c) names.append(std::string(element_name(static_cast<Element>(c))));
    return names;
  }();

  py::class_<Scene>(m, "Scene")
      .def(py::init([](std::string id, int width, int height, std::vector<std::uint8_t> labels) {
             Scene s(std::move(id), width, height, std::move(labels));
             s.set_tags(Taxonomy::standard().tag(s));
             return s;
           }),
           py::arg("id"), py::arg("width"), py::arg("height"), py::arg("labels"))
      .def_property_readonly("id", &Scene::id)
      .def_property_readonly("width", &Scene::width)
      .def_property_readonly("height", &Scene::height)
      .def_property_readonly("labels",
                             [](const Scene& s) { return std::vector<std::uint8_t>(s.labels().begin(), s.labels().end()); })
      .def_property_readonly("tags",
                             [](const Scene& s) {
                               std::vector<std::string> out;
                               for (const auto& t : s.tags()) out.push_back(t.name);
                               return out;
                             })
      .def("histogram", &histogram_dict)
      .def("to_json", [](const Scene& s) { return scene_to_json(s).dump(); })
      .def("__eq__", [](const Scene& a, const Scene& b) { return a == b; })
      .def("__repr__", [](const Scene& s) {
        return "<Scene " + s.id() + " " + std::to_string(s.width()) + "x" + std::to_string(s.height()) + ">";
      });

  m.def("generate_corpus",
        [](int count, int width, int height, std::uint64_t seed) {
          return generate_corpus({count, width, height, seed}, Taxonomy::standard());
        },
        py::arg("count"), py::arg("width") = 32, py::arg("height") = 32, py::arg("seed") = 1);
  m.def("complexity", &complexity, "Shannon entropy of the element histogram");
  m.def("sky_bin", py::overload_cast<const Scene&>(&sky_bin));
  m.def("oracle_score",
        [](const Scene& s) { return oracle_score_noise_free(PipelineConfig::defaults().oracle, s); },
        "Noise-free beauty score under the default oracle weights");
  m.def("rotate", &rotate, py::arg("scene"), py::arg("degrees"));
  m.def("translate",
        [](const Scene& s, double meters, std::uint64_t seed) {
          return translate(s, meters, seed, AugmentationConfig{}, Taxonomy::standard());
        },
        py::arg("scene"), py::arg("meters"), py::arg("seed"));
  m.def("explain", [](const Scene& original, const Scene& changed) {
    const auto ex = explain(original, changed);
    py::list deltas;
    for (const auto& d : ex.deltas) deltas.append(py::make_tuple(std::string(element_name(d.element)), d.delta));
    return py::make_tuple(deltas, ex.tags_added, ex.tags_removed);
  });

  m.def("trueskill_update",
        [](double w_mu, double w_sigma, double l_mu, double l_sigma) {
          const TrueSkillConfig cfg;
          const auto [w, l] = update({w_mu, w_sigma, 0}, {l_mu, l_sigma, 0}, cfg);
          return py::make_tuple(py::make_tuple(w.mu, w.sigma), py::make_tuple(l.mu, l.sigma));
        },
        "Winner and loser (mu, sigma) after one win", py::arg("winner_mu") = 25.0,
        py::arg("winner_sigma") = 25.0 / 3.0, py::arg("loser_mu") = 25.0, py::arg("loser_sigma") = 25.0 / 3.0);

  m.def("fit_logistic",
        [](const std::vector<std::array<double, 4>>& x, const std::vector<int>& y, double ridge) {
          RegressionOptions opt;
          opt.ridge = ridge;
          const auto fit = fit_logistic(x, y, opt);
          return py::make_tuple(fit.beta, fit.converged, fit.iterations);
        },
        py::arg("x"), py::arg("y"), py::arg("ridge") = 0.0);
  m.def("divide_by_four", py::overload_cast<double>(&divide_by_four));

  py::class_<FeatureIndex>(m, "FeatureIndex")
      .def(py::init([](const std::vector<std::string>& ids, const std::vector<std::vector<double>>& rows) {
             const std::size_t dim = rows.empty() ? 0 : rows.front().size();
             std::vector<double> flat;
             for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
             return FeatureIndex(dim, ids, std::move(flat));
           }),
           py::arg("ids"), py::arg("features"))
      .def("__len__", &FeatureIndex::size)
      .def("query",
           [](const FeatureIndex& idx, const std::vector<double>& q, std::size_t k) {
             std::vector<std::pair<std::string, double>> out;
             for (const auto& n : idx.query(q, k)) out.emplace_back(n.id, n.distance);
             return out;
           },
           py::arg("features"), py::arg("k") = 1);

  m.def("config_fingerprint",
        [](const std::filesystem::path& path) { return PipelineConfig::load(path).fingerprint(); });
  m.def("default_config", [] { return PipelineConfig::defaults().to_json().dump(1); });
  m.def("run_stage",
        [](const std::string& stage, const std::filesystem::path& config, const std::filesystem::path& workspace,
           std::optional<std::uint64_t> seed, int workers) {
          const auto s = stage_from_name(stage);
          if (!s) throw std::invalid_argument("unknown stage '" + stage + "'");
          auto cfg = PipelineConfig::load(config);
          if (seed) cfg.seed = *seed;
          py::gil_scoped_release release;
          Pipeline(std::move(cfg), workspace, workers).run(*s);
        },
        py::arg("stage"), py::arg("config"), py::arg("workspace"), py::arg("seed") = py::none(),
        py::arg("workers") = 1);
}
