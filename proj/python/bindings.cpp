#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "mobsynth/checkpoint.hpp"
#include "mobsynth/errors.hpp"
#include "mobsynth/geo.hpp"
#include "mobsynth/gradcheck.hpp"
#include "mobsynth/pipeline.hpp"
#include "mobsynth/privacy.hpp"
#include "mobsynth/runtime.hpp"
#include "mobsynth/stats.hpp"
#include "mobsynth/utility.hpp"

namespace py = pybind11;
using namespace mobsynth;
using nlohmann::json;

namespace {

// Configs cross the boundary as JSON text; the python side wraps them in dicts.
pipeline::PipelineConfig config_from(const std::string& text) {
  auto c = pipeline::PipelineConfig::from_json(json::parse(text));
  c.validate();
  return c;
}

Sample unlabeled(const std::vector<std::vector<Token>>& seqs) {
  Sample s;
  s.reserve(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) s.push_back({{"q" + std::to_string(i), seqs[i]}, {1, 1}});
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Synthetic stay-trajectory pipeline";
  m.attr("__version__") = pipeline::kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<VocabularyError>(m, "VocabularyError", PyExc_KeyError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception<MetricError>(m, "MetricError", PyExc_RuntimeError);

  m.def("default_config", [] { return pipeline::PipelineConfig::defaults().to_json().dump(); });
  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& config) {
        const auto s = pipeline::parse_stage(stage);
        if (!s) throw ConfigError("unknown stage " + stage);
        const auto c = config_from(config);
        py::gil_scoped_release release;
        return pipeline::run_stage(*s, c).dump();
      },
      py::arg("stage"), py::arg("config"));
  m.def(
      "run_pipeline",
      [](const std::string& config) {
        const auto c = config_from(config);
        py::gil_scoped_release release;
        return pipeline::run_pipeline(c).dump();
      },
      py::arg("config"));

  m.def(
      "edit_distance",
      [](const std::vector<Token>& a, const std::vector<Token>& b, std::optional<int> cutoff) {
        return privacy::edit_distance(a, b, cutoff);
      },
      py::arg("a"), py::arg("b"), py::arg("cutoff") = py::none());
  m.def(
      "min_dist",
      [](const std::vector<std::vector<Token>>& queries, const std::vector<std::vector<Token>>& corpus, bool naive,
         unsigned threads) {
        privacy::MinDistOptions o;
        o.naive = naive;
        o.threads = threads;
        py::gil_scoped_release release;
        return privacy::min_dist_distribution(unlabeled(queries), unlabeled(corpus),
                                              privacy::MinDistMode::kResampleVsSynthetic, o)
            .unsorted_values;
      },
      py::arg("queries"), py::arg("corpus"), py::arg("naive") = false, py::arg("threads") = 0);
  m.def(
      "delta_cutoff",
      [](std::vector<int> values, double delta) {
        std::sort(values.begin(), values.end());
        return privacy::delta_cutoff(values, delta);
      },
      py::arg("values"), py::arg("delta"));

  m.def(
      "kl_divergence",
      [](const std::vector<double>& p, const std::vector<double>& q, double smoothing) {
        return utility::kl_divergence(p, q, smoothing);
      },
      py::arg("p"), py::arg("q"), py::arg("smoothing") = 1e-9);
  m.def("chi_squared_sf", &stats::chi_squared_sf, py::arg("statistic"), py::arg("df"));
  m.def(
      "haversine_km",
      [](double lat1, double lon1, double lat2, double lon2) { return haversine_km({lat1, lon1}, {lat2, lon2}); },
      py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"));

  m.def(
      "gradient_check",
      [](const std::string& model_config, bool train_mode) {
        nn::GradCheckOptions o;
        if (train_mode) o.mode = nn::Mode::kTrain;
        std::vector<std::pair<std::string, double>> out;
        for (const auto& b : nn::gradient_check(nn::ModelConfig::from_json(json::parse(model_config)), o).blocks)
          out.emplace_back(b.name, b.max_relative_error);
        return out;
      },
      py::arg("model_config"), py::arg("train_mode") = false);
  m.def(
      "train",
      [](const std::vector<std::vector<Token>>& sequences, const std::string& model_config, int epochs,
         int batch_size, double learning_rate, std::uint64_t seed, const std::filesystem::path& checkpoint) {
        TrainConfig t;
        t.epochs = epochs;
        t.batch_size = batch_size;
        t.learning_rate = learning_rate;
        t.seed = seed;
        const auto mc = nn::ModelConfig::from_json(json::parse(model_config));
        py::gil_scoped_release release;
        const auto ck = train(sequences, mc, t);
        nn::save_checkpoint(ck, checkpoint);
        return ck.meta.final_loss;
      },
      py::arg("sequences"), py::arg("model_config"), py::arg("epochs"), py::arg("batch_size") = 128,
      py::arg("learning_rate") = 1e-3, py::arg("seed") = 0, py::arg("checkpoint"));
  m.def(
      "generate",
      [](const std::filesystem::path& checkpoint, const std::vector<std::pair<Token, Token>>& labels,
         double temperature, std::uint64_t seed, int length) {
        const auto ck = nn::load_checkpoint(checkpoint);
        GenerationRequest r;
        for (const auto& [h, w] : labels) r.labels.push_back({h, w});
        r.temperature = temperature;
        r.seed = seed;
        std::vector<std::vector<Token>> out;
        py::gil_scoped_release release;
        for (auto& t : generate_sample(ck, r, length)) out.push_back(std::move(t.trajectory.tokens));
        return out;
      },
      py::arg("checkpoint"), py::arg("labels"), py::arg("temperature") = 1.0, py::arg("seed") = 0,
      py::arg("length") = 0);
}
