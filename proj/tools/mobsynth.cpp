#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mobsynth/errors.hpp"
#include "mobsynth/io.hpp"
#include "mobsynth/pipeline.hpp"

namespace {

namespace pl = mobsynth::pipeline;
using nlohmann::json;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::string records;
  std::string area_map;
  std::string plot_source;
  std::vector<std::size_t> plot_selection;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_file, "JSON config file");
  cmd->add_option("-s,--set", o.overrides, "Override a config value, e.g. train.epochs=5");
  cmd->add_option("-o,--output-dir", o.output_dir, "Artifact directory");
  cmd->add_option("--records", o.records, "External LBS record CSV");
  cmd->add_option("--area-map", o.area_map, "External area map JSON");
}

pl::PipelineConfig resolve_config(const CommonOptions& o) {
  json j = json::object();
  if (!o.config_file.empty()) {
    j = json::parse(mobsynth::io::read_file(o.config_file), nullptr, false);
    if (j.is_discarded()) throw mobsynth::ConfigError("config file is not valid JSON: " + o.config_file);
  }
  for (const auto& s : o.overrides) pl::apply_override(j, s);
  if (!o.output_dir.empty()) j["output_dir"] = o.output_dir;
  if (!o.records.empty()) j["records"] = o.records;
  if (!o.area_map.empty()) j["area_map"] = o.area_map;
  if (!o.plot_source.empty()) j["plots"]["source"] = o.plot_source;
  if (!o.plot_selection.empty()) j["plots"]["selection"] = o.plot_selection;
  return pl::PipelineConfig::from_json(j);
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const mobsynth::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const mobsynth::FormatError*>(&e)) return "format";
  if (dynamic_cast<const mobsynth::VocabularyError*>(&e)) return "vocabulary";
  if (dynamic_cast<const mobsynth::DomainError*>(&e)) return "domain";
  if (dynamic_cast<const mobsynth::TrainingError*>(&e)) return "training";
  if (dynamic_cast<const mobsynth::MetricError*>(&e)) return "metric";
  return "runtime";
}

std::string one_line(std::string s) {
  for (auto& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("mobsynth");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("MOBSYNTH_LOG")) spdlog::set_level(spdlog::level::from_str(level));

  CLI::App app{"Synthetic mobility trajectories: simulate, ingest, train, generate, evaluate"};
  app.require_subcommand(1);
  bool print_defaults = false;
  app.add_flag("--print-default-config", print_defaults, "Print the default JSON config and exit");

  CommonOptions opts;
  std::vector<std::pair<std::string, CLI::App*>> commands;
  const std::vector<std::pair<std::string, std::string>> specs{
      {"simulate", "Generate a synthetic ground-truth world"},
      {"ingest", "Parse LBS records and build the study panel(s)"},
      {"build", "Tokenize stay trajectories, infer labels, draw the real sample"},
      {"train", "Train the sequence model"},
      {"generate", "Generate the synthetic and resampled trajectory sets"},
      {"eval-utility", "Utility metrics against the real data"},
      {"eval-privacy", "Minimum-distance privacy metrics"},
      {"export-plots", "Per-trajectory plot data"},
      {"pipeline", "Run every stage in order"},
  };
  for (const auto& [name, help] : specs) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, opts);
    if (name == "export-plots") {
      cmd->add_option("--source", opts.plot_source, "Trajectory CSV inside the output directory");
      cmd->add_option("--select", opts.plot_selection, "Row indices to export")->delimiter(',');
    }
    commands.emplace_back(name, cmd);
  }
  app.allow_extras(false);

  try {
    if (argc >= 2 && std::string(argv[1]) == "--print-default-config") {
      std::cout << pl::PipelineConfig::defaults().to_json().dump(2) << "\n";
      return 0;
    }
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << "\n" << app.help();
    return 2;
  }

  try {
    const auto config = resolve_config(opts);
    for (const auto& [name, cmd] : commands) {
      if (!cmd->parsed()) continue;
      if (name == "pipeline") {
        pl::run_pipeline(config);
      } else {
        pl::run_stage(*pl::parse_stage(name), config);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << error_kind(e) << ": " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
