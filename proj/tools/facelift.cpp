#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "facelift/pipeline.hpp"

namespace {

std::string stage_list() {
  std::string out;
  for (const auto s : facelift::pipeline_order()) out += std::string(facelift::stage_name(s)) + ", ";
  return out + "all";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facelift: synthetic urban scene beautification pipeline"};
  std::string stage_arg;
  std::string config_path;
  std::string workspace = "workspace";
  std::optional<std::uint64_t> seed;
  int workers = 1;
  app.add_option("stage", stage_arg, "Stage to run: " + stage_list())->required();
  app.add_option("--config", config_path, "Pipeline configuration (JSON)")->required();
  app.add_option("--workspace", workspace, "Artifact directory")->capture_default_str();
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 256))->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  const auto stage = facelift::stage_from_name(stage_arg);
  if (!stage) {
    std::cerr << "error: unknown stage '" << stage_arg << "' (expected one of " << stage_list() << ")\n";
    return 1;
  }
  try {
    facelift::tune_allocator();
    auto cfg = facelift::PipelineConfig::load(config_path);
    if (seed) cfg.seed = *seed;
    facelift::Pipeline pipeline(std::move(cfg), workspace, workers);
    pipeline.run(*stage);
  } catch (const facelift::MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const facelift::FingerprintMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
