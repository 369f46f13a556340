// spine3d: dataset generation, alignment filtering, training, evaluation and
// reconstruction for the biplanar spine curve pipeline.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spine3d/config.hpp"
#include "spine3d/io.hpp"
#include "spine3d/pipeline.hpp"

using namespace spine3d;

int main(int argc, char** argv) {
  CLI::App app{"spine3d - 3D spine shape from 2D projections"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> threads;
  app.add_option("--config", config_path, "Experiment config file ([section] key = value)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Top-level seed (overrides the config)");
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  app.add_option("--threads", threads, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);

  auto* generate = app.add_subcommand("generate", "Generate phantoms, masks, renders, curves and the manifest");
  auto* align = app.add_subcommand("align", "Perturb and re-align every pair; mark pairs failing the IoU filter");
  auto* train = app.add_subcommand("train", "Train the regressor (plus optional cross-validation and size sweep)");
  auto* eval = app.add_subcommand("eval", "Evaluate the trained model and the mean-curve baseline on the test split");
  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct 3D volumes from predicted or given curves");
  auto* report = app.add_subcommand("report", "Write summary.txt from the evaluation reports");
  auto* show = app.add_subcommand("config", "Print the effective configuration");

  std::vector<std::string> ids;
  std::string curves_file, volume_file;
  reconstruct->add_option("--id", ids, "Sample ids (default: every test sample)");
  reconstruct->add_option("--curves", curves_file, "Reconstruct this curve CSV instead of model predictions")
      ->check(CLI::ExistingFile);
  reconstruct->add_option("--volume", volume_file, "Output volume path for --curves");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (threads) cfg.threads = *threads;
    cfg.validate();

    if (*show) {
      std::cout << format_experiment_config(cfg);
    } else if (*generate) {
      cmd_generate(cfg, &std::cout);
    } else if (*align) {
      cmd_align(cfg, &std::cout);
    } else if (*train) {
      cmd_train(cfg, &std::cout);
    } else if (*eval) {
      cmd_eval(cfg, &std::cout);
    } else if (*reconstruct) {
      if (!curves_file.empty()) {
        if (volume_file.empty()) throw std::invalid_argument("--curves requires --volume");
        reconstruct_curves_file(curves_file, volume_file, cfg.eval.voxel_size_mm);
      } else {
        cmd_reconstruct(cfg, ids, &std::cout);
      }
    } else if (*report) {
      cmd_report(cfg, &std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "spine3d: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
