#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "aurank/error.hpp"
#include "aurank/pipeline.hpp"

namespace fs = std::filesystem;
using aurank::pipeline::RunConfig;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string mode;
  std::string loss_form;
};

RunConfig resolve(const GlobalOptions& g) {
  RunConfig cfg = aurank::pipeline::load_run_config(g.config.empty() ? std::nullopt
                                                                      : std::optional<fs::path>(g.config));
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  if (g.mode == "p1") cfg.mode = aurank::pipeline::Mode::p1;
  if (g.mode == "p2") cfg.mode = aurank::pipeline::Mode::p2;
  if (g.loss_form == "corrected") cfg.loss_form = aurank::LossForm::corrected;
  if (g.loss_form == "literal") cfg.loss_form = aurank::LossForm::literal;
  cfg.validate();
  return cfg;
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise pseudo-intensity AU recognition: train, select, predict and score."};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOptions g;
  app.add_option("--config", g.config, "run configuration (JSON)");
  app.add_option("--seed", g.seed, "run seed (dataset generation, split, training)");
  app.add_option("--jobs", g.jobs, "parallel jobs")->check(CLI::PositiveNumber);
  app.add_option("--mode", g.mode, "p1: uncertainty for every AU, p2: per-AU flags")
      ->check(CLI::IsMember({"p1", "p2"}));
  app.add_option("--loss-form", g.loss_form, "expanded ranking loss form")
      ->check(CLI::IsMember({"corrected", "literal"}));

  auto* generate = app.add_subcommand("generate", "write a synthetic dataset to data_dir");
  auto* train = app.add_subcommand("train", "train all three stages, resuming completed ones");
  auto* trials = app.add_subcommand("trials", "train once per trial seed and pick the best on validation");
  auto* ablate = app.add_subcommand("ablate", "train P1 and P2 on one split and compare");

  std::string input, output;
  auto* predict = app.add_subcommand("predict", "predict per-frame labels with a trained pipeline");
  predict->add_option("--input", input, "dataset directory to predict (default: data_dir)");
  predict->add_option("--output", output, "predictions CSV (default: report_dir/predictions.csv)");

  std::string predictions, truth, name = "evaluation";
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
  evaluate->add_option("--predictions", predictions, "predictions CSV")->required();
  evaluate->add_option("--ground-truth", truth, "annotation CSV")->required();
  evaluate->add_option("--name", name, "report file stem");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(aurank::ExitCode::config);
  }

  try {
    const RunConfig cfg = resolve(g);
    if (generate->parsed()) {
      print(aurank::pipeline::cmd_generate(cfg));
    } else if (train->parsed()) {
      print(aurank::pipeline::cmd_train(cfg));
    } else if (trials->parsed()) {
      const auto report = aurank::pipeline::cmd_trials(cfg);
      std::cout << aurank::util::read_file(fs::path(cfg.report_dir) / "trials.txt");
      std::cout << "best seed " << report.at("best_seed") << '\n';
    } else if (ablate->parsed()) {
      aurank::pipeline::cmd_ablate(cfg);
      std::cout << aurank::util::read_file(fs::path(cfg.report_dir) / "ablation.txt");
    } else if (predict->parsed()) {
      const fs::path in = input.empty() ? fs::path(cfg.data_dir) : fs::path(input);
      const fs::path out = output.empty() ? fs::path(cfg.report_dir) / "predictions.csv" : fs::path(output);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      const auto table = aurank::pipeline::cmd_predict(cfg, in, out);
      std::cout << "wrote " << table.rows.size() << " rows to " << out.string() << '\n';
    } else if (evaluate->parsed()) {
      const auto rep = aurank::pipeline::cmd_evaluate(cfg, predictions, truth, name);
      std::cout << aurank::eval::format_table(rep);
    }
    return 0;
  } catch (const aurank::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(aurank::ExitCode::data);
  }
}
