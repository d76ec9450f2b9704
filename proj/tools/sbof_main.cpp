// sbof: recurrence-plot features and learned forecast combination.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbof/config.hpp"
#include "sbof/pipeline.hpp"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string corpus, test, metadata, work_dir;
  long long seed = -1;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "key = value configuration file");
  cmd->add_option("-s,--set", c.overrides, "override a key, e.g. --set gbm.rounds=50");
  cmd->add_option("--corpus", c.corpus, "training corpus (M4 layout)");
  cmd->add_option("--test", c.test, "held-out tails (M4 layout)");
  cmd->add_option("--metadata", c.metadata, "id,period,horizon[,group] table");
  cmd->add_option("-w,--work-dir", c.work_dir, "output directory");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("-j,--threads", c.threads, "worker threads");
}

sbof::RunConfig resolve(const Common& c) {
  sbof::RunConfig cfg;
  if (!c.config_path.empty()) cfg = sbof::load_config(c.config_path);
  sbof::apply_overrides(cfg, c.overrides);
  if (!c.corpus.empty()) cfg.corpus = c.corpus;
  if (!c.test.empty()) cfg.test = c.test;
  if (!c.metadata.empty()) cfg.metadata = c.metadata;
  if (!c.work_dir.empty()) cfg.work_dir = c.work_dir;
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (c.threads > 0) cfg.threads = c.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrence-plot SIFT/LLC/SPM features and boosted forecast combination"};
  app.require_subcommand(1);

  Common common;
  std::string features;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"featurize", "train the codebook and write train/test feature files"},
      {"forecast", "run the method pool on both splits, merge external forecasts"},
      {"train", "fit the weight model(s) on the inner split"},
      {"evaluate", "combine test forecasts and write the sMAPE/MASE/OWA report"},
      {"plot", "write each series' recurrence plot as a PGM image"},
      {"project", "2-D PCA projection of a feature file"},
      {"print-config", "print every configuration key with its value"},
  };
  for (const auto& [name, help] : commands) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, common);
    if (std::string(name) == "project") {
      cmd->add_option("--features", features, "feature file (default: test features in the work dir)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const sbof::RunConfig cfg = resolve(common);
    nlohmann::json summary;
    if (name == "print-config") {
      sbof::validate_config(cfg, false);
      std::cout << sbof::format_config(cfg);
      return 0;
    } else if (name == "featurize") {
      summary = sbof::cmd_featurize(cfg);
    } else if (name == "forecast") {
      summary = sbof::cmd_forecast(cfg);
    } else if (name == "train") {
      summary = sbof::cmd_train(cfg);
    } else if (name == "evaluate") {
      summary = sbof::cmd_evaluate(cfg);
    } else if (name == "plot") {
      summary = sbof::cmd_plot(cfg);
    } else {
      summary = sbof::cmd_project(cfg, features);
    }
    std::cout << summary.dump(2) << '\n';
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << nlohmann::json{{"status", "error"}, {"command", name}, {"kind", "invalid_argument"},
                                {"message", e.what()}}
                     .dump()
              << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"status", "error"}, {"command", name}, {"kind", "runtime"},
                                {"message", e.what()}}
                     .dump()
              << '\n';
    return 1;
  }
}
