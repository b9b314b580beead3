// specaus: simulate | preprocess | fit | analyze

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "specaus/specaus.hpp"

namespace {

using specaus::AnalysisConfig;

AnalysisConfig with_model_file(AnalysisConfig cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw specaus::IoError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw specaus::ValidationError("model file is not valid JSON: " + std::string(e.what()));
  }
  cfg.model = specaus::detail::parse_model(cfg.graph, cfg.contemp, j.contains("model") ? j.at("model") : j);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain causal effects in structural VAR processes"};
  app.require_subcommand(1);

  std::string config, input, output, model_file;
  std::uint64_t seed = 0;
  std::size_t length = 500, burn_in = 1000;
  std::optional<double> alpha;
  std::optional<std::size_t> grid;

  auto* sim = app.add_subcommand("simulate", "simulate the configured model to CSV");
  sim->add_option("--config", config, "analysis config (JSON)")->required();
  sim->add_option("--model", model_file, "model file overriding the config's model section");
  sim->add_option("--output", output, "output CSV")->required();
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--length", length, "series length T (T + q rows are written)");
  sim->add_option("--burn-in", burn_in, "discarded warm-up steps");

  auto* pre = app.add_subcommand("preprocess", "seasonal averaging, standardisation and differencing");
  pre->add_option("--config", config)->required();
  pre->add_option("--input", input)->required();
  pre->add_option("--output", output)->required();

  auto* fit = app.add_subcommand("fit", "least squares fit of the lag map");
  fit->add_option("--config", config)->required();
  fit->add_option("--input", input)->required();
  fit->add_option("--output", output)->required();

  auto* an = app.add_subcommand("analyze", "estimates, confidence intervals and tests for every query");
  an->add_option("--config", config)->required();
  an->add_option("--input", input)->required();
  an->add_option("--output", output, "output JSON; a .csv sibling is written too")->required();
  an->add_option("--alpha", alpha, "confidence level, overrides the config");
  an->add_option("--grid", grid, "number of evenly spaced angles, overrides the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(specaus::ExitCode::kValidation);
  }

  try {
    AnalysisConfig cfg = specaus::load_config(config);
    nlohmann::json summary;
    if (*sim) {
      if (!model_file.empty()) cfg = with_model_file(std::move(cfg), model_file);
      summary = specaus::cmd_simulate(cfg, {length, burn_in, seed}, output);
    } else if (*pre) {
      summary = specaus::cmd_preprocess(input, cfg, output);
    } else if (*fit) {
      const auto j = specaus::cmd_fit(input, cfg, output);
      summary = {{"T", j.at("T")}, {"stability", j.at("stability")}};
    } else if (*an) {
      const auto j = specaus::cmd_analyze(input, cfg, output, {alpha, grid});
      std::size_t failed = 0;
      for (const auto& rec : j.at("records"))
        for (const auto& row : rec.at("rows"))
          if (row.contains("error")) ++failed;
      summary = {{"records", j.at("records").size()}, {"failed_rows", failed}};
    }
    std::cout << summary.dump() << '\n';
    return 0;
  } catch (const specaus::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(specaus::ExitCode::kIo);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(specaus::ExitCode::kValidation);
  }
}
