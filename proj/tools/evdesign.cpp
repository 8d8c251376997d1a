#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evdesign/commands.hpp"

namespace {

using namespace evdesign;

void print_error(const char* kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

void emit(const report::Table& table, const std::string& format, const std::string& path) {
  if (path.empty()) {
    report::write(std::cout, table, format);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot open output file '" + path + "'");
  report::write(file, table, format);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven survival trial design under unequal randomization"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<std::string> out;
  std::string curve_path;
  app.add_option("--config", config_path, "Scenario JSON file");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json", "text"}));
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--replicates", replicates, "Monte Carlo replicates")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output file (default: standard output)");

  auto* power = app.add_subcommand("power", "Power of the design under each method");
  auto* bias = app.add_subcommand("bias-grid", "Bias of analytic power against simulation on a grid");
  auto* optimal = app.add_subcommand("optimal-rr", "Power-maximizing allocation ratio");
  optimal->add_option("--curve", curve_path, "Write the power-vs-ratio curve to this file");
  auto* compare = app.add_subcommand("design-compare", "Base design against unequal-allocation variants");
  auto* grid = app.add_subcommand("design-grid", "Edge cases across the HR x CM x d/n grid");
  auto* validate = app.add_subcommand("validate", "Run the invariant suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return cli::config_error;
  }

  try {
    ScenarioConfig config;
    if (!config_path.empty()) {
      config = load_config(config_path);
    } else if (!validate->parsed()) {
      throw ConfigError("--config is required");
    }
    if (format) config.run.format = *format;
    if (seed) config.run.seed = *seed;
    if (replicates) config.run.replicates = *replicates;
    if (out) config.run.out = *out;

    cli::CommandResult result;
    if (power->parsed()) {
      result = cli::cmd_power(config);
    } else if (bias->parsed()) {
      result = cli::cmd_bias_grid(config);
    } else if (optimal->parsed()) {
      result = cli::cmd_optimal_rr(config, !curve_path.empty());
    } else if (compare->parsed()) {
      result = cli::cmd_design_compare(config);
    } else if (grid->parsed()) {
      result = cli::cmd_design_grid(config);
    } else {
      result = cli::cmd_validate(config);
    }

    emit(result.table, config.run.format, config.run.out);
    if (result.curve) emit(*result.curve, config.run.format, curve_path);
    // The design table is also kept in aligned text next to a file output.
    if (compare->parsed() && !config.run.out.empty() && config.run.format != "text") {
      emit(result.table, "text", config.run.out + ".txt");
    }
    return result.exit_code;
  } catch (const ConfigError& e) {
    print_error("config", e.what());
    return cli::config_error;
  } catch (const InvalidArgument& e) {
    print_error("config", e.what());
    return cli::config_error;
  } catch (const Unreachable& e) {
    print_error("infeasible", e.what());
    return cli::infeasible_only;
  } catch (const std::exception& e) {
    print_error("numeric", e.what());
    return cli::numeric_failure;
  }
}
