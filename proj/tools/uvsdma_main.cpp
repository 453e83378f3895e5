#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "uvsdma/errors.hpp"
#include "uvsdma/sim/config.hpp"
#include "uvsdma/sim/experiments.hpp"
#include "uvsdma/sim/report.hpp"
#include "uvsdma/version.hpp"

namespace fs = std::filesystem;
using uvsdma::ConfigError;
using namespace uvsdma::sim;

namespace {

/// File-system trouble while writing results; exits with the config/IO code.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;  // 0 resolves to all hardware threads
  std::string format = "both";
};

bool ends_with(const std::string& text, const std::string& suffix) {
  return text.size() >= suffix.size() &&
         text.compare(text.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Planned output files for one report, honoring the -o form and --format.
///
///   -o missing          every file lands in the current directory as
///                       <name>.json, <name>_metrics.csv, <name>_<table>.csv
///   -o path ending .csv the primary CSV is written to exactly that path and
///                       the remaining files sit next to it with its stem
///   -o path ending .json the report document goes to exactly that path
///   -o anything else    treated as a directory (created if needed)
///
/// --format csv keeps the CSV files, json keeps the JSON documents; a file
/// named explicitly via -o is always written.
std::vector<std::pair<fs::path, std::string>> plan_outputs(const Report& report,
                                                           const RunOptions& options) {
  const bool explicit_csv = !options.out.empty() && ends_with(options.out, ".csv");
  const bool explicit_json = !options.out.empty() && ends_with(options.out, ".json");

  fs::path dir;
  std::string stem;
  if (options.out.empty()) {
    dir = ".";
    stem = report.name;
  } else if (explicit_csv || explicit_json) {
    const fs::path out(options.out);
    dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
    stem = out.stem().string();
  } else {
    dir = options.out;
    stem = report.name;
  }

  const bool want_csv = options.format != "json";
  const bool want_json = options.format != "csv";
  const Table* primary =
      report.primary_table.empty() ? nullptr : find_table(report, report.primary_table);

  std::vector<std::pair<fs::path, std::string>> files;

  const fs::path report_path = explicit_json ? fs::path(options.out) : dir / (stem + ".json");
  if (want_json || explicit_json) files.emplace_back(report_path, report_to_json_string(report));

  if (want_csv || explicit_csv) {
    const bool metrics_primary = primary == nullptr;
    const fs::path metrics_path = explicit_csv && metrics_primary
                                      ? fs::path(options.out)
                                      : dir / (stem + "_metrics.csv");
    files.emplace_back(metrics_path, metrics_to_csv_string(report));
    for (const Table& table : report.tables) {
      const bool is_primary = primary != nullptr && table.name == report.primary_table;
      const fs::path table_path = explicit_csv && is_primary
                                      ? fs::path(options.out)
                                      : dir / (stem + "_" + table.name + ".csv");
      files.emplace_back(table_path, table_to_csv_string(table));
    }
  }

  if (want_json) {
    for (const auto& [suffix, content] : report.artifacts) {
      files.emplace_back(dir / (stem + "_" + suffix), content);
    }
  }
  return files;
}

/// Writes every planned file, removing anything already written on failure.
void write_outputs(const std::vector<std::pair<fs::path, std::string>>& files) {
  std::vector<fs::path> written;
  auto cleanup = [&written] {
    for (const fs::path& path : written) {
      std::error_code ignored;
      fs::remove(path, ignored);
    }
  };
  for (const auto& [path, content] : files) {
    if (!path.parent_path().empty()) {
      std::error_code error;
      fs::create_directories(path.parent_path(), error);
      if (error) {
        cleanup();
        throw IoError("cannot create directory \"" + path.parent_path().string() +
                      "\": " + error.message());
      }
    }
    std::ofstream stream(path, std::ios::binary | std::ios::trunc);
    if (!stream) {
      cleanup();
      throw IoError("cannot open \"" + path.string() + "\" for writing");
    }
    stream.write(content.data(), static_cast<std::streamsize>(content.size()));
    stream.flush();
    if (!stream) {
      cleanup();
      throw IoError("failed while writing \"" + path.string() + "\"");
    }
    written.push_back(path);
  }
}

int run_subcommand(const std::string& kind, const RunOptions& options) {
  ExperimentConfig config = parse_config_file(options.config_path);
  if (config.kind != kind) {
    throw ConfigError(options.config_path + ": config kind \"" + config.kind +
                      "\" does not match the \"" + kind + "\" subcommand");
  }
  if (options.seed_set) override_seed(config, options.seed);

  const Report report = run_experiment(config, options.threads);
  const auto files = plan_outputs(report, options);
  write_outputs(files);

  std::cout << summary_text(report);
  for (const auto& [path, content] : files) {
    std::cout << "wrote " << path.string() << " (" << content.size() << " bytes)\n";
  }
  return 0;
}

int validate_subcommand(const std::string& path) {
  const ExperimentConfig config = parse_config_file(path);
  std::cout << path << ": valid " << config.kind << " config \"" << config.name << "\" (seed "
            << config.seed << ")\n";
  std::cout << config.echo.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and analysis toolkit for sectored photon-counting links"};
  app.set_version_flag("--version", std::string("uvsdma ") + uvsdma::kVersion);
  app.require_subcommand(1);

  const std::vector<std::string> kinds = {"gaussfit", "estimate",  "pilot-search",
                                          "detect2",  "multiuser", "timing"};
  const std::vector<std::string> descriptions = {
      "Compare the weighted sector statistic against its normal surrogate",
      "Estimate per-user gains over schedule patterns and lengths",
      "Rank pilot weight patterns by closed-form estimation error",
      "One-of-two selection: threshold detectors versus exact likelihood",
      "On-off keying against interferers: elimination versus exact likelihood",
      "Wall-clock comparison of the two multiuser decoders"};

  RunOptions options;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    CLI::App* sub = app.add_subcommand(kinds[i], descriptions[i]);
    sub->add_option("-c,--config", options.config_path, "Experiment config file (JSON)")
        ->required();
    sub->add_option("-o,--out", options.out,
                    "Output location: a directory, a .csv path for the primary table, or a "
                    ".json path for the report");
    sub->add_option("--seed", options.seed, "Override the config seed");
    sub->add_option("--threads", options.threads,
                    "Worker threads (0 = all hardware threads)")
        ->check(CLI::Range(0, 4096));
    sub->add_option("--format", options.format, "Which outputs to write")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();
  }
  std::string validate_path;
  CLI::App* validate = app.add_subcommand(
      "validate", "Parse and validate a config without running anything");
  validate->add_option("config", validate_path, "Experiment config file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& error) {
    return app.exit(error);
  } catch (const CLI::CallForVersion& error) {
    return app.exit(error);
  } catch (const CLI::ParseError& error) {
    app.exit(error);
    return 2;
  }

  try {
    if (app.got_subcommand("validate")) return validate_subcommand(validate_path);
    for (const std::string& kind : kinds) {
      if (app.got_subcommand(kind)) {
        CLI::App* sub = app.get_subcommand(kind);
        options.seed_set = sub->count("--seed") > 0;
        return run_subcommand(kind, options);
      }
    }
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const ConfigError& error) {
    std::cerr << "config error: " << error.what() << '\n';
    return 2;
  } catch (const IoError& error) {
    std::cerr << "io error: " << error.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& error) {
    std::cerr << "io error: " << error.what() << '\n';
    return 2;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << '\n';
    return 1;
  }
}
