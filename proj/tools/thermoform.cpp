// thermoform: batch front end for pressure, Gibbs, beta and dimension runs.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "thermo/errors.hpp"
#include "thermo/run.hpp"

namespace {

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw thermo::ConfigError("cannot read config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw thermo::ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

void write(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw thermo::ConfigError("cannot write report " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermodynamic formalism experiments for GDMS and beta-map systems", "thermoform"};
  app.set_version_flag("--version", thermo::kVersion);
  app.require_subcommand(1);

  std::string config_path, output = "-";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool stable = false;
  std::string cloud;
  std::string beta_value;
  std::size_t beta_depth = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed (overrides the config)");
    sub->add_option("--threads", threads, "worker cap (0: all cores)");
    sub->add_flag("--stable", stable, "omit wall time for byte-stable reports");
    sub->add_option("-o,--output", output, "report path (- for stdout)");
  };
  CLI::App* pressure = app.add_subcommand("pressure", "pressure and summability of a potential");
  CLI::App* gibbs = app.add_subcommand("gibbs", "eigendata, Gibbs chain and audit");
  CLI::App* beta = app.add_subcommand("beta", "expansion of 1, GLS partition, identity checks");
  CLI::App* dimension = app.add_subcommand("dimension", "Lyapunov exponents, entropy, dimensions, temperature");
  for (CLI::App* s : {pressure, gibbs, beta, dimension}) common(s);
  beta->add_option("--beta", beta_value, "beta (phi, pi, e or a decimal), instead of --config");
  beta->add_option("--depth", beta_depth, "digits of 1 to compute");
  dimension->add_option("--emit-cloud", cloud, "write the (x, y) point cloud as CSV");

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  thermo::RunOptions options;
  if (sub->count("--seed")) options.seed = seed;
  options.threads = threads;
  options.stable = stable;
  if (!cloud.empty()) options.emit_cloud = cloud;

  try {
    nlohmann::json config = nlohmann::json::object();
    if (!config_path.empty()) {
      config = load_config(config_path);
    } else if (command != "beta" || beta_value.empty()) {
      throw thermo::ConfigError("--config is required");
    }
    if (command == "beta") {
      if (!beta_value.empty()) config["beta"] = beta_value;
      if (sub->count("--depth")) config["depth"] = beta_depth;
    }
    write(output, thermo::dump_report(thermo::run_command(command, config, options)));
    return 0;
  } catch (const std::exception& e) {
    const int code = thermo::exit_code(e);
    std::cerr << "thermoform " << command << ": " << e.what() << "\n";
    if (!output.empty() && output != "-") {
      nlohmann::json failure = {{"command", command}, {"version", thermo::kVersion}, {"error", e.what()}, {"exit_code", code}};
      try {
        write(output, thermo::dump_report(failure));
      } catch (...) {
      }
    }
    return code;
  }
}
