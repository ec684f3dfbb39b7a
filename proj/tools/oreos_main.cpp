// oreos: command-line front end for the localization pipeline.

#include "oreos/evaluation.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::string scan;
  int k = 1;
};

oreos::RunConfig resolve_config(const Options& o) {
  oreos::KeyValueFile kv;
  if (!o.config_path.empty()) kv = oreos::KeyValueFile::load(o.config_path);
  for (const std::string& s : o.overrides) kv.set_assignment(s);
  oreos::RunConfig config = oreos::RunConfig::from_keyvalue(kv);
  if (o.seed) config.seed = *o.seed;
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OREOS-style LiDAR global localization toolkit"};
  app.set_version_flag("--version", std::string(OREOS_VERSION));
  app.require_subcommand(1);

  Options o;
  app.add_option("--config", o.config_path, "key = value run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "random seed (overrides the config)");
  app.add_option("--out", o.out_dir, "output directory (default: out)");
  app.add_option("--set", o.overrides, "override a config key, e.g. --set train.epochs=4")->take_all();

  CLI::App* generate = app.add_subcommand("generate", "synthesize the training and evaluation datasets");
  CLI::App* train = app.add_subcommand("train", "train the descriptor network");
  CLI::App* build_map = app.add_subcommand("build-map", "extract descriptors for the map places");
  CLI::App* localize = app.add_subcommand("localize", "localize one scan against the map");
  localize->add_option("--scan", o.scan, "query scan (float32 x, y, z, intensity)")->required();
  localize->add_option("-k", o.k, "number of candidates to retrieve")->check(CLI::PositiveNumber);
  CLI::App* eval = app.add_subcommand("eval", "run the rotation-shift evaluation and write CSV reports");
  for (CLI::App* sub : {generate, train, build_map, localize, eval}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    const oreos::RunConfig config = resolve_config(o);
    std::ostream* log = &std::cout;
    if (*generate) {
      oreos::cmd_generate(config, log);
    } else if (*train) {
      const oreos::TrainResult r = oreos::cmd_train(config, log);
      std::cout << "checkpoint " << r.final_checkpoint.string() << '\n';
    } else if (*build_map) {
      oreos::cmd_build_map(config, log);
    } else if (*localize) {
      oreos::cmd_localize(config, o.scan, o.k, log);
    } else if (*eval) {
      oreos::cmd_eval(config, log);
    }
  } catch (const oreos::TrainingDiverged& e) {
    std::cerr << "oreos: " << e.what();
    if (!e.checkpoint().empty()) std::cerr << "; last good checkpoint " << e.checkpoint().string();
    std::cerr << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "oreos: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
