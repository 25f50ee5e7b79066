#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "pidrme/config.hpp"
#include "pidrme/error.hpp"
#include "pidrme/runtime.hpp"

namespace {

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
  std::map<std::string, std::string> values;
};

}  // namespace

int main(int argc, char** argv) {
  pidrme::tune_allocator();
  CLI::App app{"Physics-informed federated radio map estimation on synthetic scenes"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands{
      {"run", "train and evaluate every requested mode; writes metrics, summary and heatmaps"},
      {"fit-ldpl", "fit the log-distance pathloss model to one sampled scene and print the parameters"},
      {"gradcheck", "finite-difference check of every layer, both autoencoders and the losses"},
      {"render", "render one synthetic scene to a heatmap"},
  };
  std::map<std::string, Command> parsed;
  for (const auto& [name, help] : commands) {
    Command& cmd = parsed[name];
    cmd.app = app.add_subcommand(name, help);
    cmd.app->add_option("-c,--config", cmd.config_file, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : pidrme::config_keys()) {
      cmd.app->add_option(flag_name(key.name), cmd.values[key.name], key.help + " [default: " + key.default_value + "]");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (auto& [name, cmd] : parsed) {
    if (!cmd.app->parsed()) continue;
    try {
      pidrme::KeyValues file;
      if (!cmd.config_file.empty()) file = pidrme::read_config_file(cmd.config_file);
      pidrme::KeyValues flags;
      for (const auto& key : pidrme::config_keys()) {
        if (cmd.app->count(flag_name(key.name)) > 0) flags.emplace_back(key.name, cmd.values[key.name]);
      }
      const pidrme::ExperimentConfig config = pidrme::parse_config(file, flags);
      return pidrme::dispatch(name, config, std::cout, std::cerr);
    } catch (const pidrme::ValidationError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 1;
}
