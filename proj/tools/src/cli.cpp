#include <algorithm>
#include <map>
#include <ostream>

#include <CLI11.hpp>

#include "vpt/errors.hpp"
#include "vpt_cli/commands.hpp"

namespace vpt::cli {

namespace {

std::string
dashed(std::string s)
{
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

bool
is_boolean(const ConfigKey& k)
{
  return k.default_value == "true" || k.default_value == "false";
}

} // namespace

int
run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"vpt: video pretraining toolkit", "vpt"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  struct Bound
  {
    const CommandSpec* spec;
    CLI::App* sub;
    std::string config_file;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<Bound> bound;
  bound.reserve(commands().size());
  for (const auto& spec : commands()) {
    auto& b = bound.emplace_back();
    b.spec = &spec;
    b.sub = app.add_subcommand(spec.name, spec.description);
    b.sub->add_option("--config", b.config_file, "settings file of key = value lines; flags win");
    for (const auto& key : spec.schema) {
      std::string names = "--" + dashed(key.name);
      if (key.name != dashed(key.name)) {
        names += ",--" + key.name;
      }
      std::string help = key.help;
      if (!key.default_value.empty()) {
        help += " [" + key.default_value + "]";
      }
      auto* opt = b.sub->add_option(names)->description(help)->multi_option_policy(
        CLI::MultiOptionPolicy::TakeLast);
      if (is_boolean(key)) {
        opt->expected(0, 1);
      }
      b.options[key.name] = opt;
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  for (const auto& b : bound) {
    if (!b.sub->parsed()) {
      continue;
    }
    try {
      RunConfig config(b.spec->name, b.spec->schema);
      if (!b.config_file.empty()) {
        config.merge_file(b.config_file);
      }
      for (const auto& key : b.spec->schema) {
        const auto* opt = b.options.at(key.name);
        if (opt->count() == 0) {
          continue;
        }
        const auto& results = opt->results();
        std::string value = results.empty() ? "" : results.back();
        if (value.empty() && is_boolean(key)) {
          value = "true";
        }
        config.set(key.name, value);
      }
      return b.spec->run(config, out, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}

} // namespace vpt::cli
