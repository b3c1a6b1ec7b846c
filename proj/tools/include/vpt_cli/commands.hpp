#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "vpt/training.hpp"
#include "vpt_cli/config.hpp"

namespace vpt::cli {

// Resolved settings come first in every command's output, so a run can be
// repeated with `vpt <command> --config <out>/config.txt`.
inline constexpr const char* kConfigFileName = "config.txt";
inline constexpr const char* kMetricsFileName = "metrics.jsonl";
inline constexpr const char* kSummaryFileName = "summary.json";
inline constexpr const char* kCheckpointFileName = "checkpoint.vpts";
inline constexpr const char* kLossSvgFileName = "loss.svg";

// Used for `out` when it is not given.
inline constexpr const char* kRunsDirEnv = "VPT_RUNS_DIR";

struct CommandSpec
{
  std::string name;
  std::string description;
  std::vector<ConfigKey> schema;
  // Returns the process exit code; failures throw vpt::Error.
  std::function<int(RunConfig&, std::ostream& out, std::ostream& err)> run;
};

const std::vector<CommandSpec>& commands();
const CommandSpec& find_command(const std::string& name);

int cmd_segment(RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_encode(RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_pretrain(RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_finetune(RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_eval(RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_ablate(RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_inspect(RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_synth(RunConfig& config, std::ostream& out, std::ostream& err);

// Full command line entry point (argv without the program name). Errors
// are printed to `err` and turned into a nonzero return value.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Line chart of loss against step.
std::string render_loss_svg(const std::vector<StepMetrics>& metrics, const std::string& title);

// A run directory is built under "<final>.partial" and renamed into place
// by commit(). Without commit the staging directory is left for
// inspection and the final path is untouched.
class RunDirectory
{
public:
  explicit RunDirectory(std::filesystem::path final_path);

  std::filesystem::path operator/(const std::string& name) const { return m_staging / name; }
  const std::filesystem::path& staging() const noexcept { return m_staging; }
  const std::filesystem::path& final_path() const noexcept { return m_final; }
  void commit();

private:
  std::filesystem::path m_final;
  std::filesystem::path m_staging;
};

} // namespace vpt::cli
