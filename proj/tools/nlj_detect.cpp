// Command-line front end: runs experiment presets or JSON configs and emits
// result tables (CSV or JSON). Exit codes: 0 success, 2 configuration
// error, 3 numeric failure.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nlj/config_io.hpp"
#include "nlj/experiment.hpp"
#include "nlj/parallel.hpp"
#include "nlj/presets.hpp"
#include "nlj/result_table.hpp"

namespace {

struct CommonArgs {
  std::string target;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double trials_scale = 1.0;
  std::string out;
  std::string format;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("target", args.target,
                  "preset name (e.g. fig4, fig6-desk) or JSON config path")
      ->required();
  cmd->add_option("--seed", args.seed, "master seed")
      ->each([&](const std::string&) { args.seed_set = true; });
  cmd->add_option("--trials-scale", args.trials_scale,
                  "scale factor applied to all trial counts");
  cmd->add_option("--out", args.out, "output path (default from config)");
  cmd->add_option("--format", args.format, "output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--threads", args.threads,
                  "worker threads (default: NLJ_THREADS or hardware)");
}

int execute(const CommonArgs& args, bool calibrate_only) {
  nlj::ExperimentSpec spec = nlj::resolve_spec(args.target);
  if (args.seed_set) spec.seed = args.seed;
  if (args.trials_scale != 1.0) spec.scale_trials(args.trials_scale);
  if (!args.out.empty()) spec.output_path = args.out;
  if (!args.format.empty()) spec.format = nlj::format_from_string(args.format);
  if (args.threads > 0) nlj::set_thread_count(args.threads);
  spec.validate();

  const nlj::ResultTable table =
      calibrate_only ? nlj::run_calibration(spec) : nlj::run_experiment(spec);
  nlj::emit_results(table, spec.output_path, spec.format);
  std::cout << "wrote " << table.size() << " rows to " << spec.output_path
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noise-like jammer detection experiments"};
  app.require_subcommand(1);

  CommonArgs run_args;
  CLI::App* run_cmd =
      app.add_subcommand("run", "run an experiment and write its table");
  add_common(run_cmd, run_args);

  CommonArgs cal_args;
  CLI::App* cal_cmd = app.add_subcommand(
      "calibrate", "compute detection / ghost thresholds only");
  add_common(cal_cmd, cal_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return execute(run_args, false);
    return execute(cal_args, true);
  } catch (const nlj::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const nlj::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 3;
  }
}
