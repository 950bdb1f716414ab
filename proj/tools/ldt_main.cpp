#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ldt/errors.hpp"
#include "ldt/io/pipeline.hpp"
#include "ldt/io/run_config.hpp"

namespace {

struct CommonArgs {
  std::string config_file;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void attach_common(CLI::App* cmd, CommonArgs& args, bool need_config) {
  auto* c = cmd->add_option("--config,-c", args.config_file, "run configuration JSON");
  if (need_config) c->required();
  cmd->add_option("--out,-o", args.out_dir, "artifact directory");
  cmd->add_option("--seed", args.seed, "override the configured RNG seed");
  cmd->add_option("--threads", args.threads, "override the configured thread count");
}

ldt::io::PipelineOptions make_options(const CommonArgs& args) {
  ldt::io::PipelineOptions opt;
  opt.out_dir = args.out_dir;
  opt.seed = args.seed;
  opt.threads = args.threads;
  return opt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sharp tail estimates for additive-noise SDEs"};
  app.require_subcommand(1);

  CommonArgs stage_args;
  std::string requested_stage;
  for (const std::string& stage : ldt::io::pipeline_stages()) {
    CLI::App* cmd = app.add_subcommand(stage, "run the " + stage + " stage");
    attach_common(cmd, stage_args, true);
    cmd->callback([&requested_stage, stage]() { requested_stage = stage; });
  }

  CommonArgs pipeline_args;
  CLI::App* pipeline_cmd = app.add_subcommand("pipeline", "run all enabled stages");
  attach_common(pipeline_cmd, pipeline_args, true);

  CommonArgs export_args;
  std::string export_which;
  CLI::App* export_cmd = app.add_subcommand("export", "write plot-ready CSV from artifacts");
  attach_common(export_cmd, export_args, false);
  export_cmd
      ->add_option("--data", export_which,
                   "eigen_decay | det_convergence | tail_vs_z | tube_slices | rate_sweep")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!requested_stage.empty()) {
      const ldt::io::RunConfig cfg = ldt::io::RunConfig::load(stage_args.config_file);
      ldt::io::run_stage(cfg, make_options(stage_args), requested_stage);
      std::cout << "stage " << requested_stage << " done, artifacts in " << stage_args.out_dir
                << "\n";
    } else if (pipeline_cmd->parsed()) {
      const ldt::io::RunConfig cfg = ldt::io::RunConfig::load(pipeline_args.config_file);
      ldt::io::run_pipeline(cfg, make_options(pipeline_args));
      std::cout << "pipeline done, artifacts in " << pipeline_args.out_dir << "\n";
    } else if (export_cmd->parsed()) {
      ldt::io::export_plot_data(export_args.out_dir, export_which);
      std::cout << "wrote " << export_which << ".csv to " << export_args.out_dir << "\n";
    }
  } catch (const ldt::config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const ldt::dimension_error& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return 2;
  } catch (const ldt::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const ldt::assumption_error& e) {
    std::cerr << "assumption violated: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
