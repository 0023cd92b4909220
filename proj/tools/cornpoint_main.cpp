// cornpoint command line: synthetic dataset generation, stalk detection on
// frame directories, Monte Carlo insertion evaluation and the pose
// accuracy benchmark.

#include <CLI11.hpp>

#include "cornpoint/cli.hpp"

int main(int argc, char** argv) {
  using namespace cornpoint;

  CLI::App app{"cornstalk sensor-insertion simulator"};
  app.require_subcommand(1);

  cli::GenerateOptions gen;
  std::uint64_t seed_value = 0;
  auto* generate = app.add_subcommand("generate", "write synthetic scenes and frames");
  generate->add_option("--config", gen.config_path, "run configuration JSON")
      ->required();
  auto* gen_seed = generate->add_option("--seed", seed_value, "master seed override");
  generate->add_option("--out", gen.out_dir, "output directory")->required();
  generate->add_option("--scenes", gen.n_scenes, "number of scenes")
      ->default_val(1);

  cli::DetectOptions det;
  std::string det_config;
  auto* detect = app.add_subcommand("detect", "run detection on a frame directory");
  detect->add_option("--frames", det.frames_dir, "directory of frame triplets")
      ->required();
  auto* det_cfg_opt = detect->add_option("--config", det_config, "run configuration JSON");
  auto* det_seed = detect->add_option("--seed", seed_value, "master seed override");

  cli::EvaluateOptions eval;
  std::string eval_config, eval_out;
  int eval_trials = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo insertion trials");
  auto* eval_cfg_opt = evaluate->add_option("--config", eval_config, "run configuration JSON");
  auto* eval_trials_opt = evaluate->add_option("--trials", eval_trials, "trial count");
  auto* eval_seed = evaluate->add_option("--seed", seed_value, "master seed override");
  auto* eval_out_opt = evaluate->add_option("--out", eval_out, "report JSON path");

  cli::PoseBenchOptions bench;
  std::string bench_config, bench_out;
  auto* pose_bench = app.add_subcommand("pose-bench", "pose accuracy benchmark");
  auto* bench_cfg_opt =
      pose_bench->add_option("--config", bench_config, "run configuration JSON");
  pose_bench->add_option("--scenes", bench.n_scenes, "scene count")->default_val(100);
  auto* bench_seed = pose_bench->add_option("--seed", seed_value, "master seed override");
  auto* bench_out_opt = pose_bench->add_option("--out", bench_out, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return cli::kExitConfig;
  }

  if (generate->parsed()) {
    if (gen_seed->count()) gen.seed = seed_value;
    return cli::cmd_generate(gen);
  }
  if (detect->parsed()) {
    if (det_cfg_opt->count()) det.config_path = det_config;
    if (det_seed->count()) det.seed = seed_value;
    return cli::cmd_detect(det);
  }
  if (evaluate->parsed()) {
    if (eval_cfg_opt->count()) eval.config_path = eval_config;
    if (eval_trials_opt->count()) eval.trials = eval_trials;
    if (eval_seed->count()) eval.seed = seed_value;
    if (eval_out_opt->count()) eval.out_path = eval_out;
    return cli::cmd_evaluate(eval);
  }
  if (pose_bench->parsed()) {
    if (bench_cfg_opt->count()) bench.config_path = bench_config;
    if (bench_seed->count()) bench.seed = seed_value;
    if (bench_out_opt->count()) bench.out_path = bench_out;
    return cli::cmd_pose_bench(bench);
  }
  return cli::kExitConfig;
}
