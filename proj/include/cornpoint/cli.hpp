#pragma once

// CLI command implementations (generate | detect | evaluate | pose-bench),
// shared between the cornpoint binary and the test suites. Exit codes:
// 0 ok, 2 configuration, 3 I/O, 4 malformed data.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cornpoint/harness.hpp"
#include "cornpoint/report.hpp"

namespace cornpoint::cli {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitData = 4;

inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::Config: return kExitConfig;
    case Errc::Io: return kExitIo;
    case Errc::Data: return kExitData;
    default: return 1;
  }
}

inline RunConfig load_config(const std::optional<std::string>& path,
                             std::optional<std::uint64_t> seed_override) {
  RunConfig cfg = default_run_config();
  if (path) {
    std::error_code ec;
    if (!std::filesystem::exists(*path, ec))
      throw Error(Errc::Config, "config file not found: " + *path);
    io::json j = io::load_json_file(*path);
    try {
      cfg = io::run_config_from_json(j);
    } catch (const Error& e) {
      if (e.code() == Errc::Data)  // malformed json in a config is a config error
        throw Error(Errc::Config, e.what());
      throw;
    }
  }
  if (seed_override) cfg.seed = *seed_override;
  cfg.validate();
  return cfg;
}

struct GenerateOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int n_scenes = 1;
};

/// Writes truth JSON plus n_frames mask/depth/meta triplets per scene,
/// deterministically from the seed.
inline int cmd_generate(const GenerateOptions& opt, std::ostream& out = std::cout) {
  try {
    const RunConfig cfg = load_config(opt.config_path, opt.seed);
    if (opt.n_scenes < 1) throw Error(Errc::Config, "--scenes must be >= 1");
    const std::filesystem::path root(opt.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (!std::filesystem::is_directory(root))
      throw Error(Errc::Io, "cannot create output directory: " + opt.out_dir);

    for (int s = 0; s < opt.n_scenes; ++s) {
      char name[32];
      std::snprintf(name, sizeof name, "scene_%03d", s);
      const std::filesystem::path dir = root / name;
      std::filesystem::create_directories(dir, ec);
      const SceneTruth scene = generate_scene(cfg.scene, derive_seed(cfg.seed, s, 1));
      io::write_json_file(dir / "truth.json", io::to_json(scene));
      for (int f = 0; f < cfg.camera.n_frames; ++f) {
        const FrameObservation obs =
            render_frame(scene, cfg.camera.scan_pose(), cfg.camera.intrinsics,
                         cfg.noise, derive_seed(cfg.seed, s, 100 + f));
        char stem[32];
        std::snprintf(stem, sizeof stem, "frame_%03d", f);
        io::save_frame(dir, stem, obs);
      }
      out << dir.string() << ": truth + " << cfg.camera.n_frames << " frames\n";
    }
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "generate: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

struct DetectOptions {
  std::string frames_dir;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
};

inline io::json candidate_to_json(const StalkCandidate& c) {
  return {{"instance", c.instance_id},
          {"insertion_point", io::to_json(c.insertion_point)},
          {"line_point", io::to_json(c.line.point)},
          {"line_direction", io::to_json(c.line.direction)},
          {"inliers", c.inlier_count},
          {"features",
           {{"c", c.features.c}, {"w", c.features.w}, {"h", c.features.h},
            {"d", c.features.d}}},
          {"score", score(c.features)}};
}

/// Runs the detection pipeline over the frame triplets found in a
/// directory (synthetic exports and real recordings use the same formats)
/// and prints per-frame candidates plus the consensus outcome as JSON.
inline int cmd_detect(const DetectOptions& opt, std::ostream& out = std::cout) {
  try {
    const RunConfig cfg = load_config(opt.config_path, opt.seed);
    const auto metas = io::list_frame_metas(opt.frames_dir);
    if (metas.empty())
      throw Error(Errc::Data, "no *_meta.json frames in " + opt.frames_dir);

    std::vector<FrameObservation> frames;
    for (const auto& meta : metas) frames.push_back(io::load_frame(meta));

    Rng rng(derive_seed(cfg.seed, 0, 2));
    const DetectionRun run = run_detection(frames, cfg.detection, cfg.selection,
                                           cfg.workspace, cfg.camera.position, rng);

    io::json jframes = io::json::array();
    for (std::size_t i = 0; i < run.frames.size(); ++i) {
      io::json cands = io::json::array();
      for (const auto& c : run.frames[i].raw) cands.push_back(candidate_to_json(c));
      io::json jf = {{"frame", metas[i].filename().string()},
                     {"candidates", cands},
                     {"best", run.frames[i].best
                                  ? candidate_to_json(*run.frames[i].best)
                                  : io::json(nullptr)}};
      jframes.push_back(std::move(jf));
    }

    io::json result;
    if (const auto* target = std::get_if<InsertionTarget>(&run.outcome)) {
      result = {{"type", "target"},
                {"point", io::to_json(target->point)},
                {"approach_direction", io::to_json(target->approach_direction)},
                {"cluster_size", target->source_cluster_size}};
    } else {
      result = {{"type", "reposition"},
                {"reason",
                 to_string(std::get<RepositionSignal>(run.outcome).reason)}};
    }
    const io::json output = {{"schema_version", io::kSchemaVersion},
                             {"frames", jframes},
                             {"result", result}};
    out << output.dump(2) << "\n";
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "detect: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

struct EvaluateOptions {
  std::optional<std::string> config_path;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path;
};

inline int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out = std::cout) {
  try {
    RunConfig cfg = load_config(opt.config_path, opt.seed);
    if (opt.trials) cfg.trial.n_trials = *opt.trials;
    cfg.validate();
    const EvaluateReport report = evaluate_run(cfg);
    const io::json j = io::to_json(report);
    out << io::funnel_table(report.summary) << j.dump(2) << "\n";
    if (opt.out_path) io::write_json_file(*opt.out_path, j);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "evaluate: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

struct PoseBenchOptions {
  std::optional<std::string> config_path;
  int n_scenes = 100;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path;
};

inline int cmd_pose_bench(const PoseBenchOptions& opt, std::ostream& out = std::cout) {
  try {
    const RunConfig cfg = load_config(opt.config_path, opt.seed);
    const PoseBenchReport report = pose_bench_run(cfg, opt.n_scenes);
    const io::json j = io::to_json(report);
    out << j.dump(2) << "\n";
    if (opt.out_path) io::write_json_file(*opt.out_path, j);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "pose-bench: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace cornpoint::cli
