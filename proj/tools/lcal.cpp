#include <csignal>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <lcal/pipeline/config.hpp>
#include <lcal/pipeline/server.hpp>
#include <lcal/pipeline/stages.hpp>
#include <lcal/synthetic/fixture.hpp>

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> voxel_size;
  std::optional<int> max_points_per_voxel;
  std::optional<std::string> deskew;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "pipeline config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--out", flags.out, "override the output directory");
  cmd->add_option("--voxel-size", flags.voxel_size, "iVox voxel size [m] for dynamic integration");
  cmd->add_option("--max-points-per-voxel", flags.max_points_per_voxel, "iVox per-voxel point cap");
  cmd->add_option("--deskew", flags.deskew, "deskew scans in dynamic integration")->check(CLI::IsMember({"on", "off"}));
}

lcal::PipelineConfig resolve_config(const CommonFlags& flags) {
  auto config = lcal::load_config(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.out) config.output_dir = *flags.out;
  if (flags.voxel_size) config.dynamic.ivox.voxel_size = *flags.voxel_size;
  if (flags.max_points_per_voxel) config.dynamic.ivox.max_points_per_voxel = *flags.max_points_per_voxel;
  if (flags.deskew) config.dynamic.deskew = *flags.deskew == "on";
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  return config;
}

lcal::CalibrationServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR-camera extrinsic calibration"};
  app.require_subcommand(1);
  CommonFlags flags;

  using StageFn = nlohmann::json (*)(const lcal::PipelineConfig&);
  const std::vector<std::tuple<std::string, std::string, StageFn>> stages = {
      {"preprocess", "load, densify and equalize clouds and images", lcal::stage_preprocess},
      {"fov", "estimate the LiDAR field of view", lcal::stage_fov},
      {"render", "render LiDAR intensity images and index maps", lcal::stage_render},
      {"init-guess", "RANSAC + robust refinement from correspondences", lcal::stage_init_guess},
      {"calibrate", "NID fine registration from the initial guess", lcal::stage_calibrate},
      {"overlay", "render overlays at the latest estimate", lcal::stage_overlay},
  };
  std::vector<std::pair<CLI::App*, StageFn>> stage_cmds;
  for (const auto& [name, help, fn] : stages) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    stage_cmds.emplace_back(cmd, fn);
  }

  auto* run = app.add_subcommand("run", "run every stage");
  add_common(run, flags);

  auto* serve = app.add_subcommand("serve", "serve the annotation API for one data pair");
  add_common(serve, flags);
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t pair = 0;
  std::optional<std::string> ui_dir;
  serve->add_option("--host", host, "listen address");
  serve->add_option("--port", port, "listen port (0 picks one)");
  serve->add_option("--pair", pair, "data pair to annotate");
  serve->add_option("--ui-dir", ui_dir, "annotation UI assets")->check(CLI::ExistingDirectory);

  auto* fixture = app.add_subcommand("fixture", "write a synthetic data set with known ground truth");
  std::string fixture_dir;
  lcal::synthetic::FixtureOptions fixture_options;
  std::string fixture_camera = "pinhole";
  fixture->add_option("dir", fixture_dir, "output directory")->required();
  fixture->add_option("--camera", fixture_camera, "camera model")->check(CLI::IsMember({"pinhole", "equirectangular"}));
  fixture->add_option("--points-per-scan", fixture_options.points_per_scan);
  fixture->add_option("--inliers", fixture_options.inliers);
  fixture->add_option("--outliers", fixture_options.outliers);
  fixture->add_option("--seed", fixture_options.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [cmd, fn] : stage_cmds) {
      if (cmd->parsed()) {
        std::cout << fn(resolve_config(flags)).dump(2) << "\n";
      }
    }
    if (run->parsed()) {
      lcal::run_pipeline(resolve_config(flags), [](const std::string& stage, const nlohmann::json& report) {
        std::cout << "[" << stage << "] " << report.dump() << "\n" << std::flush;
      });
    }
    if (serve->parsed()) {
      lcal::CalibrationServer server(resolve_config(flags), {pair, ui_dir});
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << host << ":" << bound << "\n" << std::flush;
      server.listen();
      g_server = nullptr;
    }
    if (fixture->parsed()) {
      fixture_options.equirectangular = fixture_camera == "equirectangular";
      const auto info = lcal::synthetic::write_fixture(fixture_dir, fixture_options);
      std::cout << "wrote " << info.config << "\n";
    }
  } catch (const lcal::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
