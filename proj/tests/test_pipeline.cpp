#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <gtest/gtest.h>

#include <lcal/pipeline/config.hpp>
#include <lcal/pipeline/overlay.hpp>
#include <lcal/pipeline/server.hpp>
#include <lcal/pipeline/stages.hpp>
#include <lcal/synthetic/fixture.hpp>

using namespace lcal;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream ifs(path, std::ios::binary);
  std::ostringstream ss;
  ss << ifs.rdbuf();
  return ss.str();
}

struct Errors {
  double meters;
  double degrees;
};

Errors errors(const RigidTransform& a, const RigidTransform& b) {
  const auto e = transform_error(a, b);
  return {e.translation, rad2deg(e.rotation)};
}

RigidTransform read_transform(const fs::path& path) { return transform_from_json(nlohmann::json::parse(slurp(path)).at("T_camera_lidar")); }

// One fixture and one full run shared by the whole file.
class PipelineFixture : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("lcal_test_pipeline_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    info_ = synthetic::write_fixture(root_ / "data");
    config_ = load_config(info_.config);
    run_pipeline(config_);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static PipelineConfig config_with_output(const std::string& name) {
    auto c = config_;
    c.output_dir = (root_ / name).string();
    return c;
  }

  static inline fs::path root_;
  static inline synthetic::FixtureInfo info_;
  static inline PipelineConfig config_;
};

}  // namespace

// ---------------------------------------------------------------------------------------------
// config

TEST_F(PipelineFixture, ConfigResolvesRelativePaths) {
  EXPECT_EQ(config_.camera, (root_ / "data" / "camera.json").string());
  ASSERT_EQ(config_.pairs.size(), 1u);
  EXPECT_EQ(config_.pairs[0].clouds.size(), 2u);
  EXPECT_EQ(*config_.pairs[0].correspondences, (root_ / "data" / "matches.json").string());
  EXPECT_EQ(config_.output_dir, (root_ / "data" / "out").string());
  EXPECT_EQ(config_.seed, 42u);
  EXPECT_EQ(config_.mode, IntegrationMode::Static);
}

TEST_F(PipelineFixture, ConfigParsesParameters) {
  const nlohmann::json j = {{"camera", "c.json"},
                            {"pairs", {{{"clouds", {"a.ply"}}, {"image", "i.png"}}}},
                            {"mode", "dynamic"},
                            {"dynamic", {{"voxel_size", 0.3}, {"max_points_per_voxel", 7}, {"deskew", false}}},
                            {"ransac", {{"iterations", 50}, {"pixel_threshold", 5.0}}},
                            {"fine", {{"bins", 32}, {"max_outer_iterations", 3}, {"initial_step", {0.1, 0.1, 0.1, 0.01, 0.01, 0.01}}}}};
  const auto c = config_from_json(j, "/base");
  EXPECT_EQ(c.mode, IntegrationMode::Dynamic);
  EXPECT_EQ(c.camera, "/base/c.json");
  EXPECT_EQ(c.dynamic.ivox.voxel_size, 0.3);
  EXPECT_EQ(c.dynamic.ivox.max_points_per_voxel, 7);
  EXPECT_FALSE(c.dynamic.deskew);
  EXPECT_EQ(c.ransac.iterations, 50);
  EXPECT_EQ(c.refine.pixel_threshold, 5.0);  // the Cauchy scale follows the RANSAC threshold
  EXPECT_EQ(c.fine.bins, 32);
  EXPECT_EQ(c.fine.max_outer_iterations, 3);
  EXPECT_EQ(c.fine.nelder_mead.steps[0], 0.1);
  EXPECT_FALSE(c.pairs[0].correspondences);

  EXPECT_THROW(config_from_json({{"camera", "c.json"}, {"pairs", {{{"clouds", {"a.ply"}}, {"image", "i.png"}}}}, {"mode", "sideways"}}), FormatError);
  EXPECT_THROW(config_from_json({{"pairs", nlohmann::json::array()}}), FormatError);
}

TEST_F(PipelineFixture, MissingCloudFailsValidationBeforeAnyWork) {
  auto c = config_with_output("missing_cloud");
  c.pairs[0].clouds.push_back((root_ / "data" / "nope.ply").string());
  try {
    run_pipeline(c);
    FAIL() << "accepted a nonexistent cloud";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.ply"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(c.output_dir));
}

// ---------------------------------------------------------------------------------------------
// stages

TEST_F(PipelineFixture, FullRunRecoversTheExtrinsic) {
  const Workspace ws(config_.output_dir);
  for (const auto& artifact : {ws.dense_cloud(0), ws.camera_image(0), ws.fov(0), ws.lidar_image(0), ws.index_map(0), ws.virtual_camera(0), ws.matches_image(0),
                               ws.overlay_image(0), ws.init_guess(), ws.calibration()}) {
    EXPECT_TRUE(fs::is_regular_file(artifact)) << artifact;
  }
  const auto init = errors(read_transform(ws.init_guess()), info_.T_camera_lidar);
  EXPECT_LT(init.meters, 0.1);
  EXPECT_LT(init.degrees, 1.5);
  const auto fine = errors(read_transform(ws.calibration()), info_.T_camera_lidar);
  EXPECT_LT(fine.meters, 0.02);
  EXPECT_LT(fine.degrees, 0.3);

  const auto calib = nlohmann::json::parse(slurp(ws.calibration()));
  EXPECT_EQ(calib.size(), 4u);
  EXPECT_EQ(calib.at("pairs_used"), 1);
  EXPECT_GE(calib.at("outer_iterations").get<int>(), 1);
  EXPECT_GT(calib.at("final_nid").get<double>(), 0.0);
  for (const auto* key : {"translation", "quaternion_xyzw", "matrix_row_major_4x4"}) EXPECT_TRUE(calib.at("T_camera_lidar").contains(key));
}

TEST_F(PipelineFixture, DenseCloudIsEqualized) {
  const auto cloud = load_cloud(Workspace(config_.output_dir).dense_cloud(0)).cloud;
  EXPECT_EQ(cloud.size(), 120000u);
  const auto [lo, hi] = std::minmax_element(cloud.intensities.begin(), cloud.intensities.end());
  EXPECT_EQ(*lo, 0.0);
  EXPECT_EQ(*hi, 1.0);
  EXPECT_FALSE(cloud.times);
}

TEST_F(PipelineFixture, SameSeedGivesByteIdenticalResults) {
  const auto c = config_with_output("repeat");
  run_pipeline(c);
  const Workspace a(config_.output_dir), b(c.output_dir);
  EXPECT_EQ(slurp(a.calibration()), slurp(b.calibration()));
  EXPECT_EQ(slurp(a.init_guess()), slurp(b.init_guess()));
  EXPECT_EQ(slurp(a.index_map(0)), slurp(b.index_map(0)));
}

TEST_F(PipelineFixture, StagesRunSeparatelyMatchTheFullRun) {
  const auto c = config_with_output("stepwise");
  fs::create_directories(c.output_dir);
  stage_preprocess(c);
  stage_fov(c);
  stage_render(c);
  stage_init_guess(c);
  stage_calibrate(c);
  const Workspace a(config_.output_dir), b(c.output_dir);
  EXPECT_EQ(slurp(a.calibration()), slurp(b.calibration()));
  EXPECT_EQ(slurp(a.dense_cloud(0)), slurp(b.dense_cloud(0)));
  EXPECT_EQ(slurp(a.lidar_image(0)), slurp(b.lidar_image(0)));
}

TEST_F(PipelineFixture, StageErrorsNameTheStage) {
  auto c = config_with_output("empty_stage");
  fs::create_directories(c.output_dir);
  try {
    stage_calibrate(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "calibrate");
    EXPECT_NE(std::string(e.what()).find("init-guess"), std::string::npos) << e.what();
  }
  try {
    stage_render(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "render");
  }
}

TEST_F(PipelineFixture, NoCorrespondencesPointsToServe) {
  auto c = config_with_output("no_matches");
  c.pairs[0].correspondences.reset();
  fs::create_directories(c.output_dir);
  stage_preprocess(c);
  stage_fov(c);
  stage_render(c);
  try {
    stage_init_guess(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "init-guess");
    EXPECT_NE(std::string(e.what()).find("serve"), std::string::npos) << e.what();
  }
}

TEST_F(PipelineFixture, ImageSizeMismatchIsReported) {
  auto c = config_with_output("bad_image");
  const auto small = (root_ / "small.png").string();
  write_png(small, GrayImage(10, 10, 0.5));
  c.pairs[0].image = small;
  fs::create_directories(c.output_dir);
  try {
    stage_preprocess(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "preprocess");
    EXPECT_NE(std::string(e.what()).find("10x10"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------------------------
// overlay

TEST_F(PipelineFixture, OverlayErrorIsLowestAtGroundTruth) {
  const auto pairs = load_fine_pairs(config_);
  const auto& cloud = pairs[0].cloud;
  const auto& image = pairs[0].image;
  const double at_truth = overlay_intensity_error(cloud, image, info_.camera, info_.T_camera_lidar);
  std::mt19937 mt(3);
  std::normal_distribution<> g(0.0, 1.0);
  for (int trial = 0; trial < 20; trial++) {
    const Eigen::Vector3d t = Eigen::Vector3d(g(mt), g(mt), g(mt)).normalized() * (0.1 + 0.1 * std::abs(g(mt)));
    const Eigen::Vector3d r = Eigen::Vector3d(g(mt), g(mt), g(mt)).normalized() * deg2rad(2.0 + std::abs(g(mt)));
    Vector6d delta;
    delta << t, r;
    EXPECT_LT(at_truth, overlay_intensity_error(cloud, image, info_.camera, info_.T_camera_lidar.perturbed(delta))) << "trial " << trial;
  }
}

TEST_F(PipelineFixture, OverlayDrawsVisiblePointsOnly) {
  const auto pairs = load_fine_pairs(config_);
  const auto plain = to_color(pairs[0].image);
  // nothing in front of the camera
  const RigidTransform away(Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitY()).toRotationMatrix() * info_.T_camera_lidar.rotation_matrix(), Eigen::Vector3d::Zero());
  EXPECT_EQ(render_overlay(pairs[0].cloud, pairs[0].image, info_.camera, away).pixels, plain.pixels);
  EXPECT_EQ(render_overlay(PointCloud{}, pairs[0].image, info_.camera, info_.T_camera_lidar).pixels, plain.pixels);

  const auto drawn = render_overlay(pairs[0].cloud, pairs[0].image, info_.camera, info_.T_camera_lidar);
  // ray-cast oracle: pixels hit by any projected point, and by points the scene says are visible
  const auto scene = synthetic::make_room_scene();
  const Eigen::Vector3d eye = info_.T_camera_lidar.inverse().translation();
  std::vector<char> hit(plain.pixels.size(), 0), seen(plain.pixels.size(), 0);
  for (std::size_t j = 0; j < pairs[0].cloud.size(); j++) {
    const auto& p = pairs[0].cloud.points[j];
    const auto pixel = project_to_pixel_index(info_.camera, info_.T_camera_lidar * p);
    if (!pixel) continue;
    hit[*pixel] = 1;
    if (synthetic::visible_from(scene, eye, p, 1e-3)) seen[*pixel] = 1;
  }
  std::size_t changed = 0, stray = 0, covered = 0, expected = 0;
  for (std::size_t k = 0; k < plain.pixels.size(); k++) {
    const bool c = drawn.pixels[k] != plain.pixels[k];
    changed += c;
    stray += c && !hit[k];
    expected += seen[k];
    covered += seen[k] && c;
  }
  EXPECT_EQ(stray, 0u);
  EXPECT_GT(changed, 0u);
  EXPECT_GE(static_cast<double>(covered), 0.9 * static_cast<double>(expected)) << covered << " of " << expected;
}

TEST(RenderMatches, InliersGreenOutliersRed) {
  const GrayImage cam(100, 50, 0.5), lidar(80, 60, 0.2);
  CorrespondenceSet corr;
  corr.pairs.push_back({Eigen::Vector2d(10.5, 10.5), Eigen::Vector3d::UnitX(), 1.0, Eigen::Vector2d(10.5, 10.5)});
  corr.pairs.push_back({Eigen::Vector2d(20.5, 40.5), Eigen::Vector3d::UnitX(), 1.0, Eigen::Vector2d(30.5, 40.5)});
  corr.pairs.push_back({Eigen::Vector2d(5.5, 5.5), Eigen::Vector3d::UnitX(), 1.0, std::nullopt});
  const auto out = render_matches(cam, lidar, corr, {true, false, true});
  EXPECT_EQ(out.width, 180);
  EXPECT_EQ(out.height, 60);
  EXPECT_EQ(out.at(10, 10), kInlierColor);
  EXPECT_EQ(out.at(110, 10), kInlierColor);
  EXPECT_EQ(out.at(60, 10), kInlierColor);   // along the horizontal line
  EXPECT_EQ(out.at(20, 40), kOutlierColor);
  EXPECT_EQ(out.at(130, 40), kOutlierColor);
  EXPECT_EQ(out.at(5, 5), (Rgb{128, 128, 128}));  // no LiDAR pixel, no line
  EXPECT_EQ(out.at(150, 55), (Rgb{51, 51, 51}));
  EXPECT_EQ(out.at(50, 55), (Rgb{0, 0, 0}));  // below the shorter camera image
}

TEST(Colormap, EndsAndMonotoneHue) {
  EXPECT_EQ(jet(0.0), (Rgb{0, 0, 128}));
  EXPECT_EQ(jet(1.0), (Rgb{128, 0, 0}));
  EXPECT_EQ(jet(0.5), (Rgb{128, 255, 128}));
  EXPECT_EQ(jet(-3.0), jet(0.0));
}

// ---------------------------------------------------------------------------------------------
// HTTP service

namespace {

class ServerFixture : public PipelineFixture {
protected:
  void SetUp() override {
    config_s_ = config_with_output("serve_" + std::to_string(counter_++));
    config_s_.pairs[0].correspondences.reset();
    server_ = std::make_unique<CalibrationServer>(config_s_);
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->listen(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(120, 0);
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
    server_.reset();
  }

  nlohmann::json post_json(const std::string& path, const nlohmann::json& body, int expected) {
    const auto res = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return nullptr;
    EXPECT_EQ(res->status, expected) << res->body;
    return nlohmann::json::parse(res->body);
  }

  nlohmann::json get_json(const std::string& path, int expected = 200) {
    const auto res = client_->Get(path);
    EXPECT_TRUE(res);
    if (!res) return nullptr;
    EXPECT_EQ(res->status, expected) << res->body;
    return nlohmann::json::parse(res->body);
  }

  nlohmann::json wait_job(int id) {
    for (int i = 0; i < 1200; i++) {
      auto j = get_json("/api/job/" + std::to_string(id));
      if (j.at("status") != "running" && j.at("status") != "queued") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    ADD_FAILURE() << "job " << id << " did not finish";
    return nullptr;
  }

  // LiDAR-image pixels of points the camera sees, with their exact camera projections
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> consistent_clicks(std::size_t n, std::uint32_t seed) {
    const Workspace ws(config_s_.output_dir);
    const auto map = load_index_map(ws.index_map(0));
    const auto cloud = load_cloud(ws.dense_cloud(0)).cloud;
    const auto scene = synthetic::make_room_scene();
    const Eigen::Vector3d eye = info_.T_camera_lidar.inverse().translation();
    std::mt19937 mt(seed);
    std::uniform_int_distribution<std::size_t> pick(0, map.indices.size() - 1);
    std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> clicks;
    while (clicks.size() < n) {
      const std::size_t k = pick(mt);
      if (map.indices[k] < 0) continue;
      const Eigen::Vector3d p = cloud.points[map.indices[k]];
      const auto x = project(info_.camera, info_.T_camera_lidar * p);
      if (!x || !in_image(info_.camera, *x) || !synthetic::visible_from(scene, eye, p, 1e-3)) continue;
      // stay clear of the borders so that a 2 px click error stays inside the image
      if (x->x() < 3 || x->y() < 3 || x->x() > image_width(info_.camera) - 3 || x->y() > image_height(info_.camera) - 3) continue;
      clicks.emplace_back(*x, Eigen::Vector2d(k % map.width + 0.5, k / map.width + 0.5));
    }
    return clicks;
  }

  static nlohmann::json click(const Eigen::Vector2d& camera_px, const Eigen::Vector2d& lidar_px) {
    return {{"camera_px", {camera_px.x(), camera_px.y()}}, {"lidar_px", {lidar_px.x(), lidar_px.y()}}};
  }

  static inline int counter_ = 0;
  PipelineConfig config_s_;
  std::unique_ptr<CalibrationServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST_F(ServerFixture, SessionAndImages) {
  const auto s = get_json("/api/session");
  EXPECT_EQ(s.at("correspondences"), 0);
  EXPECT_TRUE(s.at("estimate").is_null());
  EXPECT_TRUE(s.at("nid").is_null());
  EXPECT_EQ(s.at("stages").at("init"), false);
  EXPECT_EQ(s.at("lidar_image").at("width"), 1024);

  for (const auto* path : {"/api/image/camera", "/api/image/lidar"}) {
    const auto res = client_->Get(path);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(res->body.substr(1, 3), "PNG");
  }
  const auto overlay = get_json("/api/overlay", 404);
  EXPECT_EQ(overlay.at("reason"), "no_estimate");
}

TEST_F(ServerFixture, IndexMapLookup) {
  const auto clicks = consistent_clicks(1, 1);
  const auto& lidar_px = clicks[0].second;
  const auto hit = get_json("/api/indexmap/lookup?u=" + std::to_string(lidar_px.x()) + "&v=" + std::to_string(lidar_px.y()));
  const auto cloud = load_cloud(Workspace(config_s_.output_dir).dense_cloud(0)).cloud;
  const auto p = cloud.points[hit.at("index").get<std::size_t>()];
  EXPECT_EQ(hit.at("point"), (nlohmann::json{p.x(), p.y(), p.z()}));

  EXPECT_EQ(get_json("/api/indexmap/lookup?u=0.5&v=0.5", 404).at("reason"), "no_point");  // corner of the virtual image is empty
  EXPECT_EQ(get_json("/api/indexmap/lookup?u=abc&v=1", 400).at("reason"), "invalid_query");
  EXPECT_EQ(get_json("/api/indexmap/lookup?u=1", 400).at("reason"), "invalid_query");
}

TEST_F(ServerFixture, CorrespondenceLifecycle) {
  const auto clicks = consistent_clicks(3, 2);
  for (const auto& [cam_px, lidar_px] : clicks) {
    const auto stored = post_json("/api/correspondences", click(cam_px, lidar_px), 201);
    const auto lookup = get_json("/api/indexmap/lookup?u=" + std::to_string(lidar_px.x()) + "&v=" + std::to_string(lidar_px.y()));
    EXPECT_EQ(stored.at("lidar_point"), lookup.at("point"));
  }
  auto list = get_json("/api/correspondences");
  ASSERT_EQ(list.at("matches").size(), 3u);
  EXPECT_EQ(list.at("source"), "manual");
  EXPECT_EQ(list.at("matches")[2].at("id"), 2);

  // the persisted file is a valid correspondence file
  const Workspace ws(config_s_.output_dir);
  const auto map = load_index_map(ws.index_map(0));
  const auto cloud = load_cloud(ws.dense_cloud(0)).cloud;
  EXPECT_EQ(import_correspondences(ws.manual_correspondences(0), info_.camera, &map, &cloud).size(), 3u);

  const auto res = client_->Delete("/api/correspondences/1");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  list = get_json("/api/correspondences");
  ASSERT_EQ(list.at("matches").size(), 2u);
  EXPECT_EQ(list.at("matches")[1].at("camera_px"), (nlohmann::json{clicks[2].first.x(), clicks[2].first.y()}));
  EXPECT_EQ(client_->Delete("/api/correspondences/7")->status, 404);
  EXPECT_EQ(client_->Delete("/api/correspondences")->status, 200);
  EXPECT_EQ(get_json("/api/correspondences").at("matches").size(), 0u);
}

TEST_F(ServerFixture, MalformedPayloadsAreRejected) {
  EXPECT_EQ(post_json("/api/correspondences", {{"camera_px", {10, 10}}}, 400).at("reason"), "invalid_payload");
  EXPECT_EQ(post_json("/api/correspondences", {{"camera_px", {10000, 10}}, {"lidar_point", {1, 2, 3}}}, 400).at("reason"), "invalid_payload");
  EXPECT_EQ(post_json("/api/correspondences", {{"camera_px", {10, 10}}, {"lidar_px", {0.5, 0.5}}}, 400).at("reason"), "no_lidar_point");
  const auto res = client_->Post("/api/correspondences", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(nlohmann::json::parse(res->body).at("reason"), "invalid_json");
  EXPECT_EQ(post_json("/api/calibrate", {{"stage", "everything"}}, 400).at("reason"), "invalid_stage");
  EXPECT_EQ(post_json("/api/calibrate", nlohmann::json::object(), 400).at("reason"), "invalid_payload");
  EXPECT_EQ(get_json("/api/job/99", 404).at("reason"), "unknown_job");
  EXPECT_EQ(get_json("/api/correspondences").at("matches").size(), 0u);
}

TEST_F(ServerFixture, TwoPairsRunInitButRefuseFine) {
  // init needs two pairs: refused with none and with one
  for (const auto& [cam_px, lidar_px] : consistent_clicks(2, 3)) {
    EXPECT_EQ(post_json("/api/calibrate", {{"stage", "init"}}, 400).at("reason"), "insufficient_pairs");
    post_json("/api/correspondences", click(cam_px, lidar_px), 201);
  }
  const auto refused = post_json("/api/calibrate", {{"stage", "fine"}}, 400);
  EXPECT_EQ(refused.at("reason"), "insufficient_pairs");
  EXPECT_NE(refused.at("error").get<std::string>().find("≥3 pairs required"), std::string::npos);

  const int id = post_json("/api/calibrate", {{"stage", "both"}}, 202).at("job");
  const auto job = wait_job(id);
  EXPECT_EQ(job.at("status"), "done") << job.dump();
  EXPECT_TRUE(job.at("result").contains("init"));
  EXPECT_EQ(job.at("result").at("fine").at("refused"), "≥3 pairs required");
  const auto s = get_json("/api/session");
  EXPECT_EQ(s.at("stages").at("init"), true);
  EXPECT_EQ(s.at("stages").at("fine"), false);
  EXPECT_FALSE(s.at("estimate").is_null());
}

TEST_F(ServerFixture, ManualSessionRecoversTheExtrinsic) {
  std::mt19937 mt(4);
  std::uniform_real_distribution<> click_error(-2.0, 2.0);
  for (const auto& [cam_px, lidar_px] : consistent_clicks(8, 5)) {
    post_json("/api/correspondences", click(cam_px + Eigen::Vector2d(click_error(mt), click_error(mt)), lidar_px), 201);
  }
  const int init_id = post_json("/api/calibrate", {{"stage", "init"}}, 202).at("job");
  EXPECT_EQ(wait_job(init_id).at("status"), "done");
  const int fine_id = post_json("/api/calibrate", {{"stage", "fine"}}, 202).at("job");
  // a second request while the fine job runs is refused
  EXPECT_EQ(post_json("/api/calibrate", {{"stage", "init"}}, 409).at("reason"), "job_running");
  const auto job = wait_job(fine_id);
  ASSERT_EQ(job.at("status"), "done") << job.dump();

  const auto s = get_json("/api/session");
  const auto err = errors(transform_from_json(s.at("estimate")), info_.T_camera_lidar);
  EXPECT_LT(err.meters, 0.02);
  EXPECT_LT(err.degrees, 0.3);
  EXPECT_TRUE(s.at("nid").is_number());
  EXPECT_EQ(s.at("stages").at("fine"), true);

  const auto overlay = client_->Get("/api/overlay");
  ASSERT_TRUE(overlay);
  EXPECT_EQ(overlay->status, 200);
  EXPECT_EQ(overlay->body.substr(1, 3), "PNG");
}

TEST_F(ServerFixture, PortInUseIsAnError) {
  CalibrationServer other(config_s_);
  EXPECT_THROW(other.bind("127.0.0.1", port_), IoError);
}

TEST_F(ServerFixture, InputsAreNeverWritten) {
  std::vector<std::string> before;
  const std::vector<std::string> inputs = {config_s_.camera, config_s_.pairs[0].clouds[0], config_s_.pairs[0].clouds[1], config_s_.pairs[0].image};
  for (const auto& path : inputs) before.push_back(slurp(path));
  for (const auto& [cam_px, lidar_px] : consistent_clicks(4, 6)) post_json("/api/correspondences", click(cam_px, lidar_px), 201);
  const int id = post_json("/api/calibrate", {{"stage", "init"}}, 202).at("job");
  wait_job(id);
  for (std::size_t k = 0; k < inputs.size(); k++) EXPECT_EQ(slurp(inputs[k]), before[k]) << inputs[k];
}
