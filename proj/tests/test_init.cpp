#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include <lcal/init/correspondences.hpp>
#include <lcal/init/reprojection_refinement.hpp>
#include <lcal/init/rotation_ransac.hpp>
#include <lcal/synthetic/scene.hpp>

using namespace lcal;
namespace fs = std::filesystem;

namespace {

PinholeCamera test_pinhole() {
  PinholeCamera cam;
  cam.fx = cam.fy = 800.0;
  cam.cx = 640.0;
  cam.cy = 512.0;
  cam.width = 1280;
  cam.height = 1024;
  return cam;
}

double rotation_error_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) { return rad2deg(Eigen::AngleAxisd(a.transpose() * b).angle()); }

Eigen::Matrix3d random_rotation(std::mt19937& mt, double angle_deg) {
  std::normal_distribution<> g(0.0, 1.0);
  return Eigen::AngleAxisd(deg2rad(angle_deg), Eigen::Vector3d(g(mt), g(mt), g(mt)).normalized()).toRotationMatrix();
}

// Inlier pair: a camera-frame point 2..12 m away seen in the image, expressed in the LiDAR frame.
Correspondence make_inlier(const CameraModel& cam, const RigidTransform& T_camera_lidar, double pixel_noise, std::mt19937& mt) {
  std::uniform_real_distribution<> u(0.0, 1.0);
  std::normal_distribution<> g(0.0, 1.0);
  const double w = image_width(cam), h = image_height(cam);
  while (true) {
    // keep clear of the border so that noise stays in the image, and of the equirectangular poles
    const Eigen::Vector2d px(0.05 * w + 0.9 * w * u(mt), 0.1 * h + 0.8 * h * u(mt));
    const Eigen::Vector3d x_c = (2.0 + 10.0 * u(mt)) * unproject(cam, px).vec();
    Correspondence c;
    c.point = T_camera_lidar.inverse() * x_c;
    c.pixel = px + pixel_noise * Eigen::Vector2d(g(mt), g(mt));
    if (in_image(cam, c.pixel)) return c;
  }
}

Correspondence make_outlier(const CameraModel& cam, std::mt19937& mt) {
  std::uniform_real_distribution<> u(0.0, 1.0);
  Correspondence c;
  c.pixel = Eigen::Vector2d(u(mt) * image_width(cam), u(mt) * image_height(cam));
  // any direction, 2..12 m
  std::normal_distribution<> g(0.0, 1.0);
  c.point = (2.0 + 10.0 * u(mt)) * Eigen::Vector3d(g(mt), g(mt), g(mt)).normalized();
  return c;
}

// A mismatch as a matcher or an operator produces it: a point inside the camera view paired with
// an unrelated pixel.
Correspondence make_mismatch(const CameraModel& cam, const RigidTransform& T_camera_lidar, std::mt19937& mt) {
  std::uniform_real_distribution<> u(0.0, 1.0);
  Correspondence c = make_inlier(cam, T_camera_lidar, 0.0, mt);
  c.pixel = Eigen::Vector2d(u(mt) * image_width(cam), u(mt) * image_height(cam));
  return c;
}

CorrespondenceSet make_set(const CameraModel& cam, const RigidTransform& T, int inliers, int outliers, double noise, std::mt19937& mt) {
  CorrespondenceSet set;
  for (int i = 0; i < inliers; i++) set.pairs.push_back(make_inlier(cam, T, noise, mt));
  for (int i = 0; i < outliers; i++) set.pairs.push_back(make_outlier(cam, mt));
  return set;
}

struct PoseError {
  double meters;
  double degrees;
};

PoseError pose_error(const RigidTransform& estimate, const RigidTransform& truth) {
  return {(estimate.translation() - truth.translation()).norm(), rotation_error_deg(estimate.rotation_matrix(), truth.rotation_matrix())};
}

// Runs the whole chain: RANSAC rotation, zero translation, robust refinement.
RigidTransform init_chain(const CorrespondenceSet& set, const CameraModel& cam, std::uint64_t seed) {
  RansacParams rp;
  rp.seed = seed;
  rp.iterations = 2000;
  const auto ransac = ransac_rotation(set, cam, rp);
  return refine_reprojection(set, cam, RigidTransform(ransac.rotation, Eigen::Vector3d::Zero())).T_camera_lidar;
}

class TempDir {
public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("lcal_test_init_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(file(name)) << text;
    return file(name);
  }

private:
  static inline int counter_ = 0;
  fs::path path_;
};

const std::vector<CameraModel>& both_models() {
  static const std::vector<CameraModel> models = {test_pinhole(), EquirectCamera{1920, 960}};
  return models;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// rotation_from_two

TEST(RotationFromTwo, AlignedPairsGiveIdentity) {
  const Bearing a(Eigen::Vector3d(1, 2, 3)), b(Eigen::Vector3d(-1, 0.5, 2));
  EXPECT_LT((rotation_from_two(a, b, a, b) - Eigen::Matrix3d::Identity()).norm(), 1e-12);
}

TEST(RotationFromTwo, ExactQuarterTurn) {
  const Eigen::Matrix3d Rz = Eigen::AngleAxisd(M_PI / 2.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Bearing l0(Eigen::Vector3d::UnitX()), l1(Eigen::Vector3d::UnitY());
  const Bearing c0(Rz * l0.vec()), c1(Rz * l1.vec());
  EXPECT_LT((rotation_from_two(c0, c1, l0, l1) - Rz).norm(), 1e-9);
}

TEST(RotationFromTwo, NearParallelIsDegenerate) {
  const Bearing a(Eigen::Vector3d::UnitX());
  const Bearing b(Eigen::Vector3d(1.0, 5e-5, 0.0));
  const Bearing c(Eigen::Vector3d::UnitY());
  EXPECT_THROW(rotation_from_two(c, a, a, b), DegenerateSampleError);
  EXPECT_THROW(rotation_from_two(a, b, c, a), DegenerateSampleError);
}

TEST(RotationFromTwo, AlwaysProperRotation) {
  std::mt19937 mt(1);
  std::normal_distribution<> g(0.0, 1.0);
  for (int trial = 0; trial < 2000; trial++) {
    const Bearing c0(Eigen::Vector3d(g(mt), g(mt), g(mt))), c1(Eigen::Vector3d(g(mt), g(mt), g(mt)));
    const Bearing l0(Eigen::Vector3d(g(mt), g(mt), g(mt))), l1(Eigen::Vector3d(g(mt), g(mt), g(mt)));
    const auto R = rotation_from_two(c0, c1, l0, l1);
    EXPECT_LT((R.transpose() * R - Eigen::Matrix3d::Identity()).norm(), 1e-9);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-9);
  }
}

TEST(RotationFromTwo, NoisyPairsAgainstGridSearch) {
  std::mt19937 mt(2);
  std::normal_distribution<> g(0.0, 1.0);
  for (int trial = 0; trial < 20; trial++) {
    const Eigen::Matrix3d truth = random_rotation(mt, 40.0);
    // a well-conditioned sample: the two bearings 60..120 degrees apart
    Eigen::Vector3d l0, l1;
    do {
      l0 = Eigen::Vector3d(g(mt), g(mt), g(mt)).normalized();
      l1 = Eigen::Vector3d(g(mt), g(mt), g(mt)).normalized();
    } while (std::abs(l0.dot(l1)) > 0.5);
    // 0.5 degree perturbation of each camera bearing about a random perpendicular axis
    auto noisy = [&](const Eigen::Vector3d& d) {
      const Eigen::Vector3d axis = d.cross(Eigen::Vector3d(g(mt), g(mt), g(mt))).normalized();
      return Eigen::Vector3d(Eigen::AngleAxisd(deg2rad(0.5), axis) * d);
    };
    const Eigen::Vector3d c0 = noisy(truth * l0), c1 = noisy(truth * l1);
    auto cost = [&](const Eigen::Matrix3d& R) { return (c0 - R * l0).squaredNorm() + (c1 - R * l1).squaredNorm(); };

    const Eigen::Matrix3d R = rotation_from_two(Bearing(c0), Bearing(c1), Bearing(l0), Bearing(l1));
    EXPECT_LT(rotation_error_deg(R, truth), 1.5);

    // exhaustive 0.1 degree grid of left perturbations within 2 degrees of the truth
    double best = std::numeric_limits<double>::infinity();
    Eigen::Matrix3d best_R;
    Eigen::Vector3i best_k;
    for (int i = -20; i <= 20; i++) {
      for (int j = -20; j <= 20; j++) {
        for (int k = -20; k <= 20; k++) {
          const Eigen::Vector3d w = deg2rad(0.1) * Eigen::Vector3d(i, j, k);
          const Eigen::Matrix3d Rg = Eigen::AngleAxisd(w.norm(), w.norm() > 0 ? w.normalized() : Eigen::Vector3d::UnitX()).toRotationMatrix() * truth;
          const double c = cost(Rg);
          if (c < best) {
            best = c;
            best_R = Rg;
            best_k = {i, j, k};
          }
        }
      }
    }
    ASSERT_LT(best_k.cwiseAbs().maxCoeff(), 20) << "grid optimum on the search boundary";
    EXPECT_LE(cost(R), best + 1e-12);
    EXPECT_LT(rotation_error_deg(R, best_R), 0.1);
  }
}

// ---------------------------------------------------------------------------------------------
// ransac_rotation

TEST(RansacRotation, NoiselessConsensus) {
  std::mt19937 mt(3);
  for (const auto& cam : both_models()) {
    const Eigen::Matrix3d R = random_rotation(mt, 30.0);
    const auto set = make_set(cam, RigidTransform(R, Eigen::Vector3d::Zero()), 100, 0, 0.0, mt);
    const auto result = ransac_rotation(set, cam);
    EXPECT_LT(rotation_error_deg(result.rotation, R), 0.1);
    EXPECT_EQ(result.num_inliers, 100u);
    EXPECT_TRUE(result.warnings.empty());
    EXPECT_EQ(std::count(result.inliers.begin(), result.inliers.end(), true), 100);
  }
}

TEST(RansacRotation, MonteCarloWithOutliers) {
  for (const auto& cam : both_models()) {
    int good = 0;
    for (int trial = 0; trial < 100; trial++) {
      std::mt19937 mt(1000 + trial);
      const Eigen::Matrix3d R = random_rotation(mt, 30.0);
      const auto set = make_set(cam, RigidTransform(R, Eigen::Vector3d::Zero()), 60, 40, 1.0, mt);
      RansacParams params;
      params.seed = trial;
      const auto result = ransac_rotation(set, cam, params);
      good += rotation_error_deg(result.rotation, R) < 1.0 && result.num_inliers >= 55 && result.num_inliers <= 60;
    }
    EXPECT_GE(good, 95) << (is_equirectangular(cam) ? "equirectangular" : "pinhole");
  }
}

TEST(RansacRotation, AllOutliersWarn) {
  std::mt19937 mt(4);
  const CameraModel cam = test_pinhole();
  const auto set = make_set(cam, RigidTransform::identity(), 0, 30, 0.0, mt);
  const auto result = ransac_rotation(set, cam);
  EXPECT_LT(result.num_inliers, 5u);
  ASSERT_FALSE(result.warnings.empty());
  EXPECT_NE(result.warnings.back().find("low confidence"), std::string::npos);
}

TEST(RansacRotation, Preconditions) {
  const CameraModel cam = test_pinhole();
  CorrespondenceSet one;
  one.pairs.push_back({Eigen::Vector2d(10, 10), Eigen::Vector3d(1, 0, 0), 1.0, std::nullopt});
  EXPECT_THROW(ransac_rotation(one, cam), InsufficientCorrespondencesError);
  EXPECT_THROW(ransac_rotation(CorrespondenceSet{}, cam), InsufficientCorrespondencesError);

  std::mt19937 mt(5);
  const auto set = make_set(cam, RigidTransform::identity(), 10, 0, 0.0, mt);
  RansacParams bad;
  bad.iterations = 0;
  EXPECT_THROW(ransac_rotation(set, cam, bad), ArgumentError);
  bad = {};
  bad.pixel_threshold = 0.0;
  EXPECT_THROW(ransac_rotation(set, cam, bad), ArgumentError);
}

TEST(RansacRotation, DeterministicGivenSeed) {
  std::mt19937 mt(6);
  const CameraModel cam = test_pinhole();
  const auto set = make_set(cam, RigidTransform(random_rotation(mt, 20.0), Eigen::Vector3d::Zero()), 30, 30, 1.0, mt);
  RansacParams params;
  params.seed = 99;
  const auto a = ransac_rotation(set, cam, params);
  const auto b = ransac_rotation(set, cam, params);
  EXPECT_EQ(a.rotation, b.rotation);
  EXPECT_EQ(a.inliers, b.inliers);
  EXPECT_EQ(a.best_iteration, b.best_iteration);
}

TEST(RansacRotation, PermutationInvariantInlierSet) {
  std::mt19937 mt(7);
  for (const auto& cam : both_models()) {
    const auto set = make_set(cam, RigidTransform(random_rotation(mt, 25.0), Eigen::Vector3d::Zero()), 60, 40, 0.0, mt);
    const auto base = ransac_rotation(set, cam);
    for (int trial = 0; trial < 5; trial++) {
      std::vector<std::size_t> order(set.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), mt);
      CorrespondenceSet permuted;
      for (const auto i : order) permuted.pairs.push_back(set.pairs[i]);
      RansacParams params;
      params.seed = 17 + trial;
      const auto result = ransac_rotation(permuted, cam, params);
      std::vector<bool> mapped(set.size());
      for (std::size_t k = 0; k < order.size(); k++) mapped[order[k]] = result.inliers[k];
      EXPECT_EQ(mapped, base.inliers);
    }
  }
}

// ---------------------------------------------------------------------------------------------
// refine_reprojection

TEST(RefineReprojection, NoiselessRecovery) {
  std::mt19937 mt(8);
  for (const auto& cam : both_models()) {
    const auto truth = synthetic::ground_truth_extrinsic();
    const auto set = make_set(cam, truth, 50, 0, 0.0, mt);
    const RigidTransform start(Eigen::AngleAxisd(deg2rad(2.0), Eigen::Vector3d::UnitY()) * truth.rotation_matrix(), Eigen::Vector3d::Zero());
    const auto result = refine_reprojection(set, cam, start);
    const auto err = pose_error(result.T_camera_lidar, truth);
    EXPECT_LT(err.meters, 1e-6);
    EXPECT_LT(deg2rad(err.degrees), 1e-6);
    EXPECT_TRUE(result.warnings.empty());
  }
}

TEST(RefineReprojection, PixelNoiseOnDeepScene) {
  for (const auto& cam : both_models()) {
    PoseError worst{0.0, 0.0};
    for (int trial = 0; trial < 10; trial++) {
      std::mt19937 mt(200 + trial);
      const auto truth = synthetic::ground_truth_extrinsic();
      const auto set = make_set(cam, truth, 100, 0, 1.0, mt);
      const auto err = pose_error(init_chain(set, cam, trial), truth);
      worst = {std::max(worst.meters, err.meters), std::max(worst.degrees, err.degrees)};
    }
    EXPECT_LT(worst.meters, 0.05) << (is_equirectangular(cam) ? "equirectangular" : "pinhole");
    EXPECT_LT(worst.degrees, 0.2) << (is_equirectangular(cam) ? "equirectangular" : "pinhole");
  }
}

TEST(RefineReprojection, OutliersAtMostDoubleTheCleanError) {
  for (const auto& cam : both_models()) {
    double clean_m = 0.0, clean_deg = 0.0, dirty_m = 0.0, dirty_deg = 0.0;
    for (int trial = 0; trial < 20; trial++) {
      std::mt19937 mt(300 + trial);
      const auto truth = synthetic::ground_truth_extrinsic();
      const auto clean = make_set(cam, truth, 80, 0, 1.0, mt);
      auto dirty = clean;
      for (int i = 0; i < 20; i++) dirty.pairs.push_back(make_mismatch(cam, truth, mt));  // 20% of the set
      const auto a = pose_error(init_chain(clean, cam, trial), truth);
      const auto b = pose_error(init_chain(dirty, cam, trial), truth);
      clean_m += a.meters;
      clean_deg += a.degrees;
      dirty_m += b.meters;
      dirty_deg += b.degrees;
    }
    EXPECT_LE(dirty_m, 2.0 * clean_m) << (is_equirectangular(cam) ? "equirectangular" : "pinhole");
    EXPECT_LE(dirty_deg, 2.0 * clean_deg) << (is_equirectangular(cam) ? "equirectangular" : "pinhole");
  }
}

TEST(RefineReprojection, NeverWorseThanStart) {
  std::mt19937 mt(9);
  std::normal_distribution<> g(0.0, 1.0);
  for (const auto& cam : both_models()) {
    for (int trial = 0; trial < 10; trial++) {
      const auto truth = synthetic::ground_truth_extrinsic();
      const auto set = make_set(cam, truth, 40, 10, 2.0, mt);
      // starts range from close to wildly wrong
      const double scale = 0.02 * std::pow(3.0, trial);
      Vector6d delta;
      for (int k = 0; k < 6; k++) delta[k] = scale * g(mt);
      const auto start = truth.perturbed(delta);
      const auto result = refine_reprojection(set, cam, start);
      EXPECT_LE(result.final_cost, result.initial_cost);
      refine_detail::ReprojectionProblem problem(set, cam, RefineParams{}.scale_for(cam));
      EXPECT_DOUBLE_EQ(problem.cost(start), result.initial_cost);
      EXPECT_DOUBLE_EQ(problem.cost(result.T_camera_lidar), result.final_cost);
    }
  }
}

TEST(RefineReprojection, Preconditions) {
  const CameraModel cam = test_pinhole();
  std::mt19937 mt(10);
  const auto two = make_set(cam, RigidTransform::identity(), 2, 0, 0.0, mt);
  EXPECT_THROW(refine_reprojection(two, cam, RigidTransform::identity()), InsufficientCorrespondencesError);
  const auto three = make_set(cam, RigidTransform::identity(), 3, 0, 0.0, mt);
  RefineParams params;
  params.cauchy_scale = 0.0;
  EXPECT_THROW(refine_reprojection(three, cam, RigidTransform::identity(), params), ArgumentError);
}

// ---------------------------------------------------------------------------------------------
// import_correspondences

namespace {

struct ImportFixture {
  CameraModel cam = test_pinhole();
  IndexMap map{40, 40};
  PointCloud cloud;

  ImportFixture() {
    // a point on every fourth pixel of the left half; the right half is empty
    for (int v = 0; v < 40; v += 4) {
      for (int u = 0; u < 20; u += 4) {
        map.indices[v * 40 + u] = static_cast<std::int32_t>(cloud.size());
        cloud.push_back(Eigen::Vector3d(u, v, 1.0), 0.5);
      }
    }
  }
};

nlohmann::json match_px(double cu, double cv, double lu, double lv) {
  return {{"camera_px", {cu, cv}}, {"lidar_px", {lu, lv}}, {"lidar_point", nullptr}, {"confidence", 0.8}};
}

}  // namespace

TEST(ImportCorrespondences, DropsMatchesWithoutNearbyPoints) {
  ImportFixture f;
  TempDir dir;
  nlohmann::json j = {{"source", "superglue"}, {"matcher_threshold", 0.05}, {"matches", nlohmann::json::array()}};
  for (int k = 0; k < 45; k++) j["matches"].push_back(match_px(100 + k, 200, (k % 5) * 4 + 0.5, (k / 5) * 4 + 0.5));
  for (int k = 0; k < 5; k++) j["matches"].push_back(match_px(50, 60 + k, 30.5, 5.5 + 6 * k));
  const auto set = import_correspondences(dir.write("m.json", j.dump()), f.cam, &f.map, &f.cloud);
  EXPECT_EQ(set.size(), 45u);
  EXPECT_EQ(set.dropped, 5u);
  EXPECT_EQ(set.source, "superglue");
  ASSERT_TRUE(set.matcher_threshold);
  EXPECT_EQ(*set.matcher_threshold, 0.05);
  EXPECT_EQ(set.pairs[7].point, Eigen::Vector3d(8, 4, 1));
  EXPECT_EQ(set.pairs[7].pixel, Eigen::Vector2d(107, 200));
  EXPECT_EQ(set.pairs[7].confidence, 0.8);
}

TEST(ImportCorrespondences, WindowNeighborIsUsed) {
  ImportFixture f;
  nlohmann::json j = {{"source", "manual"}, {"matches", {match_px(10, 10, 9.2, 7.9)}}};
  const auto set = correspondences_from_json(j, f.cam, &f.map, &f.cloud);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.pairs[0].point, Eigen::Vector3d(8, 8, 1));
  ASSERT_TRUE(set.pairs[0].lidar_pixel);
}

TEST(ImportCorrespondences, DirectPointsAndEmptyList) {
  ImportFixture f;
  nlohmann::json j = {{"source", "manual"}, {"matches", {{{"camera_px", {5, 6}}, {"lidar_point", {1, 2, 3}}}}}};
  const auto set = correspondences_from_json(j, f.cam, nullptr, nullptr);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.pairs[0].point, Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(set.pairs[0].confidence, 1.0);

  const auto empty = correspondences_from_json({{"source", "manual"}, {"matches", nlohmann::json::array()}}, f.cam, nullptr, nullptr);
  EXPECT_TRUE(empty.empty());
  EXPECT_THROW(ransac_rotation(empty, f.cam), InsufficientCorrespondencesError);
}

TEST(ImportCorrespondences, SchemaViolations) {
  ImportFixture f;
  auto expect_format_error = [&](const nlohmann::json& j, const std::string& needle) {
    try {
      correspondences_from_json(j, f.cam, &f.map, &f.cloud);
      ADD_FAILURE() << "accepted " << j.dump();
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_format_error(nlohmann::json::array(), "object");
  expect_format_error({{"source", "robot"}, {"matches", nlohmann::json::array()}}, "source");
  expect_format_error({{"source", "manual"}}, "matches");
  expect_format_error({{"matches", {match_px(10, 10, 0, 0), match_px(5000, 10, 0, 0)}}}, "matches[1].camera_px");
  expect_format_error({{"matches", {{{"camera_px", {1, 1}}, {"lidar_point", {1, 2, 3}}, {"confidence", 1.5}}}}}, "matches[0].confidence");
  expect_format_error({{"matches", {{{"camera_px", {1, 1}}, {"confidence", 0.5}}}}}, "matches[0]");
  expect_format_error({{"matches", {{{"camera_px", {1, 1, 1}}, {"lidar_point", {1, 2, 3}}}}}}, "matches[0].camera_px");
  expect_format_error({{"matches", {{{"camera_px", "here"}, {"lidar_point", {1, 2, 3}}}}}}, "invalid");
}

TEST(ImportCorrespondences, SyntaxErrorReportsLine) {
  ImportFixture f;
  TempDir dir;
  const auto path = dir.write("bad.json", "{\n  \"source\": \"manual\",\n  \"matches\": [\n    {\"camera_px\": [1, 2],,}\n  ]\n}\n");
  try {
    import_correspondences(path, f.cam, &f.map, &f.cloud);
    FAIL() << "accepted malformed JSON";
  } catch (const FormatError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(path), std::string::npos);
    EXPECT_NE(what.find("line 4"), std::string::npos) << what;
  }
  EXPECT_THROW(import_correspondences(dir.file("missing.json"), f.cam, &f.map, &f.cloud), IoError);
}

TEST(ImportCorrespondences, ExportRoundTrip) {
  ImportFixture f;
  TempDir dir;
  std::mt19937 mt(11);
  auto set = make_set(f.cam, synthetic::ground_truth_extrinsic(), 12, 0, 0.5, mt);
  set.pairs[3].lidar_pixel = Eigen::Vector2d(4.5, 4.5);
  set.pairs[5].confidence = 0.25;
  export_correspondences(dir.file("out.json"), set);
  const auto back = import_correspondences(dir.file("out.json"), f.cam, &f.map, &f.cloud);
  ASSERT_EQ(back.size(), set.size());
  for (std::size_t k = 0; k < set.size(); k++) {
    EXPECT_EQ(back.pairs[k].pixel, set.pairs[k].pixel);
    EXPECT_EQ(back.pairs[k].point, set.pairs[k].point);
    EXPECT_EQ(back.pairs[k].confidence, set.pairs[k].confidence);
  }
  EXPECT_EQ(back.pairs[3].lidar_pixel, set.pairs[3].lidar_pixel);
}
