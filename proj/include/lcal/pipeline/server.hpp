#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include <lcal/cloud/image_io.hpp>
#include <lcal/cloud/ply_io.hpp>
#include <lcal/error.hpp>
#include <lcal/geom/camera_io.hpp>
#include <lcal/geom/transform_io.hpp>
#include <lcal/init/correspondences.hpp>
#include <lcal/nid/fine_registration.hpp>
#include <lcal/pipeline/config.hpp>
#include <lcal/pipeline/overlay.hpp>
#include <lcal/pipeline/stages.hpp>
#include <lcal/vcam/virtual_camera.hpp>

namespace lcal {

struct ServerOptions {
  std::size_t pair = 0;                  ///< the data pair annotated in this session
  std::optional<std::string> static_dir;  ///< annotation UI assets served at /
};

/// Single-session annotation and calibration service over one data pair.
///
/// Reads are concurrent; every mutation, and the commit of a finished job, goes through one
/// mutex. At most one calibration job runs at a time. Only the session's output directory is
/// ever written.
class CalibrationServer {
public:
  struct Job {
    int id = 0;
    std::string stage;
    std::string status = "queued";  // queued | running | done | failed
    nlohmann::json result;
    std::string error;
  };

  CalibrationServer(PipelineConfig config, ServerOptions options = {}) : config_(std::move(config)), options_(std::move(options)), ws_(config_.output_dir) {
    config_.validate();
    if (options_.pair >= config_.pairs.size()) throw ArgumentError("session pair index out of range");
    prepare_artifacts();
    load_session();
    routes();
  }

  ~CalibrationServer() {
    stop();
    if (worker_.joinable()) worker_.join();
  }

  CalibrationServer(const CalibrationServer&) = delete;
  CalibrationServer& operator=(const CalibrationServer&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
      bound = server_.bind_to_any_port(host);
    } else if (!server_.bind_to_port(host, port)) {
      bound = -1;
    }
    if (bound < 0) throw IoError("cannot listen on " + host + ":" + std::to_string(port) + " (address in use?)");
    return bound;
  }

  /// Serves until stop(); call bind() first.
  void listen() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

private:
  static void reply_error(httplib::Response& res, int status, const std::string& reason, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"reason", reason}, {"error", message}}.dump(), "application/json");
  }

  static void reply_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  void prepare_artifacts() {
    const std::size_t k = options_.pair;
    const bool have = std::filesystem::is_regular_file(ws_.dense_cloud(k)) && std::filesystem::is_regular_file(ws_.camera_image(k)) &&
                      std::filesystem::is_regular_file(ws_.index_map(k)) && std::filesystem::is_regular_file(ws_.virtual_camera(k)) &&
                      std::filesystem::is_regular_file(ws_.lidar_image(k));
    if (have) return;
    std::filesystem::create_directories(config_.output_dir);
    stage_preprocess(config_);
    stage_fov(config_);
    stage_render(config_);
  }

  void load_session() {
    const std::size_t k = options_.pair;
    cam_ = load_camera(config_.camera);
    cloud_ = load_cloud(ws_.dense_cloud(k)).cloud;
    camera_image_ = load_png_gray(ws_.camera_image(k));
    lidar_image_ = load_png_gray(ws_.lidar_image(k));
    index_map_ = load_index_map(ws_.index_map(k));
    virtual_camera_ = virtual_camera_from_json(stage_detail::read_json(ws_.virtual_camera(k)));
    camera_png_ = encode_png(camera_image_);
    lidar_png_ = encode_png(lidar_image_);
    if (std::filesystem::is_regular_file(ws_.manual_correspondences(k))) {
      manual_ = import_correspondences(ws_.manual_correspondences(k), cam_, &index_map_, &cloud_);
    }
    manual_.source = "manual";
  }

  void persist() const { export_correspondences(ws_.manual_correspondences(options_.pair), manual_); }

  nlohmann::json correspondences_json() const {
    auto j = correspondences_to_json(manual_);
    for (std::size_t i = 0; i < j["matches"].size(); i++) j["matches"][i]["id"] = i;
    return j;
  }

  nlohmann::json job_json(const Job& job) const {
    nlohmann::json j = {{"id", job.id}, {"stage", job.stage}, {"status", job.status}};
    if (!job.result.is_null()) j["result"] = job.result;
    if (!job.error.empty()) j["error"] = job.error;
    return j;
  }

  void routes() {
    // httplib defaults to SO_REUSEPORT, which lets a second server share the port without error
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    if (options_.static_dir) server_.set_mount_point("/", *options_.static_dir);

    server_.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      nlohmann::json j;
      j["pair"] = options_.pair;
      j["camera"] = camera_to_json(cam_);
      j["lidar_image"] = {{"width", lidar_image_.width}, {"height", lidar_image_.height}};
      j["virtual_camera"] = virtual_camera_to_json(virtual_camera_);
      j["correspondences"] = manual_.size();
      j["estimate"] = estimate_ ? transform_to_json(*estimate_) : nlohmann::json(nullptr);
      j["nid"] = nid_ ? nlohmann::json(*nid_) : nlohmann::json(nullptr);
      j["stages"] = {{"init", init_done_}, {"fine", fine_done_}};
      j["job"] = jobs_.empty() ? nlohmann::json(nullptr) : job_json(jobs_.rbegin()->second);
      reply_json(res, j);
    });

    server_.Get("/api/image/camera", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(reinterpret_cast<const char*>(camera_png_.data()), camera_png_.size(), "image/png");
    });
    server_.Get("/api/image/lidar", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(reinterpret_cast<const char*>(lidar_png_.data()), lidar_png_.size(), "image/png");
    });

    server_.Get("/api/indexmap/lookup", [this](const httplib::Request& req, httplib::Response& res) {
      double u = 0.0, v = 0.0;
      try {
        u = std::stod(req.get_param_value("u"));
        v = std::stod(req.get_param_value("v"));
      } catch (const std::exception&) {
        return reply_error(res, 400, "invalid_query", "u and v must be numbers");
      }
      if (!std::isfinite(u) || !std::isfinite(v)) return reply_error(res, 400, "invalid_query", "u and v must be finite");
      const auto index = index_map_.lookup_window(static_cast<int>(std::floor(u)), static_cast<int>(std::floor(v)));
      if (!index) return reply_error(res, 404, "no_point", "no LiDAR point near this pixel");
      const auto& p = cloud_.points[*index];
      reply_json(res, {{"point", {p.x(), p.y(), p.z()}}, {"index", *index}});
    });

    server_.Get("/api/correspondences", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      reply_json(res, correspondences_json());
    });

    server_.Post("/api/correspondences", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::parse_error& e) {
        return reply_error(res, 400, "invalid_json", e.what());
      }
      CorrespondenceSet parsed;
      try {
        parsed = correspondences_from_json({{"source", "manual"}, {"matches", {body}}}, cam_, &index_map_, &cloud_);
      } catch (const Error& e) {
        std::string message = e.what();
        const std::string prefix = "matches[0]";
        if (const auto at = message.find(prefix); at != std::string::npos) message.replace(at, prefix.size(), "match");
        return reply_error(res, 400, "invalid_payload", message);
      }
      if (parsed.empty()) return reply_error(res, 400, "no_lidar_point", "no LiDAR point near lidar_px");
      std::lock_guard lock(mutex_);
      manual_.pairs.push_back(parsed.pairs.front());
      persist();
      auto j = correspondences_to_json(parsed)["matches"][0];
      j["id"] = manual_.size() - 1;
      reply_json(res, j, 201);
    });

    server_.Delete(R"(/api/correspondences/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      const auto id = std::stoull(req.matches[1].str());
      if (id >= manual_.size()) return reply_error(res, 404, "unknown_id", "no correspondence with id " + req.matches[1].str());
      manual_.pairs.erase(manual_.pairs.begin() + static_cast<std::ptrdiff_t>(id));
      persist();
      reply_json(res, correspondences_json());
    });

    server_.Delete("/api/correspondences", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      manual_.pairs.clear();
      persist();
      reply_json(res, correspondences_json());
    });

    server_.Post("/api/calibrate", [this](const httplib::Request& req, httplib::Response& res) { start_job(req, res); });

    server_.Get(R"(/api/job/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      const auto it = jobs_.find(std::stoi(req.matches[1].str()));
      if (it == jobs_.end()) return reply_error(res, 404, "unknown_job", "no job " + req.matches[1].str());
      reply_json(res, job_json(it->second));
    });

    server_.Get("/api/overlay", [this](const httplib::Request&, httplib::Response& res) {
      std::optional<RigidTransform> T;
      {
        std::lock_guard lock(mutex_);
        T = estimate_;
      }
      if (!T) return reply_error(res, 404, "no_estimate", "no transform estimate yet; run a calibration first");
      const auto png = encode_png(render_overlay(cloud_, camera_image_, cam_, *T));
      res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
    });
  }

  void start_job(const httplib::Request& req, httplib::Response& res) {
    std::string stage;
    try {
      stage = nlohmann::json::parse(req.body).at("stage").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      return reply_error(res, 400, "invalid_payload", std::string("expected {\"stage\": \"init\"|\"fine\"|\"both\"}: ") + e.what());
    }
    if (stage != "init" && stage != "fine" && stage != "both") {
      return reply_error(res, 400, "invalid_stage", "stage must be \"init\", \"fine\" or \"both\"");
    }

    std::lock_guard lock(mutex_);
    if (job_running_) return reply_error(res, 409, "job_running", "a calibration job is already running");
    const std::size_t n = manual_.size();
    if (stage == "fine" && n < 3) return reply_error(res, 400, "insufficient_pairs", "≥3 pairs required for the fine stage");
    if (stage == "fine" && !estimate_) return reply_error(res, 400, "no_estimate", "run the init stage before the fine stage");
    if (stage != "fine" && n < 2) return reply_error(res, 400, "insufficient_pairs", "≥2 pairs required for the init stage");

    if (worker_.joinable()) worker_.join();
    const int id = next_job_id_++;
    Job& job = jobs_[id];
    job.id = id;
    job.stage = stage;
    job.status = "running";
    job_running_ = true;
    worker_ = std::thread([this, id, stage, corr = manual_, start = estimate_] { run_job(id, stage, corr, start); });
    reply_json(res, {{"job", id}}, 202);
  }

  void run_job(int id, const std::string& stage, const CorrespondenceSet& corr, std::optional<RigidTransform> estimate) {
    nlohmann::json result;
    std::optional<double> nid;
    bool init_ran = false, fine_ran = false;
    std::string error;
    try {
      if (stage != "fine") {
        RansacParams ransac = config_.ransac;
        ransac.seed = derive_seed(config_.seed, 1);
        const auto init = estimate_initial_guess(corr, cam_, ransac, config_.refine);
        estimate = init.T_camera_lidar;
        init_ran = true;
        result["init"] = {{"T_camera_lidar", transform_to_json(init.T_camera_lidar)}, {"num_inliers", init.ransac.num_inliers}, {"inliers", init.ransac.inliers}, {"warnings", init.warnings}};
      }
      if (stage != "init") {
        if (corr.size() < 3) {
          result["fine"] = {{"refused", "≥3 pairs required"}};
        } else {
          const std::vector<LidarCameraPair> pairs{{cloud_, camera_image_}};
          const auto fine = calibrate_fine(pairs, cam_, *estimate, config_.fine);
          estimate = fine.T_camera_lidar;
          nid = fine.final_nid;
          fine_ran = true;
          result["fine"] = calibration_result_json(fine);
          result["fine"]["warnings"] = fine.warnings;
        }
      }
    } catch (const std::exception& e) {
      error = e.what();
    }

    std::lock_guard lock(mutex_);
    Job& job = jobs_[id];
    if (error.empty()) {
      job.status = "done";
      job.result = result;
      estimate_ = estimate;
      if (init_ran) {
        init_done_ = true;
        nid_.reset();
        fine_done_ = false;
      }
      if (fine_ran) {
        fine_done_ = true;
        nid_ = nid;
      }
      job.result["T_camera_lidar"] = transform_to_json(*estimate_);
    } else {
      job.status = "failed";
      job.error = error;
    }
    job_running_ = false;
  }

  PipelineConfig config_;
  ServerOptions options_;
  Workspace ws_;
  httplib::Server server_;

  CameraModel cam_;
  PointCloud cloud_;
  GrayImage camera_image_;
  GrayImage lidar_image_;
  IndexMap index_map_;
  VirtualCamera virtual_camera_;
  std::vector<std::uint8_t> camera_png_;
  std::vector<std::uint8_t> lidar_png_;

  std::mutex mutex_;
  CorrespondenceSet manual_;
  std::optional<RigidTransform> estimate_;
  std::optional<double> nid_;
  bool init_done_ = false;
  bool fine_done_ = false;
  std::map<int, Job> jobs_;
  int next_job_id_ = 1;
  bool job_running_ = false;
  std::thread worker_;
};

}  // namespace lcal
