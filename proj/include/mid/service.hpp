//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

// HTTP front end over a directory of workspaces. Runs are asynchronous
// jobs; at most one job writes to a workspace at a time.
//
//   <data_dir>/workspaces/<id>/   one workspace per upload
//   <data_dir>/jobs/<id>.json     last known state of each job

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mid/workspace.hpp"

namespace httplib {
class Server;
}

namespace mid {

struct ServiceConfig {
  std::filesystem::path data_dir = "mid-data";
  std::string bind_address = "127.0.0.1:8080";
  int max_jobs = 2;

  // MID_DATA_DIR, MID_BIND_ADDR and MID_MAX_JOBS override the defaults.
  static ServiceConfig from_environment();
};

enum class JobState { Queued, Running, Done, Failed };
std::string_view to_string(JobState state);

struct JobRecord {
  std::string id;
  std::string workspace;
  std::string parent;
  std::string method;
  nlohmann::json params;
  JobState state = JobState::Queued;
  std::string node;  // set once done
  std::map<std::string, std::int64_t> progress;
  std::string error_code;
  std::string error_message;
  std::string created_at;

  nlohmann::ordered_json to_json() const;
  static JobRecord from_json(const nlohmann::json &doc);
};

// HTTP status for an error code.
int http_status(const std::string &code);

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service &) = delete;
  Service &operator=(const Service &) = delete;

  // Registers every route on `server`.
  void mount(httplib::Server &server);

  std::string create_workspace(std::string_view csv, ElementSet elements);
  std::shared_ptr<Workspace> workspace(const std::string &id);
  std::vector<std::string> workspace_ids() const;

  // Synchronously checks the method and parent, then queues the run.
  std::string submit(const std::string &workspace, const std::string &parent,
                     const std::string &method, const nlohmann::json &params);
  JobRecord job(const std::string &id) const;
  JobRecord cancel(const std::string &id);
  // Blocks until the job is done or failed; for tests and the CLI.
  JobRecord wait(const std::string &id);

  // Finds the workspace holding a node.
  std::pair<std::shared_ptr<Workspace>, NodeRecord> find_node(const std::string &node_id);

  const ServiceConfig &config() const { return config_; }

 private:
  struct Job {
    JobRecord record;
    std::atomic<bool> cancel{false};
  };

  void worker();
  void persist(const JobRecord &record) const;
  void recover_jobs();
  std::shared_ptr<Job> find_job(const std::string &id) const;

  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::condition_variable changed_;
  std::map<std::string, std::shared_ptr<Workspace>> workspaces_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::map<std::string, bool> busy_;  // workspace -> a job is running
  std::uint64_t job_counter_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace mid
