//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/service.hpp"

#include <gtest/gtest.h>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <thread>

#include "mid/error.hpp"
#include "test_data.hpp"

#include <httplib.h>

namespace mid {
namespace {

using nlohmann::json;
using testing::qm9_csv;
using testing::TempDir;

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override { start(); }
  void TearDown() override { stop(); }

  void start() {
    ServiceConfig config;
    config.data_dir = tmp_.path() / "data";
    config.max_jobs = 2;
    service_ = std::make_unique<Service>(config);
    server_ = std::make_unique<httplib::Server>();
    service_->mount(*server_);
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void stop() {
    client_.reset();
    server_->stop();
    thread_.join();
    service_.reset();
  }

  std::string upload(std::size_t rows) {
    httplib::MultipartFormDataItems items = {{"file", qm9_csv(rows), "data.csv", "text/csv"}};
    auto res = client_->Post("/workspaces", items);
    EXPECT_EQ(res->status, 201) << res->body;
    return json::parse(res->body)["workspace"];
  }

  json run(const std::string &ws, const std::string &parent, const json &body, int expect = 202) {
    auto res = client_->Post("/workspaces/" + ws + "/nodes/" + parent + "/run", body.dump(),
                             "application/json");
    EXPECT_EQ(res->status, expect) << res->body;
    return json::parse(res->body);
  }

  // Polls until the job settles.
  json finish(const std::string &job) {
    for (int i = 0; i < 6000; ++i) {
      auto res = client_->Get("/jobs/" + job);
      const json j = json::parse(res->body);
      if (j["state"] == "done" || j["state"] == "failed") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ADD_FAILURE() << "job " << job << " did not finish";
    return {};
  }

  std::string run_done(const std::string &ws, const std::string &parent, const json &body) {
    const json j = finish(run(ws, parent, body)["id"]);
    EXPECT_EQ(j["state"], "done") << j.dump();
    return j["node"].is_string() ? j["node"].get<std::string>() : "";
  }

  TempDir tmp_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(ServiceTest, UploadTwoRows) {
  const std::string csv = "smiles,e_lumo,e_gap\nCCO,0.1,0.3\nC=O,0.0,0.25\n";
  httplib::MultipartFormDataItems items = {{"file", csv, "two.csv", "text/csv"}};
  auto res = client_->Post("/workspaces", items);
  ASSERT_EQ(res->status, 201);
  const std::string ws = json::parse(res->body)["workspace"];
  auto tree = client_->Get("/workspaces/" + ws + "/tree");
  ASSERT_EQ(tree->status, 200);
  EXPECT_EQ(json::parse(tree->body)["nodes"].size(), 1u);
}

TEST_F(ServiceTest, UploadErrorsCarryRowContext) {
  httplib::MultipartFormDataItems items = {
      {"file", "smiles,y\nCCO,1\nC1CC,2\n", "bad.csv", "text/csv"}};
  auto res = client_->Post("/workspaces", items);
  ASSERT_EQ(res->status, 400);
  const json body = json::parse(res->body);
  EXPECT_FALSE(body["code"].get<std::string>().empty());
  EXPECT_NE(body["message"].get<std::string>().find("row 2"), std::string::npos);
}

TEST_F(ServiceTest, ErrorStatuses) {
  const std::string ws = upload(20);
  const std::string root = service_->workspace(ws)->root_id();

  json body = run(ws, root, {{"method", "fit"}}, 400);
  EXPECT_EQ(body["code"], "unknown_method");
  EXPECT_NE(body["message"].get<std::string>().find("extract_features"), std::string::npos);

  body = run(ws, root, {{"method", "search"}}, 422);
  EXPECT_EQ(body["code"], "lineage_violation");
  run(ws, "missing-node", {{"method", "note"}}, 404);
  run("ws-nothere", root, {{"method", "note"}}, 404);
  run(ws, root, {{"params", json::object()}}, 400);

  auto res = client_->Post("/workspaces/" + ws + "/nodes/" + root + "/run", "{not json",
                           "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(client_->Get("/jobs/job-none")->status, 404);
  EXPECT_EQ(client_->Get("/nodes/../../etc")->status, 404);
  EXPECT_EQ(client_->Get("/nodes/" + root + "/model")->status, 422);
  EXPECT_EQ(client_->Get("/molecules/svg?smiles=C1CC")->status, 400);
  EXPECT_EQ(client_->Get("/molecules/svg")->status, 400);
}

TEST_F(ServiceTest, BadParamsFailTheJob) {
  const std::string ws = upload(20);
  const std::string root = service_->workspace(ws)->root_id();
  const json job = finish(run(ws, root, {{"method", "extract_features"}, {"params", {{"levels", "x"}}}})["id"]);
  EXPECT_EQ(job["state"], "failed");
  EXPECT_EQ(job["error"]["code"], "validation_error");
  EXPECT_TRUE(job["node"].is_null());
}

TEST_F(ServiceTest, LockConflictIs409) {
  const std::string ws = upload(10);
  const std::string root = service_->workspace(ws)->root_id();
  // Another process holding the writer lock looks the same as this.
  const auto lock_path = (tmp_.path() / "data" / "workspaces" / ws / "lock").string();
  const int fd = ::open(lock_path.c_str(), O_RDWR);
  ASSERT_GE(fd, 0);
  ASSERT_EQ(::flock(fd, LOCK_EX | LOCK_NB), 0);
  const json job = finish(run(ws, root, {{"method", "note"}, {"params", {{"text", "x"}}}})["id"]);
  EXPECT_EQ(job["state"], "failed");
  EXPECT_EQ(job["error"]["code"], "write_lock_conflict");
  EXPECT_EQ(http_status(job["error"]["code"]), 409);
  ::flock(fd, LOCK_UN);
  ::close(fd);
}

TEST_F(ServiceTest, NodesMoleculesAndSvg) {
  const std::string ws = upload(30);
  const std::string root = service_->workspace(ws)->root_id();
  auto res = client_->Get("/nodes/" + root);
  ASSERT_EQ(res->status, 200);
  json node = json::parse(res->body);
  EXPECT_EQ(node["kind"], "dataset");
  EXPECT_EQ(node["summary"]["rows"], 30);

  res = client_->Get("/nodes/" + root + "/molecules?offset=25&limit=10");
  ASSERT_EQ(res->status, 200);
  json page = json::parse(res->body);
  EXPECT_EQ(page["total"], 30);
  EXPECT_EQ(page["smiles"].size(), 5u);
  EXPECT_EQ(client_->Get("/nodes/" + root + "/molecules?limit=-1")->status, 400);

  res = client_->Get("/molecules/svg?smiles=c1ccccc1");
  ASSERT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/svg+xml");
  EXPECT_EQ(res->body.rfind("<svg", 0), 0u);
}

TEST_F(ServiceTest, PipelineThroughApi) {
  const std::string ws = upload(80);
  const std::string root = service_->workspace(ws)->root_id();
  const std::string f = run_done(ws, root, {{"method", "extract_features"}, {"params", {{"levels", {1, 2}}}}});
  const std::string m = run_done(
      ws, f, {{"method", "build_model"}, {"params", {{"folds", 3}, {"grid", {1e-2}}}}});
  auto res = client_->Get("/nodes/" + m + "/model");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["models"].size(), 2u);

  const json job = finish(run(ws, m,
                              {{"method", "search"},
                               {"params",
                                {{"targets", {{{"property", "e_lumo"}, {"target", 0.0}},
                                              {{"property", "e_gap"}, {"target", 0.25}}}},
                                 {"iterations", 30},
                                 {"swarm", 30},
                                 {"max_candidates", 5},
                                 {"index_max_atoms", 3}}}})["id"]);
  ASSERT_EQ(job["state"], "done") << job.dump();
  EXPECT_GT(job["progress"]["iteration"], 0);
  const std::string s = job["node"];
  res = client_->Get("/nodes/" + s + "/candidates");
  ASSERT_EQ(res->status, 200);
  const json cands = json::parse(res->body);
  EXPECT_EQ(cands["targets"].size(), 2u);
  EXPECT_LE(cands["candidates"].size(), 5u);

  const std::string g = run_done(
      ws, s, {{"method", "generate"}, {"params", {{"max_structures", 3}, {"time_budget_seconds", 2}}}});
  res = client_->Get("/nodes/" + g + "/molecules");
  ASSERT_EQ(res->status, 200);

  const json tree = json::parse(client_->Get("/workspaces/" + ws + "/tree")->body);
  EXPECT_EQ(tree["nodes"].size(), 5u);
  EXPECT_EQ(tree["nodes"][4]["depth"], 4);
}

TEST_F(ServiceTest, OneWriterPerWorkspace) {
  const std::string ws = upload(10);
  const std::string root = service_->workspace(ws)->root_id();
  std::vector<std::string> jobs;
  for (int i = 0; i < 6; ++i) {
    jobs.push_back(run(ws, root, {{"method", "note"}, {"params", {{"text", std::to_string(i)}}}})["id"]);
  }
  for (const auto &j : jobs) EXPECT_EQ(finish(j)["state"], "done");
  EXPECT_EQ(service_->workspace(ws)->nodes().size(), 7u);
}

TEST_F(ServiceTest, CancelQueuedAndRunning) {
  const std::string ws = upload(200);
  const std::string root = service_->workspace(ws)->root_id();
  const std::string f = run_done(ws, root, {{"method", "extract_features"}});
  // A long sweep followed by a job queued behind it on the same workspace.
  const std::string slow =
      run(ws, f, {{"method", "build_model"}, {"params", {{"kinds", {"lasso", "ridge", "elasticnet"}}}}})["id"];
  const std::string queued = run(ws, root, {{"method", "note"}})["id"];
  auto res = client_->Delete("/jobs/" + queued);
  ASSERT_EQ(res->status, 202);
  EXPECT_EQ(finish(queued)["error"]["code"], "cancelled");
  client_->Delete("/jobs/" + slow);
  const json j = finish(slow);
  EXPECT_EQ(j["state"], "failed");
  EXPECT_EQ(j["error"]["code"], "cancelled");
  EXPECT_EQ(service_->workspace(ws)->nodes().size(), 2u);
}

TEST_F(ServiceTest, RestartKeepsNodesAndFailsOpenJobs) {
  const std::string ws = upload(10);
  const std::string root = service_->workspace(ws)->root_id();
  const std::string n = run_done(ws, root, {{"method", "note"}, {"params", {{"text", "kept"}}}});
  // A job file left behind in the running state by a dead process.
  JobRecord orphan;
  orphan.id = "job-orphan";
  orphan.workspace = ws;
  orphan.parent = root;
  orphan.method = "note";
  orphan.params = json::object();
  orphan.state = JobState::Running;
  std::ofstream(tmp_.path() / "data" / "jobs" / "job-orphan.json") << orphan.to_json().dump();
  stop();
  start();
  const json j = json::parse(client_->Get("/jobs/job-orphan")->body);
  EXPECT_EQ(j["state"], "failed");
  EXPECT_EQ(j["error"]["code"], "failed_on_restart");
  EXPECT_EQ(client_->Get("/nodes/" + n)->status, 200);
}

TEST(ServiceConfig, Environment) {
  ::setenv("MID_DATA_DIR", "/tmp/x", 1);
  ::setenv("MID_BIND_ADDR", "0.0.0.0:9000", 1);
  ::setenv("MID_MAX_JOBS", "3", 1);
  const ServiceConfig c = ServiceConfig::from_environment();
  EXPECT_EQ(c.data_dir, "/tmp/x");
  EXPECT_EQ(c.bind_address, "0.0.0.0:9000");
  EXPECT_EQ(c.max_jobs, 3);
  ::setenv("MID_MAX_JOBS", "0", 1);
  EXPECT_THROW(ServiceConfig::from_environment(), ValidationError);
  ::unsetenv("MID_DATA_DIR");
  ::unsetenv("MID_BIND_ADDR");
  ::unsetenv("MID_MAX_JOBS");
}

}  // namespace
}  // namespace mid
