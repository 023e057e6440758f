//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <thread>

#include "mid/service.hpp"
#include "mid/workspace.hpp"
#include "test_data.hpp"

#include <httplib.h>

namespace mid {
namespace {

using nlohmann::json;
using testing::slurp;
using testing::TempDir;

struct Result {
  int status = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Result cli(const TempDir &dir, const std::string &args) {
  const std::string cmd = "cd '" + dir.path().string() + "' && '" MID_CLI_PATH "' " + args + " 2>&1";
  Result r;
  FILE *pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string first_line(const std::string &s) { return s.substr(0, s.find('\n')); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ofstream(tmp_.path() / "data.csv") << testing::qm9_csv(80);
  }

  // Runs and returns the printed node id.
  std::string step(const std::string &args) {
    const Result r = cli(tmp_, "-w ws " + args);
    EXPECT_EQ(r.status, 0) << args << "\n" << r.out;
    return first_line(r.out);
  }

  TempDir tmp_;
};

TEST_F(CliTest, FreshTreeHasOneNode) {
  const std::string root = step("ingest data.csv");
  const Result r = cli(tmp_, "-w ws tree");
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
  EXPECT_EQ(r.out.rfind(root, 0), 0u);
}

TEST_F(CliTest, UserErrorsExitOne) {
  step("ingest data.csv");
  step("featurize --levels 1");
  Result r = cli(tmp_, "-w ws train --folds 1");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("folds must be"), std::string::npos) << r.out;
  r = cli(tmp_, "-w ws select --parent nope-7");
  EXPECT_EQ(r.status, 1) << r.out;
  r = cli(tmp_, "-w ws ingest data.csv");
  EXPECT_EQ(r.status, 1) << r.out;
  r = cli(tmp_, "-w ws frobnicate");
  EXPECT_EQ(r.status, 1);
  r = cli(tmp_, "-w missing tree");
  EXPECT_NE(r.status, 0);
}

TEST_F(CliTest, LineageViolationIsRejected) {
  const std::string root = step("ingest data.csv");
  const Result r = cli(tmp_, "-w ws select --parent " + root);
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(Workspace::open(tmp_.path() / "ws").nodes().size(), 1u);
}

TEST_F(CliTest, EnumerateAlkanes) {
  const Result r = cli(tmp_, "enumerate --atoms C=6 --max-bond-order 1 --max-rings 0");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 5);
}

// The same six steps through the CLI and through the HTTP service produce
// byte-identical payloads.
TEST_F(CliTest, PayloadsMatchTheService) {
  std::vector<std::string> cli_nodes;
  cli_nodes.push_back(step("ingest data.csv"));
  cli_nodes.push_back(step("featurize --levels 1,2"));
  cli_nodes.push_back(step("train --folds 3 --grid 1e-2"));
  cli_nodes.push_back(step("search --target e_lumo=0 --target e_gap=0.25 --iterations 30 --swarm 30 "
                           "--max-candidates 5 --index-max-atoms 3"));
  cli_nodes.push_back(step("generate --max 3 --time-budget 0 --candidates 2"));
  cli_nodes.push_back(step("note 'same run'"));

  ServiceConfig config;
  config.data_dir = tmp_.path() / "data";
  Service service(config);
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  struct Stop {
    httplib::Server &server;
    std::thread &thread;
    ~Stop() {
      server.stop();
      thread.join();
    }
  } stop{server, thread};
  httplib::Client client("127.0.0.1", port);

  httplib::MultipartFormDataItems items = {{"file", slurp(tmp_.path() / "data.csv"), "data.csv", "text/csv"}};
  auto res = client.Post("/workspaces", items);
  ASSERT_EQ(res->status, 201) << res->body;
  const std::string ws = json::parse(res->body)["workspace"];
  std::vector<std::string> api_nodes{json::parse(res->body)["root"]};
  auto run = [&](const json &body) {
    auto r = client.Post("/workspaces/" + ws + "/nodes/" + api_nodes.back() + "/run", body.dump(),
                         "application/json");
    EXPECT_EQ(r->status, 202) << r->body;
    const std::string job = json::parse(r->body)["id"];
    json j;
    for (int i = 0; i < 3000; ++i) {
      j = json::parse(client.Get("/jobs/" + job)->body);
      if (j["state"] == "done" || j["state"] == "failed") break;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    EXPECT_EQ(j["state"], "done") << j.dump();
    api_nodes.push_back(j.value("node", ""));
  };
  run({{"method", "extract_features"}, {"params", {{"levels", {1, 2}}}}});
  run({{"method", "build_model"}, {"params", {{"folds", 3}, {"grid", {1e-2}}}}});
  run({{"method", "search"},
       {"params",
        {{"targets", {{{"property", "e_lumo"}, {"target", 0.0}}, {{"property", "e_gap"}, {"target", 0.25}}}},
         {"iterations", 30},
         {"swarm", 30},
         {"max_candidates", 5},
         {"index_max_atoms", 3}}}});
  run({{"method", "generate"}, {"params", {{"max_structures", 3}, {"time_budget_seconds", 0}, {"candidates", 2}}}});
  run({{"method", "note"}, {"params", {{"text", "same run"}}}});

  ASSERT_EQ(api_nodes.size(), cli_nodes.size());
  for (std::size_t i = 0; i < cli_nodes.size(); ++i) {
    const Result exported = cli(tmp_, "-w ws export " + cli_nodes[i] + " -");
    ASSERT_EQ(exported.status, 0) << exported.out;
    res = client.Get("/nodes/" + api_nodes[i] + "/payload");
    ASSERT_EQ(res->status, 200);
    EXPECT_EQ(exported.out, res->body) << "step " << i;
  }
  const json gen = json::parse(client.Get("/nodes/" + api_nodes[4] + "/payload")->body);
  EXPECT_EQ(gen["vectors"].size(), 2u);
}

}  // namespace
}  // namespace mid
