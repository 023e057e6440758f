//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/workspace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include <fstream>

#include "mid/error.hpp"
#include "mid/pipeline.hpp"
#include "test_data.hpp"

namespace mid {
namespace {

using testing::qm9_csv;
using testing::slurp;
using testing::TempDir;

const nlohmann::json kQuickModel = {{"folds", 3}, {"grid", {1e-2, 1e-1}}};

TEST(Workspace, CreateAndReopen) {
  TempDir tmp;
  const auto dir = tmp.path() / "ws";
  std::string root;
  {
    Workspace ws = Workspace::create(dir, qm9_csv(40));
    ASSERT_EQ(ws.nodes().size(), 1u);
    root = ws.root_id();
    const NodeRecord r = ws.node(root);
    EXPECT_EQ(r.kind, NodeKind::Dataset);
    EXPECT_EQ(r.method, "ingest_csv");
    EXPECT_EQ(load_dataset(ws).size(), 40u);
  }
  EXPECT_TRUE(Workspace::exists(dir));
  Workspace again = Workspace::open(dir);
  EXPECT_EQ(again.root_id(), root);
  EXPECT_THROW(Workspace::create(dir, qm9_csv(5)), ConflictError);
  EXPECT_THROW(Workspace::open(tmp.path() / "missing"), NotFoundError);
}

TEST(Workspace, RejectsBadCsv) {
  TempDir tmp;
  EXPECT_THROW(Workspace::create(tmp.path() / "ws", "smiles,y\nC1CC,1\n"), ValidationError);
  EXPECT_FALSE(Workspace::exists(tmp.path() / "ws"));
}

TEST(Workspace, PipelineLineage) {
  TempDir tmp;
  Workspace ws = Workspace::create(tmp.path() / "ws", qm9_csv(60));
  const std::string f = ws.run(ws.root_id(), "extract_features", {{"levels", {1, 2}}});
  EXPECT_EQ(ws.node(f).kind, NodeKind::FeatureSet);
  EXPECT_EQ(ws.node(f).params["levels"], nlohmann::json({1, 2}));

  const std::string m = ws.run(f, "build_model", kQuickModel);
  const auto models = load_models(ws, ws.node(m));
  ASSERT_EQ(models.size(), 2u);
  EXPECT_EQ(models[0].property, "e_lumo");
  EXPECT_GT(models[0].sigma, 0.0);
  // Defaults are written into the node.
  EXPECT_EQ(ws.node(m).params["kinds"], nlohmann::json({"lasso"}));
  EXPECT_EQ(ws.node(m).params["seed"], 0);

  const std::string s = ws.run(m, "select_features");
  EXPECT_EQ(ws.node(s).kind, NodeKind::FeatureSet);
  EXPECT_LE(load_schema(ws, ws.node(s))->size(), models[0].schema->size());

  EXPECT_THROW(ws.run(ws.root_id(), "build_model", kQuickModel), LineageError);
  EXPECT_THROW(ws.run(f, "search", {{"targets", nlohmann::json::array()}}), LineageError);
  EXPECT_THROW(ws.run(ws.root_id(), "generate"), LineageError);
  EXPECT_THROW(ws.run(f, "build_model", {{"folds", 1}}), ValidationError);
  EXPECT_THROW(ws.run(f, "build_model", {{"bogus", 1}}), ValidationError);
  EXPECT_THROW(ws.run("nope", "note"), NotFoundError);
  try {
    ws.run(f, "fit");
    FAIL();
  } catch (const ValidationError &e) {
    EXPECT_NE(std::string(e.what()).find("build_model"), std::string::npos);
  }
  // Failed runs commit nothing.
  EXPECT_EQ(ws.nodes().size(), 4u);
}

TEST(Workspace, SiblingsAndRerun) {
  TempDir tmp;
  Workspace ws = Workspace::create(tmp.path() / "ws", qm9_csv(30));
  const std::string a = ws.run(ws.root_id(), "extract_features", {{"levels", {1}}});
  const std::string b = ws.run(ws.root_id(), "extract_features", {{"levels", {1, 2}}});
  const std::string c = ws.run(ws.root_id(), "extract_features", {{"levels", {1}}});
  EXPECT_NE(a, b);
  EXPECT_NE(a, c);
  // Same inputs, same bytes: the payload is stored once.
  EXPECT_EQ(ws.node(a).payload, ws.node(c).payload);
  EXPECT_EQ(ws.node(a).parent, ws.node(b).parent);

  const std::string merged = ws.run(a, "merge_features", {{"other", b}});
  EXPECT_EQ(ws.node(merged).kind, NodeKind::MergedFeatureSet);
  EXPECT_EQ(load_schema(ws, ws.node(merged))->size(), load_schema(ws, ws.node(b))->size());

  const auto tree = ws.tree();
  ASSERT_EQ(tree.size(), 5u);
  EXPECT_EQ(tree[0]["depth"], 0);
  EXPECT_EQ(tree[4]["depth"], 2);
  EXPECT_NE(ws.tree_text().find("merge_features"), std::string::npos);
  EXPECT_EQ(ws.latest({NodeKind::FeatureSet, NodeKind::MergedFeatureSet}), merged);
}

TEST(Workspace, NotesHangAnywhere) {
  TempDir tmp;
  Workspace ws = Workspace::create(tmp.path() / "ws", qm9_csv(10));
  const std::string n = ws.run(ws.root_id(), "note", {{"text", "raw import"}});
  EXPECT_EQ(ws.payload_json(ws.node(n))["text"], "raw import");
  EXPECT_THROW(node_molecules(ws, ws.node(n)), ValidationError);
  EXPECT_EQ(node_molecules(ws, ws.node(ws.root_id())).size(), 10u);
}

TEST(Workspace, TornTailIsIgnoredAndRepaired) {
  TempDir tmp;
  const auto dir = tmp.path() / "ws";
  std::string first;
  {
    Workspace ws = Workspace::create(dir, qm9_csv(10));
    first = ws.run(ws.root_id(), "note", {{"text", "a"}});
  }
  const std::string before = slurp(dir / "nodes.log");
  {
    std::ofstream out(dir / "nodes.log", std::ios::app | std::ios::binary);
    out << R"({"id":"deadbeef-2","parent":)";
  }
  Workspace ws = Workspace::open(dir);
  EXPECT_EQ(ws.nodes().size(), 2u);
  const std::string second = ws.run(first, "note", {{"text", "b"}});
  const std::string after = slurp(dir / "nodes.log");
  EXPECT_EQ(after.substr(0, before.size()), before);
  Workspace reopened = Workspace::open(dir);
  EXPECT_EQ(reopened.nodes().size(), 3u);
  EXPECT_TRUE(reopened.has_node(second));
}

TEST(Workspace, CorruptMiddleLineIsAnError) {
  TempDir tmp;
  const auto dir = tmp.path() / "ws";
  {
    Workspace ws = Workspace::create(dir, qm9_csv(10));
    ws.run(ws.root_id(), "note", {{"text", "a"}});
  }
  std::string log = slurp(dir / "nodes.log");
  log.insert(log.find('\n') + 1, "garbage\n");
  std::ofstream(dir / "nodes.log", std::ios::binary | std::ios::trunc) << log;
  try {
    Workspace::open(dir);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), "corrupt_workspace");
  }
}

TEST(Workspace, MissingPayloadIsAnError) {
  TempDir tmp;
  const auto dir = tmp.path() / "ws";
  std::string hash;
  {
    Workspace ws = Workspace::create(dir, qm9_csv(10));
    hash = ws.node(ws.run(ws.root_id(), "note", {{"text", "x"}})).payload;
  }
  std::filesystem::remove(dir / "payloads" / hash);
  EXPECT_THROW(Workspace::open(dir), Error);
}

TEST(Workspace, SecondWriterGetsConflict) {
  TempDir tmp;
  const auto dir = tmp.path() / "ws";
  Workspace ws = Workspace::create(dir, qm9_csv(10));
  const int fd = ::open((dir / "lock").c_str(), O_RDWR | O_CREAT, 0644);
  ASSERT_GE(fd, 0);
  ASSERT_EQ(::flock(fd, LOCK_EX | LOCK_NB), 0);
  try {
    ws.run(ws.root_id(), "note", {{"text", "blocked"}});
    FAIL();
  } catch (const ConflictError &e) {
    EXPECT_EQ(e.code(), "write_lock_conflict");
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
  EXPECT_NO_THROW(ws.run(ws.root_id(), "note", {{"text", "free"}}));
}

TEST(Workspace, RefreshSeesOtherWriters) {
  TempDir tmp;
  const auto dir = tmp.path() / "ws";
  Workspace a = Workspace::create(dir, qm9_csv(10));
  Workspace b = Workspace::open(dir);
  const std::string n = a.run(a.root_id(), "note", {{"text", "from a"}});
  EXPECT_FALSE(b.has_node(n));
  b.refresh();
  EXPECT_TRUE(b.has_node(n));
  // b commits on top of a's node without losing it.
  b.run(n, "note", {{"text", "from b"}});
  a.refresh();
  EXPECT_EQ(a.nodes().size(), 3u);
}

// Runs one note commit in a child that dies at `stage`.
int commit_and_die(const std::filesystem::path &dir, const std::string &parent,
                   const char *stage) {
  const pid_t pid = fork();
  if (pid == 0) {
    Workspace::set_commit_hook([stage](const char *at) {
      if (std::string(at) == stage) ::kill(::getpid(), SIGKILL);
    });
    Workspace ws = Workspace::open(dir);
    ws.run(parent, "note", {{"text", std::string("child ") + stage}});
    ::_exit(0);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  return status;
}

TEST(Workspace, KillDuringCommit) {
  TempDir tmp;
  const auto dir = tmp.path() / "ws";
  std::string root;
  {
    Workspace ws = Workspace::create(dir, qm9_csv(10));
    root = ws.root_id();
  }
  // Killed after the payload is written but before the log line.
  int status = commit_and_die(dir, root, "payload");
  ASSERT_TRUE(WIFSIGNALED(status));
  EXPECT_EQ(Workspace::open(dir).nodes().size(), 1u);
  // Killed right after the log line is durable.
  status = commit_and_die(dir, root, "log");
  ASSERT_TRUE(WIFSIGNALED(status));
  Workspace ws = Workspace::open(dir);
  ASSERT_EQ(ws.nodes().size(), 2u);
  EXPECT_EQ(ws.payload_json(ws.nodes()[1])["text"], "child log");
  // The lock died with the child.
  EXPECT_NO_THROW(ws.run(root, "note", {{"text", "after"}}));
}

TEST(NodeKind, Names) {
  for (NodeKind k : {NodeKind::Dataset, NodeKind::FeatureSet, NodeKind::MergedFeatureSet,
                     NodeKind::Model, NodeKind::SearchResult, NodeKind::GenerationResult,
                     NodeKind::Note}) {
    EXPECT_EQ(node_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(node_kind_from_string("tree"), ValidationError);
}

}  // namespace
}  // namespace mid
