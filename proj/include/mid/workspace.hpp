//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

// Persistent tree of pipeline results. Layout of a workspace directory:
//
//   nodes.log        one JSON record per line, append-only
//   payloads/<hash>  content-addressed payload files (sha256 of bytes)
//   lock             advisory writer lock (flock)
//
// A node is appended only after its payload is durable, so a crash can
// lose at most the node being committed. A torn final log line is ignored
// on open and cut off by the next writer.

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mid/element.hpp"

namespace mid {

enum class NodeKind {
  Dataset,
  FeatureSet,
  MergedFeatureSet,
  Model,
  SearchResult,
  GenerationResult,
  Note
};

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view text);

struct NodeRecord {
  std::string id;
  std::string parent;  // empty for the root
  NodeKind kind = NodeKind::Dataset;
  std::string method;
  nlohmann::ordered_json params;  // normalized, defaults filled in
  std::string created_at;         // UTC, ISO 8601
  std::string payload;            // sha256 of the payload bytes
  std::size_t seq = 0;            // position in the log

  nlohmann::ordered_json to_json() const;
  static NodeRecord from_json(const nlohmann::json &doc);
};

struct RunControl {
  const std::atomic<bool> *cancel = nullptr;
  // Monotone progress counters, e.g. ("iteration", 17).
  std::function<void(const std::string &counter, std::int64_t value)> progress;
};

// What a method produces before it is committed.
struct MethodOutput {
  NodeKind kind = NodeKind::Note;
  std::string payload;
  std::vector<std::string> blobs;  // extra content-addressed files
};

class Workspace {
 public:
  // Creates the directory layout and the root dataset node from CSV text.
  static Workspace create(const std::filesystem::path &dir, std::string_view csv,
                          ElementSet elements = ElementSet::standard());
  static Workspace open(const std::filesystem::path &dir);
  static bool exists(const std::filesystem::path &dir);

  Workspace(Workspace &&other) noexcept;
  Workspace &operator=(Workspace &&other) noexcept;

  const std::filesystem::path &dir() const { return dir_; }
  std::string name() const { return dir_.filename().string(); }

  // Re-reads the log to pick up nodes committed by other processes.
  void refresh();
  std::vector<NodeRecord> nodes() const;
  NodeRecord node(std::string_view id) const;
  bool has_node(std::string_view id) const;
  std::string root_id() const;
  // Most recent node of one of the kinds; NotFoundError when none.
  std::string latest(std::initializer_list<NodeKind> kinds) const;

  std::string read_blob(const std::string &hash) const;
  std::string read_payload(const NodeRecord &node) const { return read_blob(node.payload); }
  nlohmann::json payload_json(const NodeRecord &node) const;

  // Runs a method on `parent` and commits the result as a new node.
  std::string run(const std::string &parent, const std::string &method,
                  const nlohmann::json &params = nlohmann::json::object(),
                  const RunControl &control = {});
  static const std::vector<std::string> &methods();

  // All nodes in creation order with their depth.
  nlohmann::ordered_json tree() const;
  std::string tree_text() const;

  // Called at commit stages ("payload", "log"); lets tests kill the
  // process at a precise point.
  static void set_commit_hook(std::function<void(const char *stage)> hook);

  std::string commit(const std::string &parent, const std::string &method,
                     const nlohmann::ordered_json &params, const MethodOutput &output);

 private:
  explicit Workspace(std::filesystem::path dir);
  void load(bool repair);
  std::string write_blob(const std::string &bytes);

  std::filesystem::path dir_;
  mutable std::unique_ptr<std::mutex> mutex_;
  std::vector<NodeRecord> nodes_;
  std::uintmax_t log_size_ = 0;
};

}  // namespace mid
