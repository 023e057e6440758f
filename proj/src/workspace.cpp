//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/workspace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "mid/dataset.hpp"
#include "mid/error.hpp"
#include "mid/hash.hpp"
#include "mid/pipeline.hpp"

namespace mid {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 7> kKindNames = {
    "dataset", "feature-set", "merged-feature-set", "model", "search-result", "generation-result",
    "note"};

std::function<void(const char *)> &commit_hook() {
  static std::function<void(const char *)> hook;
  return hook;
}

void hook(const char *stage) {
  if (commit_hook()) commit_hook()(stage);
}

[[noreturn]] void io_error(const std::string &what, const fs::path &path) {
  throw Error("io_error", what + " " + path.string() + ": " + std::strerror(errno));
}

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd &) = delete;
  Fd &operator=(const Fd &) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

void write_all(int fd, std::string_view bytes, const fs::path &path) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      io_error("cannot write", path);
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

void sync_dir(const fs::path &dir) {
  Fd fd(::open(dir.c_str(), O_RDONLY | O_DIRECTORY));
  if (fd.get() < 0) io_error("cannot open directory", dir);
  ::fsync(fd.get());
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

// Holds the advisory writer lock for the lifetime of the object.
class WriterLock {
 public:
  explicit WriterLock(const fs::path &dir) : fd_(::open((dir / "lock").c_str(), O_RDWR | O_CREAT, 0644)) {
    if (fd_.get() < 0) io_error("cannot open lock file in", dir);
    if (::flock(fd_.get(), LOCK_EX | LOCK_NB) != 0) {
      if (errno == EWOULDBLOCK) {
        throw ConflictError("workspace " + dir.filename().string() +
                            " is locked by another writer");
      }
      io_error("cannot lock", dir);
    }
  }
  ~WriterLock() { ::flock(fd_.get(), LOCK_UN); }

 private:
  Fd fd_;
};

}  // namespace

std::string_view to_string(NodeKind kind) { return kKindNames[static_cast<int>(kind)]; }

NodeKind node_kind_from_string(std::string_view text) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == text) return static_cast<NodeKind>(i);
  }
  throw ValidationError("unknown node kind '" + std::string(text) + "'");
}

nlohmann::ordered_json NodeRecord::to_json() const {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["parent"] = parent.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(parent);
  j["kind"] = to_string(kind);
  j["method"] = method;
  j["params"] = params;
  j["created_at"] = created_at;
  j["payload"] = payload;
  j["seq"] = seq;
  return j;
}

NodeRecord NodeRecord::from_json(const nlohmann::json &j) {
  NodeRecord r;
  r.id = j.at("id").get<std::string>();
  r.parent = j.at("parent").is_null() ? "" : j.at("parent").get<std::string>();
  r.kind = node_kind_from_string(j.at("kind").get<std::string>());
  r.method = j.at("method").get<std::string>();
  r.params = j.at("params");
  r.created_at = j.at("created_at").get<std::string>();
  r.payload = j.at("payload").get<std::string>();
  r.seq = j.at("seq").get<std::size_t>();
  return r;
}

Workspace::Workspace(fs::path dir) : dir_(std::move(dir)), mutex_(std::make_unique<std::mutex>()) {}
Workspace::Workspace(Workspace &&other) noexcept = default;
Workspace &Workspace::operator=(Workspace &&other) noexcept = default;

bool Workspace::exists(const fs::path &dir) { return fs::exists(dir / "nodes.log"); }

Workspace Workspace::create(const fs::path &dir, std::string_view csv, ElementSet elements) {
  if (exists(dir)) throw ConflictError("workspace " + dir.string() + " already exists");
  // Parse before touching the disk so a bad file leaves nothing behind.
  MethodOutput root = ingest_csv(csv, elements);
  std::error_code ec;
  fs::create_directories(dir / "payloads", ec);
  if (ec) throw Error("io_error", "cannot create " + dir.string() + ": " + ec.message());
  Workspace ws(dir);
  {
    WriterLock lock(dir);
    Fd fd(::open((dir / "nodes.log").c_str(), O_WRONLY | O_CREAT, 0644));
    if (fd.get() < 0) io_error("cannot create", dir / "nodes.log");
    ::fsync(fd.get());
  }
  sync_dir(dir);
  nlohmann::ordered_json params;
  params["elements"] = elements.to_string();
  ws.commit("", "ingest_csv", params, root);
  return ws;
}

Workspace Workspace::open(const fs::path &dir) {
  if (!exists(dir)) throw NotFoundError("no workspace at " + dir.string());
  Workspace ws(dir);
  ws.load(false);
  if (ws.nodes_.empty()) throw NotFoundError("workspace " + dir.string() + " has no root node");
  return ws;
}

void Workspace::load(bool repair) {
  const fs::path log = dir_ / "nodes.log";
  std::string text = read_file(log);
  const auto last_newline = text.rfind('\n');
  const std::size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (complete < text.size() && repair) {
    // A writer died mid-append; drop the fragment before appending.
    if (::truncate(log.c_str(), static_cast<off_t>(complete)) != 0) io_error("cannot repair", log);
  }
  std::vector<NodeRecord> nodes;
  std::size_t line_no = 0, start = 0;
  while (start < complete) {
    const auto end = text.find('\n', start);
    ++line_no;
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    try {
      NodeRecord r = NodeRecord::from_json(nlohmann::json::parse(line));
      if (r.seq != nodes.size()) throw ValidationError("sequence gap");
      if (!r.parent.empty() &&
          std::none_of(nodes.begin(), nodes.end(), [&](const NodeRecord &n) { return n.id == r.parent; })) {
        throw ValidationError("parent " + r.parent + " precedes no child");
      }
      if (!fs::exists(dir_ / "payloads" / r.payload)) throw ValidationError("missing payload");
      nodes.push_back(std::move(r));
    } catch (const std::exception &e) {
      throw Error("corrupt_workspace", "nodes.log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  nodes_ = std::move(nodes);
  log_size_ = complete;
}

void Workspace::refresh() {
  std::lock_guard guard(*mutex_);
  load(false);
}

std::vector<NodeRecord> Workspace::nodes() const {
  std::lock_guard guard(*mutex_);
  return nodes_;
}

NodeRecord Workspace::node(std::string_view id) const {
  std::lock_guard guard(*mutex_);
  for (const auto &n : nodes_) {
    if (n.id == id) return n;
  }
  throw NotFoundError("unknown node '" + std::string(id) + "'");
}

bool Workspace::has_node(std::string_view id) const {
  std::lock_guard guard(*mutex_);
  return std::any_of(nodes_.begin(), nodes_.end(), [&](const NodeRecord &n) { return n.id == id; });
}

std::string Workspace::root_id() const {
  std::lock_guard guard(*mutex_);
  return nodes_.front().id;
}

std::string Workspace::latest(std::initializer_list<NodeKind> kinds) const {
  std::lock_guard guard(*mutex_);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (std::find(kinds.begin(), kinds.end(), it->kind) != kinds.end()) return it->id;
  }
  std::string names;
  for (NodeKind k : kinds) names += (names.empty() ? "" : " or ") + std::string(to_string(k));
  throw NotFoundError("workspace has no " + names + " node");
}

std::string Workspace::read_blob(const std::string &hash) const {
  if (hash.size() != 64 || hash.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw NotFoundError("malformed payload reference '" + hash + "'");
  }
  return read_file(dir_ / "payloads" / hash);
}

nlohmann::json Workspace::payload_json(const NodeRecord &node) const {
  return nlohmann::json::parse(read_payload(node));
}

std::string Workspace::write_blob(const std::string &bytes) {
  const std::string hash = sha256_hex(bytes);
  const fs::path dir = dir_ / "payloads";
  const fs::path target = dir / hash;
  if (fs::exists(target) && read_file(target) == bytes) return hash;
  const fs::path tmp = dir / (hash + ".tmp");
  {
    Fd fd(::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644));
    if (fd.get() < 0) io_error("cannot create", tmp);
    write_all(fd.get(), bytes, tmp);
    if (::fsync(fd.get()) != 0) io_error("cannot sync", tmp);
  }
  if (::rename(tmp.c_str(), target.c_str()) != 0) io_error("cannot rename", tmp);
  sync_dir(dir);
  return hash;
}

std::string Workspace::commit(const std::string &parent_ref, const std::string &method,
                              const nlohmann::ordered_json &params, const MethodOutput &output) {
  // The caller may pass a reference into nodes_, which load() replaces.
  const std::string parent = parent_ref;
  std::lock_guard guard(*mutex_);
  WriterLock lock(dir_);
  load(true);
  if (!parent.empty() &&
      std::none_of(nodes_.begin(), nodes_.end(), [&](const NodeRecord &n) { return n.id == parent; })) {
    throw NotFoundError("unknown node '" + parent + "'");
  }
  if (parent.empty() && !nodes_.empty()) throw ValidationError("workspace already has a root");

  for (const auto &blob : output.blobs) write_blob(blob);
  NodeRecord r;
  r.parent = parent;
  r.kind = output.kind;
  r.method = method;
  r.params = params;
  r.payload = write_blob(output.payload);
  hook("payload");
  r.seq = nodes_.size();
  r.id = sha256_hex(name() + "\n" + parent + "\n" + method + "\n" + params.dump() + "\n" +
                    r.payload + "\n" + std::to_string(r.seq))
             .substr(0, 12) +
         "-" + std::to_string(r.seq);
  r.created_at = utc_now();

  const fs::path log = dir_ / "nodes.log";
  const std::string line = r.to_json().dump() + "\n";
  {
    Fd fd(::open(log.c_str(), O_WRONLY | O_APPEND));
    if (fd.get() < 0) io_error("cannot open", log);
    write_all(fd.get(), line, log);
    if (::fsync(fd.get()) != 0) io_error("cannot sync", log);
  }
  log_size_ += line.size();
  nodes_.push_back(r);
  hook("log");
  return r.id;
}

std::string Workspace::run(const std::string &parent_ref, const std::string &method,
                           const nlohmann::json &params, const RunControl &control) {
  const std::string parent = parent_ref;
  const NodeRecord p = node(parent);
  auto [normalized, output] = run_method(*this, p, method, params, control);
  return commit(parent, method, normalized, output);
}

nlohmann::ordered_json Workspace::tree() const {
  const auto all = nodes();
  std::map<std::string, int> depth;
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto &n : all) {
    const int d = n.parent.empty() ? 0 : depth[n.parent] + 1;
    depth[n.id] = d;
    nlohmann::ordered_json j;
    j["id"] = n.id;
    j["parent"] = n.parent.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(n.parent);
    j["depth"] = d;
    j["kind"] = to_string(n.kind);
    j["method"] = n.method;
    j["params"] = n.params;
    j["created_at"] = n.created_at;
    out.push_back(std::move(j));
  }
  return out;
}

std::string Workspace::tree_text() const {
  std::string out;
  for (const auto &j : tree()) {
    out += std::string(2 * j["depth"].get<std::size_t>(), ' ') + j["id"].get<std::string>() + "  " +
           j["kind"].get<std::string>() + "  " + j["method"].get<std::string>();
    const std::string params = j["params"].dump();
    out += "  " + (params.size() > 80 ? params.substr(0, 77) + "..." : params) + "\n";
  }
  return out;
}

void Workspace::set_commit_hook(std::function<void(const char *)> h) { commit_hook() = std::move(h); }

}  // namespace mid
