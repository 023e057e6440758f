//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mid/depict.hpp"
#include "mid/error.hpp"
#include "mid/hash.hpp"
#include "mid/pipeline.hpp"
#include "mid/smiles.hpp"

// After Eigen: <resolv.h> defines a macro named _res.
#include <httplib.h>

namespace mid {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 4> kStateNames = {"queued", "running", "done", "failed"};

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fresh_id(const std::string &prefix, const std::string &salt, std::uint64_t counter) {
  const auto ticks = std::chrono::steady_clock::now().time_since_epoch().count();
  return prefix + sha256_hex(salt + "\n" + std::to_string(ticks) + "\n" + std::to_string(counter) +
                             "\n" + std::to_string(std::rand()))
                      .substr(0, 12);
}

// Ids become path components, so only a safe alphabet is accepted.
void check_id(const std::string &id, const char *what) {
  const bool ok = !id.empty() && id.size() <= 64 &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
                  });
  if (!ok) throw NotFoundError(std::string("unknown ") + what + " '" + id + "'");
}

void send_json(httplib::Response &res, int status, const ojson &body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response &res, const std::string &code, const std::string &message) {
  ojson body;
  body["code"] = code;
  body["message"] = message;
  send_json(res, http_status(code), body);
}

nlohmann::json parse_body(const httplib::Request &req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error &e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what(), "invalid_json");
  }
}

std::size_t query_size(const httplib::Request &req, const std::string &key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string text = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size() || v < 0) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception &) {
    throw ValidationError("query parameter '" + key + "' must be a non-negative integer");
  }
}

// Short per-kind digest of a payload for the node endpoint.
ojson summarize(const Workspace &ws, const NodeRecord &node) {
  const auto doc = ws.payload_json(node);
  ojson s;
  switch (node.kind) {
    case NodeKind::Dataset:
      s["rows"] = doc.at("rows").size();
      s["properties"] = doc.at("properties");
      s["elements"] = doc.at("elements");
      break;
    case NodeKind::FeatureSet:
    case NodeKind::MergedFeatureSet:
      s["dimension"] = doc.at("dimension");
      s["levels"] = doc.at("levels");
      break;
    case NodeKind::Model: {
      ojson models = ojson::array();
      for (const auto &m : doc.at("models")) {
        std::size_t nonzero = 0;
        for (const auto &f : m.at("features")) nonzero += f.at("weight").get<double>() != 0.0;
        models.push_back({{"property", m.at("property")},
                          {"kind", m.at("kind")},
                          {"penalty", m.at("penalty")},
                          {"cv", m.at("cv")},
                          {"sigma", m.at("sigma")},
                          {"nonzero", nonzero}});
      }
      s["models"] = models;
      break;
    }
    case NodeKind::SearchResult:
      s["targets"] = doc.at("targets");
      s["candidates"] = doc.at("candidates").size();
      s["iterations"] = doc.at("iterations");
      break;
    case NodeKind::GenerationResult: {
      std::size_t generating = 0;
      for (const auto &v : doc.at("vectors")) generating += !v.at("smiles").empty();
      s["vectors"] = doc.at("vectors").size();
      s["generating_vectors"] = generating;
      s["molecules"] = doc.at("molecules").size();
      break;
    }
    case NodeKind::Note:
      s["text"] = doc.at("text");
      break;
  }
  return s;
}

}  // namespace

std::string_view to_string(JobState state) { return kStateNames[static_cast<int>(state)]; }

int http_status(const std::string &code) {
  if (code == "not_found") return 404;
  if (code == "write_lock_conflict") return 409;
  if (code == "lineage_violation") return 422;
  if (code == "internal_error" || code == "io_error" || code == "corrupt_workspace") return 500;
  return 400;
}

ServiceConfig ServiceConfig::from_environment() {
  ServiceConfig c;
  if (const char *dir = std::getenv("MID_DATA_DIR")) c.data_dir = dir;
  if (const char *addr = std::getenv("MID_BIND_ADDR")) c.bind_address = addr;
  if (const char *jobs = std::getenv("MID_MAX_JOBS")) {
    try {
      c.max_jobs = std::stoi(jobs);
    } catch (const std::exception &) {
      throw ValidationError("MID_MAX_JOBS must be an integer");
    }
  }
  if (c.max_jobs < 1) throw ValidationError("MID_MAX_JOBS must be at least 1");
  return c;
}

ojson JobRecord::to_json() const {
  ojson j;
  j["id"] = id;
  j["workspace"] = workspace;
  j["parent"] = parent;
  j["method"] = method;
  j["params"] = params;
  j["state"] = to_string(state);
  j["node"] = node.empty() ? ojson(nullptr) : ojson(node);
  j["progress"] = progress;
  if (state == JobState::Failed) {
    j["error"] = {{"code", error_code}, {"message", error_message}};
  } else {
    j["error"] = nullptr;
  }
  j["created_at"] = created_at;
  return j;
}

JobRecord JobRecord::from_json(const nlohmann::json &doc) {
  JobRecord r;
  r.id = doc.at("id").get<std::string>();
  r.workspace = doc.at("workspace").get<std::string>();
  r.parent = doc.at("parent").get<std::string>();
  r.method = doc.at("method").get<std::string>();
  r.params = doc.at("params");
  const std::string state = doc.at("state").get<std::string>();
  const auto it = std::find(kStateNames.begin(), kStateNames.end(), state);
  if (it == kStateNames.end()) throw ValidationError("unknown job state '" + state + "'");
  r.state = static_cast<JobState>(it - kStateNames.begin());
  if (doc.at("node").is_string()) r.node = doc.at("node").get<std::string>();
  r.progress = doc.at("progress").get<std::map<std::string, std::int64_t>>();
  if (doc.at("error").is_object()) {
    r.error_code = doc.at("error").at("code").get<std::string>();
    r.error_message = doc.at("error").at("message").get<std::string>();
  }
  r.created_at = doc.value("created_at", "");
  return r;
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  if (config_.max_jobs < 1) throw ValidationError("max_jobs must be at least 1");
  fs::create_directories(config_.data_dir / "workspaces");
  fs::create_directories(config_.data_dir / "jobs");
  recover_jobs();
  for (int i = 0; i < config_.max_jobs; ++i) workers_.emplace_back([this] { worker(); });
}

Service::~Service() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
    for (auto &[id, job] : jobs_) {
      if (job->record.state == JobState::Running) job->cancel = true;
    }
  }
  changed_.notify_all();
  for (auto &t : workers_) t.join();
}

void Service::recover_jobs() {
  for (const auto &entry : fs::directory_iterator(config_.data_dir / "jobs")) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    JobRecord r;
    try {
      r = JobRecord::from_json(nlohmann::json::parse(in));
    } catch (const std::exception &) {
      continue;  // a torn job file carries no committed state
    }
    if (r.state == JobState::Queued || r.state == JobState::Running) {
      r.state = JobState::Failed;
      r.error_code = "failed_on_restart";
      r.error_message = "the service restarted before the job finished";
      persist(r);
    }
    auto job = std::make_shared<Job>();
    job->record = std::move(r);
    jobs_[job->record.id] = job;
  }
}

void Service::persist(const JobRecord &record) const {
  const fs::path target = config_.data_dir / "jobs" / (record.id + ".json");
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << record.to_json().dump() << "\n";
  }
  fs::rename(tmp, target);
}

std::string Service::create_workspace(std::string_view csv, ElementSet elements) {
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = fresh_id("ws-", std::string(csv.substr(0, 4096)), ++job_counter_);
  }
  auto ws = std::make_shared<Workspace>(
      Workspace::create(config_.data_dir / "workspaces" / id, csv, elements));
  std::lock_guard lock(mutex_);
  workspaces_[id] = ws;
  return id;
}

std::shared_ptr<Workspace> Service::workspace(const std::string &id) {
  check_id(id, "workspace");
  {
    std::lock_guard lock(mutex_);
    auto it = workspaces_.find(id);
    if (it != workspaces_.end()) return it->second;
  }
  const fs::path dir = config_.data_dir / "workspaces" / id;
  if (!Workspace::exists(dir)) throw NotFoundError("unknown workspace '" + id + "'");
  auto ws = std::make_shared<Workspace>(Workspace::open(dir));
  std::lock_guard lock(mutex_);
  return workspaces_.emplace(id, ws).first->second;
}

std::vector<std::string> Service::workspace_ids() const {
  std::vector<std::string> ids;
  for (const auto &entry : fs::directory_iterator(config_.data_dir / "workspaces")) {
    if (Workspace::exists(entry.path())) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::pair<std::shared_ptr<Workspace>, NodeRecord> Service::find_node(const std::string &node_id) {
  check_id(node_id, "node");
  for (const auto &id : workspace_ids()) {
    auto ws = workspace(id);
    if (!ws->has_node(node_id)) ws->refresh();
    if (ws->has_node(node_id)) return {ws, ws->node(node_id)};
  }
  throw NotFoundError("unknown node '" + node_id + "'");
}

std::string Service::submit(const std::string &workspace_id, const std::string &parent,
                            const std::string &method, const nlohmann::json &params) {
  auto ws = workspace(workspace_id);
  ws->refresh();
  check_method(ws->node(parent), method);
  if (!params.is_null() && !params.is_object()) throw ValidationError("params must be an object");
  auto job = std::make_shared<Job>();
  job->record.workspace = workspace_id;
  job->record.parent = parent;
  job->record.method = method;
  job->record.params = params.is_null() ? nlohmann::json::object() : params;
  job->record.created_at = now_iso();
  {
    std::lock_guard lock(mutex_);
    job->record.id = fresh_id("job-", workspace_id + parent + method, ++job_counter_);
    persist(job->record);
    jobs_[job->record.id] = job;
    queue_.push_back(job);
  }
  changed_.notify_all();
  return job->record.id;
}

std::shared_ptr<Service::Job> Service::find_job(const std::string &id) const {
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw NotFoundError("unknown job '" + id + "'");
  return it->second;
}

JobRecord Service::job(const std::string &id) const {
  std::lock_guard lock(mutex_);
  return find_job(id)->record;
}

JobRecord Service::cancel(const std::string &id) {
  std::lock_guard lock(mutex_);
  auto job = find_job(id);
  if (job->record.state == JobState::Queued) {
    queue_.erase(std::remove(queue_.begin(), queue_.end(), job), queue_.end());
    job->record.state = JobState::Failed;
    job->record.error_code = "cancelled";
    job->record.error_message = "cancelled before it started";
    persist(job->record);
    changed_.notify_all();
  } else if (job->record.state == JobState::Running) {
    job->cancel = true;
  }
  return job->record;
}

JobRecord Service::wait(const std::string &id) {
  std::unique_lock lock(mutex_);
  auto job = find_job(id);
  changed_.wait(lock, [&] {
    return job->record.state == JobState::Done || job->record.state == JobState::Failed;
  });
  return job->record;
}

void Service::worker() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, [&] {
        if (stopping_) return true;
        return std::any_of(queue_.begin(), queue_.end(),
                           [&](const auto &j) { return !busy_[j->record.workspace]; });
      });
      if (stopping_) return;
      auto it = std::find_if(queue_.begin(), queue_.end(),
                             [&](const auto &j) { return !busy_[j->record.workspace]; });
      job = *it;
      queue_.erase(it);
      busy_[job->record.workspace] = true;
      job->record.state = JobState::Running;
      persist(job->record);
    }
    changed_.notify_all();

    RunControl control;
    control.cancel = &job->cancel;
    control.progress = [this, job](const std::string &counter, std::int64_t value) {
      std::lock_guard lock(mutex_);
      auto &slot = job->record.progress[counter];
      slot = std::max(slot, value);
    };
    std::string node, code, message;
    try {
      auto ws = workspace(job->record.workspace);
      node = ws->run(job->record.parent, job->record.method, job->record.params, control);
    } catch (const Error &e) {
      code = e.code();
      message = e.what();
    } catch (const std::exception &e) {
      code = "internal_error";
      message = e.what();
    }
    {
      std::lock_guard lock(mutex_);
      if (code.empty()) {
        job->record.state = JobState::Done;
        job->record.node = node;
      } else {
        job->record.state = JobState::Failed;
        job->record.error_code = code;
        job->record.error_message = message;
      }
      busy_[job->record.workspace] = false;
      persist(job->record);
    }
    changed_.notify_all();
  }
}

void Service::mount(httplib::Server &server) {
  server.set_exception_handler([](const httplib::Request &, httplib::Response &res,
                                  std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error &e) {
      send_error(res, e.code(), e.what());
    } catch (const nlohmann::json::exception &e) {
      send_error(res, "validation_error", e.what());
    } catch (const std::exception &e) {
      send_error(res, "internal_error", e.what());
    }
  });

  server.Post("/workspaces", [this](const httplib::Request &req, httplib::Response &res) {
    std::string csv;
    ElementSet elements = ElementSet::standard();
    if (req.is_multipart_form_data()) {
      if (!req.has_file("file")) throw ValidationError("multipart upload needs a 'file' part");
      csv = req.get_file_value("file").content;
      if (req.has_file("elements")) elements = ElementSet::parse(req.get_file_value("elements").content);
    } else {
      csv = req.body;
    }
    if (req.has_param("elements")) elements = ElementSet::parse(req.get_param_value("elements"));
    const std::string id = create_workspace(csv, elements);
    ojson body;
    body["workspace"] = id;
    body["root"] = workspace(id)->root_id();
    send_json(res, 201, body);
  });

  server.Get("/workspaces", [this](const httplib::Request &, httplib::Response &res) {
    send_json(res, 200, {{"workspaces", workspace_ids()}});
  });

  server.Get("/workspaces/:id/tree", [this](const httplib::Request &req, httplib::Response &res) {
    auto ws = workspace(req.path_params.at("id"));
    ws->refresh();
    ojson body;
    body["workspace"] = req.path_params.at("id");
    body["nodes"] = ws->tree();
    send_json(res, 200, body);
  });

  server.Post("/workspaces/:id/nodes/:parent/run",
              [this](const httplib::Request &req, httplib::Response &res) {
                const auto body = parse_body(req);
                if (!body.is_object() || !body.contains("method") || !body.at("method").is_string()) {
                  throw ValidationError("request body needs a string 'method'");
                }
                for (const auto &[key, value] : body.items()) {
                  if (key != "method" && key != "params") {
                    throw ValidationError("unknown request field '" + key + "'");
                  }
                }
                const std::string id =
                    submit(req.path_params.at("id"), req.path_params.at("parent"),
                           body.at("method").get<std::string>(),
                           body.value("params", nlohmann::json::object()));
                send_json(res, 202, job(id).to_json());
              });

  server.Get("/jobs/:id", [this](const httplib::Request &req, httplib::Response &res) {
    send_json(res, 200, job(req.path_params.at("id")).to_json());
  });

  server.Delete("/jobs/:id", [this](const httplib::Request &req, httplib::Response &res) {
    send_json(res, 202, cancel(req.path_params.at("id")).to_json());
  });

  server.Get("/nodes/:id", [this](const httplib::Request &req, httplib::Response &res) {
    auto [ws, node] = find_node(req.path_params.at("id"));
    ojson body = node.to_json();
    body["workspace"] = ws->name();
    body["payload_bytes"] = ws->read_payload(node).size();
    ojson children = ojson::array();
    for (const auto &n : ws->nodes()) {
      if (n.parent == node.id) children.push_back(n.id);
    }
    body["children"] = children;
    body["summary"] = summarize(*ws, node);
    send_json(res, 200, body);
  });

  server.Get("/nodes/:id/payload", [this](const httplib::Request &req, httplib::Response &res) {
    auto [ws, node] = find_node(req.path_params.at("id"));
    res.set_content(ws->read_payload(node), "application/json");
  });

  server.Get("/nodes/:id/molecules", [this](const httplib::Request &req, httplib::Response &res) {
    auto [ws, node] = find_node(req.path_params.at("id"));
    const auto all = node_molecules(*ws, node);
    const std::size_t offset = query_size(req, "offset", 0);
    const std::size_t limit = std::min<std::size_t>(query_size(req, "limit", 50), 1000);
    ojson page = ojson::array();
    for (std::size_t i = offset; i < all.size() && i < offset + limit; ++i) page.push_back(all[i]);
    ojson body;
    body["total"] = all.size();
    body["offset"] = offset;
    body["limit"] = limit;
    body["smiles"] = page;
    send_json(res, 200, body);
  });

  server.Get("/molecules/svg", [](const httplib::Request &req, httplib::Response &res) {
    if (!req.has_param("smiles")) throw ValidationError("query parameter 'smiles' is required");
    const std::size_t size = query_size(req, "size", 240);
    if (size < 32 || size > 2048) throw ValidationError("size must be within [32, 2048]");
    res.set_content(depict_svg(parse_smiles(req.get_param_value("smiles")), static_cast<int>(size)),
                    "image/svg+xml");
  });

  server.Get("/nodes/:id/model", [this](const httplib::Request &req, httplib::Response &res) {
    auto [ws, node] = find_node(req.path_params.at("id"));
    if (node.kind != NodeKind::Model) throw LineageError("node " + node.id + " is not a model");
    res.set_content(ws->read_payload(node), "application/json");
  });

  server.Get("/nodes/:id/candidates", [this](const httplib::Request &req, httplib::Response &res) {
    auto [ws, node] = find_node(req.path_params.at("id"));
    if (node.kind != NodeKind::SearchResult) {
      throw LineageError("node " + node.id + " is not a search result");
    }
    const auto doc = ws->payload_json(node);
    ojson body;
    body["targets"] = doc.at("targets");
    body["candidates"] = doc.at("candidates");
    send_json(res, 200, body);
  });
}

}  // namespace mid
