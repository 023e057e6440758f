//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

// Command-line front end. Pipeline verbs print the id of the node they
// create. Exit status: 0 success, 1 invalid input, 2 internal failure.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mid/error.hpp"
#include "mid/generator.hpp"
#include "mid/pipeline.hpp"
#include "mid/service.hpp"

// After Eigen: <resolv.h> defines a macro named _res.
#include <httplib.h>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_text(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mid::NotFoundError("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string> split(const std::string &text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string &text, const std::string &what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception &) {
  }
  throw mid::ValidationError(what + ": '" + text + "' is not a number");
}

// "e_gap=0.25" or "e_gap=0.25:0.01" (explicit band).
json parse_target(const std::string &text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw mid::ValidationError("target '" + text + "' must look like property=value[:band]");
  }
  json t;
  t["property"] = text.substr(0, eq);
  const std::string rest = text.substr(eq + 1);
  const auto colon = rest.find(':');
  t["target"] = to_double(rest.substr(0, colon), "target");
  if (colon != std::string::npos) t["band"] = to_double(rest.substr(colon + 1), "band");
  return t;
}

std::map<mid::Element, int> parse_atoms(const std::string &text) {
  std::map<mid::Element, int> atoms;
  for (const auto &item : split(text, ',')) {
    const auto eq = item.find('=');
    const auto e = mid::element_from_symbol(item.substr(0, eq));
    if (!e) throw mid::ValidationError("unknown element in '" + item + "'");
    atoms[*e] += eq == std::string::npos ? 1 : static_cast<int>(to_double(item.substr(eq + 1), "count"));
  }
  return atoms;
}

struct Context {
  std::string workspace = "mid-workspace";
  mid::Workspace open() const { return mid::Workspace::open(workspace); }
};

int serve(const mid::ServiceConfig &config) {
  mid::Service service(config);
  httplib::Server server;
  service.mount(server);
  const auto colon = config.bind_address.rfind(':');
  if (colon == std::string::npos) throw mid::ValidationError("bind address needs host:port");
  const std::string host = config.bind_address.substr(0, colon);
  const int port = static_cast<int>(to_double(config.bind_address.substr(colon + 1), "port"));
  static httplib::Server *running = nullptr;
  running = &server;
  std::signal(SIGINT, [](int) { running->stop(); });
  std::signal(SIGTERM, [](int) { running->stop(); });
  std::cerr << "mid: serving " << config.data_dir.string() << " on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw mid::Error("io_error", "cannot listen on " + config.bind_address);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Molecular inverse design: featurize, model, search and generate."};
  app.require_subcommand(1);
  Context ctx;
  app.add_option("--workspace,-w", ctx.workspace, "Workspace directory")
      ->envname("MID_WORKSPACE");

  std::function<void()> action;

  auto *ingest = app.add_subcommand("ingest", "Create a workspace from a CSV file");
  std::string csv_path, elements = "standard";
  ingest->add_option("csv", csv_path, "CSV with a smiles column and numeric properties")->required();
  ingest->add_option("--elements", elements, "standard, extended or a list such as C,N,O");
  ingest->callback([&] {
    action = [&] {
      auto ws = mid::Workspace::create(ctx.workspace, read_text(csv_path),
                                       mid::ElementSet::parse(elements));
      std::cout << ws.root_id() << "\n";
    };
  });

  // Runs a method on `parent` (or the newest node of a fitting kind).
  auto run = [&](const std::string &parent, std::initializer_list<mid::NodeKind> kinds,
                 const std::string &method, const json &params) {
    mid::Workspace ws = ctx.open();
    const std::string p = parent.empty() ? ws.latest(kinds) : parent;
    std::cout << ws.run(p, method, params) << "\n";
  };

  auto *featurize = app.add_subcommand("featurize", "Extract a feature vocabulary from the dataset");
  std::string parent, levels = "1,2,3,4";
  featurize->add_option("--parent", parent, "Dataset node (default: root)");
  featurize->add_option("--levels", levels, "Fragment sizes in edges");
  featurize->callback([&] {
    action = [&] {
      std::vector<int> lv;
      for (const auto &s : split(levels, ',')) lv.push_back(static_cast<int>(to_double(s, "level")));
      run(parent, {mid::NodeKind::Dataset}, "extract_features", {{"levels", lv}});
    };
  });

  auto *merge = app.add_subcommand("merge", "Union of two feature sets");
  std::string node_a, node_b;
  merge->add_option("a", node_a)->required();
  merge->add_option("b", node_b)->required();
  merge->callback([&] {
    action = [&] { run(node_a, {}, "merge_features", {{"other", node_b}}); };
  });

  auto *train = app.add_subcommand("train", "Sweep and fit regression models");
  std::vector<std::string> properties;
  std::string kinds = "lasso", grid;
  int folds = 10;
  std::uint64_t seed = 0;
  train->add_option("--parent", parent, "Feature set (default: newest)");
  train->add_option("--property", properties, "Target property; repeatable (default: all)");
  train->add_option("--kinds", kinds, "Comma list of lasso, ridge, elasticnet");
  train->add_option("--folds", folds, "Cross-validation folds");
  train->add_option("--seed", seed, "Fold assignment seed");
  train->add_option("--grid", grid, "Comma list of penalties (default: 1e-4 .. 1e2)");
  train->callback([&] {
    action = [&] {
      json params{{"kinds", split(kinds, ',')}, {"folds", folds}, {"seed", seed}};
      if (!properties.empty()) params["properties"] = properties;
      if (!grid.empty()) {
        std::vector<double> g;
        for (const auto &s : split(grid, ',')) g.push_back(to_double(s, "penalty"));
        params["grid"] = g;
      }
      run(parent, {mid::NodeKind::FeatureSet, mid::NodeKind::MergedFeatureSet}, "build_model", params);
    };
  });

  auto *select = app.add_subcommand("select", "Keep the features a model uses");
  select->add_option("--parent", parent, "Model node (default: newest)");
  select->callback([&] {
    action = [&] { run(parent, {mid::NodeKind::Model}, "select_features", json::object()); };
  });

  auto *search = app.add_subcommand("search", "Search feature vectors that hit the targets");
  std::vector<std::string> targets;
  std::string rules_path;
  int swarm = 100, iterations = 200, index_max_atoms = 5, index_tolerance = 0;
  std::size_t max_candidates = 50;
  double start_fraction = 0.25;
  bool no_index = false;
  search->add_option("--parent", parent, "Model node (default: newest)");
  search->add_option("--target", targets, "property=value[:band]; band defaults to the CV RMSE")
      ->required();
  search->add_option("--rules", rules_path, "Rule file (bound/linear lines)");
  search->add_option("--seed", seed, "Swarm seed");
  search->add_option("--swarm", swarm, "Particles");
  search->add_option("--iterations", iterations, "Iteration cap");
  search->add_option("--max-candidates", max_candidates, "Archive size that stops the search");
  search->add_option("--start-fraction", start_fraction, "Share of particles started at dataset vectors");
  search->add_option("--index-max-atoms", index_max_atoms, "Exhaustive size for the feasibility index");
  search->add_option("--index-tolerance", index_tolerance, "Chebyshev radius of index membership");
  search->add_flag("--no-index", no_index, "Skip the feasibility index");
  search->callback([&] {
    action = [&] {
      json t = json::array();
      for (const auto &s : targets) t.push_back(parse_target(s));
      json params{{"targets", t},
                  {"seed", seed},
                  {"swarm", swarm},
                  {"iterations", iterations},
                  {"max_candidates", max_candidates},
                  {"start_fraction", start_fraction},
                  {"use_index", !no_index},
                  {"index_max_atoms", index_max_atoms},
                  {"index_tolerance", index_tolerance}};
      if (!rules_path.empty()) params["rules"] = read_text(rules_path);
      run(parent, {mid::NodeKind::Model}, "search", params);
    };
  });

  auto *generate = app.add_subcommand("generate", "Generate structures from search candidates");
  std::string search_node, edge_pass = "auto";
  std::size_t max_structures = 20, candidates = 0;
  int tolerance = 0;
  double budget = 30;
  bool no_prune = false;
  generate->add_option("search", search_node, "Search node (default: newest)");
  generate->add_option("--max", max_structures, "Structures per candidate vector (0: no cap)");
  generate->add_option("--tolerance", tolerance, "Allowed deviation of fragment counts");
  generate->add_option("--time-budget", budget, "Seconds per candidate vector (0: no limit)");
  generate->add_option("--candidates", candidates, "Use the first N candidates (0: all)");
  generate->add_option("--edge-pass", edge_pass, "Ring-closing pass: auto, on or off");
  generate->add_flag("--no-prune", no_prune, "Disable early termination checks");
  generate->callback([&] {
    action = [&] {
      run(search_node, {mid::NodeKind::SearchResult}, "generate",
          {{"max_structures", max_structures},
           {"tolerance", tolerance},
           {"time_budget_seconds", budget},
           {"candidates", candidates},
           {"edge_pass", edge_pass},
           {"prune", !no_prune}});
    };
  });

  auto *note = app.add_subcommand("note", "Attach a text note to a node");
  std::string text;
  note->add_option("--parent", parent, "Node (default: root)");
  note->add_option("text", text)->required();
  note->callback([&] {
    action = [&] {
      mid::Workspace ws = ctx.open();
      std::cout << ws.run(parent.empty() ? ws.root_id() : parent, "note", {{"text", text}}) << "\n";
    };
  });

  auto *tree = app.add_subcommand("tree", "Print the workspace tree");
  bool as_json = false;
  tree->add_flag("--json", as_json, "Machine-readable output");
  tree->callback([&] {
    action = [&] {
      mid::Workspace ws = ctx.open();
      if (as_json) {
        std::cout << ws.tree().dump(2) << "\n";
      } else {
        std::cout << ws.tree_text();
      }
    };
  });

  auto *exp = app.add_subcommand("export", "Write a node's payload to a file");
  std::string node_id, out_path;
  exp->add_option("node", node_id)->required();
  exp->add_option("path", out_path, "Output file, - for stdout")->required();
  exp->callback([&] {
    action = [&] {
      mid::Workspace ws = ctx.open();
      const std::string bytes = ws.read_payload(ws.node(node_id));
      if (out_path == "-") {
        std::cout << bytes;
        return;
      }
      std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
      if (!out) throw mid::Error("io_error", "cannot write " + out_path);
      out << bytes;
    };
  });

  auto *srv = app.add_subcommand("serve", "Run the HTTP service");
  mid::ServiceConfig config;
  srv->add_option("--data-dir", config.data_dir, "Directory of workspaces and jobs");
  srv->add_option("--bind", config.bind_address, "host:port");
  srv->add_option("--max-jobs", config.max_jobs, "Concurrent jobs");
  srv->preparse_callback([&](std::size_t) {
    // Environment first, flags override.
    config = mid::ServiceConfig::from_environment();
  });
  srv->callback([&] { action = [&] { serve(config); }; });

  auto *conv = app.add_subcommand("convert-qm9", "Build a property CSV from QM9 CSV sources");
  std::vector<std::string> sources;
  int rows = 1000;
  conv->add_option("sources", sources, "QM9 CSV files")->required();
  conv->add_option("--out,-o", out_path, "Output CSV")->required();
  conv->add_option("--rows", rows, "Rows to keep");
  conv->add_option("--seed", seed, "Shuffle seed");
  conv->callback([&] {
    action = [&] {
      std::vector<std::string> texts;
      for (const auto &s : sources) texts.push_back(read_text(s));
      const std::string csv = mid::convert_qm9(texts, rows, seed);
      std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
      if (!out) throw mid::Error("io_error", "cannot write " + out_path);
      out << csv;
    };
  });

  auto *enumerate = app.add_subcommand("enumerate", "Enumerate all structures for an atom multiset");
  std::string atoms, spec_path;
  int max_order = 3, max_rings = -1;
  std::size_t enum_max = 0;
  enumerate->add_option("--atoms", atoms, "Element counts such as C=4,O=1");
  enumerate->add_option("--spec", spec_path, "Generation spec as JSON");
  enumerate->add_option("--max-bond-order", max_order, "1 for single bonds only");
  enumerate->add_option("--max-rings", max_rings, "Ring limit (default: none)");
  enumerate->add_option("--max", enum_max, "Stop after N structures (0: no cap)");
  enumerate->callback([&] {
    action = [&] {
      mid::GenerationSpec spec;
      if (!spec_path.empty()) {
        try {
          spec = mid::GenerationSpec::from_json(json::parse(read_text(spec_path)));
        } catch (const json::exception &e) {
          throw mid::ValidationError(std::string("bad spec file: ") + e.what());
        }
      } else {
        if (atoms.empty()) throw mid::ValidationError("enumerate needs --atoms or --spec");
        spec.atoms = parse_atoms(atoms);
        spec.max_bond_order = max_order;
        if (max_rings >= 0) spec.rings.hi = max_rings;
        spec.max_structures = enum_max;
      }
      for (const auto &s : mid::generate(spec).smiles) std::cout << s << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (action) action();
    return 0;
  } catch (const mid::Error &e) {
    std::cerr << "mid: " << e.what() << "\n";
    return mid::http_status(e.code()) >= 500 ? 2 : 1;
  } catch (const std::exception &e) {
    std::cerr << "mid: internal error: " << e.what() << "\n";
    return 2;
  }
}
