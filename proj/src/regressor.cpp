//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mid/error.hpp"
#include "mid/hash.hpp"

namespace mid {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lasso:
      return "lasso";
    case ModelKind::Ridge:
      return "ridge";
    case ModelKind::ElasticNet:
      return "elasticnet";
  }
  return "";
}

ModelKind model_kind_from_string(std::string_view text) {
  std::string lower;
  for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "lasso") return ModelKind::Lasso;
  if (lower == "ridge") return ModelKind::Ridge;
  if (lower == "elasticnet" || lower == "elastic_net" || lower == "elastic-net") {
    return ModelKind::ElasticNet;
  }
  throw ValidationError("unknown model kind '" + std::string(text) +
                        "' (expected lasso, ridge or elasticnet)");
}

Standardization Standardization::fit(const Eigen::MatrixXd &X) {
  Standardization s;
  const double n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean(j)).square().sum() / n;
    // Integer counts: anything this small is a constant column.
    s.scale(j) = var > 1e-24 ? std::sqrt(var) : 0.0;
  }
  return s;
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd &X) const {
  Eigen::MatrixXd Z(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (scale(j) > 0) {
      Z.col(j) = (X.col(j).array() - mean(j)) / scale(j);
    } else {
      Z.col(j).setZero();
    }
  }
  return Z;
}

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Problem reduced to its Gram form over the active columns.
struct GramProblem {
  std::vector<int> columns;  // active column indices into the full design
  Eigen::MatrixXd G;         // Xcᵀ Xc / n over active columns
  Eigen::VectorXd c;         // Xcᵀ (y - ybar) / n
  Eigen::VectorXd xbar;      // column means of the full design
  double ybar = 0.0;
  int p = 0;
};

GramProblem make_problem(const Eigen::MatrixXd &Xs, const Eigen::VectorXd &y,
                         const std::vector<char> &active) {
  GramProblem prob;
  prob.p = static_cast<int>(Xs.cols());
  const double n = static_cast<double>(Xs.rows());
  for (int j = 0; j < prob.p; ++j) {
    if (active[j]) prob.columns.push_back(j);
  }
  prob.xbar = Xs.colwise().mean().transpose();
  prob.ybar = y.mean();
  Eigen::MatrixXd Xa(Xs.rows(), prob.columns.size());
  for (std::size_t k = 0; k < prob.columns.size(); ++k) {
    Xa.col(k) = Xs.col(prob.columns[k]).array() - prob.xbar(prob.columns[k]);
  }
  prob.G.noalias() = Xa.transpose() * Xa / n;
  prob.c.noalias() = Xa.transpose() * (y.array() - prob.ybar).matrix() / n;
  return prob;
}

// Solution over the active columns.
Eigen::VectorXd solve_ridge(const GramProblem &prob, double l2) {
  const Eigen::Index m = prob.G.rows();
  if (m == 0) return Eigen::VectorXd();
  Eigen::MatrixXd A = prob.G;
  A.diagonal().array() += l2;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  Eigen::VectorXd w = ldlt.solve(prob.c);
  if (ldlt.info() != Eigen::Success || !w.allFinite()) {
    w = A.completeOrthogonalDecomposition().solve(prob.c);
  }
  return w;
}

Eigen::VectorXd solve_cd(const GramProblem &prob, Penalty penalty,
                         const SolverOptions &options, Eigen::VectorXd w,
                         int *sweeps_out) {
  const Eigen::Index m = prob.G.rows();
  if (w.size() != m) w = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd q = prob.G * w;  // G w, kept current
  int sweeps = 0;

  // One pass over `coords`; returns the largest coefficient change.
  auto pass = [&](const std::vector<Eigen::Index> &coords) {
    double max_delta = 0.0;
    for (Eigen::Index j : coords) {
      const double gjj = prob.G(j, j);
      const double denom = gjj + penalty.l2;
      if (denom <= 0) continue;
      const double z = prob.c(j) - q(j) + gjj * w(j);
      const double updated = soft_threshold(z, penalty.l1) / denom;
      const double delta = updated - w(j);
      if (delta != 0.0) {
        w(j) = updated;
        q.noalias() += prob.G.col(j) * delta;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    return max_delta;
  };

  std::vector<Eigen::Index> all(m);
  std::iota(all.begin(), all.end(), 0);
  while (sweeps < options.max_sweeps) {
    ++sweeps;
    if (pass(all) < options.tolerance) break;
    // Converge on the current support before the next full pass.
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (w(j) != 0.0) support.push_back(j);
    }
    while (sweeps < options.max_sweeps) {
      ++sweeps;
      if (pass(support) < options.tolerance) break;
    }
  }
  if (sweeps_out) *sweeps_out = sweeps;
  return w;
}

Eigen::VectorXd solve(const GramProblem &prob, ModelKind kind, Penalty penalty,
                      const SolverOptions &options, const Eigen::VectorXd *warm,
                      int *sweeps) {
  if (kind == ModelKind::Ridge) {
    if (sweeps) *sweeps = 0;
    return solve_ridge(prob, penalty.l2);
  }
  return solve_cd(prob, penalty, options, warm ? *warm : Eigen::VectorXd(),
                  sweeps);
}

LinearFit expand(const GramProblem &prob, const Eigen::VectorXd &wa, int sweeps) {
  LinearFit fit;
  fit.weights = Eigen::VectorXd::Zero(prob.p);
  for (std::size_t k = 0; k < prob.columns.size(); ++k) {
    fit.weights(prob.columns[k]) = wa(static_cast<Eigen::Index>(k));
  }
  fit.intercept = prob.ybar - prob.xbar.dot(fit.weights);
  fit.sweeps = sweeps;
  return fit;
}

void check_penalty(ModelKind kind, Penalty penalty) {
  if (!(penalty.l1 >= 0) || !(penalty.l2 >= 0) || !std::isfinite(penalty.l1) ||
      !std::isfinite(penalty.l2)) {
    throw ValidationError("penalties must be finite and non-negative");
  }
  if (kind == ModelKind::Lasso && penalty.l2 != 0) {
    throw ValidationError("lasso takes no L2 penalty");
  }
  if (kind == ModelKind::Ridge && penalty.l1 != 0) {
    throw ValidationError("ridge takes no L1 penalty");
  }
}

void check_data(const Eigen::MatrixXd &X, const Eigen::VectorXd &y) {
  if (X.rows() != y.size()) {
    throw ValidationError("feature rows and targets differ in length");
  }
  if (X.rows() < 3) {
    throw ValidationError("at least 3 samples are required to train a model");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw ValidationError("non-finite value in training data");
  }
}

std::vector<char> active_columns(const Standardization &s) {
  std::vector<char> active(s.scale.size());
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) active[j] = s.scale(j) > 0;
  return active;
}

}  // namespace

LinearFit fit_linear(const Eigen::MatrixXd &Xs, const Eigen::VectorXd &y,
                     ModelKind kind, Penalty penalty,
                     const std::vector<char> &active,
                     const SolverOptions &options,
                     const Eigen::VectorXd *warm_start) {
  check_penalty(kind, penalty);
  GramProblem prob = make_problem(Xs, y, active);
  Eigen::VectorXd warm;
  if (warm_start) {
    warm.resize(prob.columns.size());
    for (std::size_t k = 0; k < prob.columns.size(); ++k) {
      warm(static_cast<Eigen::Index>(k)) = (*warm_start)(prob.columns[k]);
    }
  }
  int sweeps = 0;
  Eigen::VectorXd wa = solve(prob, kind, penalty, options,
                             warm_start ? &warm : nullptr, &sweeps);
  return expand(prob, wa, sweeps);
}

double RegressionModel::predict_row(const Eigen::VectorXd &x) const {
  if (x.size() != weights.size()) {
    throw ValidationError("feature vector length " + std::to_string(x.size()) +
                          " does not match model schema length " +
                          std::to_string(weights.size()));
  }
  double y = intercept;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (standardization.scale(j) > 0) {
      y += weights(j) * (x(j) - standardization.mean(j)) / standardization.scale(j);
    }
  }
  return y;
}

double RegressionModel::predict(const std::vector<int> &values) const {
  Eigen::VectorXd x(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) x(static_cast<Eigen::Index>(i)) = values[i];
  return predict_row(x);
}

double RegressionModel::predict(const FeatureVector &x) const {
  if (schema && x.schema && x.schema != schema && !(*x.schema == *schema)) {
    throw ValidationError("feature vector schema does not match the model");
  }
  return predict(x.values);
}

Eigen::MatrixXd design_matrix(const std::vector<std::vector<int>> &rows) {
  if (rows.empty()) return Eigen::MatrixXd();
  const std::size_t p = rows.front().size();
  Eigen::MatrixXd X(rows.size(), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != p) throw ValidationError("ragged feature rows");
    for (std::size_t j = 0; j < p; ++j) X(i, j) = rows[i][j];
  }
  return X;
}

RegressionModel train(const Eigen::MatrixXd &X, const Eigen::VectorXd &y,
                      ModelKind kind, Penalty penalty,
                      const SolverOptions &options) {
  check_data(X, y);
  check_penalty(kind, penalty);
  RegressionModel model;
  model.kind = kind;
  model.penalty = penalty;
  model.standardization = Standardization::fit(X);
  const Eigen::MatrixXd Xs = model.standardization.apply(X);
  LinearFit fit = fit_linear(Xs, y, kind, penalty,
                             active_columns(model.standardization), options);
  model.weights = fit.weights;
  model.intercept = fit.intercept;
  return model;
}

std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("folds must be ≥ 2");
  if (k > n) {
    throw ValidationError("fold count " + std::to_string(k) +
                          " exceeds sample count " + std::to_string(n));
  }
  const std::vector<int> perm = seeded_permutation(n, seed);
  std::vector<std::vector<int>> folds(k);
  int start = 0;
  for (int f = 0; f < k; ++f) {
    const int size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(perm.begin() + start, perm.begin() + start + size);
    start += size;
  }
  return folds;
}

namespace {

struct Fold {
  GramProblem problem;
  Eigen::MatrixXd test_x;  // standardized with training statistics
  Eigen::VectorXd test_y;
};

std::vector<Fold> prepare_folds(const Eigen::MatrixXd &X, const Eigen::VectorXd &y,
                                int k, std::uint64_t seed) {
  check_data(X, y);
  const auto split = kfold_split(static_cast<int>(X.rows()), k, seed);
  std::vector<Fold> folds;
  folds.reserve(k);
  for (int f = 0; f < k; ++f) {
    std::vector<char> in_test(X.rows(), 0);
    for (int i : split[f]) in_test[i] = 1;
    std::vector<int> train_rows;
    for (int i = 0; i < X.rows(); ++i) {
      if (!in_test[i]) train_rows.push_back(i);
    }
    Eigen::MatrixXd Xtr = X(train_rows, Eigen::all);
    Eigen::VectorXd ytr = y(train_rows);
    Standardization s = Standardization::fit(Xtr);
    Fold fold;
    fold.problem = make_problem(s.apply(Xtr), ytr, active_columns(s));
    fold.test_x = s.apply(X(split[f], Eigen::all));
    fold.test_y = y(split[f]);
    folds.push_back(std::move(fold));
  }
  return folds;
}

CvScore fold_score(const Fold &fold, const LinearFit &fit) {
  const Eigen::VectorXd pred =
      (fold.test_x * fit.weights).array() + fit.intercept;
  const double ss_res = (fold.test_y - pred).squaredNorm();
  const double mean = fold.test_y.mean();
  const double ss_tot = (fold.test_y.array() - mean).square().sum();
  CvScore s;
  s.rmse = std::sqrt(ss_res / static_cast<double>(fold.test_y.size()));
  if (ss_tot > 1e-300) {
    s.r2 = 1.0 - ss_res / ss_tot;
  } else {
    s.r2 = ss_res <= 1e-18 ? 1.0 : 0.0;
  }
  return s;
}

}  // namespace

CvScore cross_validate(const Eigen::MatrixXd &X, const Eigen::VectorXd &y,
                       ModelKind kind, Penalty penalty, int k,
                       std::uint64_t seed) {
  check_penalty(kind, penalty);
  const auto folds = prepare_folds(X, y, k, seed);
  CvScore total;
  for (const Fold &fold : folds) {
    int sweeps = 0;
    Eigen::VectorXd wa = solve(fold.problem, kind, penalty, {}, nullptr, &sweeps);
    CvScore s = fold_score(fold, expand(fold.problem, wa, sweeps));
    total.r2 += s.r2;
    total.rmse += s.rmse;
  }
  total.r2 /= k;
  total.rmse /= k;
  return total;
}

std::vector<double> default_penalty_grid() {
  return {1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2};
}

namespace {

bool better(const SweepEntry &a, const SweepEntry &b) {
  if (a.score.r2 != b.score.r2) return a.score.r2 > b.score.r2;
  if (a.score.rmse != b.score.rmse) return a.score.rmse < b.score.rmse;
  const double pa = a.penalty.l1 + a.penalty.l2;
  const double pb = b.penalty.l1 + b.penalty.l2;
  if (pa != pb) return pa > pb;
  return static_cast<int>(a.kind) < static_cast<int>(b.kind);
}

}  // namespace

SweepResult sweep(const Eigen::MatrixXd &X, const Eigen::VectorXd &y,
                  const std::vector<ModelKind> &kinds, int k,
                  std::uint64_t seed, const std::vector<double> &grid) {
  if (kinds.empty()) throw ValidationError("no model kinds to sweep");
  if (grid.empty()) throw ValidationError("empty penalty grid");
  for (double v : grid) {
    if (!(v >= 0) || !std::isfinite(v)) {
      throw ValidationError("penalty grid values must be finite and non-negative");
    }
  }
  const auto folds = prepare_folds(X, y, k, seed);

  // Distinct grid values, largest first, so coordinate descent walks the
  // regularization path with warm starts. Duplicates share one result.
  std::vector<double> path = grid;
  std::sort(path.begin(), path.end(), std::greater<>());
  path.erase(std::unique(path.begin(), path.end()), path.end());

  using Key = std::tuple<int, double, double>;
  std::map<Key, CvScore> totals;
  auto add = [&](ModelKind kind, Penalty p, CvScore s) {
    CvScore &t = totals[{static_cast<int>(kind), p.l1, p.l2}];
    t.r2 += s.r2;
    t.rmse += s.rmse;
  };

  std::vector<ModelKind> unique_kinds = kinds;
  std::sort(unique_kinds.begin(), unique_kinds.end());
  unique_kinds.erase(std::unique(unique_kinds.begin(), unique_kinds.end()),
                     unique_kinds.end());

  for (const Fold &fold : folds) {
    for (ModelKind kind : unique_kinds) {
      if (kind == ModelKind::Ridge) {
        for (double l2 : path) {
          Penalty p{0.0, l2};
          Eigen::VectorXd wa = solve_ridge(fold.problem, l2);
          add(kind, p, fold_score(fold, expand(fold.problem, wa, 0)));
        }
        continue;
      }
      const std::vector<double> l2s =
          kind == ModelKind::Lasso ? std::vector<double>{0.0} : path;
      for (double l2 : l2s) {
        Eigen::VectorXd warm;
        for (double l1 : path) {
          Penalty p{l1, l2};
          int sweeps = 0;
          warm = solve_cd(fold.problem, p, {}, warm, &sweeps);
          add(kind, p, fold_score(fold, expand(fold.problem, warm, sweeps)));
        }
      }
    }
  }

  SweepResult result;
  auto emit = [&](ModelKind kind, Penalty p) {
    SweepEntry e;
    e.kind = kind;
    e.penalty = p;
    const CvScore &t = totals.at({static_cast<int>(kind), p.l1, p.l2});
    e.score.r2 = t.r2 / k;
    e.score.rmse = t.rmse / k;
    result.entries.push_back(e);
  };
  for (ModelKind kind : kinds) {
    switch (kind) {
      case ModelKind::Lasso:
        for (double l1 : grid) emit(kind, {l1, 0.0});
        break;
      case ModelKind::Ridge:
        for (double l2 : grid) emit(kind, {0.0, l2});
        break;
      case ModelKind::ElasticNet:
        for (double l1 : grid)
          for (double l2 : grid) emit(kind, {l1, l2});
        break;
    }
  }
  result.best = result.entries.front();
  for (const SweepEntry &e : result.entries) {
    if (better(e, result.best)) result.best = e;
  }
  return result;
}

FeatureSchema select_features(const RegressionModel &model) {
  if (!model.schema) throw ValidationError("model has no schema");
  std::vector<Descriptor> kept;
  for (std::size_t i = 0; i < model.schema->size(); ++i) {
    const Descriptor &d = (*model.schema)[i];
    if (d.kind == DescriptorKind::Element ||
        std::abs(model.weights(static_cast<Eigen::Index>(i))) > 1e-8) {
      kept.push_back(d);
    }
  }
  return FeatureSchema(std::move(kept), model.schema->levels());
}

TrainingFingerprint fingerprint(const std::vector<std::string> &canonical_smiles) {
  std::string joined;
  for (const auto &s : canonical_smiles) {
    joined += s;
    joined += '\n';
  }
  return TrainingFingerprint{canonical_smiles.size(), sha256_hex(joined)};
}

nlohmann::ordered_json RegressionModel::to_json() const {
  nlohmann::ordered_json doc;
  doc["format"] = "mid-model/1";
  doc["property"] = property;
  doc["kind"] = std::string(to_string(kind));
  doc["penalty"] = {{"l1", penalty.l1}, {"l2", penalty.l2}};
  doc["intercept"] = intercept;
  doc["sigma"] = sigma;
  doc["cv"] = {{"r2", cv.r2}, {"rmse", cv.rmse}, {"folds", folds}, {"seed", seed}};
  doc["training"] = {{"count", fingerprint.count}, {"sha256", fingerprint.sha256}};
  doc["levels"] = schema ? std::vector<int>(schema->levels().begin(), schema->levels().end())
                         : std::vector<int>{};
  doc["schema"] = schema ? schema->manifest() : std::string();
  auto features = nlohmann::ordered_json::array();
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    features.push_back({{"id", schema ? (*schema)[j].id() : std::to_string(j)},
                        {"mean", standardization.mean(j)},
                        {"scale", standardization.scale(j)},
                        {"weight", weights(j)}});
  }
  doc["features"] = std::move(features);
  auto entries = nlohmann::ordered_json::array();
  for (const SweepEntry &e : sweep) {
    entries.push_back({{"kind", std::string(to_string(e.kind))},
                       {"l1", e.penalty.l1},
                       {"l2", e.penalty.l2},
                       {"r2", e.score.r2},
                       {"rmse", e.score.rmse}});
  }
  doc["sweep"] = std::move(entries);
  return doc;
}

RegressionModel RegressionModel::from_json(const nlohmann::json &doc) {
  try {
    if (doc.at("format") != "mid-model/1") {
      throw ValidationError("unsupported model document format");
    }
    RegressionModel m;
    m.property = doc.at("property").get<std::string>();
    m.kind = model_kind_from_string(doc.at("kind").get<std::string>());
    m.penalty = {doc.at("penalty").at("l1").get<double>(),
                 doc.at("penalty").at("l2").get<double>()};
    m.intercept = doc.at("intercept").get<double>();
    m.sigma = doc.at("sigma").get<double>();
    m.cv = {doc.at("cv").at("r2").get<double>(), doc.at("cv").at("rmse").get<double>()};
    m.folds = doc.at("cv").at("folds").get<int>();
    m.seed = doc.at("cv").at("seed").get<std::uint64_t>();
    m.fingerprint = {doc.at("training").at("count").get<std::size_t>(),
                     doc.at("training").at("sha256").get<std::string>()};
    const auto levels = doc.at("levels").get<std::vector<int>>();
    FeatureSchema parsed = FeatureSchema::from_manifest(doc.at("schema").get<std::string>());
    m.schema = std::make_shared<const FeatureSchema>(
        FeatureSchema(parsed.descriptors(), std::set<int>(levels.begin(), levels.end())));
    const auto &features = doc.at("features");
    if (features.size() != m.schema->size()) {
      throw ValidationError("model feature table does not match its schema");
    }
    const auto p = static_cast<Eigen::Index>(features.size());
    m.weights.resize(p);
    m.standardization.mean.resize(p);
    m.standardization.scale.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto &f = features[static_cast<std::size_t>(j)];
      m.weights(j) = f.at("weight").get<double>();
      m.standardization.mean(j) = f.at("mean").get<double>();
      m.standardization.scale(j) = f.at("scale").get<double>();
    }
    for (const auto &e : doc.at("sweep")) {
      m.sweep.push_back(SweepEntry{model_kind_from_string(e.at("kind").get<std::string>()),
                                   {e.at("l1").get<double>(), e.at("l2").get<double>()},
                                   {e.at("r2").get<double>(), e.at("rmse").get<double>()}});
    }
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace mid
