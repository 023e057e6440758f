//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mid/featurizer.hpp"

namespace mid {

enum class ModelKind { Lasso = 0, Ridge = 1, ElasticNet = 2 };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view text);

// Column means and population standard deviations. Zero-variance columns
// keep scale 0 and are left out of the fit.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardization fit(const Eigen::MatrixXd &X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd &X) const;
};

struct Penalty {
  double l1 = 0.0;
  double l2 = 0.0;
};

struct SolverOptions {
  double tolerance = 1e-6;  // max absolute coefficient change per sweep
  int max_sweeps = 10000;
};

// Minimizes (1/2n)|y - b - Xs w|^2 + l1 |w|_1 + (l2/2) |w|^2 over the
// standardized design Xs. Ridge uses the normal equations; Lasso and
// ElasticNet use covariance-update cyclic coordinate descent.
struct LinearFit {
  Eigen::VectorXd weights;  // standardized scale
  double intercept = 0.0;
  int sweeps = 0;
};

LinearFit fit_linear(const Eigen::MatrixXd &Xs, const Eigen::VectorXd &y,
                     ModelKind kind, Penalty penalty,
                     const std::vector<char> &active,
                     const SolverOptions &options = {},
                     const Eigen::VectorXd *warm_start = nullptr);

struct CvScore {
  double r2 = 0.0;
  double rmse = 0.0;
};

struct SweepEntry {
  ModelKind kind = ModelKind::Lasso;
  Penalty penalty;
  CvScore score;
};

struct TrainingFingerprint {
  std::size_t count = 0;
  std::string sha256;  // of the newline-joined canonical SMILES
};

class RegressionModel {
 public:
  std::string property;
  ModelKind kind = ModelKind::Lasso;
  SchemaRef schema;
  Standardization standardization;
  Eigen::VectorXd weights;
  double intercept = 0.0;
  Penalty penalty;
  CvScore cv;
  double sigma = 0.0;  // CV RMSE, used as the default search band
  int folds = 0;
  std::uint64_t seed = 0;
  TrainingFingerprint fingerprint;
  std::vector<SweepEntry> sweep;

  double predict(const std::vector<int> &values) const;
  double predict(const FeatureVector &x) const;
  double predict_row(const Eigen::VectorXd &x) const;

  nlohmann::ordered_json to_json() const;
  static RegressionModel from_json(const nlohmann::json &doc);
};

// Dense design matrix from feature vectors sharing one schema.
Eigen::MatrixXd design_matrix(const std::vector<std::vector<int>> &rows);

RegressionModel train(const Eigen::MatrixXd &X, const Eigen::VectorXd &y,
                      ModelKind kind, Penalty penalty,
                      const SolverOptions &options = {});

// Contiguous folds over a seeded permutation; fold i holds the i-th
// chunk, with the first n % k folds one element longer.
std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed);

CvScore cross_validate(const Eigen::MatrixXd &X, const Eigen::VectorXd &y,
                       ModelKind kind, Penalty penalty, int k,
                       std::uint64_t seed);

std::vector<double> default_penalty_grid();  // 1e-4 .. 1e2, 7 points

struct SweepResult {
  std::vector<SweepEntry> entries;
  SweepEntry best;
};

// Lasso sweeps l1, Ridge sweeps l2, ElasticNet the Cartesian product.
// Best: highest R2, then lower RMSE, then larger l1 + l2, then kind order.
SweepResult sweep(const Eigen::MatrixXd &X, const Eigen::VectorXd &y,
                  const std::vector<ModelKind> &kinds, int k,
                  std::uint64_t seed,
                  const std::vector<double> &grid = default_penalty_grid());

// Sub-schema of descriptors with |weight| > 1e-8, plus every element
// count.
FeatureSchema select_features(const RegressionModel &model);

TrainingFingerprint fingerprint(const std::vector<std::string> &canonical_smiles);

}  // namespace mid
