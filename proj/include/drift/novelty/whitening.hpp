#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "drift/common.hpp"

namespace drift::novelty {

enum class Stage { raw, whitened, unit };

/// Row-per-post embedding matrix tagged with its transformation stage.
struct EmbeddingMatrix {
  Eigen::MatrixXd values;
  Stage stage = Stage::raw;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

/// Fitted PCA whitening transform: out = scale .* (basis^T (x - mean)).
struct WhiteningModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;  // dim x k, orthonormal columns
  Eigen::VectorXd scale;  // k inverse standard deviations

  Eigen::Index dim() const { return mean.size(); }
  Eigen::Index components() const { return scale.size(); }
};

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kWhiteningRelativeCutoff = 1e-10;

/// Fits PCA whitening on the whole matrix. Directions with (relative)
/// singular value below the cutoff are dropped, so a constant column costs
/// one component. Basis signs are fixed so the largest-magnitude loading of
/// each component is positive.
inline WhiteningModel fit_whitener(const EmbeddingMatrix& raw) {
  const auto n = raw.rows();
  if (n < 2) throw Error("fit_whitener: need at least 2 rows, got " + std::to_string(n));
  if (!raw.values.allFinite()) throw Error("fit_whitener: non-finite embedding values");
  WhiteningModel model;
  model.mean = raw.values.colwise().mean().transpose();
  const Eigen::MatrixXd centered = raw.values.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0.0)) throw Error("fit_whitener: rank 0 input (all rows identical)");
  Eigen::Index k = 0;
  while (k < sv.size() && sv(k) >= kWhiteningRelativeCutoff * sv(0)) ++k;
  model.basis = svd.matrixV().leftCols(k);
  model.scale.resize(k);
  const double dof = std::sqrt(static_cast<double>(n - 1));
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::Index arg = 0;
    model.basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (model.basis(arg, j) < 0) model.basis.col(j) *= -1.0;
    model.scale(j) = dof / sv(j);
  }
  return model;
}

inline EmbeddingMatrix apply_whitener(const WhiteningModel& model, const Eigen::MatrixXd& vectors) {
  if (vectors.cols() != model.dim()) {
    throw Error("apply_whitener: dimension mismatch (model " + std::to_string(model.dim()) + ", input " +
                std::to_string(vectors.cols()) + ")");
  }
  EmbeddingMatrix out;
  out.values = ((vectors.rowwise() - model.mean.transpose()) * model.basis) * model.scale.asDiagonal();
  out.stage = Stage::whitened;
  return out;
}

inline constexpr double kZeroNormTolerance = 1e-12;

/// Scales every row to unit Euclidean norm.
inline EmbeddingMatrix unit_normalize(const Eigen::MatrixXd& vectors) {
  EmbeddingMatrix out{vectors, Stage::unit};
  for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
    const double norm = out.values.row(r).norm();
    if (!(norm > kZeroNormTolerance)) throw Error("unit_normalize: zero-norm row " + std::to_string(r));
    out.values.row(r) /= norm;
  }
  return out;
}

}  // namespace drift::novelty
