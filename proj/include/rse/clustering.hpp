#pragma once

#include <vector>

#include "rse/lti.hpp"

namespace rse {

using IndexSet = std::vector<Eigen::Index>;

/// Phi = (C U_bar) * psd_factor(W_c_bar); row i has the stable-part H2 norm
/// of output i, and Phi_i Phi_j^T is the H2 inner product of outputs i, j.
struct SimilarityFactor {
  Matrix Phi;
  Vector row_norms;

  Eigen::Index outputs() const { return Phi.rows(); }
  /// Rows below 1e-12 * max row norm.
  bool is_zero_row(Eigen::Index i) const;
};

SimilarityFactor compute_phi(const LtiSystem& sys, const SubspaceDecomposition& dec);

/// min(||phi_i - phi_j||, ||phi_i + phi_j||) on unit-normalized rows.
/// Throws ZeroRow.
double dissimilarity(const SimilarityFactor& phi, Eigen::Index i, Eigen::Index j);

/// Complete-linkage agglomeration over the nonzero rows. Merges are stored in
/// order; cluster ids follow the usual convention (0..m-1 are leaves, merge k
/// creates id m + k).
struct Dendrogram {
  struct Merge {
    Eigen::Index a = 0;
    Eigen::Index b = 0;
    double height = 0.0;
  };
  Eigen::Index m = 0;
  IndexSet active;  // nonzero rows, ascending
  IndexSet silent;  // zero rows, ascending
  std::vector<Merge> merges;
};

Dendrogram build_dendrogram(const SimilarityFactor& phi);

struct ClusterSet {
  Eigen::Index m = 0;
  std::vector<IndexSet> clusters;  // ordered by smallest member
  std::vector<Vector> p;
  std::vector<bool> covered;
  double theta = 0.0;
  Matrix Pi;
  /// Index into `clusters` of the zero-row cluster, or -1.
  int silent = -1;

  Eigen::Index size() const { return static_cast<Eigen::Index>(clusters.size()); }
  /// Cluster containing measurement i.
  Eigen::Index cluster_of(Eigen::Index i) const;
  bool fully_covered() const;
  /// Largest pairwise dissimilarity inside cluster k (0 for singletons).
  double diameter(const SimilarityFactor& phi, Eigen::Index k) const;

  /// Throws ValidationError if clusters do not partition 0..m-1, coefficient
  /// vectors are not unit norm, or Pi Pi^T != I.
  void validate() const;
};

/// Cut at threshold theta: every merge with height <= theta is applied.
/// `trusted` only affects the coverage flags.
ClusterSet form_clusters(const SimilarityFactor& phi, double theta, const IndexSet& trusted);
ClusterSet form_clusters(const SimilarityFactor& phi, const Dendrogram& dendro, double theta,
                         const IndexSet& trusted);

/// Cut to exactly K clusters (the silent cluster, if any, counts as one).
/// theta of the result is the height of the last applied merge.
ClusterSet form_clusters_k(const SimilarityFactor& phi, Eigen::Index K,
                           const IndexSet& trusted);
ClusterSet form_clusters_k(const SimilarityFactor& phi, const Dendrogram& dendro,
                           Eigen::Index K, const IndexSet& trusted);

/// Smallest merge height (or 0) at which every non-silent cluster contains a
/// trusted index. Bisection over the sorted heights.
double min_theta_for_coverage(const SimilarityFactor& phi, const IndexSet& trusted);
double min_theta_for_coverage(const SimilarityFactor& phi, const Dendrogram& dendro,
                              const IndexSet& trusted);

/// Leading left singular vector of Phi restricted to `cluster`, first nonzero
/// entry positive. Throws DegenerateCluster.
Vector cluster_coefficients(const SimilarityFactor& phi, const IndexSet& cluster);

/// K x m aggregation matrix; row k carries p_k on the members of cluster k.
Matrix build_pi(const ClusterSet& clusters);

/// Trusted rows of C (ascending) stacked over rows of Pi^T Pi C at the
/// attacked indices (in the given order). Throws AllMeasurementsAttacked.
Matrix augment_measurement_matrix(const Matrix& C, const Matrix& Pi, const IndexSet& attacked);

/// Linear map S (|attacked| x m) with y_bar_A = S y. For attacked i in
/// cluster k with trusted members T_k, row i is p_{k,i} p_{k,T}^T / ||p_{k,T}||^2.
/// Columns of attacked indices are zero. Attacked members of the silent cluster
/// get a zero row when it has no trusted member. Throws UncoveredCluster.
Matrix surrogate_map(const ClusterSet& clusters, const IndexSet& attacked);

/// Surrogate values at the attacked indices from a full-length measurement
/// vector (entries at attacked positions are ignored).
Vector surrogate_outputs(const ClusterSet& clusters, const Vector& y, const IndexSet& attacked);

struct ApproximationError {
  Vector per_measurement;  // NaN where the signal is numerically zero
  double aggregate = 0.0;
  Eigen::Index excluded = 0;
};

/// Y is T x m (one row per recorded time). Surrogates are Pi^T Pi y; the
/// per-measurement value is ||y_bar_i - y_i|| / ||y_i|| over time.
ApproximationError approximation_error(const Matrix& Y, const ClusterSet& clusters);

/// Complement of `attacked` in 0..m-1.
IndexSet complement(const IndexSet& attacked, Eigen::Index m);

}  // namespace rse
