#include "rse/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rse/error.hpp"

namespace rse {

namespace {

constexpr double kZeroRowTol = 1e-12;

Vector unit_row(const SimilarityFactor& phi, Eigen::Index i) {
  return phi.Phi.row(i).transpose() / phi.row_norms(i);
}

double max_row_norm(const SimilarityFactor& phi) {
  return phi.row_norms.size() ? phi.row_norms.maxCoeff() : 0.0;
}

void finish(const SimilarityFactor& phi, ClusterSet& cs, const IndexSet& trusted) {
  std::sort(cs.clusters.begin(), cs.clusters.end(),
            [](const IndexSet& a, const IndexSet& b) { return a.front() < b.front(); });
  std::vector<bool> is_trusted(static_cast<size_t>(cs.m), false);
  for (auto t : trusted) {
    if (t < 0 || t >= cs.m) throw Error(ErrorCode::ValidationError, "trusted index out of range");
    is_trusted[static_cast<size_t>(t)] = true;
  }
  const bool any_silent = std::any_of(cs.clusters.begin(), cs.clusters.end(), [&](auto& c) {
    return phi.is_zero_row(c.front());
  });
  cs.silent = -1;
  cs.p.clear();
  cs.covered.clear();
  for (size_t k = 0; k < cs.clusters.size(); ++k) {
    const auto& c = cs.clusters[k];
    if (any_silent && phi.is_zero_row(c.front())) {
      cs.silent = static_cast<int>(k);
      cs.p.push_back(Vector::Constant(static_cast<Eigen::Index>(c.size()),
                                      1.0 / std::sqrt(static_cast<double>(c.size()))));
      cs.covered.push_back(true);
      continue;
    }
    cs.p.push_back(cluster_coefficients(phi, c));
    cs.covered.push_back(
        std::any_of(c.begin(), c.end(), [&](auto i) { return is_trusted[static_cast<size_t>(i)]; }));
  }
  cs.Pi = build_pi(cs);
}

// Applies the first `count` merges of the dendrogram.
ClusterSet cut(const SimilarityFactor& phi, const Dendrogram& d, size_t count,
               const IndexSet& trusted) {
  ClusterSet cs;
  cs.m = d.m;
  std::vector<IndexSet> nodes(static_cast<size_t>(d.m) + d.merges.size());
  std::vector<bool> alive(nodes.size(), false);
  for (auto i : d.active) {
    nodes[static_cast<size_t>(i)] = {i};
    alive[static_cast<size_t>(i)] = true;
  }
  double theta = 0.0;
  for (size_t k = 0; k < count; ++k) {
    const auto& mg = d.merges[k];
    auto& dst = nodes[static_cast<size_t>(d.m) + k];
    const auto& a = nodes[static_cast<size_t>(mg.a)];
    const auto& b = nodes[static_cast<size_t>(mg.b)];
    dst.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(dst));
    alive[static_cast<size_t>(mg.a)] = alive[static_cast<size_t>(mg.b)] = false;
    alive[static_cast<size_t>(d.m) + k] = true;
    theta = std::max(theta, mg.height);
  }
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (alive[i]) cs.clusters.push_back(nodes[i]);
  }
  if (!d.silent.empty()) cs.clusters.push_back(d.silent);
  cs.theta = theta;
  finish(phi, cs, trusted);
  return cs;
}

bool coverage_at(const SimilarityFactor& phi, const Dendrogram& d, size_t count,
                 const IndexSet& trusted) {
  return cut(phi, d, count, trusted).fully_covered();
}

}  // namespace

bool SimilarityFactor::is_zero_row(Eigen::Index i) const {
  const double mx = row_norms.size() ? row_norms.maxCoeff() : 0.0;
  return !(row_norms(i) > kZeroRowTol * mx) || mx == 0.0;
}

SimilarityFactor compute_phi(const LtiSystem& sys, const SubspaceDecomposition& dec) {
  SimilarityFactor f;
  const Matrix Wc = solve_lyapunov(dec.A_bar, dec.V_bar.transpose() * dec.V_bar);
  const Matrix L = psd_factor(Wc);
  f.Phi = (sys.C * dec.U_bar) * L;
  f.row_norms = f.Phi.rowwise().norm();
  return f;
}

double dissimilarity(const SimilarityFactor& phi, Eigen::Index i, Eigen::Index j) {
  for (auto k : {i, j}) {
    if (phi.is_zero_row(k)) {
      throw Error(ErrorCode::ZeroRow, "row " + std::to_string(k) + " of Phi is zero");
    }
  }
  if (i == j) return 0.0;
  const Vector a = unit_row(phi, i);
  const Vector b = unit_row(phi, j);
  return std::min((a - b).norm(), (a + b).norm());
}

Dendrogram build_dendrogram(const SimilarityFactor& phi) {
  Dendrogram d;
  d.m = phi.outputs();
  for (Eigen::Index i = 0; i < d.m; ++i) {
    (phi.is_zero_row(i) ? d.silent : d.active).push_back(i);
  }
  const auto na = static_cast<Eigen::Index>(d.active.size());
  if (na == 0) return d;

  Matrix U(na, phi.Phi.cols());
  for (Eigen::Index k = 0; k < na; ++k) U.row(k) = unit_row(phi, d.active[k]).transpose();
  Matrix D = Matrix::Zero(na, na);
  for (Eigen::Index a = 0; a < na; ++a) {
    for (Eigen::Index b = a + 1; b < na; ++b) {
      D(a, b) = D(b, a) = std::min((U.row(a) - U.row(b)).norm(), (U.row(a) + U.row(b)).norm());
    }
  }

  // Naive complete linkage. Slot k always holds the cluster whose smallest
  // member is active[k]; id[k] is its dendrogram id.
  std::vector<Eigen::Index> id(d.active.begin(), d.active.end());
  std::vector<bool> alive(static_cast<size_t>(na), true);
  for (Eigen::Index step = 0; step + 1 < na; ++step) {
    Eigen::Index ba = -1, bb = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < na; ++a) {
      if (!alive[static_cast<size_t>(a)]) continue;
      for (Eigen::Index b = a + 1; b < na; ++b) {
        if (!alive[static_cast<size_t>(b)]) continue;
        const double h = D(a, b);
        // First strict minimum in scan order = lowest-index tie winner.
        if (h < best) {
          best = h;
          ba = a;
          bb = b;
        }
      }
    }
    d.merges.push_back({id[static_cast<size_t>(ba)], id[static_cast<size_t>(bb)], best});
    for (Eigen::Index c = 0; c < na; ++c) {
      const double h = std::max(D(ba, c), D(bb, c));
      D(ba, c) = D(c, ba) = h;
    }
    D(ba, ba) = 0.0;
    id[static_cast<size_t>(ba)] = d.m + step;
    alive[static_cast<size_t>(bb)] = false;
  }
  return d;
}

Eigen::Index ClusterSet::cluster_of(Eigen::Index i) const {
  for (size_t k = 0; k < clusters.size(); ++k) {
    if (std::binary_search(clusters[k].begin(), clusters[k].end(), i)) {
      return static_cast<Eigen::Index>(k);
    }
  }
  throw Error(ErrorCode::ValidationError, "measurement " + std::to_string(i) + " not clustered");
}

bool ClusterSet::fully_covered() const {
  for (size_t k = 0; k < covered.size(); ++k) {
    if (static_cast<int>(k) != silent && !covered[k]) return false;
  }
  return true;
}

double ClusterSet::diameter(const SimilarityFactor& phi, Eigen::Index k) const {
  if (static_cast<int>(k) == silent) return 0.0;
  const auto& c = clusters[static_cast<size_t>(k)];
  double d = 0.0;
  for (size_t a = 0; a < c.size(); ++a) {
    for (size_t b = a + 1; b < c.size(); ++b) d = std::max(d, dissimilarity(phi, c[a], c[b]));
  }
  return d;
}

void ClusterSet::validate() const {
  std::vector<int> seen(static_cast<size_t>(m), 0);
  for (const auto& c : clusters) {
    if (c.empty()) throw Error(ErrorCode::ValidationError, "empty cluster");
    for (auto i : c) {
      if (i < 0 || i >= m) throw Error(ErrorCode::ValidationError, "cluster index out of range");
      ++seen[static_cast<size_t>(i)];
    }
  }
  for (auto s : seen) {
    if (s != 1) throw Error(ErrorCode::ValidationError, "clusters do not partition the outputs");
  }
  if (p.size() != clusters.size()) throw Error(ErrorCode::ValidationError, "missing coefficients");
  for (size_t k = 0; k < p.size(); ++k) {
    if (p[k].size() != static_cast<Eigen::Index>(clusters[k].size()) ||
        std::abs(p[k].norm() - 1.0) > 1e-12) {
      throw Error(ErrorCode::ValidationError, "coefficient vector is not unit norm");
    }
  }
  const auto K = size();
  if (Pi.rows() != K || Pi.cols() != m ||
      (Pi * Pi.transpose() - Matrix::Identity(K, K)).norm() > 1e-10) {
    throw Error(ErrorCode::ValidationError, "Pi Pi^T differs from identity");
  }
}

ClusterSet form_clusters(const SimilarityFactor& phi, double theta, const IndexSet& trusted) {
  return form_clusters(phi, build_dendrogram(phi), theta, trusted);
}

ClusterSet form_clusters(const SimilarityFactor& phi, const Dendrogram& dendro, double theta,
                         const IndexSet& trusted) {
  size_t count = 0;
  while (count < dendro.merges.size() && dendro.merges[count].height <= theta) ++count;
  ClusterSet cs = cut(phi, dendro, count, trusted);
  cs.theta = theta;
  return cs;
}

ClusterSet form_clusters_k(const SimilarityFactor& phi, Eigen::Index K, const IndexSet& trusted) {
  return form_clusters_k(phi, build_dendrogram(phi), K, trusted);
}

ClusterSet form_clusters_k(const SimilarityFactor& phi, const Dendrogram& dendro, Eigen::Index K,
                           const IndexSet& trusted) {
  const auto na = static_cast<Eigen::Index>(dendro.active.size());
  const Eigen::Index silent = dendro.silent.empty() ? 0 : 1;
  const Eigen::Index lo = std::min<Eigen::Index>(na, 1) + silent;
  const Eigen::Index hi = na + silent;
  if (K < lo || K > hi) {
    std::ostringstream os;
    os << "target K=" << K << " outside [" << lo << ", " << hi << "]";
    throw Error(ErrorCode::ConfigInvalid, os.str());
  }
  const auto count = static_cast<size_t>(na - (K - silent));
  return cut(phi, dendro, count, trusted);
}

double min_theta_for_coverage(const SimilarityFactor& phi, const IndexSet& trusted) {
  return min_theta_for_coverage(phi, build_dendrogram(phi), trusted);
}

double min_theta_for_coverage(const SimilarityFactor& phi, const Dendrogram& dendro,
                              const IndexSet& trusted) {
  if (trusted.empty()) {
    throw Error(ErrorCode::AllMeasurementsAttacked, "no trusted measurement");
  }
  // Coverage is monotone in the number of applied merges (nested partitions).
  size_t lo = 0, hi = dendro.merges.size();
  if (coverage_at(phi, dendro, 0, trusted)) return 0.0;
  if (!coverage_at(phi, dendro, hi, trusted)) {
    throw Error(ErrorCode::UncoveredCluster, "no trusted index among the nonzero outputs");
  }
  while (hi - lo > 1) {
    const size_t mid = lo + (hi - lo) / 2;
    (coverage_at(phi, dendro, mid, trusted) ? hi : lo) = mid;
  }
  // Equal heights are applied together by a threshold cut.
  return dendro.merges[hi - 1].height;
}

Vector cluster_coefficients(const SimilarityFactor& phi, const IndexSet& cluster) {
  if (cluster.empty()) throw Error(ErrorCode::DegenerateCluster, "empty cluster");
  if (cluster.size() == 1) return Vector::Ones(1);
  Matrix S(static_cast<Eigen::Index>(cluster.size()), phi.Phi.cols());
  for (size_t k = 0; k < cluster.size(); ++k) S.row(static_cast<Eigen::Index>(k)) = phi.Phi.row(cluster[k]);
  Eigen::BDCSVD<Matrix> svd(S, Eigen::ComputeThinU);
  if (svd.singularValues().size() == 0 ||
      !(svd.singularValues()(0) > kZeroRowTol * max_row_norm(phi))) {
    throw Error(ErrorCode::DegenerateCluster, "cluster submatrix of Phi is numerically zero");
  }
  Vector p = svd.matrixU().col(0);
  p /= p.norm();
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (std::abs(p(k)) > 1e-14) {
      if (p(k) < 0) p = -p;
      break;
    }
  }
  return p;
}

Matrix build_pi(const ClusterSet& cs) {
  Matrix Pi = Matrix::Zero(cs.size(), cs.m);
  for (size_t k = 0; k < cs.clusters.size(); ++k) {
    const auto& c = cs.clusters[k];
    for (size_t j = 0; j < c.size(); ++j) {
      Pi(static_cast<Eigen::Index>(k), c[j]) = cs.p[k](static_cast<Eigen::Index>(j));
    }
  }
  return Pi;
}

IndexSet complement(const IndexSet& attacked, Eigen::Index m) {
  std::vector<bool> a(static_cast<size_t>(m), false);
  for (auto i : attacked) {
    if (i < 0 || i >= m) throw Error(ErrorCode::ValidationError, "attacked index out of range");
    a[static_cast<size_t>(i)] = true;
  }
  IndexSet t;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!a[static_cast<size_t>(i)]) t.push_back(i);
  }
  return t;
}

Matrix augment_measurement_matrix(const Matrix& C, const Matrix& Pi, const IndexSet& attacked) {
  const Eigen::Index m = C.rows();
  if (Pi.cols() != m) throw Error(ErrorCode::ValidationError, "Pi and C disagree on m");
  const IndexSet trusted = complement(attacked, m);
  if (trusted.empty() && m > 0) {
    throw Error(ErrorCode::AllMeasurementsAttacked, "every measurement is attacked");
  }
  const Matrix P = Pi.transpose() * Pi * C;
  Matrix Cb(static_cast<Eigen::Index>(trusted.size() + attacked.size()), C.cols());
  Eigen::Index r = 0;
  for (auto i : trusted) Cb.row(r++) = C.row(i);
  for (auto i : attacked) Cb.row(r++) = P.row(i);
  return Cb;
}

Matrix surrogate_map(const ClusterSet& cs, const IndexSet& attacked) {
  std::vector<bool> is_att(static_cast<size_t>(cs.m), false);
  for (auto i : attacked) {
    if (i < 0 || i >= cs.m) throw Error(ErrorCode::ValidationError, "attacked index out of range");
    is_att[static_cast<size_t>(i)] = true;
  }
  Matrix S = Matrix::Zero(static_cast<Eigen::Index>(attacked.size()), cs.m);
  for (size_t r = 0; r < attacked.size(); ++r) {
    const auto i = attacked[r];
    const auto k = cs.cluster_of(i);
    const auto& c = cs.clusters[static_cast<size_t>(k)];
    const Vector& p = cs.p[static_cast<size_t>(k)];
    double denom = 0.0, pi = 0.0;
    for (size_t j = 0; j < c.size(); ++j) {
      if (c[j] == i) pi = p(static_cast<Eigen::Index>(j));
      if (!is_att[static_cast<size_t>(c[j])]) denom += p(static_cast<Eigen::Index>(j)) * p(static_cast<Eigen::Index>(j));
    }
    if (denom == 0.0) {
      if (static_cast<int>(k) == cs.silent) continue;
      throw Error(ErrorCode::UncoveredCluster,
                  "cluster of measurement " + std::to_string(i) + " has no trusted member");
    }
    for (size_t j = 0; j < c.size(); ++j) {
      if (!is_att[static_cast<size_t>(c[j])]) {
        S(static_cast<Eigen::Index>(r), c[j]) = pi * p(static_cast<Eigen::Index>(j)) / denom;
      }
    }
  }
  return S;
}

Vector surrogate_outputs(const ClusterSet& cs, const Vector& y, const IndexSet& attacked) {
  if (y.size() != cs.m) throw Error(ErrorCode::ValidationError, "measurement vector length != m");
  return surrogate_map(cs, attacked) * y;
}

ApproximationError approximation_error(const Matrix& Y, const ClusterSet& cs) {
  if (Y.cols() != cs.m) throw Error(ErrorCode::ValidationError, "trajectory width != m");
  ApproximationError e;
  const Matrix P = cs.Pi.transpose() * cs.Pi;
  const Matrix Yb = Y * P;  // rows are time samples; P is symmetric
  e.per_measurement = Vector::Constant(cs.m, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  Eigen::Index used = 0;
  for (Eigen::Index i = 0; i < cs.m; ++i) {
    const double den = Y.col(i).norm();
    if (!(den >= 1e-12)) {
      ++e.excluded;
      continue;
    }
    e.per_measurement(i) = (Yb.col(i) - Y.col(i)).norm() / den;
    sum += e.per_measurement(i);
    ++used;
  }
  e.aggregate = used ? sum / static_cast<double>(used) : 0.0;
  return e;
}

}  // namespace rse
