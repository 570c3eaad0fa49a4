#include "dart/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "dart/error.hpp"

namespace dart {
namespace {

Scalar frame_dist(const Matrix& a, Index i, const Matrix& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace

DtwResult dtw_align(const Matrix& a, const Matrix& b) {
  if (a.rows() < 1 || b.rows() < 1) throw ContractViolation("dtw: empty sequence");
  if (a.cols() != b.cols()) {
    throw DimensionError("dtw: feature dims " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.cols()) + " do not match");
  }
  const Index n = a.rows(), m = b.rows();
  Matrix cum(n, m);
  cum(0, 0) = frame_dist(a, 0, b, 0);
  for (Index i = 1; i < n; ++i) cum(i, 0) = cum(i - 1, 0) + frame_dist(a, i, b, 0);
  for (Index j = 1; j < m; ++j) cum(0, j) = cum(0, j - 1) + frame_dist(a, 0, b, j);
  for (Index i = 1; i < n; ++i) {
    for (Index j = 1; j < m; ++j) {
      cum(i, j) = frame_dist(a, i, b, j) +
                  std::min({cum(i - 1, j - 1), cum(i - 1, j), cum(i, j - 1)});
    }
  }

  DtwResult result;
  result.cost = cum(n - 1, m - 1);
  Index i = n - 1, j = m - 1;
  result.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const Scalar diag = cum(i - 1, j - 1), up = cum(i - 1, j), left = cum(i, j - 1);
      const Scalar best = std::min({diag, up, left});
      if (diag == best) {
        --i;
        --j;
      } else if (up == best) {
        --i;
      } else {
        --j;
      }
    }
    result.path.emplace_back(i, j);
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

Scalar mcd(const Matrix& ref_cep, const Matrix& syn_cep, bool skip_c0) {
  if (ref_cep.cols() != syn_cep.cols()) {
    throw DimensionError("mcd: cepstral dims " + std::to_string(ref_cep.cols()) + " and " +
                         std::to_string(syn_cep.cols()) + " do not match");
  }
  if (ref_cep.rows() < 1 || syn_cep.rows() < 1) throw ContractViolation("mcd: empty input");
  const Index from = skip_c0 ? 1 : 0;
  if (ref_cep.cols() - from < 1) {
    throw DimensionError("mcd: no coefficients left after dropping c0");
  }
  const Matrix ref = ref_cep.rightCols(ref_cep.cols() - from);
  const Matrix syn = syn_cep.rightCols(syn_cep.cols() - from);
  const DtwResult align = dtw_align(ref, syn);
  const Scalar factor = 10.0 / std::log(10.0);
  Scalar sum = 0;
  for (const auto& [i, j] : align.path) {
    sum += factor * std::sqrt(2.0 * (ref.row(i) - syn.row(j)).squaredNorm());
  }
  return sum / static_cast<Scalar>(align.path.size());
}

Scalar ffe(const F0Track& ref, const F0Track& syn, Scalar gross_threshold) {
  if (ref.f0_hz.size() != syn.f0_hz.size()) {
    throw DimensionError("ffe: frame counts " + std::to_string(ref.f0_hz.size()) + " and " +
                         std::to_string(syn.f0_hz.size()) + " do not match");
  }
  if (ref.f0_hz.empty()) throw ContractViolation("ffe: empty tracks");
  if (!(gross_threshold >= 0)) throw ContractViolation("ffe: negative threshold");
  for (const auto* track : {&ref, &syn}) {
    for (Scalar v : track->f0_hz) {
      if (!(v >= 0) || !std::isfinite(v)) throw ValidationError("ffe: f0 must be finite and >= 0");
    }
  }
  std::size_t errors = 0;
  for (std::size_t t = 0; t < ref.f0_hz.size(); ++t) {
    const bool ref_voiced = ref.f0_hz[t] > 0;
    const bool syn_voiced = syn.f0_hz[t] > 0;
    if (ref_voiced != syn_voiced) {
      ++errors;
    } else if (ref_voiced && std::abs(syn.f0_hz[t] - ref.f0_hz[t]) / ref.f0_hz[t] >
                                 gross_threshold) {
      ++errors;
    }
  }
  return static_cast<Scalar>(errors) / static_cast<Scalar>(ref.f0_hz.size());
}

Scalar cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " do not match");
  }
  const Scalar na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) {
    throw ValidationError("cosine: similarity undefined for a zero vector");
  }
  return a.dot(b) / (na * nb);
}

Scalar average_cosine_similarity(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine: paired lists of different lengths");
  }
  if (a.empty()) throw InsufficientDataError("cosine: no pairs");
  Scalar sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += cosine_similarity(a[i], b[i]);
  return sum / static_cast<Scalar>(a.size());
}

WerResult wer(const std::vector<std::string>& ref_tokens,
              const std::vector<std::string>& hyp_tokens) {
  if (ref_tokens.empty()) throw ContractViolation("wer: empty reference");
  const std::size_t n = ref_tokens.size(), m = hyp_tokens.size();
  std::vector<std::vector<Index>> cost(n + 1, std::vector<Index>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) cost[i][0] = static_cast<Index>(i);
  for (std::size_t j = 0; j <= m; ++j) cost[0][j] = static_cast<Index>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const Index sub = cost[i - 1][j - 1] + (ref_tokens[i - 1] != hyp_tokens[j - 1] ? 1 : 0);
      cost[i][j] = std::min({sub, cost[i - 1][j] + 1, cost[i][j - 1] + 1});
    }
  }

  WerResult r;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        cost[i][j] == cost[i - 1][j - 1] + (ref_tokens[i - 1] != hyp_tokens[j - 1] ? 1 : 0)) {
      if (ref_tokens[i - 1] != hyp_tokens[j - 1]) ++r.substitutions;
      --i;
      --j;
    } else if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  r.rate = static_cast<Scalar>(r.substitutions + r.deletions + r.insertions) /
           static_cast<Scalar>(n);
  return r;
}

namespace {

// Continued-fraction core of the regularized incomplete beta function.
Scalar beta_cf(Scalar a, Scalar b, Scalar x) {
  constexpr int kMaxIter = 300;
  constexpr Scalar kEps = 3e-16;
  constexpr Scalar kTiny = 1e-300;
  const Scalar qab = a + b, qap = a + 1, qam = a - 1;
  Scalar c = 1;
  Scalar d = 1 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1 / d;
  Scalar h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const Scalar m2 = 2.0 * m;
    Scalar aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1 / d;
    const Scalar del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

Scalar incomplete_beta(Scalar a, Scalar b, Scalar x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  const Scalar front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1) / (a + b + 2)) return front * beta_cf(a, b, x) / a;
  return 1 - front * beta_cf(b, a, 1 - x) / b;
}

}  // namespace

Scalar student_t_quantile(Scalar p, Index dof) {
  if (dof < 1) throw ContractViolation("t quantile: dof must be >= 1");
  if (!(p > 0 && p < 1)) throw ContractViolation("t quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0;
  if (p < 0.5) return -student_t_quantile(1 - p, dof);

  // For t > 0, P(T > t) = I_x(dof/2, 1/2) / 2 with x = dof / (dof + t^2);
  // invert by bisection in x, which is monotone.
  const Scalar nu = static_cast<Scalar>(dof);
  const Scalar target = 2 * (1 - p);
  Scalar lo = 0, hi = 1;
  for (int it = 0; it < 200; ++it) {
    const Scalar mid = 0.5 * (lo + hi);
    if (incomplete_beta(nu / 2, 0.5, mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-16) break;
  }
  const Scalar x = 0.5 * (lo + hi);
  return std::sqrt(nu * (1 - x) / x);
}

MosSummary mos_summary(const std::vector<Scalar>& ratings) {
  if (ratings.size() < 2) {
    throw InsufficientDataError("mos: need at least 2 ratings, got " +
                                std::to_string(ratings.size()));
  }
  const auto n = static_cast<Scalar>(ratings.size());
  Scalar mean = 0;
  for (Scalar r : ratings) mean += r;
  mean /= n;
  Scalar ss = 0;
  for (Scalar r : ratings) ss += (r - mean) * (r - mean);
  const Scalar sd = std::sqrt(ss / (n - 1));
  const Scalar t = student_t_quantile(0.975, static_cast<Index>(ratings.size()) - 1);
  return {mean, t * sd / std::sqrt(n)};
}

std::map<std::string, BwsScore> bws_scores(const std::vector<BWSTrial>& trials) {
  std::map<std::string, BwsScore> scores;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const BWSTrial& trial = trials[t];
    const std::set<std::string> shown(trial.shown.begin(), trial.shown.end());
    if (shown.size() < 2) {
      throw ValidationError("bws trial " + std::to_string(t) + ": needs 2+ distinct items");
    }
    if (trial.best == trial.worst) {
      throw ValidationError("bws trial " + std::to_string(t) + ": best equals worst");
    }
    if (!shown.count(trial.best) || !shown.count(trial.worst)) {
      throw ValidationError("bws trial " + std::to_string(t) +
                            ": best/worst not among shown items");
    }
    for (const auto& item : shown) ++scores[item].shown;
    ++scores[trial.best].best;
    ++scores[trial.worst].worst;
  }
  for (auto& [item, s] : scores) {
    s.score = static_cast<Scalar>(s.best - s.worst) / static_cast<Scalar>(s.shown);
    s.best_share = static_cast<Scalar>(s.best) / static_cast<Scalar>(s.shown);
  }
  return scores;
}

namespace {

// Incremental mean; returns the input value exactly when every sample is
// identical, which keeps deliberate centroid ties exact.
Vector running_mean(const std::vector<const Vector*>& samples) {
  Vector mean = *samples.front();
  for (std::size_t k = 1; k < samples.size(); ++k) {
    mean += (*samples[k] - mean) / static_cast<Scalar>(k + 1);
  }
  return mean;
}

}  // namespace

Scalar centroid_accuracy(const std::vector<Vector>& points,
                         const std::vector<std::string>& labels) {
  if (points.size() != labels.size()) {
    throw DimensionError("centroid accuracy: " + std::to_string(points.size()) + " points vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (points.empty()) throw InsufficientDataError("centroid accuracy: no records");
  const Index dim = points.front().size();
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim) {
      throw DimensionError("centroid accuracy: mixed embedding dimensions");
    }
    by_label[labels[i]].push_back(i);
  }
  if (by_label.size() < 2) {
    throw InsufficientDataError("centroid accuracy: need at least 2 labels");
  }
  for (const auto& [label, members] : by_label) {
    if (members.size() < 2) {
      throw InsufficientDataError("centroid accuracy: label '" + label +
                                  "' has fewer than 2 records");
    }
  }

  std::map<std::string, Vector> full_centroid;
  for (const auto& [label, members] : by_label) {
    std::vector<const Vector*> samples;
    samples.reserve(members.size());
    for (std::size_t i : members) samples.push_back(&points[i]);
    full_centroid[label] = running_mean(samples);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<const Vector*> rest;
    for (std::size_t j : by_label[labels[i]]) {
      if (j != i) rest.push_back(&points[j]);
    }
    const Vector own_centroid = running_mean(rest);

    Scalar best = std::numeric_limits<Scalar>::infinity();
    std::size_t best_count = 0;
    bool best_is_own = false;
    for (const auto& [label, centroid] : full_centroid) {
      const bool own = label == labels[i];
      const Scalar dist = (points[i] - (own ? own_centroid : centroid)).squaredNorm();
      if (dist < best) {
        best = dist;
        best_count = 1;
        best_is_own = own;
      } else if (dist == best) {
        ++best_count;
      }
    }
    if (best_count == 1 && best_is_own) ++correct;
  }
  return static_cast<Scalar>(correct) / static_cast<Scalar>(points.size());
}

Matrix pca2(const std::vector<Vector>& vectors) {
  if (vectors.size() < 2) throw InsufficientDataError("pca2: need at least 2 vectors");
  const Index dim = vectors.front().size();
  if (dim < 2) throw DataError("pca2: dimension must be at least 2");
  for (const auto& v : vectors) {
    if (v.size() != dim) throw DimensionError("pca2: mixed dimensions");
  }
  const auto n = static_cast<Index>(vectors.size());
  Eigen::MatrixXd x(n, dim);
  for (Index i = 0; i < n; ++i) x.row(i) = vectors[static_cast<std::size_t>(i)].transpose();
  x.rowwise() -= x.colwise().mean();

  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<Scalar>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca2: eigendecomposition failed");

  Matrix out(n, 2);
  for (Index k = 0; k < 2; ++k) {
    Eigen::VectorXd direction = solver.eigenvectors().col(dim - 1 - k);
    for (Index d = 0; d < dim; ++d) {
      if (std::abs(direction[d]) > 1e-12) {
        if (direction[d] < 0) direction = -direction;
        break;
      }
    }
    out.col(k) = x * direction;
  }
  return out;
}

}  // namespace dart
