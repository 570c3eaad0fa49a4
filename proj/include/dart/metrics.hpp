#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dart/types.hpp"

namespace dart {

struct DtwResult {
  std::vector<std::pair<Index, Index>> path;  // (0,0) .. (|a|-1, |b|-1)
  Scalar cost = 0;
};

/// Minimum-cost monotone alignment under squared Euclidean frame distance
/// with steps {(1,0), (0,1), (1,1)}.
DtwResult dtw_align(const Matrix& a, const Matrix& b);

/// Mean over the DTW path of (10/ln 10) * sqrt(2 * sum_d (c_d - c'_d)^2),
/// dropping coefficient 0 first when skip_c0.
Scalar mcd(const Matrix& ref_cep, const Matrix& syn_cep, bool skip_c0);

/// Pitch contour; 0 marks an unvoiced frame.
struct F0Track {
  std::vector<Scalar> f0_hz;
};

/// Fraction of frames with a voicing mismatch or, both voiced, a relative
/// pitch deviation above the threshold.
Scalar ffe(const F0Track& ref, const F0Track& syn, Scalar gross_threshold = 0.2);

Scalar cosine_similarity(const Vector& a, const Vector& b);
Scalar average_cosine_similarity(const std::vector<Vector>& a, const std::vector<Vector>& b);

struct WerResult {
  Scalar rate = 0;
  Index substitutions = 0, deletions = 0, insertions = 0;
};

/// Minimum-edit alignment with unit costs; ties prefer substitutions over
/// insert+delete pairs.
WerResult wer(const std::vector<std::string>& ref_tokens,
              const std::vector<std::string>& hyp_tokens);

struct MosSummary {
  Scalar mean = 0;
  Scalar ci95_halfwidth = 0;
};

/// Sample mean with a two-sided Student-t 95% interval half-width.
MosSummary mos_summary(const std::vector<Scalar>& ratings);

/// Upper quantile of the t distribution, e.g. p=0.975 for a 95% interval.
Scalar student_t_quantile(Scalar p, Index dof);

struct BWSTrial {
  std::vector<std::string> shown;
  std::string best;
  std::string worst;
};

struct BwsScore {
  Index best = 0, worst = 0, shown = 0;
  Scalar score = 0;       // (best - worst) / shown
  Scalar best_share = 0;  // best / shown
};

std::map<std::string, BwsScore> bws_scores(const std::vector<BWSTrial>& trials);

/// Leave-one-out nearest-centroid accuracy. A record counts as correct only
/// when its own label's centroid is the strict unique nearest.
Scalar centroid_accuracy(const std::vector<Vector>& points,
                         const std::vector<std::string>& labels);

/// Mean-centered projection onto the top two principal directions, each
/// oriented so its first nonzero loading is positive. Returns N x 2.
Matrix pca2(const std::vector<Vector>& vectors);

}  // namespace dart
