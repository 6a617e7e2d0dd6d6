#pragma once

#include <cstdint>
#include <vector>

#include "annograph/matrix.hpp"

namespace annograph {

struct KMeansModel {
  Matrix centers;                         // k x feature_dim
  std::vector<std::uint32_t> assignments; // per node, in [0, k)
  double inertia = 0.0;                   // sum of squared distances to assigned centers
  std::uint32_t k = 0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_trace;      // one entry per Lloyd iteration
};

// Lloyd's algorithm with k-means++ seeding on a fixed PRNG stream. Converges
// when assignments stop changing; empty clusters are reseeded to the point
// farthest from its current center. Deterministic given (features, k, seed,
// max_iter).
KMeansModel kmeans(const Matrix& features, std::uint32_t k, std::uint64_t seed, int max_iter = 100);

// Per-node annotation-difficulty heuristic: 1 / (1 + distance to the nearest
// center), re-evaluated against all centers. Values lie in (0, 1].
std::vector<double> c_density(const Matrix& features, const KMeansModel& model);

// Euclidean distance from each row to its nearest center.
std::vector<double> nearest_center_distance(const Matrix& features, const Matrix& centers);

Matrix l2_normalize_rows(const Matrix& features);

// Audit serialization of a fitted model (centers, assignments, inertia, seed).
std::string kmeans_model_to_json(const KMeansModel& model);
KMeansModel kmeans_model_from_json(const std::string& text);

}  // namespace annograph
