#include "annograph/clustering.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "annograph/errors.hpp"
#include "annograph/rng.hpp"

namespace annograph {

namespace {

std::vector<double> squared_dist_to(const Matrix& features, std::span<const double> center) {
  std::vector<double> d(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i)
    d[i] = squared_distance(features.row(i), center);
  return d;
}

Matrix plus_plus_init(const Matrix& features, std::uint32_t k, Rng& rng) {
  const std::size_t n = features.rows();
  Matrix centers(k, features.cols());
  const std::size_t first = static_cast<std::size_t>(rng.next_below(n));
  std::copy(features.row(first).begin(), features.row(first).end(), centers.row(0).begin());

  std::vector<double> best = squared_dist_to(features, centers.row(0));
  for (std::uint32_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : best) total += d;
    std::size_t pick;
    if (total <= 0.0) {
      // all remaining points coincide with existing centers
      pick = static_cast<std::size_t>(rng.next_below(n));
    } else {
      const double target = rng.next_double() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    }
    std::copy(features.row(pick).begin(), features.row(pick).end(), centers.row(c).begin());
    const auto d = squared_dist_to(features, centers.row(c));
    for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], d[i]);
  }
  return centers;
}

}  // namespace

KMeansModel kmeans(const Matrix& features, std::uint32_t k, std::uint64_t seed, int max_iter) {
  const std::size_t n = features.rows();
  if (k == 0) throw ConfigError("kmeans: k must be positive");
  if (k > n) throw ConfigError("kmeans: k exceeds point count");
  if (max_iter <= 0) throw ConfigError("kmeans: max_iter must be positive");

  Rng rng(seed);
  KMeansModel model;
  model.k = k;
  model.seed = seed;
  model.centers = plus_plus_init(features, k, rng);
  model.assignments.assign(n, 0);

  const std::size_t dim = features.cols();
  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<std::size_t> counts(k);

  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::uint32_t c = 0; c < k; ++c) {
        const double d = squared_distance(features.row(i), model.centers.row(c));
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      if (model.assignments[i] != arg) {
        model.assignments[i] = arg;
        changed = true;
      }
      inertia += best;
    }
    model.inertia = inertia;
    model.inertia_trace.push_back(inertia);
    if (!changed && it > 0) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t c = model.assignments[i];
      ++counts[c];
      const auto row = features.row(i);
      for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += row[j];
    }
    for (std::uint32_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j)
          model.centers(c, j) = sums[c * dim + j] / static_cast<double>(counts[c]);
      } else {
        // reseed the empty cluster to the point farthest from its center
        double worst = -1.0;
        std::size_t pick = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d =
              squared_distance(features.row(i), model.centers.row(model.assignments[i]));
          if (d > worst) {
            worst = d;
            pick = i;
          }
        }
        std::copy(features.row(pick).begin(), features.row(pick).end(), model.centers.row(c).begin());
      }
    }
  }

  // final labels and inertia against the last center update
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::uint32_t c = 0; c < k; ++c) {
      const double d = squared_distance(features.row(i), model.centers.row(c));
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    model.assignments[i] = arg;
    inertia += best;
  }
  model.inertia = inertia;
  return model;
}

std::vector<double> nearest_center_distance(const Matrix& features, const Matrix& centers) {
  if (features.cols() != centers.cols())
    throw ConfigError("nearest_center_distance: dimension mismatch");
  std::vector<double> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.rows(); ++c)
      best = std::min(best, squared_distance(features.row(i), centers.row(c)));
    out[i] = std::sqrt(best);
  }
  return out;
}

std::vector<double> c_density(const Matrix& features, const KMeansModel& model) {
  auto dist = nearest_center_distance(features, model.centers);
  for (double& d : dist) d = 1.0 / (1.0 + d);
  return dist;
}

std::string kmeans_model_to_json(const KMeansModel& model) {
  nlohmann::json j;
  j["k"] = model.k;
  j["seed"] = model.seed;
  j["inertia"] = model.inertia;
  j["assignments"] = model.assignments;
  j["center_dim"] = model.centers.cols();
  auto centers = nlohmann::json::array();
  for (std::size_t c = 0; c < model.centers.rows(); ++c) {
    auto row = nlohmann::json::array();
    for (double v : model.centers.row(c)) row.push_back(v);
    centers.push_back(std::move(row));
  }
  j["centers"] = std::move(centers);
  return j.dump();
}

KMeansModel kmeans_model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("kmeans model: invalid JSON");
  KMeansModel model;
  model.k = j.at("k").get<std::uint32_t>();
  model.seed = j.at("seed").get<std::uint64_t>();
  model.inertia = j.at("inertia").get<double>();
  model.assignments = j.at("assignments").get<std::vector<std::uint32_t>>();
  const auto dim = j.at("center_dim").get<std::size_t>();
  const auto& centers = j.at("centers");
  model.centers = Matrix(centers.size(), dim);
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t d = 0; d < dim; ++d) model.centers(c, d) = centers[c][d].get<double>();
  return model;
}

Matrix l2_normalize_rows(const Matrix& features) {
  Matrix out = features;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double norm = 0.0;
    for (double v : out.row(i)) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : out.row(i)) v /= norm;
  }
  return out;
}

}  // namespace annograph
