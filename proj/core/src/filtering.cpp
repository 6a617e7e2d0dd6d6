#include "annograph/filtering.hpp"

#include <algorithm>
#include <cmath>

#include "annograph/errors.hpp"
#include "annograph/selection.hpp"

namespace annograph {

namespace {

double xlogx(std::size_t c) {
  return c == 0 ? 0.0 : static_cast<double>(c) * std::log(static_cast<double>(c));
}

}  // namespace

void LabelMultiset::add(int label) {
  auto& c = counts_.at(static_cast<std::size_t>(label));
  sum_clogc_ -= xlogx(c);
  ++c;
  sum_clogc_ += xlogx(c);
  ++total_;
}

void LabelMultiset::remove(int label) {
  auto& c = counts_.at(static_cast<std::size_t>(label));
  if (c == 0) throw ConfigError("LabelMultiset: removing absent label");
  sum_clogc_ -= xlogx(c);
  --c;
  sum_clogc_ += xlogx(c);
  --total_;
}

double LabelMultiset::entropy() const {
  if (total_ == 0) throw ConfigError("LabelMultiset: entropy of empty multiset");
  return std::log(static_cast<double>(total_)) - sum_clogc_ / static_cast<double>(total_);
}

double LabelMultiset::change_of_entropy(int label) const {
  if (total_ < 2) throw ConfigError("LabelMultiset: COE requires at least 2 elements");
  const std::size_t c = counts_.at(static_cast<std::size_t>(label));
  if (c == 0) throw ConfigError("LabelMultiset: COE of absent label");
  const double reduced_sum = sum_clogc_ - xlogx(c) + xlogx(c - 1);
  const double n = static_cast<double>(total_);
  const double reduced = std::log(n - 1.0) - reduced_sum / (n - 1.0);
  return reduced - entropy();
}

double shannon_entropy(const LabelMultiset& counts) { return counts.entropy(); }

double coe(const LabelMultiset& selected, int node_label) {
  return selected.change_of_entropy(node_label);
}

FilterResult post_filter(const std::vector<std::uint32_t>& selected_nodes,
                         const std::vector<int>& labels, const std::vector<double>& confidences,
                         const std::vector<double>& cdensity, std::size_t class_count,
                         const FilterConfig& config) {
  const std::size_t n = selected_nodes.size();
  if (labels.size() != n || confidences.size() != n)
    throw ConfigError("post_filter: annotations do not cover the selected set");
  if (config.target_size == 0 || config.target_size > n)
    throw ConfigError("post_filter: target_size must be in [1, selected size]");
  if (config.beta0 < 0 || config.beta1 < 0 || config.beta2 < 0 ||
      config.beta0 + config.beta1 + config.beta2 <= 0)
    throw ConfigError("post_filter: betas must be non-negative with positive sum");
  for (int label : labels)
    if (label < 0 || static_cast<std::size_t>(label) >= class_count)
      throw ConfigError("post_filter: ABSTAIN or out-of-range label in input");
  for (std::uint32_t node : selected_nodes)
    if (node >= cdensity.size())
      throw ConfigError("post_filter: cdensity does not cover node " + std::to_string(node));

  LabelMultiset multiset(class_count);
  for (int label : labels) multiset.add(label);

  std::vector<std::size_t> remaining(n);
  for (std::size_t i = 0; i < n; ++i) remaining[i] = i;

  FilterResult result;
  while (remaining.size() > config.target_size) {
    const std::size_t m = remaining.size();
    ScoreVector conf_s{{}, "conf"}, coe_s{{}, "coe"}, cd_s{{}, "cd"};
    conf_s.values.reserve(m);
    coe_s.values.reserve(m);
    cd_s.values.reserve(m);
    for (std::size_t idx : remaining) {
      conf_s.values.push_back(confidences[idx]);
      const double delta = multiset.change_of_entropy(labels[idx]);
      coe_s.values.push_back(config.orientation == CoeOrientation::protect_small ? -delta : delta);
      cd_s.values.push_back(cdensity[selected_nodes[idx]]);
    }
    const auto r_conf = rank_percentile(conf_s);
    const auto r_coe = rank_percentile(coe_s);
    const auto r_cd = rank_percentile(cd_s);

    std::size_t worst = 0;
    double worst_f = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double f = config.beta0 * r_conf.values[i] + config.beta1 * r_coe.values[i] +
                       config.beta2 * r_cd.values[i];
      if (i == 0) {
        worst_f = f;
        continue;
      }
      const std::size_t a = remaining[i], b = remaining[worst];
      const bool smaller =
          f < worst_f ||
          (f == worst_f && (confidences[a] < confidences[b] ||
                            (confidences[a] == confidences[b] &&
                             selected_nodes[a] < selected_nodes[b])));
      if (smaller) {
        worst = i;
        worst_f = f;
      }
    }

    const std::size_t victim = remaining[worst];
    result.removals.push_back({selected_nodes[victim], worst_f, r_conf.values[worst],
                               r_coe.values[worst], r_cd.values[worst]});
    multiset.remove(labels[victim]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(worst));
  }

  result.survivors.reserve(remaining.size());
  for (std::size_t idx : remaining) result.survivors.push_back(selected_nodes[idx]);
  std::sort(result.survivors.begin(), result.survivors.end());
  return result;
}

}  // namespace annograph
