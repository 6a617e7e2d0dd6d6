#pragma once

#include <cstdint>
#include <vector>

namespace annograph {

// Label counts of the currently selected annotated nodes, with the running
// sum of c*ln(c) cached so entropy and change-of-entropy queries are O(1).
class LabelMultiset {
 public:
  explicit LabelMultiset(std::size_t class_count) : counts_(class_count, 0) {}

  void add(int label);
  void remove(int label);

  std::size_t size() const { return total_; }
  std::size_t count(int label) const { return counts_[static_cast<std::size_t>(label)]; }
  std::size_t class_count() const { return counts_.size(); }

  // Shannon entropy in nats: ln(n) - sum(c*ln c)/n.
  double entropy() const;

  // Entropy delta from hypothetically removing one node of this label:
  // H(multiset - {label}) - H(multiset). Requires size >= 2 and count > 0.
  double change_of_entropy(int label) const;

 private:
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
  double sum_clogc_ = 0.0;
};

double shannon_entropy(const LabelMultiset& counts);

double coe(const LabelMultiset& selected, int node_label);

// r_COE orientation inside the filtering score. ProtectSmall ranks small
// (diversity-critical) COE highest, so those nodes survive; Literal ranks
// plain high-to-low on the raw COE value.
enum class CoeOrientation { protect_small, literal };

struct FilterConfig {
  double beta0 = 1.0;  // confidence rank weight
  double beta1 = 1.0;  // COE rank weight
  double beta2 = 1.0;  // C-Density rank weight
  std::uint32_t target_size = 0;
  CoeOrientation orientation = CoeOrientation::protect_small;
};

struct FilterRemoval {
  std::uint32_t node = 0;
  double f_filter = 0.0;
  double rank_confidence = 0.0;
  double rank_coe = 0.0;
  double rank_cdensity = 0.0;
};

struct FilterResult {
  std::vector<std::uint32_t> survivors;     // sorted ascending
  std::vector<FilterRemoval> removals;      // in removal order
};

// Iterative removal: each round recomputes COE and all three rank
// percentiles over the remaining set, then drops the argmin of
// beta0*r_conf + beta1*r_coe + beta2*r_cdensity (ties: lowest confidence,
// then lowest node index) until target_size nodes remain.
//
// labels/confidences align with selected_nodes; cdensity is indexed by
// global node id. ABSTAIN annotations must be dropped by the caller.
FilterResult post_filter(const std::vector<std::uint32_t>& selected_nodes,
                         const std::vector<int>& labels, const std::vector<double>& confidences,
                         const std::vector<double>& cdensity, std::size_t class_count,
                         const FilterConfig& config);

}  // namespace annograph
