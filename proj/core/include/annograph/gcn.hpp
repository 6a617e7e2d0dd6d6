#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "annograph/graph.hpp"
#include "annograph/matrix.hpp"

namespace annograph::gcn {

struct GcnParams {
  Matrix w1;  // feature_dim x hidden
  Matrix w2;  // hidden x classes
};

enum class LossKind { ce, weighted_ce };

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  int hidden_dim = 64;
  double dropout_rate = 0.5;
  int epochs = 30;
  LossKind loss = LossKind::ce;
  std::uint64_t seed = 0;
  // Adam moments, fixed
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainHistory {
  std::vector<double> loss;             // one per epoch
  std::vector<double> train_accuracy;
  std::vector<double> test_accuracy;    // empty unless an eval split is given
};

// Two-layer graph convolution: logits = A * dropout(relu(A X W1)) * W2.
// The dropout mask (same shape as the hidden layer, entries 0 or 1/(1-rate))
// applies during training only; null mask = evaluation pass.
Matrix forward(const SparseNormalizedAdjacency& adj, const Matrix& features,
               const GcnParams& params, const Matrix* dropout_mask = nullptr);

// Cross entropy over train nodes plus (weight_decay/2) * ||W||^2 on both
// layers. Plain: mean of per-node losses. Weighted: sum(w_i * l_i) / sum(w_i).
double loss_value(const Matrix& logits, const std::vector<std::uint32_t>& train_indices,
                  const std::vector<int>& labels, const std::vector<double>* weights,
                  const GcnParams& params, double weight_decay);

struct Gradients {
  Matrix w1;
  Matrix w2;
};

// Analytic gradients of loss_value (including the decay term).
Gradients gradients(const SparseNormalizedAdjacency& adj, const Matrix& features,
                    const GcnParams& params, const std::vector<std::uint32_t>& train_indices,
                    const std::vector<int>& labels, const std::vector<double>* weights,
                    double weight_decay, const Matrix* dropout_mask = nullptr);

// Optional test split evaluated each epoch when gold labels are available.
struct EvalSplit {
  const std::vector<int>* gold = nullptr;
  const std::vector<std::uint8_t>* mask = nullptr;  // 1 = evaluate this node
};

// Glorot-uniform init, Adam for exactly config.epochs full-batch steps with a
// fresh seeded dropout mask per epoch; no early stopping, no validation set.
// labels/weights align with train_indices. Throws on non-finite loss.
std::pair<GcnParams, TrainHistory> train(const SparseNormalizedAdjacency& adj,
                                         const Matrix& features, std::size_t class_count,
                                         const std::vector<std::uint32_t>& train_indices,
                                         const std::vector<int>& labels,
                                         const std::vector<double>* weights,
                                         const TrainConfig& config, const EvalSplit& eval = {});

// Argmax over logits, dropout off; ties resolve to the lowest class index.
std::vector<int> predict(const GcnParams& params, const SparseNormalizedAdjacency& adj,
                         const Matrix& features);

// Softmax rows of the evaluation-time logits.
Matrix predict_probabilities(const GcnParams& params, const SparseNormalizedAdjacency& adj,
                             const Matrix& features);

// Per-epoch dropout mask: entry 1/(1-rate) kept, 0 dropped.
Matrix make_dropout_mask(std::size_t rows, std::size_t cols, double rate, std::uint64_t seed);

// Checkpoint: one-line JSON header (dims, seed, config hash) followed by raw
// little-endian doubles for W1 then W2.
void save_checkpoint(const GcnParams& params, const std::string& path,
                     const std::string& config_hash, std::uint64_t seed);
GcnParams load_checkpoint(const std::string& path);

void save_history_csv(const TrainHistory& history, const std::string& path,
                      const std::string& config_hash);

}  // namespace annograph::gcn
