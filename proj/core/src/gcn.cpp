#include "annograph/gcn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "annograph/errors.hpp"
#include "annograph/rng.hpp"

namespace annograph::gcn {

namespace {

void check_finite(const Matrix& m, const char* layer) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double v : m.row(i))
      if (!std::isfinite(v))
        throw ConfigError(std::string("gcn: non-finite value in ") + layer);
}

struct ForwardTrace {
  Matrix propagated;  // A X
  Matrix pre;         // A X W1
  Matrix hidden;      // dropout(relu(pre))
  Matrix logits;      // A (hidden W2)
};

ForwardTrace forward_trace(const SparseNormalizedAdjacency& adj, const Matrix& features,
                           const GcnParams& params, const Matrix* dropout_mask) {
  if (features.rows() != adj.dim) throw ConfigError("gcn: feature rows != adjacency dim");
  if (features.cols() != params.w1.rows()) throw ConfigError("gcn: W1 shape mismatch");
  if (params.w1.cols() != params.w2.rows()) throw ConfigError("gcn: W2 shape mismatch");
  if (dropout_mask != nullptr &&
      (dropout_mask->rows() != adj.dim || dropout_mask->cols() != params.w1.cols()))
    throw ConfigError("gcn: dropout mask shape mismatch");

  ForwardTrace t;
  t.propagated = spmm(adj, features);
  t.pre = matmul(t.propagated, params.w1);
  check_finite(t.pre, "layer 1 pre-activation");
  t.hidden = t.pre;
  for (std::size_t i = 0; i < t.hidden.rows(); ++i)
    for (std::size_t j = 0; j < t.hidden.cols(); ++j) {
      double v = t.hidden(i, j) > 0.0 ? t.hidden(i, j) : 0.0;
      if (dropout_mask != nullptr) v *= (*dropout_mask)(i, j);
      t.hidden(i, j) = v;
    }
  t.logits = spmm(adj, matmul(t.hidden, params.w2));
  check_finite(t.logits, "layer 2 logits");
  return t;
}

double decay_term(const GcnParams& params, double weight_decay) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.w1.rows(); ++i)
    for (double v : params.w1.row(i)) sq += v * v;
  for (std::size_t i = 0; i < params.w2.rows(); ++i)
    for (double v : params.w2.row(i)) sq += v * v;
  return 0.5 * weight_decay * sq;
}

// Per-train-node coefficients of the data loss: 1/n plain, w_i/sum(w) weighted.
std::vector<double> loss_coefficients(const std::vector<std::uint32_t>& train_indices,
                                      const std::vector<double>* weights) {
  if (train_indices.empty()) throw ConfigError("gcn: empty training set");
  std::vector<double> coeff(train_indices.size());
  if (weights == nullptr) {
    const double inv = 1.0 / static_cast<double>(train_indices.size());
    for (double& c : coeff) c = inv;
    return coeff;
  }
  if (weights->size() != train_indices.size())
    throw ConfigError("gcn: weight count != train node count");
  double total = 0.0;
  for (double w : *weights) {
    if (w < 0.0) throw ConfigError("gcn: negative loss weight");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("gcn: loss weights sum to zero");
  for (std::size_t i = 0; i < coeff.size(); ++i) coeff[i] = (*weights)[i] / total;
  return coeff;
}

// log-sum-exp per row, stable.
double row_logsumexp(std::span<const double> row) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : row) m = std::max(m, v);
  double acc = 0.0;
  for (double v : row) acc += std::exp(v - m);
  return m + std::log(acc);
}

}  // namespace

Matrix forward(const SparseNormalizedAdjacency& adj, const Matrix& features,
               const GcnParams& params, const Matrix* dropout_mask) {
  return forward_trace(adj, features, params, dropout_mask).logits;
}

double loss_value(const Matrix& logits, const std::vector<std::uint32_t>& train_indices,
                  const std::vector<int>& labels, const std::vector<double>* weights,
                  const GcnParams& params, double weight_decay) {
  if (labels.size() != train_indices.size())
    throw ConfigError("gcn: label count != train node count");
  const auto coeff = loss_coefficients(train_indices, weights);
  double data = 0.0;
  for (std::size_t i = 0; i < train_indices.size(); ++i) {
    const auto row = logits.row(train_indices[i]);
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
      throw ConfigError("gcn: label out of range");
    data += coeff[i] * (row_logsumexp(row) - row[static_cast<std::size_t>(y)]);
  }
  return data + decay_term(params, weight_decay);
}

Gradients gradients(const SparseNormalizedAdjacency& adj, const Matrix& features,
                    const GcnParams& params, const std::vector<std::uint32_t>& train_indices,
                    const std::vector<int>& labels, const std::vector<double>* weights,
                    double weight_decay, const Matrix* dropout_mask) {
  const auto trace = forward_trace(adj, features, params, dropout_mask);
  const auto coeff = loss_coefficients(train_indices, weights);

  // d loss / d logits: coeff * (softmax - onehot) on train rows
  Matrix dlogits(trace.logits.rows(), trace.logits.cols(), 0.0);
  for (std::size_t i = 0; i < train_indices.size(); ++i) {
    const std::uint32_t node = train_indices[i];
    const auto row = trace.logits.row(node);
    const double lse = row_logsumexp(row);
    for (std::size_t c = 0; c < trace.logits.cols(); ++c)
      dlogits(node, c) = coeff[i] * std::exp(row[c] - lse);
    dlogits(node, static_cast<std::size_t>(labels[i])) -= coeff[i];
  }

  // logits = A (hidden W2); A is symmetric
  const Matrix dmid = spmm(adj, dlogits);
  Gradients grads;
  grads.w2 = matmul_at_b(trace.hidden, dmid);
  Matrix dhidden = matmul_a_bt(dmid, params.w2);
  for (std::size_t i = 0; i < dhidden.rows(); ++i)
    for (std::size_t j = 0; j < dhidden.cols(); ++j) {
      double g = dhidden(i, j);
      if (dropout_mask != nullptr) g *= (*dropout_mask)(i, j);
      dhidden(i, j) = trace.pre(i, j) > 0.0 ? g : 0.0;
    }
  grads.w1 = matmul_at_b(trace.propagated, dhidden);

  for (std::size_t i = 0; i < grads.w1.rows(); ++i)
    for (std::size_t j = 0; j < grads.w1.cols(); ++j)
      grads.w1(i, j) += weight_decay * params.w1(i, j);
  for (std::size_t i = 0; i < grads.w2.rows(); ++i)
    for (std::size_t j = 0; j < grads.w2.cols(); ++j)
      grads.w2(i, j) += weight_decay * params.w2(i, j);
  return grads;
}

Matrix make_dropout_mask(std::size_t rows, std::size_t cols, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("gcn: dropout rate must be in [0,1)");
  Matrix mask(rows, cols, 1.0);
  if (rate == 0.0) return mask;
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      mask(i, j) = rng.next_double() < rate ? 0.0 : keep_scale;
  return mask;
}

namespace {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = (2.0 * rng.next_double() - 1.0) * limit;
  return m;
}

double masked_accuracy(const std::vector<int>& pred, const std::vector<int>& gold,
                       const std::vector<std::uint8_t>& mask) {
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    if (pred[i] == gold[i]) ++hit;
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows(), 0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    int best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = static_cast<int>(c);
    out[i] = best;
  }
  return out;
}

struct AdamState {
  Matrix m, v;
  explicit AdamState(const Matrix& shape) : m(shape.rows(), shape.cols()), v(shape.rows(), shape.cols()) {}
};

void adam_step(Matrix& w, const Matrix& grad, AdamState& state, const TrainConfig& cfg, int t) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      const double g = grad(i, j);
      state.m(i, j) = cfg.beta1 * state.m(i, j) + (1.0 - cfg.beta1) * g;
      state.v(i, j) = cfg.beta2 * state.v(i, j) + (1.0 - cfg.beta2) * g * g;
      const double mhat = state.m(i, j) / bc1;
      const double vhat = state.v(i, j) / bc2;
      w(i, j) -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

}  // namespace

std::pair<GcnParams, TrainHistory> train(const SparseNormalizedAdjacency& adj,
                                         const Matrix& features, std::size_t class_count,
                                         const std::vector<std::uint32_t>& train_indices,
                                         const std::vector<int>& labels,
                                         const std::vector<double>* weights,
                                         const TrainConfig& config, const EvalSplit& eval) {
  if (train_indices.empty()) throw ConfigError("gcn: empty training set");
  if (config.epochs < 1) throw ConfigError("gcn: epochs must be >= 1");
  if (config.learning_rate < 0.0) throw ConfigError("gcn: negative learning rate");
  if (class_count < 2) throw ConfigError("gcn: need at least 2 classes");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= class_count)
      throw ConfigError("gcn: training label out of range");

  Rng init_rng(derive_seed(config.seed, "init"));
  GcnParams params;
  params.w1 = glorot_uniform(features.cols(), static_cast<std::size_t>(config.hidden_dim), init_rng);
  params.w2 = glorot_uniform(static_cast<std::size_t>(config.hidden_dim), class_count, init_rng);

  AdamState state1(params.w1), state2(params.w2);
  TrainHistory history;
  const bool track_test = eval.gold != nullptr && eval.mask != nullptr;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Matrix mask;
    const Matrix* mask_ptr = nullptr;
    if (config.dropout_rate > 0.0) {
      mask = make_dropout_mask(adj.dim, static_cast<std::size_t>(config.hidden_dim),
                               config.dropout_rate,
                               derive_seed(config.seed, "dropout/" + std::to_string(epoch)));
      mask_ptr = &mask;
    }

    const Matrix train_logits = forward(adj, features, params, mask_ptr);
    const double epoch_loss =
        loss_value(train_logits, train_indices, labels, weights, params, config.weight_decay);
    if (!std::isfinite(epoch_loss))
      throw ConfigError("gcn: training diverged at epoch " + std::to_string(epoch));
    history.loss.push_back(epoch_loss);

    const Matrix eval_logits = forward(adj, features, params, nullptr);
    const auto pred = argmax_rows(eval_logits);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < train_indices.size(); ++i)
      if (pred[train_indices[i]] == labels[i]) ++hit;
    history.train_accuracy.push_back(static_cast<double>(hit) /
                                     static_cast<double>(train_indices.size()));
    if (track_test)
      history.test_accuracy.push_back(masked_accuracy(pred, *eval.gold, *eval.mask));

    const auto grads = gradients(adj, features, params, train_indices, labels, weights,
                                 config.weight_decay, mask_ptr);
    adam_step(params.w1, grads.w1, state1, config, epoch);
    adam_step(params.w2, grads.w2, state2, config, epoch);
  }
  return {std::move(params), std::move(history)};
}

std::vector<int> predict(const GcnParams& params, const SparseNormalizedAdjacency& adj,
                         const Matrix& features) {
  return argmax_rows(forward(adj, features, params, nullptr));
}

Matrix predict_probabilities(const GcnParams& params, const SparseNormalizedAdjacency& adj,
                             const Matrix& features) {
  Matrix logits = forward(adj, features, params, nullptr);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double lse = row_logsumexp(row);
    for (double& v : row) v = std::exp(v - lse);
  }
  return logits;
}

void save_checkpoint(const GcnParams& params, const std::string& path,
                     const std::string& config_hash, std::uint64_t seed) {
  nlohmann::json header;
  header["w1_rows"] = params.w1.rows();
  header["w1_cols"] = params.w1.cols();
  header["w2_rows"] = params.w2.rows();
  header["w2_cols"] = params.w2.cols();
  header["seed"] = seed;
  header["config_hash"] = config_hash;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(params.w1.data()),
            static_cast<std::streamsize>(params.w1.rows() * params.w1.cols() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(params.w2.data()),
            static_cast<std::streamsize>(params.w2.rows() * params.w2.cols() * sizeof(double)));
}

GcnParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path);
  std::string header_line;
  std::getline(in, header_line);
  const auto header = nlohmann::json::parse(header_line, nullptr, false);
  if (header.is_discarded()) throw ConfigError("checkpoint header is not valid JSON");
  GcnParams params;
  params.w1 = Matrix(header.at("w1_rows").get<std::size_t>(),
                     header.at("w1_cols").get<std::size_t>());
  params.w2 = Matrix(header.at("w2_rows").get<std::size_t>(),
                     header.at("w2_cols").get<std::size_t>());
  in.read(reinterpret_cast<char*>(params.w1.data()),
          static_cast<std::streamsize>(params.w1.rows() * params.w1.cols() * sizeof(double)));
  in.read(reinterpret_cast<char*>(params.w2.data()),
          static_cast<std::streamsize>(params.w2.rows() * params.w2.cols() * sizeof(double)));
  if (!in) throw ConfigError("checkpoint truncated: " + path);
  return params;
}

void save_history_csv(const TrainHistory& history, const std::string& path,
                      const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write history " + path);
  out << "# config_hash=" << config_hash << '\n';
  out << "epoch,loss,train_accuracy,test_accuracy\n";
  char buf[96];
  for (std::size_t i = 0; i < history.loss.size(); ++i) {
    if (i < history.test_accuracy.size()) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g", i + 1, history.loss[i],
                    history.train_accuracy[i], history.test_accuracy[i]);
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,", i + 1, history.loss[i],
                    history.train_accuracy[i]);
    }
    out << buf << '\n';
  }
}

}  // namespace annograph::gcn
