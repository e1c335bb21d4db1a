#include "kedit/train.hpp"

#include <cmath>
#include <numeric>
#include <optional>

#include "kedit/error.hpp"

namespace kedit {

namespace {

std::vector<int> shifted_targets(const std::vector<int>& seq) {
  std::vector<int> targets(seq.size(), -1);
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) targets[i] = seq[i + 1];
  return targets;
}

}  // namespace

TrainResult train_toy(const ModelConfig& config, const std::vector<std::vector<int>>& corpus,
                      const TrainOptions& options, RngStream& rng) {
  if (corpus.empty()) throw Error(ErrorCode::kInvalidArgument, "training corpus is empty");
  if (options.steps < 1) throw Error(ErrorCode::kInvalidArgument, "steps must be at least 1");
  if (options.batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be at least 1");
  for (const auto& s : corpus) {
    if (s.size() < 2) throw Error(ErrorCode::kInvalidArgument, "training sequences need at least 2 tokens");
  }

  TrainResult result{init_model(config), {}};
  ModelBundle& model = result.model;
  std::vector<Tensor*> params;
  model.for_each_parameter([&](const std::string&, Tensor& t) { params.push_back(&t); });

  std::vector<std::size_t> order(corpus.size());
  std::size_t cursor = order.size();

  for (int step = 0; step < options.steps; ++step) {
    ad::Graph g;
    const auto w = bind_leaves(g, model);
    double loss_sum = 0.0;
    std::size_t n_targets = 0;
    std::optional<ad::Var> total;
    for (int b = 0; b < options.batch_size; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        cursor = 0;
      }
      const auto& seq = corpus[order[cursor++]];
      const ad::Var logits = forward_graph(g, config, w, seq, {}, {}, nullptr);
      const ad::Var loss = ad::cross_entropy_sum(logits, shifted_targets(seq));
      loss_sum += loss.value()[0];
      n_targets += seq.size() - 1;
      total = total ? ad::add(*total, loss) : loss;
    }
    g.backward(*total);
    std::vector<const Tensor*> grads;
    Weights<ad::Var>::visit(w, model.gated(), [&](const std::string&, const ad::Var& v) { grads.push_back(&v.grad()); });

    const double mean_loss = loss_sum / static_cast<double>(n_targets);
    if (!std::isfinite(mean_loss)) {
      throw Error(ErrorCode::kNonFiniteLoss, "loss became non-finite at step " + std::to_string(step));
    }
    result.losses.push_back(mean_loss);

    double scale = options.learning_rate / static_cast<double>(n_targets);
    if (options.grad_clip > 0.0) {
      double sq = 0.0;
      for (const Tensor* gr : grads)
        for (double v : gr->data()) sq += v * v;
      const double norm = std::sqrt(sq) / static_cast<double>(n_targets);
      if (norm > options.grad_clip) scale *= options.grad_clip / norm;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& pd = params[i]->data();
      const auto& gd = grads[i]->data();
      for (std::size_t j = 0; j < pd.size(); ++j) pd[j] -= scale * gd[j];
    }
  }
  return result;
}

double corpus_loss(const ModelBundle& model, const std::vector<std::vector<int>>& corpus) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& seq : corpus) {
    ad::Graph g;
    const auto w = bind_constants(g, model);
    const ad::Var logits = forward_graph(g, model.config, w, seq, {}, {}, nullptr);
    total += ad::cross_entropy_sum(logits, shifted_targets(seq)).value()[0];
    count += seq.size() - 1;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace kedit
