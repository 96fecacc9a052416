#include "njet/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace njet {

void TrainConfig::validate() const {
  require(learning_rate >= 0.0, "train: learning_rate must be non-negative");
  require(momentum >= 0.0 && momentum < 1.0, "train: momentum must be in [0, 1)");
  require(epochs >= 1, "train: epochs must be at least 1");
  require(batch_size >= 1, "train: batch_size must be at least 1");
  require(alpha_l2 >= 0.0, "train: alpha_l2 must be non-negative");
  require(sigma_lr_scale > 0.0, "train: sigma_lr_scale must be positive");
  require(sigma_warmup_epochs >= 0, "train: sigma_warmup_epochs must be non-negative");
}

void SigmaTrace::write_csv(std::ostream& out) const {
  out << "epoch,layer,sigma,filter_size,train_loss,eval_accuracy\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%d,%d,%.17g,%d,%.17g,%.17g\n", r.epoch,
                  r.layer, r.sigma, r.filter_size, r.train_loss, r.eval_accuracy);
    out << line;
  }
}

void sgd_step(std::vector<ParamRef>& params, std::vector<VectorXd>& velocity,
              const TrainConfig& config, bool freeze_sigma) {
  if (velocity.empty()) {
    velocity.reserve(params.size());
    for (const auto& p : params) velocity.push_back(VectorXd::Zero(p.n));
  }
  require(velocity.size() == params.size(), "sgd: velocity/param count mismatch");

  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamRef& p = params[i];
    if (freeze_sigma && p.kind == ParamKind::LogSigma) continue;
    Eigen::Map<VectorXd> value(p.value, p.n);
    Eigen::Map<const VectorXd> grad(p.grad, p.n);
    if (!grad.allFinite())
      throw std::runtime_error("sgd: non-finite gradient in parameter '" + p.name +
                               "'");
    const double eta = config.learning_rate *
                       (p.kind == ParamKind::LogSigma ? config.sigma_lr_scale : 1.0);
    VectorXd& v = velocity[i];
    v = config.momentum * v - eta * grad;
    if (p.kind == ParamKind::Alpha && config.alpha_l2 > 0.0) {
      // Decay uses the pre-step value, matching "p + v - eta*lambda*p".
      value += v - (config.learning_rate * config.alpha_l2) * value;
    } else {
      value += v;
    }
  }
}

SigmaTrace train(Network& net, const LabeledDataset& train_set,
                 const LabeledDataset& eval_set, const TrainConfig& config,
                 Rng& rng) {
  config.validate();
  require(train_set.count >= 1, "train: empty training set");
  require(train_set.class_count == net.spec.class_count,
          "train: dataset class count does not match the model head");

  std::vector<ParamRef> params;
  net.collect_params(params);
  std::vector<VectorXd> velocity;

  std::vector<Index> order(static_cast<std::size_t>(train_set.count));
  std::iota(order.begin(), order.end(), Index(0));
  std::vector<Index> batch_idx;

  SigmaTrace trace;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    Index seen = 0;
    for (Index start = 0; start < train_set.count; start += config.batch_size) {
      const Index n = std::min(config.batch_size, train_set.count - start);
      batch_idx.assign(order.begin() + start, order.begin() + start + n);
      FeatureMap x = train_set.gather(batch_idx);
      VectorXi y(n);
      for (Index j = 0; j < n; ++j) y[j] = train_set.labels[batch_idx[j]];

      net.zero_grads();
      FeatureMap logits = net.forward(x, true);
      SoftmaxXent sx = softmax_xent(logits, y);
      if (!std::isfinite(sx.loss))
        throw std::runtime_error("train: loss became non-finite at epoch " +
                                 std::to_string(epoch));
      net.backward(sx.dlogits);
      sgd_step(params, velocity, config, epoch <= config.sigma_warmup_epochs);
      loss_sum += sx.loss * double(n);
      seen += n;
    }

    for (NJetConvLayer* layer : net.njet_layers)
      if (!(layer->sigma() > 0.0) || !std::isfinite(layer->sigma()))
        throw std::runtime_error("train: sigma left the positive reals");

    const double accuracy = evaluate(net, eval_set, config.batch_size);
    const double mean_loss = loss_sum / double(seen);
    for (std::size_t i = 0; i < net.conv_layers.size(); ++i) {
      SigmaTraceRow row;
      row.epoch = epoch;
      row.layer = static_cast<int>(i);
      if (auto* nj = dynamic_cast<NJetConvLayer*>(net.conv_layers[i])) {
        row.sigma = nj->sigma();
        row.filter_size = nj->current_size();
      } else {
        row.sigma = 0.0;
        row.filter_size = static_cast<Conv2dLayer*>(net.conv_layers[i])->size;
      }
      row.train_loss = mean_loss;
      row.eval_accuracy = accuracy;
      trace.rows.push_back(row);
    }
  }
  return trace;
}

double evaluate(Network& net, const LabeledDataset& dataset, Index batch_size) {
  require(dataset.count >= 1, "evaluate: empty dataset");
  require(dataset.class_count == net.spec.class_count,
          "evaluate: dataset class count does not match the model head");
  require(batch_size >= 1, "evaluate: batch_size must be positive");

  Index correct = 0;
  for (Index start = 0; start < dataset.count; start += batch_size) {
    const Index n = std::min(batch_size, dataset.count - start);
    FeatureMap x = dataset.batch(start, n);
    FeatureMap logits = net.forward(x, false);
    for (Index b = 0; b < n; ++b) {
      Index best = 0;
      double best_v = logits.at(b, 0, 0, 0);
      for (Index c = 1; c < logits.channels; ++c)
        if (logits.at(b, c, 0, 0) > best_v) {
          best_v = logits.at(b, c, 0, 0);
          best = c;
        }
      if (best == dataset.labels[start + b]) ++correct;
    }
  }
  return double(correct) / double(dataset.count);
}

}  // namespace njet
