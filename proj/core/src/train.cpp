// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/train.hpp"

#include <cmath>
#include <numeric>

#include "voxbayes/errors.hpp"

namespace voxbayes {

Var elbo_loss(const Var& probs, const Tensor& labels, const KlLedger& ledger, std::size_t n_train) {
  if (n_train == 0) throw ConfigError("elbo_loss: n_train must be >= 1");
  if (probs->shape().size() != 1 || labels.shape() != probs->shape()) {
    throw ShapeError("elbo_loss: probabilities " + shape_str(probs->shape()) + " vs labels " +
                     shape_str(labels.shape()));
  }
  const Var p = ad::clamp(probs, kProbabilityClamp, 1.0 - kProbabilityClamp);
  Tensor neg_labels = labels;
  for (auto& v : neg_labels.data()) v = 1.0 - v;
  const Var pos = ad::mul(constant(labels), ad::log(p));
  const Var neg = ad::mul(constant(neg_labels), ad::log(ad::shift(ad::neg(p), 1.0)));
  const Var bce = ad::neg(ad::mean(ad::add(pos, neg)));
  if (ledger.empty()) return bce;
  return ad::add(bce, ad::scale(ledger.total(), 1.0 / static_cast<double>(n_train)));
}

void adam_step(const std::vector<Var>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamHyper& hyper) {
  if (!(hyper.learning_rate > 0.0)) throw ConfigError("adam: learning rate must be > 0");
  if (grads.size() != params.size()) {
    throw ShapeError("adam: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p->shape(), 0.0);
      state.v.emplace_back(p->shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape() || state.m[i].shape() != params[i]->shape()) {
      throw ShapeError("adam: gradient " + shape_str(grads[i].shape()) + " does not match parameter " +
                       shape_str(params[i]->shape()));
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor value = params[i]->value();
    auto w = value.data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
      w[k] -= hyper.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + hyper.epsilon);
    }
    params[i]->set_value(std::move(value));
  }
}

namespace {

void check_samples(const std::vector<LabeledSample>& set, const char* what) {
  for (const auto& s : set) {
    if (s.label != 0 && s.label != 1) {
      throw ConfigError(std::string(what) + " sample " + (s.volume.source.empty() ? "?" : s.volume.source) +
                        " has label " + std::to_string(s.label) + ", expected 0 or 1");
    }
  }
}

Checkpoint snapshot(const Model& model, const TrainConfig& config, std::size_t epoch,
                    std::map<std::string, double> metrics) {
  Checkpoint c;
  c.spec = model.spec();
  c.arrays = model.state();
  c.epoch = epoch;
  c.seed = config.seed;
  c.metrics = std::move(metrics);
  return c;
}

}  // namespace

double accuracy_at(const std::vector<double>& probs, const std::vector<int>& labels, double threshold) {
  if (probs.size() != labels.size()) throw ShapeError("accuracy: length mismatch");
  if (probs.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    correct += ((probs[i] >= threshold) ? 1 : 0) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

TrainResult train(const NetworkSpec& spec, const std::vector<LabeledSample>& train_set,
                  const std::vector<LabeledSample>& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (train_set.empty() || val_set.empty()) throw ConfigError("train: training and validation sets must be non-empty");
  if (!(config.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (config.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  check_samples(train_set, "training");
  check_samples(val_set, "validation");

  Model model(spec, config.seed);
  const auto params = model.parameters();
  AdamState adam;
  const AdamHyper hyper{.learning_rate = config.learning_rate};
  const Rng root(config.seed);

  std::vector<const Volume*> val_volumes;
  std::vector<int> val_labels;
  for (const auto& s : val_set) {
    val_volumes.push_back(&s.volume);
    val_labels.push_back(s.label);
  }
  PredictConfig val_predict{.samples = config.validation_samples, .seed = config.seed};

  TrainResult result;
  result.checkpoint = snapshot(model, config, 0, {});
  double best_accuracy = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng = root.derive(epoch);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[epoch_rng.below(i)]);

    // A trailing batch of one joins the previous batch: batch statistics need two samples.
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batches.emplace_back(start, std::min(order.size(), start + config.batch_size));
    }
    if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }

    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto [lo, hi] = batches[bi];
      Rng batch_rng = epoch_rng.derive(bi + 1);
      std::vector<Volume> augmented;
      std::vector<const Volume*> volumes;
      Tensor labels(Shape{hi - lo});
      augmented.reserve(hi - lo);
      for (std::size_t k = lo; k < hi; ++k) {
        const LabeledSample& s = train_set[order[k]];
        if (config.augment) {
          augmented.push_back(augment(s.volume, batch_rng, config.augment_policy));
          volumes.push_back(&augmented.back());
        } else {
          volumes.push_back(&s.volume);
        }
        labels[k - lo] = s.label;
      }
      KlLedger ledger;
      const Var probs = model.forward(constant(stack_volumes(volumes)), ForwardMode::train, batch_rng, &ledger);
      const Var loss = elbo_loss(probs, labels, ledger, train_set.size());
      const GradientMap grads = backward(loss);
      std::vector<Tensor> g;
      g.reserve(params.size());
      for (const auto& p : params) {
        auto it = grads.find(p.get());
        g.push_back(it != grads.end() ? it->second : Tensor(p->shape(), 0.0));
      }
      adam_step(params, g, adam, hyper);
      loss_sum += loss->value().item();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches.size());
    rec.val_accuracy = accuracy_at(predict(model, val_volumes, val_predict), val_labels);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_accuracy > best_accuracy) {
      best_accuracy = rec.val_accuracy;
      since_best = 0;
      result.checkpoint = snapshot(model, config, epoch,
                                   {{"train_loss", rec.train_loss}, {"val_accuracy", rec.val_accuracy}});
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  return result;
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
  Model model(checkpoint.spec, checkpoint.seed);
  model.load_state(checkpoint.arrays);
  return model;
}

std::vector<double> predict_mc(Model& model, const Volume& volume, std::size_t samples,
                               std::uint64_t seed) {
  if (samples == 0) throw ConfigError("predict_mc: need at least one sample");
  if (!model.is_stochastic()) {
    throw ConfigError("predict_mc: model has no Bayesian or dropout layer, MC sampling is meaningless");
  }
  const Var input = constant(stack_volumes({&volume}));
  const Rng root(seed);
  std::vector<double> out(samples);
  for (std::size_t t = 0; t < samples; ++t) {
    Rng rng = root.derive(t);
    out[t] = model.forward(input, ForwardMode::sample, rng)->value()[0];
  }
  return out;
}

double predict(Model& model, const Volume& volume, const PredictConfig& config) {
  return predict(model, std::vector<const Volume*>{&volume}, config).front();
}

std::vector<double> predict(Model& model, const std::vector<const Volume*>& volumes,
                            const PredictConfig& config) {
  std::vector<double> out;
  out.reserve(volumes.size());
  if (model.spec().head == Head::bernoulli_mean) {
    for (const Volume* v : volumes) {
      const auto s = predict_mc(model, *v, config.samples, config.seed);
      out.push_back(std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size()));
    }
    return out;
  }
  const std::size_t chunk = std::max<std::size_t>(1, config.batch_size);
  Rng unused(config.seed);
  for (std::size_t start = 0; start < volumes.size(); start += chunk) {
    const std::vector<const Volume*> part(volumes.begin() + start,
                                          volumes.begin() + std::min(volumes.size(), start + chunk));
    const Var probs = model.forward(constant(stack_volumes(part)), ForwardMode::infer, unused);
    for (double p : probs->value().data()) out.push_back(p);
  }
  return out;
}

}  // namespace voxbayes
