#include "nvt/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <ostream>
#include <sstream>

#include "nvt/checkpoint.hpp"
#include "nvt/error.hpp"
#include "nvt/ops.hpp"
#include "nvt/rng.hpp"

namespace nvt::train {

void TrainConfig::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("train.base_lr: must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("train.smoothing: must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay: must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train.beta1, train.beta2: must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps: must be > 0");
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr) {
  if (total_steps < 1) throw ContractError("cosine_lr needs total_steps >= 1");
  if (step > total_steps) throw ContractError("cosine_lr step beyond total_steps");
  if (step == total_steps) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, OptimizerState& state, double lr,
                const TrainConfig& config) {
  if (params.size() != grads.size()) throw ContractError("adamw_step: parameter and gradient counts differ");
  if (lr < 0.0) throw ContractError("adamw_step: negative learning rate");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].size() != params[i].numel())
      throw ContractError("adamw_step: gradient " + std::to_string(i) + " has " + std::to_string(grads[i].size()) +
                          " values for a parameter of shape " + shape_str(params[i].shape()));
  if (state.first_moment.empty()) {
    for (const Tensor& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw ContractError("adamw_step: optimizer state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - lr * config.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].mutable_data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != theta.size()) throw ContractError("adamw_step: moment shape does not match parameter");
    const auto& g = grads[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      if (config.weight_decay != 0.0) theta[k] *= decay;
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
  }
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["train_accuracy"] = r.train_accuracy;
  j["val_top1"] = r.val_top1;
  j["val_top5"] = r.val_top5;
  j["lr"] = r.lr;
  return j.dump();
}

double smoothing_entropy_floor(double epsilon, std::size_t num_classes) {
  const double C = static_cast<double>(num_classes);
  const double on = 1.0 - epsilon + epsilon / C;
  const double off = epsilon / C;
  double h = on > 0.0 ? -on * std::log(on) : 0.0;
  if (off > 0.0) h -= (C - 1.0) * off * std::log(off);
  return h;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(derive_seed(seed, {0x73687566ULL, epoch}));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  return perm;
}

Tensor make_train_batch(const data::Dataset& dataset, std::span<const std::size_t> indices,
                        const data::TrainTransform& transform, std::size_t epoch, std::size_t first_position) {
  const std::size_t S = transform.out_size;
  const std::size_t item = 3 * S * S;
  std::vector<double> pixels(indices.size() * item);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    Rng rng(data::sample_seed(transform.augment.seed, epoch, first_position + i));
    Tensor x = data::train_preprocess(dataset.samples.at(indices[i]).image, transform, rng);
    std::copy(x.data().begin(), x.data().end(), pixels.begin() + static_cast<std::ptrdiff_t>(i * item));
  }
  return Tensor(Shape{indices.size(), 3, S, S}, std::move(pixels));
}

TrainResult train(const vit::ViTConfig& config, const vit::ModelParams& initial,
                  const std::optional<noise::NoiseConfig>& noise, const data::Dataset& train_set,
                  const data::Dataset& val_set, const TrainConfig& cfg, const TrainOptions& options) {
  config.validate();
  cfg.validate();
  options.augment.validate();
  options.stats.validate();
  vit::check_params(initial, config);
  if (noise) noise->validate(config.depth);
  if (train_set.samples.empty() || val_set.samples.empty()) throw DatasetError("training and validation sets must be non-empty");
  if (noise && noise->quality.kind == noise::NoiseKind::Custom) {
    const std::size_t q = noise->quality.custom.size();
    if (q != cfg.batch_size || train_set.size() % q != 0 || val_set.size() % q != 0)
      throw ConfigError("custom quality matrix needs batch_size equal to its size and split sizes divisible by it");
  }

  vit::ModelParams params = initial.clone();
  params.set_requires_grad(true);
  std::vector<Tensor> handles;
  for (auto& nt : params.named()) handles.push_back(nt.tensor);

  const data::TrainTransform transform{options.augment, options.crop, config.image_size, options.stats};
  const std::size_t N = train_set.size();
  const std::size_t batches = (N + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * batches;

  std::ofstream history_out;
  if (options.history_path) {
    if (options.history_path->has_parent_path()) std::filesystem::create_directories(options.history_path->parent_path());
    history_out.open(*options.history_path, std::ios::binary | std::ios::trunc);
    if (!history_out) throw Error("cannot open history log '" + options.history_path->string() + "'");
  }

  TrainResult result;
  OptimizerState opt;
  double best_top1 = -1.0;
  std::size_t step = 0;
  std::vector<std::vector<double>> grads(handles.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = epoch_permutation(N, cfg.seed, epoch);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = cosine_lr(step, total_steps, cfg.base_lr);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const std::size_t start = bi * cfg.batch_size;
      const std::size_t count = std::min(cfg.batch_size, N - start);
      const std::span<const std::size_t> idx(perm.data() + start, count);
      std::vector<std::size_t> labels;
      for (std::size_t i : idx) labels.push_back(train_set.samples[i].label);

      const Tensor batch = make_train_batch(train_set, idx, transform, epoch, start);
      const double lr = cosine_lr(step, total_steps, cfg.base_lr);
      auto abort = [&](double lv, const std::string& detail) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch + 1 << ", batch " << bi + 1 << ": loss=" << lv << ", lr=" << lr << detail;
        throw TrainingAbort(os.str());
      };
      Tensor logits, loss;
      try {
        logits = vit::forward(params, config, batch, noise,
                              {vit::Mode::Train, derive_seed(cfg.seed, {0x64726f70ULL, step}), nullptr});
        loss = label_smoothing_ce(logits, labels, cfg.smoothing);
      } catch (const NumericInputError& e) {
        abort(std::numeric_limits<double>::quiet_NaN(), std::string(" (") + e.what() + ")");
      }
      const double lv = loss.item();
      if (!std::isfinite(lv)) abort(lv, "");
      loss_sum += lv * static_cast<double>(count);
      correct += static_cast<std::size_t>(std::lround(eval::topk_accuracy(logits, labels, 1) * count));

      loss.backward();
      for (std::size_t i = 0; i < handles.size(); ++i) {
        grads[i] = handles[i].grad();
        handles[i].zero_grad();
      }
      adamw_step(handles, grads, opt, lr, cfg);
      ++step;
    }
    rec.train_loss = loss_sum / static_cast<double>(N);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(N);

    const eval::Model model{config, params, noise};
    const eval::MetricsReport val = eval::evaluate(model, val_set, {config.image_size, options.stats, cfg.batch_size});
    rec.val_top1 = val.top1;
    rec.val_top5 = val.top5;
    result.history.epochs.push_back(rec);

    if (rec.val_top1 > best_top1) {
      best_top1 = rec.val_top1;
      result.history.best_epoch = rec.epoch;
      result.best_params = params.clone();
      if (options.checkpoint_path) {
        vit::CheckpointMeta meta{rec.val_top1, rec.epoch, train_set.class_names, options.stats, cfg.batch_size};
        vit::save_checkpoint(*options.checkpoint_path, result.best_params, config, noise, meta);
      }
    }
    if (history_out) {
      history_out << to_json_line(rec) << '\n';
      history_out.flush();
    }
    if (options.log)
      *options.log << "epoch " << rec.epoch << "/" << cfg.epochs << " loss " << rec.train_loss << " acc "
                   << rec.train_accuracy << " val_top1 " << rec.val_top1 << " val_top5 " << rec.val_top5 << " lr "
                   << rec.lr << '\n';
  }
  return result;
}

}  // namespace nvt::train
