#include "cloudpatch/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "cloudpatch/adam.hpp"
#include "cloudpatch/loss.hpp"
#include "cloudpatch/maskgen.hpp"
#include "detail/seed.hpp"

namespace cloudpatch {

namespace {

struct PreparedImage {
  Tensor4<float> input;   // (1,H,W,9)
  Tensor4<float> target;  // (1,H,W,8), NaN where Y is missing
  MaskTensor loss_mask;   // (1,H,W,8)
};

PreparedImage prepare(const MultibandImage& target, const CloudMask& mask) {
  const MultibandImage observed = apply_mask(target, mask);
  const std::size_t bands = target.bands();
  const Shape4 shape{1, target.height(), target.width(), bands};
  PreparedImage p{prepare_input(observed, mask),
                  Tensor4<float>(shape, std::vector<float>(target.data().begin(), target.data().end())),
                  MaskTensor(shape)};
  for (std::size_t px = 0; px < target.pixels(); ++px) {
    if (!mask[px]) continue;
    for (std::size_t b = 0; b < bands; ++b) p.loss_mask[px * bands + b] = 1;
  }
  return p;
}

template <class T>
Tensor4<T> stack(const std::vector<const Tensor4<T>*>& parts) {
  const Shape4 one = parts[0]->shape();
  std::vector<T> values;
  values.reserve(one.size() * parts.size());
  for (const auto* t : parts) values.insert(values.end(), t->values().begin(), t->values().end());
  return Tensor4<T>(Shape4{parts.size() * one.n, one.h, one.w, one.c}, std::move(values));
}

struct Batch {
  Tensor4<float> input;
  Tensor4<float> target;
  MaskTensor loss_mask;
};

// Each sample is a list of image indices: one for spatial kinds, a window of
// `timesteps` for temporal kinds.
Batch make_batch(const std::vector<PreparedImage>& prepared,
                 const std::vector<std::vector<std::size_t>>& samples,
                 std::span<const std::size_t> picks) {
  std::vector<const Tensor4<float>*> in, tg;
  std::vector<const MaskTensor*> vm;
  for (std::size_t s : picks) {
    for (std::size_t idx : samples[s]) {
      in.push_back(&prepared[idx].input);
      tg.push_back(&prepared[idx].target);
      vm.push_back(&prepared[idx].loss_mask);
    }
  }
  return {stack(in), stack(tg), stack(vm)};
}

std::vector<std::vector<std::size_t>> make_samples(const ModelSpec& spec,
                                                   const std::vector<std::size_t>& indices,
                                                   const char* split_name) {
  std::vector<std::vector<std::size_t>> samples;
  if (spec.temporal()) {
    samples = make_windows(indices, spec.timesteps);
  } else {
    for (std::size_t i : indices) samples.push_back({i});
  }
  if (samples.empty()) {
    throw Error(ErrorKind::kTooFewImages, std::string(split_name) + " split holds " +
                                              std::to_string(indices.size()) +
                                              " images, too few to form a sample");
  }
  return samples;
}

// Pooled masked MSE of inference-mode predictions over all samples.
double pooled_loss(const ModelSpec& spec, const ParamSet<float>& params,
                   const std::vector<PreparedImage>& prepared,
                   const std::vector<std::vector<std::size_t>>& samples, std::size_t batch_size) {
  double sse = 0.0;
  std::size_t count = 0;
  std::vector<std::size_t> picks;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    picks.clear();
    for (std::size_t s = start; s < std::min(samples.size(), start + batch_size); ++s) picks.push_back(s);
    const Batch b = make_batch(prepared, samples, picks);
    const Tensor4<float> pred = predict(spec, params, b.input);
    const auto loss = masked_mse(b.target, pred, b.loss_mask);
    sse += loss.value * static_cast<double>(loss.count);
    count += loss.count;
  }
  return sse / static_cast<double>(count);
}

MultibandImage to_image(const Tensor4<float>& t, std::size_t frame_index, const std::string& date) {
  const Shape4& s = t.shape();
  const float* src = t.data() + frame_index * s.item();
  return MultibandImage(s.h, s.w, s.c, std::vector<float>(src, src + s.item()), date);
}

}  // namespace

void TrainConfig::validate() const {
  if (max_epochs < 1) throw Error(ErrorKind::kBadConfig, "max_epochs must be >= 1");
  if (!(lr > 0.0)) throw Error(ErrorKind::kBadConfig, "learning rate must be > 0");
  if (batch_size < 1) throw Error(ErrorKind::kBadConfig, "batch_size must be >= 1");
  if (early_stop_patience < 1) throw Error(ErrorKind::kBadConfig, "patience must be >= 1");
  if (n_runs < 1) throw Error(ErrorKind::kBadConfig, "n_runs must be >= 1");
  if (train_fraction <= 0.0 || val_fraction <= 0.0 || test_fraction <= 0.0 ||
      std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw Error(ErrorKind::kBadConfig, "split fractions must be positive and sum to 1");
  }
  if (threads < 1) throw Error(ErrorKind::kBadConfig, "threads must be >= 1");
}

DatasetSplit split_dataset(std::size_t n_images, std::uint64_t seed, std::size_t timesteps,
                           const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t minimum = timesteps > 1 ? 5 + timesteps : 5;
  if (n_images < minimum) {
    throw Error(ErrorKind::kTooFewImages, "need at least " + std::to_string(minimum) +
                                              " images, got " + std::to_string(n_images));
  }
  std::vector<std::size_t> order(n_images);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // The epsilon absorbs representation error in products such as 0.55 * 20.
  const auto portion = [&](double f) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(n_images) + 1e-9));
  };
  const std::size_t n_train = portion(cfg.train_fraction);
  const std::size_t n_val = portion(cfg.val_fraction);
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

std::vector<std::vector<std::size_t>> make_windows(std::vector<std::size_t> indices,
                                                   std::size_t length) {
  std::sort(indices.begin(), indices.end());
  std::vector<std::vector<std::size_t>> windows;
  if (length == 0 || indices.size() < length) return windows;
  for (std::size_t s = 0; s + length <= indices.size(); ++s) {
    windows.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(s),
                         indices.begin() + static_cast<std::ptrdiff_t>(s + length));
  }
  return windows;
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw Error(ErrorKind::kBadConfig, "patience must be >= 1");
}

bool EarlyStopping::update(double val_loss) {
  last_improved_ = val_loss < best_loss_;
  if (last_improved_) {
    best_loss_ = val_loss;
    best_epoch_ = epochs_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  ++epochs_;
  return since_best_ >= patience_;
}

TrainedModel train_model(const ModelSpec& spec, const MaskedDataset& data,
                         const DatasetSplit& split, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (data.targets.size() != data.masks.size()) {
    throw Error(ErrorKind::kDimMismatch, "dataset holds different numbers of images and masks");
  }
  for (std::size_t i : split.train) {
    if (i >= data.size()) throw Error(ErrorKind::kDimMismatch, "split index out of range");
    if (data.masks[i].count() == 0) {
      throw Error(ErrorKind::kEmptyMask, "training image " + data.targets[i].date() +
                                             " has an empty artificial mask");
    }
  }

  std::vector<PreparedImage> prepared;
  prepared.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) prepared.push_back(prepare(data.targets[i], data.masks[i]));

  const auto train_samples = make_samples(spec, split.train, "training");
  const auto val_samples = make_samples(spec, split.val, "validation");

  TrainedModel result{build_model<float>(spec, seed), {}};
  result.record.seed = seed;
  ParamSet<float> best = result.params;
  AdamState<float> adam;
  adam.lr = cfg.lr;
  EarlyStopping stopper(cfg.early_stop_patience);
  std::mt19937_64 shuffle_rng(detail::mix_seed(seed, 0x5EED));
  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;

  const auto diverged = [&](const std::string& where, double value) {
    result.record.diverged = true;
    result.record.diagnostics = where + " loss became " + std::to_string(value) + " at epoch " +
                                std::to_string(result.record.val_loss.size() + 1) + ", step " +
                                std::to_string(step);
    throw Error(ErrorKind::kDivergedLoss, result.record.diagnostics);
  };

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sse = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const Batch batch = make_batch(prepared, train_samples,
                                     std::span<const std::size_t>(order).subspan(start, end - start));
      auto fwd = forward(spec, result.params, batch.input, true, detail::mix_seed(seed, step));
      const auto loss = masked_mse(batch.target, fwd.output, batch.loss_mask);
      if (!std::isfinite(loss.value)) diverged("training", loss.value);
      const ParamSet<float> grads = backward(spec, result.params, fwd.trace, loss.grad);
      adam_step(result.params, grads, adam);
      sse += loss.value * static_cast<double>(loss.count);
      count += loss.count;
      ++step;
    }
    const double val = pooled_loss(spec, result.params, prepared, val_samples, cfg.batch_size);
    if (!std::isfinite(val)) diverged("validation", val);
    result.record.train_loss.push_back(sse / static_cast<double>(count));
    result.record.val_loss.push_back(val);
    const bool stop = stopper.update(val);
    if (stopper.last_improved()) best = result.params;
    if (stop) break;
  }

  result.params = std::move(best);
  result.record.best_epoch = stopper.best_epoch();
  result.record.best_val_loss = stopper.best_loss();
  if (!split.test.empty()) {
    result.record.test_metrics = evaluate_split(spec, result.params, data, split.test);
  }
  return result;
}

MultiRunResult multi_run(const ModelSpec& spec, const MaskedDataset& data, const TrainConfig& cfg,
                         const std::string& model_name) {
  cfg.validate();
  const DatasetSplit split = split_dataset(data.size(), cfg.base_seed, spec.timesteps, cfg);

  struct Slot {
    TrainedModel model;
    bool ok = false;
  };
  std::vector<Slot> slots(cfg.n_runs);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr failure;

  const auto worker = [&] {
    for (std::size_t i = next++; i < cfg.n_runs; i = next++) {
      const std::uint64_t seed = cfg.base_seed + i;
      try {
        slots[i].model = train_model(spec, data, split, cfg, seed);
        slots[i].ok = true;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDivergedLoss) {
          std::lock_guard lock(error_mutex);
          if (!failure) failure = std::current_exception();
          continue;
        }
        slots[i].model.record.seed = seed;
        slots[i].model.record.diverged = true;
        slots[i].model.record.diagnostics = e.what();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t n_threads = std::min(cfg.threads, cfg.n_runs);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  MultiRunResult out;
  std::vector<std::vector<BandMetrics>> metrics;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    out.runs.push_back(slots[i].model.record);
    if (!slots[i].ok) {
      ++out.diverged;
      continue;
    }
    metrics.push_back(slots[i].model.record.test_metrics);
    if (slots[i].model.record.best_val_loss < best_val) {
      best_val = slots[i].model.record.best_val_loss;
      out.best_run = i;
    }
  }
  if (!metrics.empty()) {
    out.aggregate = summarize_runs(model_name, metrics);
    out.best_params = std::move(slots[out.best_run].model.params);
  }
  return out;
}

std::vector<MultibandImage> predict_images(const ModelSpec& spec, const ParamSet<float>& params,
                                           const std::vector<MultibandImage>& observed,
                                           const std::vector<CloudMask>& masks,
                                           const std::vector<std::size_t>& order) {
  if (observed.size() != masks.size()) {
    throw Error(ErrorKind::kDimMismatch, "images and masks differ in count");
  }
  std::vector<Tensor4<float>> inputs(observed.size());
  const auto input_of = [&](std::size_t idx) -> const Tensor4<float>& {
    if (inputs[idx].size() == 0) inputs[idx] = prepare_input(observed[idx], masks[idx]);
    return inputs[idx];
  };

  std::vector<MultibandImage> out;
  out.reserve(order.size());
  if (!spec.temporal()) {
    for (std::size_t idx : order) {
      out.push_back(to_image(predict(spec, params, input_of(idx)), 0, observed[idx].date()));
    }
    return out;
  }

  const std::size_t steps = spec.timesteps;
  if (order.size() < steps) {
    throw Error(ErrorKind::kTooFewImages, "temporal prediction needs at least " +
                                              std::to_string(steps) + " images");
  }
  std::size_t cached_start = order.size();
  Tensor4<float> window_pred;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t start = std::min(k >= steps / 2 ? k - steps / 2 : 0, order.size() - steps);
    if (start != cached_start) {
      std::vector<const Tensor4<float>*> frames;
      for (std::size_t t = 0; t < steps; ++t) frames.push_back(&input_of(order[start + t]));
      window_pred = predict(spec, params, stack(frames));
      cached_start = start;
    }
    out.push_back(to_image(window_pred, k - start, observed[order[k]].date()));
  }
  return out;
}

std::vector<BandMetrics> evaluate_split(const ModelSpec& spec, const ParamSet<float>& params,
                                        const MaskedDataset& data,
                                        const std::vector<std::size_t>& indices) {
  std::vector<std::size_t> wanted = indices;
  std::sort(wanted.begin(), wanted.end());
  std::vector<MultibandImage> observed;
  for (std::size_t i = 0; i < data.size(); ++i) {
    observed.push_back(apply_mask(data.targets[i], data.masks[i]));
  }
  // Temporal kinds read their windows from the whole observed series.
  std::vector<std::size_t> order = wanted;
  if (spec.temporal()) {
    order.resize(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  const auto predicted = predict_images(spec, params, observed, data.masks, order);

  std::vector<MultibandImage> truth, imputed;
  std::vector<CloudMask> masks;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (!std::binary_search(wanted.begin(), wanted.end(), i)) continue;
    truth.push_back(data.targets[i]);
    imputed.push_back(composite(observed[i], predicted[k], data.masks[i]));
    masks.push_back(data.masks[i]);
  }
  return evaluate_model(truth, imputed, masks);
}

}  // namespace cloudpatch
