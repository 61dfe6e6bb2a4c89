#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cloudpatch/eval.hpp"
#include "cloudpatch/models.hpp"
#include "cloudpatch/raster.hpp"

namespace cloudpatch {

struct TrainConfig {
  std::size_t max_epochs = 50;
  double lr = 0.001;
  std::size_t batch_size = 4;
  std::size_t early_stop_patience = 5;
  std::size_t n_runs = 30;
  double train_fraction = 0.55;
  double val_fraction = 0.25;
  double test_fraction = 0.20;
  std::uint64_t base_seed = 0;
  // Upper bound on concurrently trained runs in multi_run.
  std::size_t threads = 1;

  void validate() const;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded shuffle of 0..n-1 cut into floor(f_train n), floor(f_val n) and the
// remainder. Temporal models (timesteps > 1) need n >= 5 + timesteps.
DatasetSplit split_dataset(std::size_t n_images, std::uint64_t seed, std::size_t timesteps = 1,
                           const TrainConfig& cfg = {});

// Ground truth Y with one artificial mask per image.
struct MaskedDataset {
  std::vector<MultibandImage> targets;
  std::vector<CloudMask> masks;

  std::size_t size() const noexcept { return targets.size(); }
};

// Consecutive windows of `length` entries of the date-sorted `indices`.
std::vector<std::vector<std::size_t>> make_windows(std::vector<std::size_t> indices,
                                                   std::size_t length);

// Stops once the validation loss has not improved for `patience` updates.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  // Records one epoch; returns true when training should stop.
  bool update(double val_loss);
  bool last_improved() const noexcept { return last_improved_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t since_best_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_;
  bool last_improved_ = false;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch
  std::size_t best_epoch = 0;      // 0-based index into val_loss
  double best_val_loss = 0.0;
  std::vector<BandMetrics> test_metrics;
  bool diverged = false;
  std::string diagnostics;
};

struct TrainedModel {
  ParamSet<float> params;
  RunRecord record;
};

// Adam on the masked MSE with early stopping; returns the best-validation
// parameters. Throws EmptyMask, TooFewImages or DivergedLoss.
TrainedModel train_model(const ModelSpec& spec, const MaskedDataset& data,
                         const DatasetSplit& split, const TrainConfig& cfg, std::uint64_t seed);

struct MultiRunResult {
  std::vector<RunRecord> runs;
  std::vector<ReportRow> aggregate;  // over non-diverged runs
  std::size_t diverged = 0;
  std::size_t best_run = 0;          // lowest best_val_loss
  ParamSet<float> best_params;
};

// Run i trains with seed cfg.base_seed + i on a split drawn from cfg.base_seed.
MultiRunResult multi_run(const ModelSpec& spec, const MaskedDataset& data, const TrainConfig& cfg,
                         const std::string& model_name);

// Predicts images[order[k]] for every k. Temporal kinds read the window of
// consecutive `order` entries centred on k (clamped at the ends).
std::vector<MultibandImage> predict_images(const ModelSpec& spec, const ParamSet<float>& params,
                                           const std::vector<MultibandImage>& observed,
                                           const std::vector<CloudMask>& masks,
                                           const std::vector<std::size_t>& order);

// Test-set metrics of a parameter set, comparing composites to ground truth.
// Temporal kinds predict from windows over the whole observed series.
std::vector<BandMetrics> evaluate_split(const ModelSpec& spec, const ParamSet<float>& params,
                                        const MaskedDataset& data,
                                        const std::vector<std::size_t>& indices);

}  // namespace cloudpatch
