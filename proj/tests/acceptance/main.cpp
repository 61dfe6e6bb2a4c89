// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments
// select criteria by number, e.g. `cloudpatch_acceptance 3 8`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cloudpatch/adam.hpp"
#include "cloudpatch/baseline.hpp"
#include "cloudpatch/eval.hpp"
#include "cloudpatch/indices.hpp"
#include "cloudpatch/loss.hpp"
#include "cloudpatch/maskgen.hpp"
#include "cloudpatch/models.hpp"
#include "cloudpatch/synth.hpp"
#include "cloudpatch/train.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "temp_dir.hpp"

using namespace cloudpatch;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double pooled_rmse(const std::vector<BandMetrics>& m) {
  double se = 0.0, n = 0.0;
  for (const auto& b : m) {
    se += b.rmse * b.rmse * static_cast<double>(b.n_pixels);
    n += static_cast<double>(b.n_pixels);
  }
  return std::sqrt(se / n);
}

double mean_r(const std::vector<BandMetrics>& m) {
  double s = 0.0;
  for (const auto& b : m) s += b.pearson_r;
  return s / static_cast<double>(m.size());
}

Outcome loss_oracle() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int empty_cases = 0, empty_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Shape4 s{1 + rng() % 3, 1 + rng() % 6, 1 + rng() % 6, 1 + rng() % 4};
    auto yv = oracle::normal_values(s.size(), rng);
    for (auto& v : yv) {
      if (rng() % 7 == 0) v = std::nan("");
    }
    const Tensor4<double> y(s, yv);
    const Tensor4<double> p(s, oracle::normal_values(s.size(), rng));
    MaskTensor vm(s);
    const bool empty = trial % 10 == 9;
    for (std::size_t k = 0; k < s.size(); ++k) vm[k] = (!empty && rng() % 2) ? 1 : 0;
    std::size_t count = 0;
    const double expected = oracle::masked_mse(y, p, vm, &count);
    if (count == 0) {
      ++empty_cases;
      try {
        masked_mse(y, p, vm);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kEmptyMask) ++empty_ok;
      }
      continue;
    }
    const auto got = masked_mse(y, p, vm);
    worst = std::max(worst, std::abs(got.value - expected) / std::max(1.0, std::abs(expected)));
    if (got.count != count) worst = 1.0;
  }
  return {worst <= 1e-12 && empty_ok == empty_cases && empty_cases >= 10,
          fmt("max rel diff %.2e over 100 instances, %d/%d empty cases raise EmptyMask", worst, empty_ok,
              empty_cases)};
}

Outcome gradient_suite() {
  std::mt19937_64 rng(202);
  constexpr int kTrials = 20;
  std::vector<std::pair<std::string, std::function<double()>>> layers = {
      {"conv2d", [&] { return gradcheck::conv2d_trial(rng); }},
      {"maxpool2", [&] { return gradcheck::maxpool2_trial(rng); }},
      {"upsample2", [&] { return gradcheck::upsample2_trial(rng); }},
      {"dense", [&] { return gradcheck::dense_trial(rng); }},
      {"relu", [&] { return gradcheck::activation_trial(Activation::kRelu, rng); }},
      {"sigmoid", [&] { return gradcheck::activation_trial(Activation::kSigmoid, rng); }},
      {"tanh", [&] { return gradcheck::activation_trial(Activation::kTanh, rng); }},
      {"linear", [&] { return gradcheck::activation_trial(Activation::kLinear, rng); }},
      {"dropout", [&] { return gradcheck::dropout_trial(rng); }},
      {"lstm_step", [&] { return gradcheck::lstm_step_trial(rng); }},
      {"lstm_5step", [&] { return gradcheck::lstm_sequence_trial(rng, 5); }},
  };
  double worst = 0.0;
  std::string worst_layer;
  for (auto& [name, trial] : layers) {
    for (int t = 0; t < kTrials; ++t) {
      const double e = trial();
      if (!(e <= worst)) {
        worst = e;
        worst_layer = name;
      }
    }
  }
  return {worst < 1e-4, fmt("%zu layers x %d trials, max rel error %.2e (%s)", layers.size(), kTrials, worst,
                            worst_layer.c_str())};
}

Outcome grf_statistics() {
  constexpr std::size_t kSide = 64, kDraws = 500;
  GrfConfig cfg;
  cfg.variance_sigma2 = 0.95;
  cfg.range_d = 0.4;
  std::vector<double> sum(kSide * kSide, 0.0), sq(kSide * kSide, 0.0);
  // Lag products at 25 and 26 cells; 0.4 * 64 = 25.6 lies between.
  double lag25 = 0.0, lag26 = 0.0;
  std::size_t n25 = 0, n26 = 0;
  std::vector<ScalarField> draws;
  for (std::size_t d = 0; d < kDraws; ++d) {
    cfg.seed = d;
    ScalarField f = sample_grf(kSide, kSide, cfg);
    for (std::size_t p = 0; p < f.values.size(); ++p) {
      sum[p] += f.values[p];
      sq[p] += f.values[p] * f.values[p];
    }
    draws.push_back(std::move(f));
  }
  std::vector<double> mean(sum.size());
  double var_sum = 0.0;
  for (std::size_t p = 0; p < sum.size(); ++p) {
    mean[p] = sum[p] / kDraws;
    var_sum += (sq[p] - kDraws * mean[p] * mean[p]) / (kDraws - 1);
  }
  const double var = var_sum / static_cast<double>(sum.size());
  for (const auto& f : draws) {
    for (std::size_t i = 0; i < kSide; ++i) {
      for (std::size_t j = 0; j + 25 < kSide; ++j) {
        const std::size_t a = i * kSide + j;
        const double da = f.values[a] - mean[a];
        // Both axes, so the estimate does not favour one direction.
        const std::size_t t = j * kSide + i, tb = (j + 25) * kSide + i;
        lag25 += da * (f.values[a + 25] - mean[a + 25]) + (f.values[t] - mean[t]) * (f.values[tb] - mean[tb]);
        n25 += 2;
        if (j + 26 < kSide) {
          const std::size_t tc = (j + 26) * kSide + i;
          lag26 += da * (f.values[a + 26] - mean[a + 26]) + (f.values[t] - mean[t]) * (f.values[tc] - mean[tc]);
          n26 += 2;
        }
      }
    }
  }
  const double c25 = lag25 / static_cast<double>(n25), c26 = lag26 / static_cast<double>(n26);
  const double cov = c25 + 0.6 * (c26 - c25);
  const double target = 0.95 / std::exp(1.0);
  const double var_err = std::abs(var - 0.95) / 0.95;
  const double cov_err = std::abs(cov - target) / target;
  return {var_err <= 0.10 && cov_err <= 0.15,
          fmt("mean per-pixel variance %.4f (%.1f%% off 0.95), lag-0.4 covariance %.4f (%.1f%% off %.4f)", var,
              100 * var_err, cov, 100 * cov_err, target)};
}

Outcome mask_cardinality() {
  std::mt19937_64 rng(404);
  int cases = 0, exact = 0;
  const std::pair<std::size_t, std::size_t> dims[] = {{64, 64}, {32, 48}, {16, 16}, {8, 12}, {100, 36}};
  for (const auto& [h, w] : dims) {
    for (int k = 0; k < 8; ++k) {
      ScalarField f{h, w, oracle::normal_values(h * w, rng)};
      if (k == 1) std::fill(f.values.begin(), f.values.end(), 0.5);
      if (k == 2) {
        for (auto& v : f.values) v = std::round(v);
      }
      const auto m = threshold_mask(f, 0.1);
      const auto expected = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(h * w)));
      ++cases;
      if (m.count() == expected) ++exact;
    }
    GrfConfig g;
    g.seed = rng();
    ++cases;
    if (generate_mask(h, w, g).count() == static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(h * w)))) {
      ++exact;
    }
  }
  return {exact == cases, fmt("%d/%d fields masked exactly round(0.1 HW) cells", exact, cases)};
}

Outcome baseline_exactness() {
  double worst = 0.0;
  std::size_t altered = 0, images = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto truth = fixture::planar_ramp(32, 32, 8);
    const auto gapped = apply_mask(truth, fixture::interior_gap_mask(32, 32, 600 + seed));
    const auto out = interpolate_image(gapped);
    for (std::size_t k = 0; k < out.data().size(); ++k) {
      worst = std::max(worst, static_cast<double>(std::abs(out.data()[k] - truth.data()[k])));
      if (!std::isnan(gapped.data()[k]) && std::memcmp(&out.data()[k], &gapped.data()[k], sizeof(float)) != 0) {
        ++altered;
      }
    }
    ++images;
  }
  return {worst < 1e-6 && altered == 0,
          fmt("%zu ramps, max abs error %.2e, %zu finite cells altered", images, worst, altered)};
}

Outcome split_exactness() {
  const auto a = split_dataset(20, 1), b = split_dataset(10, 1);
  bool ok = a.train.size() == 11 && a.val.size() == 5 && a.test.size() == 4 && b.train.size() == 5 &&
            b.val.size() == 2 && b.test.size() == 3;
  std::mt19937_64 rng(606);
  int partitions = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 5 + rng() % 500;
    const auto s = split_dataset(n, rng());
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    bool good = all.size() == n;
    for (std::size_t i = 0; good && i < n; ++i) good = all[i] == i;
    if (good) ++partitions;
  }
  ok = ok && partitions == 100;
  return {ok, fmt("20 -> %zu/%zu/%zu, 10 -> %zu/%zu/%zu, %d/100 random n partition exactly", a.train.size(),
                  a.val.size(), a.test.size(), b.train.size(), b.val.size(), b.test.size(), partitions)};
}

Outcome overfit_sanity() {
  SceneConfig sc;
  sc.height = sc.width = 32;
  sc.n_dates = 6;
  sc.seed = 3;
  const auto y = generate_scene(sc).images[2];
  GrfConfig g;
  g.seed = 5;
  const auto m = generate_mask(32, 32, g);
  const auto x = prepare_input(apply_mask(y, m), m);
  const Shape4 s{1, 32, 32, 8};
  Tensor4<float> target(s);
  MaskTensor vm(s);
  for (std::size_t p = 0; p < 32 * 32; ++p) {
    for (std::size_t b = 0; b < 8; ++b) {
      target[p * 8 + b] = y.data()[p * 8 + b];
      vm[p * 8 + b] = m[p];
    }
  }
  const auto spec = ModelSpec::for_kind(ModelKind::kCnn, 32, 32);
  auto params = build_model<float>(spec, 1);
  AdamState<float> adam;
  const double initial = masked_mse(target, predict(spec, params, x), vm).value;
  double best = initial;
  std::size_t reached = 0;
  for (std::size_t step = 1; step <= 500; ++step) {
    const auto f = forward(spec, params, x, true, step);
    const auto loss = masked_mse(target, f.output, vm);
    adam_step(params, backward(spec, params, f.trace, loss.grad), adam);
    const double now = masked_mse(target, predict(spec, params, x), vm).value;
    best = std::min(best, now);
    if (reached == 0 && now < 0.01 * initial) reached = step;
  }
  return {reached > 0, fmt("initial %.3e, best %.3e (%.2f%%), below 1%% at step %zu", initial, best,
                           100 * best / initial, reached)};
}

Outcome synthetic_benchmark() {
  SceneConfig sc;
  sc.seed = 42;
  const auto series = generate_scene(sc);
  GrfConfig g;
  g.seed = 1000;
  const auto [masked, masks] = mask_series(series, g);
  const MaskedDataset data{series.images, masks};
  TrainConfig cfg;
  cfg.base_seed = 7;
  const auto split = split_dataset(data.size(), cfg.base_seed, 1, cfg);

  std::vector<MultibandImage> truth, filled;
  std::vector<CloudMask> test_masks;
  for (std::size_t i : split.test) {
    truth.push_back(series.images[i]);
    filled.push_back(composite(masked.images[i], interpolate_image(masked.images[i]), masks[i]));
    test_masks.push_back(masks[i]);
  }
  const double base = pooled_rmse(evaluate_model(truth, filled, test_masks));
  const auto spec = ModelSpec::for_kind(ModelKind::kCnn, sc.height, sc.width);
  bool ok = true;
  std::string detail = fmt("baseline RMSE %.5f;", base);
  for (std::uint64_t r = 0; r < 3; ++r) {
    const auto model = train_model(spec, data, split, cfg, cfg.base_seed + r);
    const double rmse = pooled_rmse(model.record.test_metrics);
    const double r_mean = mean_r(model.record.test_metrics);
    ok = ok && r_mean > 0.8 && rmse <= 0.9 * base;
    detail += fmt(" run %llu: R %.3f, RMSE %.5f (%.3fx)", static_cast<unsigned long long>(r), r_mean, rmse,
                  rmse / base);
  }
  return {ok, detail};
}

Outcome multi_run_harness() {
  SceneConfig sc;
  sc.height = sc.width = 16;
  sc.n_dates = 20;
  sc.seed = 9;
  const auto series = generate_scene(sc);
  GrfConfig g;
  g.seed = 77;
  const MaskedDataset data{series.images, mask_series(series, g).second};
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.n_runs = 5;
  cfg.base_seed = 300;
  cfg.threads = 2;
  const auto spec = ModelSpec::for_kind(ModelKind::kCnn, 16, 16);
  const auto first = multi_run(spec, data, cfg, "cnn");
  const auto second = multi_run(spec, data, cfg, "cnn");

  bool reproducible = first.runs.size() == 5 && first.best_params == second.best_params;
  bool seeds = true;
  for (std::size_t i = 0; i < first.runs.size(); ++i) {
    const auto& a = first.runs[i];
    const auto& b = second.runs[i];
    seeds = seeds && a.seed == cfg.base_seed + i;
    reproducible = reproducible && a.train_loss == b.train_loss && a.val_loss == b.val_loss;
    for (std::size_t k = 0; k < a.test_metrics.size(); ++k) {
      reproducible = reproducible && a.test_metrics[k].rmse == b.test_metrics[k].rmse &&
                     a.test_metrics[k].pearson_r == b.test_metrics[k].pearson_r;
    }
  }
  // A lone run with the same seed matches its slot in the harness.
  const auto split = split_dataset(data.size(), cfg.base_seed, 1, cfg);
  const auto lone = train_model(spec, data, split, cfg, cfg.base_seed + 3);
  reproducible = reproducible && lone.record.val_loss == first.runs[3].val_loss;

  double worst_mean = 0.0, min_std = 1e300;
  for (const auto& row : first.aggregate) {
    double hand = 0.0;
    for (const auto& run : first.runs) hand += run.test_metrics[row.band - 1].rmse;
    hand /= static_cast<double>(first.runs.size());
    worst_mean = std::max(worst_mean, std::abs(hand - row.rmse_mean));
    min_std = std::min(min_std, row.rmse_std);
  }
  const bool ok = reproducible && seeds && first.aggregate.size() == 8 && min_std > 0.0 && worst_mean <= 1e-12;
  return {ok, fmt("5 runs reproducible: %s, seeds base+i: %s, min RMSE std %.3e, mean diff %.1e",
                  reproducible ? "yes" : "no", seeds ? "yes" : "no", min_std, worst_mean)};
}

Outcome index_pipeline() {
  auto img = fixture::ndci_image(0.0, "d");
  std::mt19937_64 rng(1010);
  for (auto& v : img.data()) v = static_cast<float>(std::uniform_real_distribution<double>(0.0, 0.3)(rng));
  img.at(0, 0, kRedBand) = 0.0f;
  img.at(0, 0, kRedEdgeBand) = 0.0f;
  const LakeRegion all(8, 8, 1);
  const auto s = ndci(img, all), p = ndci(img, all, NdciOrientation::kPrinted);
  bool anti = true;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    anti = anti && (std::isnan(s.values[k]) ? std::isnan(p.values[k]) : p.values[k] == -s.values[k]);
  }
  const bool bounds = classify_ndci(-0.05) == AlgalCategory::kLow &&
                      classify_ndci(0.0) == AlgalCategory::kModerateHigh &&
                      classify_ndci(0.1) == AlgalCategory::kModerateHigh &&
                      classify_ndci(0.15) == AlgalCategory::kBloomRisk;
  const auto idx = series_mean_index(fixture::ndci_ten_day_series(), IndexKind::kNdci);
  const auto f = category_fractions(idx);
  const bool fractions = f.low == 0.6 && f.moderate_high == 0.3 && f.bloom_risk == 0.1;
  const auto c = compare_series(idx, idx);
  const bool self = c.pearson_r == 1.0 && c.rmse == 0.0;
  return {anti && bounds && fractions && self,
          fmt("antisymmetry %s, boundaries %s, fractions %.1f/%.1f/%.1f, self R %.17g RMSE %g", anti ? "exact" : "broken",
              bounds ? "exact" : "wrong", f.low, f.moderate_high, f.bloom_risk, c.pearson_r, c.rmse)};
}

Outcome cli_determinism() {
  TempDir dir("cloudpatch-acceptance");
  const auto cfg = dir / "pipeline.ini";
  {
    std::ofstream out(cfg);
    out << "[synth]\nheight = 32\nwidth = 32\ndates = 20\nseed = 11\n"
           "[mask]\nseed = 500\n"
           "[train]\nepochs = 2\nruns = 2\nseed = 3\n"
           "[models]\nkinds = cnn, cnn_lstm, baseline\n";
  }
  const std::vector<std::string> models{"cnn", "cnn_lstm", "baseline"};
  const int rc1 = pipeline::run_all(cfg, dir / "first", models);
  const int rc2 = pipeline::run_all(cfg, dir / "second", models);
  if (rc1 != 0 || rc2 != 0) return {false, fmt("pipeline exit codes %d and %d", rc1, rc2)};
  const auto a = pipeline::snapshot(dir / "first"), b = pipeline::snapshot(dir / "second");
  std::size_t bytes = 0;
  for (const auto& [name, content] : a) bytes += content.size();
  return {a == b && !a.empty(), fmt("%zu files, %zu bytes, trees %s", a.size(), bytes, a == b ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
      {"loss oracle equivalence", loss_oracle},
      {"gradient suite", gradient_suite},
      {"GRF statistics", grf_statistics},
      {"mask cardinality", mask_cardinality},
      {"baseline exactness", baseline_exactness},
      {"split exactness", split_exactness},
      {"overfit sanity", overfit_sanity},
      {"synthetic benchmark", synthetic_benchmark},
      {"multi-run harness", multi_run_harness},
      {"index pipeline", index_pipeline},
      {"CLI determinism", cli_determinism},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(static_cast<std::size_t>(std::atoi(argv[i])));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected.empty() && !selected.count(k + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
