#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cloudpatch/baseline.hpp"
#include "cloudpatch/checkpoint.hpp"
#include "cloudpatch/eval.hpp"
#include "cloudpatch/indices.hpp"
#include "cloudpatch/maskgen.hpp"
#include "cloudpatch/models.hpp"
#include "cloudpatch/synth.hpp"
#include "cloudpatch/train.hpp"
#include "config.hpp"
#include "png_chart.hpp"

namespace cloudpatch::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string model;
  std::optional<std::size_t> runs;
  std::optional<double> mask_ratio;
  std::string orientation;
  std::string out;
  bool png = false;
};

void log(const std::string& message) { std::cerr << "cloudpatch: " << message << '\n'; }

// Output tree below PipelineConfig::out.
struct Layout {
  fs::path root;

  fs::path series_dir() const { return root / "series"; }
  fs::path series_manifest() const { return series_dir() / "manifest.csv"; }
  fs::path masks_dir() const { return root / "masks"; }
  fs::path masks_manifest() const { return masks_dir() / "manifest.csv"; }
  fs::path models_dir() const { return root / "models"; }
  fs::path imputed_dir(const std::string& model) const { return root / "imputed" / model; }
  fs::path reports_dir() const { return root / "reports"; }
};

std::string file_stem(std::size_t index, const std::string& date) {
  std::string safe = date;
  for (char& c : safe) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%04zu_", index);
  return prefix + safe;
}

// `target` relative to `dir`, stable across working directories.
fs::path relative_to(const fs::path& target, const fs::path& dir) {
  return fs::weakly_canonical(target).lexically_relative(fs::weakly_canonical(dir));
}

std::size_t thread_budget() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CLOUDPATCH_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0) {
      throw Error(ErrorKind::kConfigError, "CLOUDPATCH_THREADS must be a positive integer");
    }
    n = std::min<std::size_t>(n, v);
  }
  return n;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

// Ground truth with artificial masks, as written by `mask`.
MaskedDataset load_masked(const Layout& layout, ImageSeries* series_out = nullptr) {
  if (!fs::exists(layout.masks_manifest())) {
    throw Error(ErrorKind::kIoFailure,
                "'" + layout.masks_manifest().string() + "' not found; run `mask` first");
  }
  LoadedSeries loaded = load_series(layout.masks_manifest());
  MaskedDataset data;
  for (std::size_t i = 0; i < loaded.masks.size(); ++i) {
    if (!loaded.masks[i]) {
      throw Error(ErrorKind::kBadConfig, "mask manifest lists no mask for " +
                                             loaded.series.images[i].date());
    }
    data.masks.push_back(std::move(*loaded.masks[i]));
  }
  data.targets = loaded.series.images;
  if (series_out) *series_out = std::move(loaded.series);
  return data;
}

bool is_baseline(const std::string& model) { return model == "baseline"; }

std::vector<std::string> selected_models(const PipelineConfig& cfg, const Flags& flags) {
  if (!flags.model.empty()) return {flags.model};
  return cfg.models;
}

// Cells where any band is NaN.
CloudMask gap_mask(const MultibandImage& img) {
  CloudMask m(img.height(), img.width());
  const auto d = img.data();
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    for (std::size_t b = 0; b < img.bands(); ++b) {
      if (std::isnan(d[p * img.bands() + b])) {
        m.set_flat(p, true);
        break;
      }
    }
  }
  return m;
}

int cmd_synth(const PipelineConfig& cfg, const Layout& layout) {
  const ImageSeries series = generate_scene(cfg.scene);
  fs::create_directories(layout.series_dir() / "images");
  write_mask(series.region, layout.series_dir() / "region.mbr");
  SeriesManifest manifest{"region.mbr", {}};
  for (std::size_t i = 0; i < series.images.size(); ++i) {
    const auto& img = series.images[i];
    const fs::path rel = fs::path("images") / (file_stem(i, img.date()) + ".mbr");
    write_raster(img, layout.series_dir() / rel);
    manifest.entries.push_back({img.date(), rel, {}});
  }
  write_manifest(manifest, layout.series_manifest());
  log("wrote " + std::to_string(series.images.size()) + " images to " + layout.series_dir().string());
  return kExitOk;
}

int cmd_mask(const PipelineConfig& cfg, const Layout& layout) {
  const fs::path input = cfg.input.empty() ? layout.series_manifest() : cfg.input;
  const SeriesManifest source = read_manifest(input);
  const LoadedSeries loaded = load_series(input);
  const auto [masked, masks] = mask_series(loaded.series, cfg.grf);

  const fs::path dir = layout.masks_dir();
  fs::create_directories(dir);
  const auto source_path = [&](const fs::path& p) {
    return relative_to(p.is_absolute() ? p : input.parent_path() / p, dir);
  };
  SeriesManifest manifest{source_path(source.region), {}};
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto& e = source.entries[i];
    const fs::path rel = file_stem(i, e.date) + ".mbr";
    write_mask(masks[i], dir / rel);
    manifest.entries.push_back({e.date, source_path(e.image), rel});
  }
  write_manifest(manifest, layout.masks_manifest());
  log("masked " + std::to_string(masks.size()) + " images at ratio " +
      format_number(cfg.grf.mask_ratio));
  return kExitOk;
}

int cmd_train(const PipelineConfig& cfg, const Layout& layout, const Flags& flags) {
  const MaskedDataset data = load_masked(layout);
  const auto& first = data.targets.front();
  TrainConfig tcfg = cfg.train;
  tcfg.threads = thread_budget();
  fs::create_directories(layout.models_dir());
  fs::create_directories(layout.reports_dir());

  for (const auto& name : selected_models(cfg, flags)) {
    if (is_baseline(name)) {
      if (!flags.model.empty()) {
        throw Error(ErrorKind::kConfigError, "the baseline has no parameters to train");
      }
      continue;
    }
    const ModelSpec spec = ModelSpec::for_kind(parse_model_kind(name), first.height(), first.width());
    log("training " + name + ": " + std::to_string(tcfg.n_runs) + " runs on " +
        std::to_string(tcfg.threads) + " threads");
    const MultiRunResult result = multi_run(spec, data, tcfg, name);
    if (result.aggregate.empty()) {
      throw Error(ErrorKind::kDivergedLoss, "every run of " + name + " diverged");
    }
    if (result.diverged > 0) log("warning: " + std::to_string(result.diverged) + " runs diverged");

    write_checkpoint(to_checkpoint(result.best_params, spec.serialize()),
                     layout.models_dir() / (name + ".prm"));

    std::string history = "run,seed,epoch,train_loss,val_loss\n";
    json runs = json::array();
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const RunRecord& rec = result.runs[r];
      for (std::size_t e = 0; e < rec.val_loss.size(); ++e) {
        history += std::to_string(r) + "," + std::to_string(rec.seed) + "," + std::to_string(e + 1) +
                   "," + format_number(rec.train_loss[e]) + "," + format_number(rec.val_loss[e]) + "\n";
      }
      json run{{"run", r}, {"seed", rec.seed}, {"diverged", rec.diverged}};
      if (rec.diverged) {
        run["diagnostics"] = rec.diagnostics;
      } else {
        run["epochs"] = rec.val_loss.size();
        run["best_epoch"] = rec.best_epoch + 1;
        run["best_val_loss"] = rec.best_val_loss;
        json bands = json::array();
        for (const auto& m : rec.test_metrics) {
          bands.push_back({{"band", m.band}, {"rmse", m.rmse}, {"r", m.pearson_r}, {"n_pixels", m.n_pixels}});
        }
        run["test_metrics"] = std::move(bands);
      }
      runs.push_back(std::move(run));
    }
    write_text(layout.models_dir() / (name + "_history.csv"), history);

    const DatasetSplit split = split_dataset(data.size(), tcfg.base_seed, spec.timesteps, tcfg);
    json summary{{"model", name},
                 {"base_seed", tcfg.base_seed},
                 {"n_runs", tcfg.n_runs},
                 {"diverged", result.diverged},
                 {"best_run", result.best_run},
                 {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}},
                 {"runs", std::move(runs)}};
    write_text(layout.models_dir() / (name + "_summary.json"), summary.dump(2) + "\n");
    write_report(result.aggregate, layout.reports_dir() / ("train_" + name + ".csv"));
    log("wrote " + (layout.models_dir() / (name + ".prm")).string());
  }
  return kExitOk;
}

int cmd_impute(const PipelineConfig& cfg, const Layout& layout, const Flags& flags) {
  const MaskedDataset data = load_masked(layout);
  const SeriesManifest masks_manifest = read_manifest(layout.masks_manifest());
  std::vector<MultibandImage> observed;
  std::vector<CloudMask> gaps;
  for (std::size_t i = 0; i < data.size(); ++i) {
    observed.push_back(apply_mask(data.targets[i], data.masks[i]));
    gaps.push_back(gap_mask(observed.back()));
  }

  for (const auto& name : selected_models(cfg, flags)) {
    std::vector<MultibandImage> predicted;
    if (is_baseline(name)) {
      for (const auto& img : observed) predicted.push_back(interpolate_image(img));
    } else {
      parse_model_kind(name);
      const fs::path ckpt = layout.models_dir() / (name + ".prm");
      if (!fs::exists(ckpt)) {
        throw Error(ErrorKind::kIoFailure, "'" + ckpt.string() + "' not found; run `train` first");
      }
      const Checkpoint checkpoint = read_checkpoint(ckpt);
      const ModelSpec spec = ModelSpec::parse(checkpoint.header);
      ParamSet<float> params = build_model<float>(spec, 0);
      load_into(checkpoint, params);
      std::vector<std::size_t> order(observed.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      predicted = predict_images(spec, params, observed, gaps, order);
    }

    const fs::path dir = layout.imputed_dir(name);
    fs::create_directories(dir);
    SeriesManifest manifest{relative_to(layout.masks_dir() / masks_manifest.region, dir), {}};
    for (std::size_t i = 0; i < observed.size(); ++i) {
      const auto& e = masks_manifest.entries[i];
      const fs::path rel = file_stem(i, e.date) + ".mbr";
      write_raster(composite(observed[i], predicted[i], gaps[i]), dir / rel);
      manifest.entries.push_back({e.date, rel, relative_to(layout.masks_dir() / e.mask, dir)});
    }
    write_manifest(manifest, dir / "manifest.csv");
    log("imputed " + std::to_string(observed.size()) + " images with " + name);
  }
  return kExitOk;
}

std::vector<std::string> imputed_models(const PipelineConfig& cfg, const Layout& layout) {
  std::vector<std::string> found;
  for (const auto& name : cfg.models) {
    if (fs::exists(layout.imputed_dir(name) / "manifest.csv")) found.push_back(name);
  }
  if (found.empty()) throw Error(ErrorKind::kIoFailure, "no imputed series found; run `impute` first");
  return found;
}

int cmd_evaluate(const PipelineConfig& cfg, const Layout& layout) {
  const MaskedDataset data = load_masked(layout);
  const DatasetSplit split = split_dataset(data.size(), cfg.train.base_seed, 1, cfg.train);
  std::vector<std::size_t> test = split.test;
  std::sort(test.begin(), test.end());

  std::vector<ReportRow> rows;
  for (const auto& name : imputed_models(cfg, layout)) {
    const LoadedSeries imputed = load_series(layout.imputed_dir(name) / "manifest.csv");
    if (imputed.series.images.size() != data.size()) {
      throw Error(ErrorKind::kDimMismatch, "imputed series for " + name + " has a different length");
    }
    std::vector<MultibandImage> truth, pred;
    std::vector<CloudMask> masks;
    for (std::size_t i : test) {
      truth.push_back(data.targets[i]);
      pred.push_back(imputed.series.images[i]);
      masks.push_back(data.masks[i]);
    }
    const auto summary = summarize_runs(name, {evaluate_model(truth, pred, masks)});
    rows.insert(rows.end(), summary.begin(), summary.end());
  }
  fs::create_directories(layout.reports_dir());
  write_report(rows, layout.reports_dir() / "evaluation.csv");
  log("wrote " + (layout.reports_dir() / "evaluation.csv").string());
  return kExitOk;
}

std::string index_csv(const IndexSeries& s, const std::optional<SeriesComparison>& cmp) {
  std::string text = "date,index_kind,mean_value,category\n";
  for (std::size_t i = 0; i < s.dates.size(); ++i) {
    text += s.dates[i] + "," + std::string(to_string(s.kind)) + "," + format_number(s.mean_values[i]) +
            "," + (s.categories[i] ? std::string(to_string(*s.categories[i])) : std::string()) + "\n";
  }
  text += "\nmetric,value\n";
  for (const auto& d : s.dropped_dates) text += "dropped_date," + d + "\n";
  const auto fractions = [&](const std::string& prefix, const CategoryFractions& f) {
    text += prefix + "_low," + format_number(f.low) + "\n";
    text += prefix + "_moderate_high," + format_number(f.moderate_high) + "\n";
    text += prefix + "_bloom_risk," + format_number(f.bloom_risk) + "\n";
  };
  if (s.kind == IndexKind::kNdci) fractions("fraction", category_fractions(s));
  if (cmp) {
    text += "pearson_r," + format_number(cmp->pearson_r) + "\n";
    text += "rmse," + format_number(cmp->rmse) + "\n";
    if (cmp->observed_fractions) fractions("observed_fraction", *cmp->observed_fractions);
  }
  return text;
}

int cmd_indices(const PipelineConfig& cfg, const Layout& layout) {
  ImageSeries truth;
  load_masked(layout, &truth);
  const IndexSeries observed = series_mean_index(truth, cfg.index_kind, cfg.orientation);
  write_text(layout.reports_dir() / "indices_observed.csv", index_csv(observed, std::nullopt));
  for (const auto& name : imputed_models(cfg, layout)) {
    const LoadedSeries imputed = load_series(layout.imputed_dir(name) / "manifest.csv");
    const IndexSeries series = series_mean_index(imputed.series, cfg.index_kind, cfg.orientation);
    std::optional<SeriesComparison> cmp;
    try {
      cmp = compare_series(observed, series);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kConstantSeries) throw;
      log("warning: " + name + ": " + e.what());
    }
    write_text(layout.reports_dir() / ("indices_" + name + ".csv"), index_csv(series, cmp));
  }
  log("wrote index series to " + layout.reports_dir().string());
  return kExitOk;
}

int cmd_report(const Layout& layout, const Flags& flags) {
  const fs::path dir = layout.reports_dir();
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kIoFailure, "no reports in " + dir.string());
  std::vector<fs::path> sources;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string file = entry.path().filename().string();
    if (file == "evaluation.csv" || (file.starts_with("train_") && file.ends_with(".csv"))) {
      sources.push_back(entry.path());
    }
  }
  std::sort(sources.begin(), sources.end());
  if (sources.empty()) throw Error(ErrorKind::kIoFailure, "no evaluation or training reports in " + dir.string());

  std::string text = "source,model,band,rmse_mean,rmse_std,r_mean,r_std,n_runs\n";
  std::vector<ReportRow> evaluation;
  for (const auto& path : sources) {
    const std::string source = path.stem().string();
    for (const auto& r : read_report(path)) {
      text += source + "," + r.model + "," + std::to_string(r.band) + "," + format_number(r.rmse_mean) +
              "," + format_number(r.rmse_std) + "," + format_number(r.r_mean) + "," +
              format_number(r.r_std) + "," + std::to_string(r.n_runs) + "\n";
      if (source == "evaluation") evaluation.push_back(r);
    }
  }
  write_text(dir / "summary.csv", text);
  if (flags.png) {
    write_rmse_chart(evaluation, dir / "rmse.png");
    log("wrote " + (dir / "rmse.png").string());
  }
  log("wrote " + (dir / "summary.csv").string());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Gap filling for multispectral lake imagery", "cloudpatch"};
  app.require_subcommand(1);
  Flags flags;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory");
  };
  const std::vector<std::string> model_names{"cnn", "autoencoder_cnn", "cnn_lstm", "autoencoder_lstm",
                                             "baseline"};

  auto* synth = app.add_subcommand("synth", "generate a synthetic lake scene");
  add_common(synth);
  synth->add_option("--seed", flags.seed, "scene seed");

  auto* mask = app.add_subcommand("mask", "draw artificial gaps for every image");
  add_common(mask);
  mask->add_option("--seed", flags.seed, "random field seed");
  mask->add_option("--mask-ratio", flags.mask_ratio, "fraction of masked pixels");

  auto* train = app.add_subcommand("train", "train imputation models");
  add_common(train);
  train->add_option("--seed", flags.seed, "base seed of the runs");
  train->add_option("--model", flags.model, "model kind")->check(CLI::IsMember(model_names));
  train->add_option("--runs", flags.runs, "number of independent runs");

  auto* impute = app.add_subcommand("impute", "fill gaps with a trained model or the baseline");
  add_common(impute);
  impute->add_option("--model", flags.model, "model kind")->check(CLI::IsMember(model_names));

  auto* evaluate = app.add_subcommand("evaluate", "per-band RMSE and R on the test split");
  add_common(evaluate);

  auto* indices = app.add_subcommand("indices", "lake-mean index series");
  add_common(indices);
  indices->add_option("--ndci-orientation", flags.orientation, "standard or printed")
      ->check(CLI::IsMember({"standard", "printed"}));

  auto* report = app.add_subcommand("report", "merge report CSVs");
  add_common(report);
  report->add_flag("--png", flags.png, "also render rmse.png");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (!args.empty() && !args.front().starts_with("-") && app.get_subcommands().empty()) {
      std::cerr << "cloudpatch: " << to_string(ErrorKind::kUnknownSubcommand) << ": '" << args.front()
                << "'\n";
      return kExitUserError;
    }
    std::cerr << "cloudpatch: " << e.what() << '\n';
    return kExitUserError;
  }

  try {
    PipelineConfig cfg = flags.config.empty() ? PipelineConfig{} : load_config(flags.config);
    if (!flags.out.empty()) cfg.out = flags.out;
    if (flags.runs) cfg.train.n_runs = *flags.runs;
    if (flags.mask_ratio) cfg.grf.mask_ratio = *flags.mask_ratio;
    if (!flags.orientation.empty()) cfg.orientation = parse_orientation(flags.orientation);
    if (flags.seed) {
      if (synth->parsed()) cfg.scene.seed = *flags.seed;
      if (mask->parsed()) cfg.grf.seed = *flags.seed;
      if (train->parsed()) cfg.train.base_seed = *flags.seed;
    }
    cfg.validate();
    const Layout layout{cfg.out};

    if (synth->parsed()) return cmd_synth(cfg, layout);
    if (mask->parsed()) return cmd_mask(cfg, layout);
    if (train->parsed()) return cmd_train(cfg, layout, flags);
    if (impute->parsed()) return cmd_impute(cfg, layout, flags);
    if (evaluate->parsed()) return cmd_evaluate(cfg, layout);
    if (indices->parsed()) return cmd_indices(cfg, layout);
    return cmd_report(layout, flags);
  } catch (const Error& e) {
    std::cerr << "cloudpatch: " << e.what() << '\n';
    return e.kind() == ErrorKind::kShapeMismatch ? kExitInternalError : kExitUserError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "cloudpatch: " << e.what() << '\n';
    return kExitUserError;
  } catch (const std::exception& e) {
    std::cerr << "cloudpatch: internal error: " << e.what() << '\n';
    return kExitInternalError;
  }
}

}  // namespace cloudpatch::cli
