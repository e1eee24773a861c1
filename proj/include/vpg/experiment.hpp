#pragma once

// Stratified k-fold comparison of the two training regimes. Both regimes see the same folds, the
// same validation carve-out and the same initial weights, so per-fold accuracies are paired.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "vpg/core.hpp"
#include "vpg/models.hpp"
#include "vpg/nn/checkpoint.hpp"
#include "vpg/nn/train.hpp"
#include "vpg/transform.hpp"

namespace vpg::experiment {

using transform::NormScope;
using transform::Provenance;
using transform::Regime;
using transform::ReversalReference;

struct ExperimentConfig {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::vector<Regime> regimes{Regime::ViOnly, Regime::ViPlusVp};
  transform::ReversalConfig reversal{};
  NormScope scope = NormScope::PerChannel;
  nn::TrainConfig train{};
  double validation_fraction = 0.1;
  std::vector<std::string> channels;  // empty: all channels
  std::size_t threads = 1;            // folds run concurrently when > 1; results do not depend on it
  std::filesystem::path checkpoint_dir;  // when set, every trained fold model is saved here
};

inline void validate_config(const ExperimentConfig& cfg) {
  require(cfg.folds >= 2, Errc::InvalidConfig, "folds must be >= 2");
  require(!cfg.regimes.empty(), Errc::InvalidConfig, "at least one regime required");
  require(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0, Errc::InvalidConfig,
          "validation fraction must be in [0, 1)");
  require(cfg.train.batch_size > 0 && cfg.train.max_epochs > 0, Errc::InvalidConfig,
          "batch size and epochs must be positive");
  require(cfg.threads >= 1, Errc::InvalidConfig, "threads must be >= 1");
}

/// Stratified folds: each class is shuffled under `seed` and dealt round-robin, so every fold gets
/// floor or ceil of (class size / k) members of each class. Indices inside a fold are ascending.
inline std::vector<std::vector<std::size_t>> kfold_split(std::span<const std::size_t> labels, std::size_t k,
                                                         std::uint64_t seed) {
  require(k >= 2, Errc::InvalidArgument, "k must be >= 2");
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  require(!by_class.empty(), Errc::TooFewPerClass, "no labels to split");
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t offset = 0;
  for (auto& [cls, members] : by_class) {
    require(members.size() >= k, Errc::TooFewPerClass,
            "class " + std::to_string(cls) + " has " + std::to_string(members.size()) + " members, fewer than k=" +
                std::to_string(k));
    std::mt19937_64 rng(derive_seed(seed, cls));
    portable_shuffle(members, rng);
    // Rotating the starting fold per class keeps fold sizes balanced when classes do not divide evenly.
    for (std::size_t j = 0; j < members.size(); ++j) folds[(offset + j) % k].push_back(members[j]);
    offset += members.size();
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

/// Splits `pool` (indices into `labels`) into (train, validation), taking round(fraction * n_c)
/// members of each class for validation.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    std::span<const std::size_t> pool, std::span<const std::size_t> labels, double fraction, std::uint64_t seed) {
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (auto i : pool) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> train, val;
  for (auto& [cls, members] : by_class) {
    std::mt19937_64 rng(derive_seed(seed, cls));
    portable_shuffle(members, rng);
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    n_val = std::min(n_val, members.size() - 1);  // keep at least one training member per class
    val.insert(val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

/// Stacks epochs into an (n, 1, channels, samples) tensor.
inline nn::Tensor4<float> to_tensor(std::span<const Epoch> epochs) {
  require(!epochs.empty(), Errc::EmptyDataset, "no epochs to stack");
  const auto c = epochs.front().channels, t = epochs.front().samples;
  nn::Tensor4<float> out(nn::Shape4{epochs.size(), 1, c, t});
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    require(epochs[i].channels == c && epochs[i].samples == t, Errc::ShapeMismatch, "epochs differ in shape");
    std::copy(epochs[i].data.begin(), epochs[i].data.end(), out.sample(i).begin());
  }
  return out;
}

struct FoldResult {
  double accuracy = 0.0;
  std::vector<std::size_t> test_indices;        // indices into the imagery dataset
  std::vector<Provenance> test_provenance;      // one tag per test epoch
  std::size_t n_train_imagery = 0;
  std::size_t n_train_perception = 0;
  std::size_t n_validation = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
};

struct RegimeResult {
  Regime regime = Regime::ViOnly;
  std::vector<FoldResult> folds;
  std::vector<double> accuracies() const {
    std::vector<double> a;
    for (const auto& f : folds) a.push_back(f.accuracy);
    return a;
  }
};

/// Arithmetic mean.
inline double mean(std::span<const double> v) {
  require(!v.empty(), Errc::InvalidArgument, "mean of empty list");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct ExperimentReport {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<RegimeResult> regimes;
  double wall_clock_s = 0.0;

  const RegimeResult* find(Regime r) const {
    for (const auto& x : regimes)
      if (x.regime == r) return &x;
    return nullptr;
  }
};

inline nlohmann::json config_to_json(const ExperimentConfig& cfg, const Dataset& vi, const Dataset& vp,
                                     const nn::ModelSpec& model) {
  nlohmann::json regimes = nlohmann::json::array();
  for (auto r : cfg.regimes) regimes.push_back(std::string(transform::to_string(r)));
  return {
      {"folds", cfg.folds},
      {"regimes", regimes},
      {"reversal", std::string(transform::to_string(cfg.reversal.reference))},
      {"scope", std::string(transform::to_string(cfg.scope))},
      {"validation_fraction", cfg.validation_fraction},
      {"train",
       {{"optimizer", "adam"},
        {"learning_rate", cfg.train.adam.learning_rate},
        {"beta1", cfg.train.adam.beta1},
        {"beta2", cfg.train.adam.beta2},
        {"epsilon", cfg.train.adam.epsilon},
        {"batch_size", cfg.train.batch_size},
        {"max_epochs", cfg.train.max_epochs},
        {"patience", cfg.train.patience}}},
      {"channels", cfg.channels.empty() ? vi.montage.channel_names() : cfg.channels},
      {"datasets",
       {{"vi", {{"name", vi.name}, {"epochs", vi.epochs.size()}}},
        {"vp", {{"name", vp.name}, {"epochs", vp.epochs.size()}}}}},
      {"fs_hz", vi.fs_hz},
      {"model", models::to_json(model)},
  };
}

/// Report JSON: {config, seed, wall_clock_s, regimes: {<name>: {folds[], mean, std}}}.
inline nlohmann::json to_json(const ExperimentReport& rep) {
  nlohmann::json regimes = nlohmann::json::object();
  for (const auto& r : rep.regimes) {
    const auto acc = r.accuracies();
    regimes[std::string(transform::to_string(r.regime))] = {
        {"folds", acc}, {"mean", mean(acc)}, {"std", sample_std(acc)}};
  }
  return {{"config", rep.config}, {"seed", rep.seed}, {"wall_clock_s", rep.wall_clock_s}, {"regimes", regimes}};
}

/// Flat table: one row per (regime, fold) plus "mean" and "std" rows.
inline std::string to_csv(const ExperimentReport& rep) {
  std::string out = "regime,fold,accuracy\n";
  char buf[64];
  auto row = [&](std::string_view regime, const std::string& fold, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(regime).append(",").append(fold).append(",").append(buf).append("\n");
  };
  for (const auto& r : rep.regimes) {
    const auto acc = r.accuracies();
    const auto name = transform::to_string(r.regime);
    for (std::size_t i = 0; i < acc.size(); ++i) row(name, std::to_string(i + 1), acc[i]);
    row(name, "mean", mean(acc));
    row(name, "std", sample_std(acc));
  }
  return out;
}

inline void write_report(const ExperimentReport& rep, const std::filesystem::path& json_path,
                         const std::filesystem::path& csv_path) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), Errc::IoError, "cannot write " + p.string());
    os << text;
    require(static_cast<bool>(os), Errc::IoError, "write failed for " + p.string());
  };
  write(json_path, to_json(rep).dump(2) + "\n");
  write(csv_path, to_csv(rep));
}

struct FoldProgress {
  Regime regime;
  std::size_t fold;  // 1-based
  double accuracy;
  std::size_t epochs_run;
};

namespace detail {

inline std::vector<std::size_t> resolve_channels(const ExperimentConfig& cfg, const Montage& montage) {
  std::vector<std::size_t> picks;
  if (cfg.channels.empty()) {
    picks.resize(montage.size());
    std::iota(picks.begin(), picks.end(), 0);
    return picks;
  }
  for (const auto& name : cfg.channels) {
    const auto idx = montage.index_of(name);
    require(idx.has_value(), Errc::InvalidConfig, "channel '" + name + "' not in montage");
    picks.push_back(*idx);
  }
  return picks;
}

inline std::vector<Epoch> pick(std::span<const Epoch> epochs, std::span<const std::size_t> idx,
                               std::span<const std::size_t> channels) {
  std::vector<Epoch> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(epochs[i].pick_channels(channels));
  return out;
}

inline std::vector<Epoch> normalized(std::vector<Epoch> epochs, NormScope scope) {
  for (auto& e : epochs) e = transform::minmax_normalize(e, scope).first;
  return epochs;
}

}  // namespace detail

/// Runs every requested regime over the same stratified folds of the imagery dataset. Test folds
/// hold imagery epochs only; perception epochs enter training under ViPlusVp.
inline ExperimentReport run_experiment(const Dataset& vi, const Dataset& vp, const ExperimentConfig& cfg,
                                       const std::function<void(const FoldProgress&)>& on_fold = {}) {
  validate_config(cfg);
  const auto t_start = std::chrono::steady_clock::now();
  require(!vi.epochs.empty(), Errc::EmptyDataset, "imagery dataset is empty");
  require(vi.montage.channel_names() == vp.montage.channel_names(), Errc::IncompatibleDatasets,
          "imagery and perception montages differ");
  require(vi.fs_hz == vp.fs_hz, Errc::IncompatibleDatasets, "imagery and perception sampling rates differ");
  require(vi.classes.size() == vp.classes.size(), Errc::IncompatibleDatasets, "class counts differ");
  require(vp.epochs.empty() || vi.n_samples() == vp.n_samples(), Errc::IncompatibleDatasets,
          "imagery and perception epoch lengths differ");
  for (const auto& e : vi.epochs) require(e.kind == TrialKind::Imagery, Errc::IncompatibleDatasets, "vi holds a non-imagery epoch");
  for (const auto& e : vp.epochs) require(e.kind == TrialKind::Perception, Errc::IncompatibleDatasets, "vp holds a non-perception epoch");
  const bool wants_vp = std::find(cfg.regimes.begin(), cfg.regimes.end(), Regime::ViPlusVp) != cfg.regimes.end();
  require(!wants_vp || !vp.epochs.empty(), Errc::EmptyDataset, "perception dataset is empty");

  const auto channels = detail::resolve_channels(cfg, vi.montage);
  const auto n_classes = vi.n_classes();
  const auto spec = models::proposed_net_spec(channels.size(), n_classes);
  require(vi.n_samples() == spec.input_time, Errc::ShapeMismatch,
          "epochs must have " + std::to_string(spec.input_time) + " samples, got " + std::to_string(vi.n_samples()));

  const auto labels = vi.labels();
  const auto folds = kfold_split(labels, cfg.folds, derive_seed(cfg.seed, seed_stream("folds")));
  std::vector<std::size_t> all_vp(vp.epochs.size());
  std::iota(all_vp.begin(), all_vp.end(), 0);
  const auto perception = detail::pick(vp.epochs, all_vp, channels);

  ExperimentReport rep;
  rep.seed = cfg.seed;
  rep.config = config_to_json(cfg, vi, vp, spec);
  for (auto r : cfg.regimes) rep.regimes.push_back({r, std::vector<FoldResult>(cfg.folds)});

  struct Job {
    std::size_t regime_slot, fold;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < cfg.regimes.size(); ++r)
    for (std::size_t f = 0; f < cfg.folds; ++f) jobs.push_back({r, f});

  std::mutex mu;
  auto run_job = [&](const Job& job) {
    const auto regime = cfg.regimes[job.regime_slot];
    const std::uint64_t fold_seed = derive_seed(cfg.seed, seed_stream("fold") + job.fold);
    std::vector<std::size_t> pool;
    for (std::size_t f = 0; f < cfg.folds; ++f)
      if (f != job.fold) pool.insert(pool.end(), folds[f].begin(), folds[f].end());
    std::sort(pool.begin(), pool.end());
    const auto [train_idx, val_idx] =
        stratified_holdout(pool, labels, cfg.validation_fraction, derive_seed(fold_seed, seed_stream("validation")));

    const auto imagery_train = detail::pick(vi.epochs, train_idx, channels);
    const auto set = transform::assemble_training_set(imagery_train, perception, regime, cfg.reversal, cfg.scope, n_classes);
    const auto x = to_tensor(set.epochs);
    std::vector<std::size_t> y;
    for (const auto& e : set.epochs) y.push_back(e.label);

    nn::Tensor4<float> x_val;
    std::vector<std::size_t> y_val;
    if (!val_idx.empty()) {
      const auto val = detail::normalized(detail::pick(vi.epochs, val_idx, channels), cfg.scope);
      x_val = to_tensor(val);
      for (const auto& e : val) y_val.push_back(e.label);
    }
    const auto test = detail::normalized(detail::pick(vi.epochs, folds[job.fold], channels), cfg.scope);
    const auto x_test = to_tensor(test);
    std::vector<std::size_t> y_test;
    for (const auto& e : test) y_test.push_back(e.label);

    // Same initial weights and batch order seed for both regimes of a fold.
    auto model = nn::Model<float>(spec, derive_seed(fold_seed, seed_stream("init")));
    auto tcfg = cfg.train;
    tcfg.seed = derive_seed(fold_seed, seed_stream("train"));
    const auto hist = nn::fit(model, x, y, val_idx.empty() ? nullptr : &x_val, y_val, tcfg);

    if (!cfg.checkpoint_dir.empty())
      nn::save_checkpoint(model, cfg.checkpoint_dir / (std::string(transform::to_string(regime)) + "_fold" +
                                                       std::to_string(job.fold + 1) + ".vpgm"));

    FoldResult fr;
    fr.accuracy = nn::evaluate(model, x_test, y_test).accuracy;
    fr.test_indices = folds[job.fold];
    fr.test_provenance.assign(test.size(), Provenance::Imagery);
    for (auto p : set.provenance) (p == Provenance::Imagery ? fr.n_train_imagery : fr.n_train_perception)++;
    fr.n_validation = val_idx.size();
    fr.epochs_run = hist.epochs_run;
    fr.best_epoch = hist.best_epoch;

    std::lock_guard lock(mu);
    rep.regimes[job.regime_slot].folds[job.fold] = std::move(fr);
    if (on_fold) on_fold({regime, job.fold + 1, rep.regimes[job.regime_slot].folds[job.fold].accuracy, hist.epochs_run});
  };

  const std::size_t workers = std::min(cfg.threads, jobs.size());
  if (workers <= 1) {
    for (const auto& j : jobs) run_job(j);
  } else {
    std::size_t next = 0;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t mine;
          {
            std::lock_guard lock(mu);
            if (next >= jobs.size() || error) return;
            mine = next++;
          }
          try {
            run_job(jobs[mine]);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }
  rep.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

struct PairedTest {
  double mean_difference = 0.0;  // mean of (a - b)
  double t = 0.0;
  double p_one_sided = 1.0;      // H1: mean(a - b) > 0
  std::size_t n = 0;
};

/// One-sided paired t-test of a > b.
inline PairedTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, Errc::InvalidArgument, "paired test needs two equal lists of >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  PairedTest res;
  res.n = d.size();
  res.mean_difference = mean(d);
  const double sd = sample_std(d);
  if (sd == 0.0) {
    res.t = res.mean_difference > 0 ? INFINITY : res.mean_difference < 0 ? -INFINITY : 0.0;
    res.p_one_sided = res.mean_difference > 0 ? 0.0 : res.mean_difference < 0 ? 1.0 : 0.5;
    return res;
  }
  res.t = res.mean_difference / (sd / std::sqrt(static_cast<double>(d.size())));
  const boost::math::students_t dist(static_cast<double>(d.size() - 1));
  res.p_one_sided = boost::math::cdf(boost::math::complement(dist, res.t));
  return res;
}

}  // namespace vpg::experiment
