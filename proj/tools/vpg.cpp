// vpg: command-line front end.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vpg/vpg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void init_logging() {
  auto logger = spdlog::stderr_color_mt("vpg");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("VPG_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown text to "off"; only honour it when asked for explicitly.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("VPG_LOG='{}' not recognised; using info", env);
  }
}

vpg::dsp::Band parse_band(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--band expects LOW:HIGH, got '" + text + "'");
  try {
    std::size_t used = 0;
    const double lo = std::stod(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("");
    const auto rest = text.substr(colon + 1);
    const double hi = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError("--band expects LOW:HIGH, got '" + text + "'");
  }
}

// A montage comes from a dataset directory, a manifest file, or a plain list of channel names
// separated by commas or newlines.
vpg::Montage read_montage(const fs::path& path) {
  if (fs::is_directory(path)) return vpg::load_dataset(path).montage;
  const auto text = vpg::detail::read_file(path);
  if (path.extension() == ".json") {
    try {
      const auto m = json::parse(text);
      auto names = m.at("channel_names").get<std::vector<std::string>>();
      if (m.contains("occipital_channels"))
        return vpg::Montage::with_occipital_names(std::move(names), m.at("occipital_channels").get<std::vector<std::string>>());
      return vpg::Montage(std::move(names));
    } catch (const json::exception& ex) {
      vpg::fail(vpg::Errc::InvalidManifest, ex.what());
    }
  }
  std::vector<std::string> names;
  std::string token;
  for (char ch : text + "\n") {
    if (ch == ',' || ch == '\n' || ch == '\r') {
      const auto b = token.find_first_not_of(" \t"), e = token.find_last_not_of(" \t");
      if (b != std::string::npos) names.push_back(token.substr(b, e - b + 1));
      token.clear();
    } else {
      token += ch;
    }
  }
  return vpg::Montage(std::move(names));
}

void announce(const std::string& command, const json& resolved) {
  spdlog::info("{} resolved config: {}", command, resolved.dump());
}

// synth ----------------------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t channels = 16;
  std::size_t trials_per_class = 50;
  std::size_t perception_per_class = 0;  // 0: twice the imagery count
  double noise = vpg::synth::SynthConfig{}.noise_sigma;
};

int run_synth(const SynthArgs& a) {
  vpg::synth::SynthConfig cfg;
  cfg.seed = a.seed;
  cfg.n_channels = a.channels;
  cfg.n_occipital = std::min<std::size_t>(4, a.channels);
  cfg.vi_trials_per_class = a.trials_per_class;
  cfg.vp_trials_per_class = a.perception_per_class ? a.perception_per_class : 2 * a.trials_per_class;
  cfg.noise_sigma = a.noise;
  announce("synth", {{"out", a.out},
                     {"seed", cfg.seed},
                     {"channels", cfg.n_channels},
                     {"occipital", cfg.n_occipital},
                     {"vi_trials_per_class", cfg.vi_trials_per_class},
                     {"vp_trials_per_class", cfg.vp_trials_per_class},
                     {"noise_sigma", cfg.noise_sigma},
                     {"fs_hz", cfg.fs_hz},
                     {"n_samples", cfg.n_samples}});
  const auto pair = vpg::synth::generate_synthetic(cfg);
  vpg::save_dataset(pair.vi, fs::path(a.out) / "vi");
  vpg::save_dataset(pair.vp, fs::path(a.out) / "vp");
  spdlog::info("wrote {} imagery and {} perception trials to {}", pair.vi.epochs.size(), pair.vp.epochs.size(), a.out);
  return kExitOk;
}

// preprocess -----------------------------------------------------------------------------------

struct PreprocessArgs {
  std::string in, out, band = "8:13";
  double resample = 250.0;
  std::size_t crop = 1251;
  std::size_t order = 4;
};

int run_preprocess(const PreprocessArgs& a) {
  vpg::dsp::PreprocessConfig cfg;
  cfg.band = parse_band(a.band);
  cfg.order = static_cast<int>(a.order);
  cfg.target_fs_hz = a.resample;
  cfg.crop_samples = a.crop;
  announce("preprocess", {{"in", a.in},
                          {"out", a.out},
                          {"band", {cfg.band.low_hz, cfg.band.high_hz}},
                          {"order", cfg.order},
                          {"resample_hz", cfg.target_fs_hz},
                          {"crop", cfg.crop_samples}});
  auto ds = vpg::load_dataset(a.in);
  for (auto& e : ds.epochs) e = vpg::dsp::preprocess(e, cfg);
  ds.fs_hz = cfg.target_fs_hz;
  vpg::save_dataset(ds, a.out);
  spdlog::info("preprocessed {} trials into {}", ds.epochs.size(), a.out);
  return kExitOk;
}

// analyze --------------------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string in, out_csv, out_svg, band = "8:13";
};

int run_analyze(const AnalyzeArgs& a) {
  const auto band = parse_band(a.band);
  announce("analyze", {{"in", a.in}, {"out_csv", a.out_csv}, {"out_svg", a.out_svg}, {"band", {band.low_hz, band.high_hz}}});
  const auto ds = vpg::load_dataset(a.in);
  vpg::require(!ds.epochs.empty(), vpg::Errc::EmptyDataset, "dataset has no trials");
  std::vector<double> mean_slope(ds.montage.size(), 0.0);
  std::size_t positive = 0;
  for (const auto& e : ds.epochs) {
    const auto r = vpg::dsp::alpha_tendency(e, band);
    for (std::size_t c = 0; c < mean_slope.size(); ++c) mean_slope[c] += r.per_channel_slope[c];
    positive += vpg::synth::occipital_tendency(e, ds.montage, band) > 0.0;
  }
  for (auto& v : mean_slope) v /= static_cast<double>(ds.epochs.size());
  vpg::topo::export_topomap(mean_slope, ds.montage, a.out_csv, a.out_svg);
  const double frac = static_cast<double>(positive) / static_cast<double>(ds.epochs.size());
  spdlog::info("{} trials; occipital tendency positive in {:.4f}, negative or flat in {:.4f}", ds.epochs.size(), frac,
               1.0 - frac);
  std::cout << json{{"trials", ds.epochs.size()}, {"occipital_positive_fraction", frac}}.dump() << '\n';
  return kExitOk;
}

// train ----------------------------------------------------------------------------------------

struct TrainArgs {
  std::string vi, vp, regimes = "both", out, reversal = "zeros", scope = "channel", channels, checkpoint_dir;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t epochs = 100, patience = 10, batch = 16;
  double lr = 1e-3;
};

int run_train(const TrainArgs& a, std::size_t threads) {
  vpg::experiment::ExperimentConfig cfg;
  cfg.folds = a.folds;
  cfg.seed = a.seed;
  cfg.regimes = a.regimes == "vi" ? std::vector{vpg::transform::Regime::ViOnly}
                                  : std::vector{vpg::transform::Regime::ViOnly, vpg::transform::Regime::ViPlusVp};
  cfg.reversal.reference = a.reversal == "ones" ? vpg::transform::ReversalReference::Ones
                                                : vpg::transform::ReversalReference::Zeros;
  cfg.scope = a.scope == "trial" ? vpg::transform::NormScope::PerTrial : vpg::transform::NormScope::PerChannel;
  cfg.train.max_epochs = a.epochs;
  cfg.train.patience = a.patience;
  cfg.train.batch_size = a.batch;
  cfg.train.adam.learning_rate = a.lr;
  cfg.threads = threads;
  cfg.checkpoint_dir = a.checkpoint_dir;
  if (!a.channels.empty()) {
    std::stringstream ss(a.channels);
    for (std::string name; std::getline(ss, name, ',');)
      if (!name.empty()) cfg.channels.push_back(name);
  }

  const auto vi = vpg::load_dataset(a.vi);
  const auto vp = vpg::load_dataset(a.vp);
  announce("train", {{"vi", a.vi},
                     {"vp", a.vp},
                     {"out", a.out},
                     {"seed", a.seed},
                     {"experiment", vpg::experiment::config_to_json(
                                        cfg, vi, vp, vpg::models::proposed_net_spec(cfg.channels.empty() ? vi.montage.size()
                                                                                                          : cfg.channels.size(),
                                                                                     vi.n_classes()))}});
  const auto rep = vpg::experiment::run_experiment(vi, vp, cfg, [](const vpg::experiment::FoldProgress& p) {
    spdlog::info("{} fold {}: accuracy {:.4f} after {} epochs", vpg::transform::to_string(p.regime), p.fold, p.accuracy,
                 p.epochs_run);
  });
  const fs::path json_path(a.out);
  auto csv_path = json_path;
  csv_path.replace_extension(".csv");
  vpg::experiment::write_report(rep, json_path, csv_path);
  for (const auto& r : rep.regimes) {
    const auto acc = r.accuracies();
    spdlog::info("{}: {:.4f} +- {:.4f}", vpg::transform::to_string(r.regime), vpg::experiment::mean(acc),
                 vpg::experiment::sample_std(acc));
  }
  spdlog::info("report written to {} and {}", json_path.string(), csv_path.string());
  return kExitOk;
}

// topomap --------------------------------------------------------------------------------------

struct TopomapArgs {
  std::string values, montage, out;
};

int run_topomap(const TopomapArgs& a) {
  announce("topomap", {{"values", a.values}, {"montage", a.montage}, {"out", a.out}});
  const auto montage = read_montage(a.montage);
  const auto values = vpg::topo::read_values_csv(a.values, montage);
  const auto svg = vpg::topo::render_svg(values, montage);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream os(out, std::ios::trunc);
  vpg::require(static_cast<bool>(os), vpg::Errc::IoError, "cannot write " + a.out);
  os << svg;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();

  CLI::App app{"Visual-imagery EEG decoding with perception-guided training"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are accepted after the subcommand too
  std::size_t threads = 1;
  bool deterministic = false;
  app.add_option("--threads", threads, "Worker threads for cross-validation folds")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", deterministic, "Force single-threaded execution");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate synthetic imagery/perception datasets");
  synth->add_option("--out", sa.out, "Output directory (receives vi/ and vp/)")->required();
  synth->add_option("--seed", sa.seed, "Root seed")->required();
  synth->add_option("--channels", sa.channels, "Channel count")->check(CLI::PositiveNumber);
  synth->add_option("--trials-per-class", sa.trials_per_class, "Imagery trials per class")->check(CLI::PositiveNumber);
  synth->add_option("--perception-per-class", sa.perception_per_class, "Perception trials per class (default 2x imagery)");
  synth->add_option("--noise", sa.noise, "White-noise standard deviation")->check(CLI::NonNegativeNumber);

  PreprocessArgs pa;
  auto* pre = app.add_subcommand("preprocess", "Band-pass, resample and crop a dataset");
  pre->add_option("--in", pa.in, "Input dataset directory")->required();
  pre->add_option("--out", pa.out, "Output dataset directory")->required();
  pre->add_option("--band", pa.band, "Pass band LOW:HIGH in Hz")->capture_default_str();
  pre->add_option("--resample", pa.resample, "Target sampling rate in Hz")->capture_default_str();
  pre->add_option("--crop", pa.crop, "Samples kept from the start of each trial")->capture_default_str();
  pre->add_option("--order", pa.order, "Butterworth order")->capture_default_str()->check(CLI::PositiveNumber);

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Per-channel alpha tendency with topomap export");
  analyze->add_option("--in", aa.in, "Dataset directory")->required();
  analyze->add_option("--out-csv", aa.out_csv, "Topomap values CSV")->required();
  analyze->add_option("--out-svg", aa.out_svg, "Topomap SVG")->required();
  analyze->add_option("--band", aa.band, "Band LOW:HIGH in Hz")->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Cross-validated comparison of training regimes");
  train->add_option("--vi", ta.vi, "Imagery dataset directory")->required();
  train->add_option("--vp", ta.vp, "Perception dataset directory")->required();
  train->add_option("--regimes", ta.regimes, "vi or both")->check(CLI::IsMember({"vi", "both"}))->capture_default_str();
  train->add_option("--folds", ta.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
  train->add_option("--seed", ta.seed, "Root seed")->required();
  train->add_option("--out", ta.out, "Report JSON path (CSV written alongside)")->required();
  train->add_option("--reversal", ta.reversal, "Reversal reference")->check(CLI::IsMember({"zeros", "ones"}))->capture_default_str();
  train->add_option("--scope", ta.scope, "Normalization scope")->check(CLI::IsMember({"channel", "trial"}))->capture_default_str();
  train->add_option("--epochs", ta.epochs, "Maximum training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--patience", ta.patience, "Early-stopping patience")->capture_default_str();
  train->add_option("--batch", ta.batch, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--channels", ta.channels, "Comma-separated channel subset");
  train->add_option("--checkpoints", ta.checkpoint_dir, "Directory receiving one model checkpoint per fold");

  TopomapArgs tma;
  auto* topomap = app.add_subcommand("topomap", "Render a topomap SVG from a values CSV");
  topomap->add_option("--values", tma.values, "CSV with header channel,value")->required();
  topomap->add_option("--montage", tma.montage, "Dataset directory, manifest.json, or channel-name list")->required();
  topomap->add_option("--out", tma.out, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  if (deterministic) threads = 1;
  try {
    if (*synth) return run_synth(sa);
    if (*pre) return run_preprocess(pa);
    if (*analyze) return run_analyze(aa);
    if (*train) return run_train(ta, threads);
    if (*topomap) return run_topomap(tma);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const vpg::Error& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  std::cerr << app.help();
  return kExitUsage;
}
