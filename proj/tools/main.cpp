// SPDX-License-Identifier: Apache-2.0
//
// spectro-explain: synthesize device signals, train the spectrogram
// classifier, explain it with LIME, and ensemble explanations across
// retrainings. Subcommands: synth, train, explain, ensemble, report.

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "spx/io.hpp"
#include "spx/pipeline.hpp"
#include "spx/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spx;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  int jobs = 0;
  int class_id = -1;
  std::string checkpoint;
};

PipelineConfig effective_config(const CliOptions& opt) {
  PipelineConfig cfg;
  if (!opt.config_path.empty()) cfg = PipelineConfig::load(opt.config_path);
  if (const char* env = std::getenv("SPECTRO_EXPLAIN_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw std::invalid_argument("SPECTRO_EXPLAIN_SEED is not a valid u64: " +
                                  std::string(env));
    }
    cfg.train.seed = cfg.seed;
  }
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.train.seed = *opt.seed;
  }
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (opt.jobs > 0) cfg.jobs = opt.jobs;
  if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);
  cfg.validate();
  return cfg;
}

DatasetManifest manifest_for(const PipelineConfig& cfg) {
  DatasetManifest m =
      cfg.manifest_path.empty() ? default_manifest() : DatasetManifest::load(cfg.manifest_path);
  m.validate(cfg.window_samples);
  return m;
}

fs::path signal_path(const PipelineConfig& cfg, int class_id) {
  return fs::path(cfg.out_dir) / "signals" /
         ("class_" + std::to_string(class_id) + ".sig");
}

fs::path manifest_echo_path(const PipelineConfig& cfg) {
  return fs::path(cfg.out_dir) / "manifest.json";
}

fs::path model_path(const PipelineConfig& cfg, uint64_t seed) {
  return fs::path(cfg.out_dir) / "models" / ("model_seed" + std::to_string(seed) + ".mdl1");
}

/// Loads the dataset from the manifest echo and SIG1 files written by
/// `synth`. Missing files are a usage error (run synth first).
Dataset load_dataset(const PipelineConfig& cfg) {
  const auto mpath = manifest_echo_path(cfg);
  if (!fs::exists(mpath))
    throw std::invalid_argument("missing " + mpath.string() + "; run `synth` first");
  Dataset d;
  d.manifest = DatasetManifest::load(mpath);
  d.manifest.validate(cfg.window_samples);
  for (const auto& spec : d.manifest.classes) {
    const auto p = signal_path(cfg, spec.class_id);
    if (!fs::exists(p))
      throw std::invalid_argument("missing signal file " + p.string() + "; run `synth` first");
    double fs_read = 0.0;
    d.signals.push_back(load_signal(p, &fs_read));
    if (fs_read != d.manifest.sample_rate)
      throw std::invalid_argument("sample rate mismatch in " + p.string());
  }
  return d;
}

int cmd_synth(const CliOptions& opt) {
  const auto cfg = effective_config(opt);
  const auto manifest = manifest_for(cfg);
  fs::create_directories(fs::path(cfg.out_dir) / "signals");
  for (const auto& spec : manifest.classes) {
    const auto signal =
        synthesize_signal(spec, spec.n_samples, manifest.sample_rate, manifest.seed);
    save_signal(signal_path(cfg, spec.class_id), signal, manifest.sample_rate);
    std::cout << "wrote " << signal_path(cfg, spec.class_id).string() << " ("
              << signal.size() << " samples)\n";
  }
  manifest.save(manifest_echo_path(cfg));
  std::cout << "wrote " << manifest_echo_path(cfg).string() << "\n";
  return 0;
}

int cmd_train(const CliOptions& opt) {
  const auto cfg = effective_config(opt);
  const Dataset data = load_dataset(cfg);
  const uint64_t train_seed = cfg.train.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainedModel tm = train_on(data, cfg, train_seed);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(fs::path(cfg.out_dir) / "models");
  fs::create_directories(fs::path(cfg.out_dir) / "reports");
  fs::create_directories(fs::path(cfg.out_dir) / "plots");
  const auto mpath = model_path(cfg, train_seed);
  tm.model.save(mpath);
  const auto rpath =
      fs::path(cfg.out_dir) / "reports" / ("train_seed" + std::to_string(train_seed) + ".json");
  tm.report.save(rpath);

  std::vector<double> epochs(tm.report.val_accuracy.size());
  for (size_t i = 0; i < epochs.size(); ++i) epochs[i] = static_cast<double>(i + 1);
  write_line_plot(
      fs::path(cfg.out_dir) / "plots" / ("accuracy_seed" + std::to_string(train_seed) + ".svg"),
      "Train / validation accuracy", "epoch", "accuracy",
      {{"train", "#ff7f0e", epochs, tm.report.train_accuracy, false},
       {"validation", "#1f77b4", epochs, tm.report.val_accuracy, false}},
      "rendered from " + rpath.string());

  std::cout << "wrote " << mpath.string() << "\n"
            << "final validation accuracy " << tm.report.final_val_accuracy << " ("
            << secs << " s)\n";
  return 0;
}

int cmd_explain(const CliOptions& opt) {
  const auto cfg = effective_config(opt);
  const Dataset data = load_dataset(cfg);
  if (opt.class_id < 0) throw std::invalid_argument("explain: --class is required");
  const int idx = data.index_of(opt.class_id);  // validates the id
  const fs::path ckpt =
      opt.checkpoint.empty() ? model_path(cfg, cfg.train.seed) : fs::path(opt.checkpoint);
  if (!fs::exists(ckpt))
    throw std::invalid_argument("missing checkpoint " + ckpt.string() + "; run `train` first");
  const SmallCnn model = SmallCnn::load(ckpt);

  const fs::path cls_dir =
      fs::path(cfg.out_dir) / "explanations" / ("class_" + std::to_string(opt.class_id));
  fs::create_directories(cls_dir);
  fs::create_directories(fs::path(cfg.out_dir) / "plots");

  json side_params = {{"n_samples", cfg.lime.n_samples},
                      {"kernel_width", cfg.lime.kernel_width},
                      {"ridge_lambda", cfg.lime.ridge_lambda},
                      {"top_n", cfg.lime.top_n}};
  const auto out = explain_class(
      data, model, opt.class_id, cfg, cfg.seed, [&](int i, const Explanation& e) {
        const auto p = cls_dir / ("exp_" + std::to_string(i) + ".exp1");
        e.save(p);
        json side = {{"local_r2", e.local_r2},
                     {"truncated_positive", e.truncated_positive},
                     {"params", side_params}};
        write_text_file(p.string() + ".json", side.dump(2) + "\n");
      });

  out.agg.save(cls_dir / "aggregate.spc1");
  const double bhz = cfg.stft.bin_hz(data.manifest.sample_rate);
  write_profile_csv(cls_dir / "projection.csv", out.projection, bhz);
  write_profile_csv(cls_dir / "derivative.csv", out.derivative, bhz);
  write_profile_csv(cls_dir / "welch.csv", out.welch_mean, bhz);
  save_profile(cls_dir / "projection.spc1", out.projection);
  save_profile(cls_dir / "derivative.spc1", out.derivative);
  save_profile(cls_dir / "welch.spc1", out.welch_mean);

  auto x_of = [&](const FrequencyProfile& p) {
    std::vector<double> x(p.values.size());
    for (size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) * bhz / 1000.0;
    return x;
  };
  const std::string cls = std::to_string(opt.class_id);
  write_heatmap(fs::path(cfg.out_dir) / "plots" / ("aggregate_class" + cls + ".svg"),
                "Aggregated LIME explanation, class " + cls, out.agg.values.data(),
                out.agg.rows, out.agg.cols, "rendered from " + (cls_dir / "aggregate.spc1").string());
  write_line_plot(fs::path(cfg.out_dir) / "plots" / ("welch_projection_class" + cls + ".svg"),
                  "Welch spectrum and aggregated LIME projection, class " + cls,
                  "frequency (kHz)", "unit-max value",
                  {{"welch", "#ff7f0e", x_of(out.welch_mean), out.welch_mean.values, true},
                   {"lime projection", "#1f77b4", x_of(out.projection), out.projection.values, true}},
                  "rendered from " + (cls_dir / "welch.csv").string() + ", " +
                      (cls_dir / "projection.csv").string());
  write_line_plot(fs::path(cfg.out_dir) / "plots" / ("welch_derivative_class" + cls + ".svg"),
                  "Welch spectrum and derivative LIME projection, class " + cls,
                  "frequency (kHz)", "unit-max value",
                  {{"welch", "#ff7f0e", x_of(out.welch_mean), out.welch_mean.values, true},
                   {"lime derivative", "#1f77b4", x_of(out.derivative), out.derivative.values, true}},
                  "rendered from " + (cls_dir / "welch.csv").string() + ", " +
                      (cls_dir / "derivative.csv").string());

  json summary = {{"class_id", opt.class_id},
                  {"class_index", idx},
                  {"n_explanations", out.agg.n_explanations},
                  {"temporality", out.temporality},
                  {"temporality_flag", out.temporality > kTemporalityFlagThreshold},
                  {"n_truncated", out.n_truncated}};
  write_text_file(cls_dir / "summary.json", summary.dump(2) + "\n");
  std::cout << "wrote " << out.agg.n_explanations << " explanations under "
            << cls_dir.string() << "\n"
            << "temporality " << out.temporality << "\n";
  return 0;
}

int cmd_ensemble(const CliOptions& opt) {
  const auto cfg = effective_config(opt);
  if (cfg.n_retrainings < 2)
    throw std::invalid_argument("ensemble: n_retrainings must be >= 2");
  const Dataset data = load_dataset(cfg);
  data.manifest.spec_for(cfg.ensemble_class);

  const fs::path ens_dir = fs::path(cfg.out_dir) / "ensemble";
  std::vector<FrequencyProfile> derivatives;
  const double bhz = cfg.stft.bin_hz(data.manifest.sample_rate);

  for (int r = 0; r < cfg.n_retrainings; ++r) {
    const uint64_t seed_r = retrain_seed(cfg.seed, r);
    const fs::path run_dir = ens_dir / ("run" + std::to_string(r));
    const fs::path deriv_path = run_dir / "derivative.spc1";
    try {
      if (fs::exists(deriv_path)) {  // resume: this run already finished
        derivatives.push_back(load_profile(deriv_path));
        std::cout << "run " << r << ": reusing existing profile\n";
        continue;
      }
      fs::create_directories(run_dir);
      SmallCnn model(CnnConfig{}, 0);
      const fs::path ckpt = run_dir / "model.mdl1";
      if (fs::exists(ckpt)) {
        model = SmallCnn::load(ckpt);
      } else {
        const TrainedModel tm = train_on(data, cfg, seed_r);
        tm.model.save(ckpt);
        tm.report.save(run_dir / "train_report.json");
        model = tm.model;
      }
      const auto out = explain_class(data, model, cfg.ensemble_class, cfg, seed_r);
      out.agg.save(run_dir / "aggregate.spc1");
      write_profile_csv(run_dir / "projection.csv", out.projection, bhz);
      write_profile_csv(run_dir / "derivative.csv", out.derivative, bhz);
      write_profile_csv(run_dir / "welch.csv", out.welch_mean, bhz);
      save_profile(deriv_path, out.derivative);
      save_profile(run_dir / "welch.spc1", out.welch_mean);
      derivatives.push_back(out.derivative);
      std::cout << "run " << r << " (seed " << seed_r << "): done, temporality "
                << out.temporality << "\n";
    } catch (const std::exception& e) {
      throw std::runtime_error("ensemble retraining " + std::to_string(r) + " (seed " +
                               std::to_string(seed_r) + ") failed: " + e.what());
    }
  }

  const EnsembleProfile ens = ensemble_stats(derivatives);
  write_profile_csv(ens_dir / "derivative_mean_std.csv", ens.mean, bhz, &ens.stddev);
  save_profile(ens_dir / "derivative_mean.spc1", ens.mean);
  save_profile(ens_dir / "derivative_std.spc1", ens.stddev);

  const FrequencyProfile welch_ref = load_profile(ens_dir / "run0" / "welch.spc1");
  std::vector<double> x(ens.mean.values.size()), xw(welch_ref.values.size());
  for (size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) * bhz / 1000.0;
  for (size_t i = 0; i < xw.size(); ++i) xw[i] = static_cast<double>(i) * bhz / 1000.0;

  fs::create_directories(fs::path(cfg.out_dir) / "plots");
  std::vector<SvgSeries> runs_series{{"welch", "#ff7f0e", xw, welch_ref.values, true}};
  for (size_t r = 0; r < derivatives.size(); ++r)
    runs_series.push_back({"run " + std::to_string(r), "#1f77b4", x,
                           derivatives[r].values, true});
  write_line_plot(fs::path(cfg.out_dir) / "plots" / "ensemble_runs.svg",
                  "Derivative LIME projections across retrainings, class " +
                      std::to_string(cfg.ensemble_class),
                  "frequency (kHz)", "unit-max value", runs_series,
                  "rendered from " + ens_dir.string() + "/run*/derivative.csv");
  std::vector<double> hi(ens.mean.values.size()), lo(ens.mean.values.size());
  for (size_t i = 0; i < hi.size(); ++i) {
    hi[i] = ens.mean.values[i] + ens.stddev.values[i];
    lo[i] = std::max(0.0, ens.mean.values[i] - ens.stddev.values[i]);
  }
  write_line_plot(fs::path(cfg.out_dir) / "plots" / "ensemble_mean.svg",
                  "Ensemble mean derivative LIME projection, class " +
                      std::to_string(cfg.ensemble_class),
                  "frequency (kHz)", "value",
                  {{"welch", "#ff7f0e", xw, welch_ref.values, true},
                   {"mean", "#1f77b4", x, ens.mean.values, false},
                   {"mean+std", "#9ecae1", x, hi, false},
                   {"mean-std", "#9ecae1", x, lo, false}},
                  "rendered from " + (ens_dir / "derivative_mean_std.csv").string());
  std::cout << "ensemble of " << ens.n_models << " retrainings written under "
            << ens_dir.string() << "\n";
  return 0;
}

int cmd_report(const CliOptions& opt) {
  const auto cfg = effective_config(opt);
  const fs::path out(cfg.out_dir);
  const fs::path rep = out / "report";
  fs::create_directories(rep);
  int rendered = 0;

  // Accuracy curves and confusion matrix from the first train report.
  const fs::path reports_dir = out / "reports";
  if (fs::exists(reports_dir)) {
    std::vector<fs::path> reports;
    for (const auto& e : fs::directory_iterator(reports_dir))
      if (e.path().extension() == ".json") reports.push_back(e.path());
    std::sort(reports.begin(), reports.end());
    if (!reports.empty()) {
      const json j = json::parse(read_text_file(reports[0]));
      const auto train_acc = j.at("train_accuracy").get<std::vector<double>>();
      const auto val_acc = j.at("val_accuracy").get<std::vector<double>>();
      std::vector<double> epochs(val_acc.size());
      for (size_t i = 0; i < epochs.size(); ++i) epochs[i] = static_cast<double>(i + 1);
      write_line_plot(rep / "fig_accuracy.svg", "Train / validation accuracy", "epoch",
                      "accuracy",
                      {{"train", "#ff7f0e", epochs, train_acc, false},
                       {"validation", "#1f77b4", epochs, val_acc, false}},
                      "rendered from " + reports[0].string());
      write_matrix_table(rep / "fig_confusion.svg", "Validation confusion matrix",
                         j.at("confusion").get<std::vector<std::vector<int64_t>>>(),
                         "rendered from " + reports[0].string());
      rendered += 2;
    }
  }

  // Per-class aggregation figures.
  const fs::path expl_dir = out / "explanations";
  if (fs::exists(expl_dir)) {
    for (const auto& e : fs::directory_iterator(expl_dir)) {
      if (!e.is_directory()) continue;
      const std::string name = e.path().filename().string();  // class_<id>
      const auto agg_path = e.path() / "aggregate.spc1";
      if (!fs::exists(agg_path)) continue;
      const auto agg = AggregatedExplanation::load(agg_path);
      write_heatmap(rep / ("fig_aggregate_" + name + ".svg"),
                    "Aggregated LIME explanation, " + name, agg.values.data(), agg.rows,
                    agg.cols, "rendered from " + agg_path.string());
      ++rendered;
      const auto welch_p = e.path() / "welch.spc1";
      const auto proj_p = e.path() / "projection.spc1";
      const auto deriv_p = e.path() / "derivative.spc1";
      if (fs::exists(welch_p) && fs::exists(proj_p) && fs::exists(deriv_p)) {
        const auto w = load_profile(welch_p);
        const auto pr = load_profile(proj_p);
        const auto dv = load_profile(deriv_p);
        const double bhz = cfg.stft.bin_hz(2'000'000.0);
        auto xs = [&](size_t n) {
          std::vector<double> x(n);
          for (size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) * bhz / 1000.0;
          return x;
        };
        write_line_plot(rep / ("fig_welch_projection_" + name + ".svg"),
                        "Welch and aggregated LIME projection, " + name, "frequency (kHz)",
                        "unit-max value",
                        {{"welch", "#ff7f0e", xs(w.values.size()), w.values, true},
                         {"lime projection", "#1f77b4", xs(pr.values.size()), pr.values, true}},
                        "rendered from " + proj_p.string());
        write_line_plot(rep / ("fig_welch_derivative_" + name + ".svg"),
                        "Welch and derivative LIME projection, " + name, "frequency (kHz)",
                        "unit-max value",
                        {{"welch", "#ff7f0e", xs(w.values.size()), w.values, true},
                         {"lime derivative", "#1f77b4", xs(dv.values.size()), dv.values, true}},
                        "rendered from " + deriv_p.string());
        rendered += 2;
      }
    }
  }

  // Ensemble figures.
  const fs::path ens_dir = out / "ensemble";
  if (fs::exists(ens_dir / "derivative_mean.spc1")) {
    const auto mean = load_profile(ens_dir / "derivative_mean.spc1");
    const auto stdp = load_profile(ens_dir / "derivative_std.spc1");
    const double bhz = cfg.stft.bin_hz(2'000'000.0);
    std::vector<double> x(mean.values.size());
    for (size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) * bhz / 1000.0;
    std::vector<double> hi(x.size()), lo(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      hi[i] = mean.values[i] + stdp.values[i];
      lo[i] = std::max(0.0, mean.values[i] - stdp.values[i]);
    }
    write_line_plot(rep / "fig_ensemble_mean.svg", "Ensemble mean derivative projection",
                    "frequency (kHz)", "value",
                    {{"mean", "#1f77b4", x, mean.values, false},
                     {"mean+std", "#9ecae1", x, hi, false},
                     {"mean-std", "#9ecae1", x, lo, false}},
                    "rendered from " + (ens_dir / "derivative_mean_std.csv").string());
    ++rendered;
  }

  if (rendered == 0)
    throw std::invalid_argument("report: no artifacts found under " + out.string() +
                                "; run synth/train/explain/ensemble first");
  std::cout << "rendered " << rendered << " figures under " << rep.string() << "\n";
  return 0;
}

void emit_error(int code, const std::string& message) {
  json err = {{"error", {{"code", code}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CliOptions opt;
  CLI::App app{"spectrogram classifier explanation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.add_option("--config", opt.config_path, "pipeline config JSON");
  app.add_option("--seed", opt.seed, "master seed override (also SPECTRO_EXPLAIN_SEED)");
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_option("--jobs", opt.jobs, "worker thread count");

  auto* synth = app.add_subcommand("synth", "write per-class raw signals and manifest echo");
  auto* train = app.add_subcommand("train", "train the reference classifier");
  auto* explain = app.add_subcommand("explain", "LIME-explain one class and aggregate");
  explain->add_option("--class", opt.class_id, "class id to explain")->required();
  explain->add_option("--checkpoint", opt.checkpoint, "model checkpoint path");
  auto* ensemble = app.add_subcommand("ensemble", "retrain + explain across seeds");
  auto* report = app.add_subcommand("report", "render the figure set from artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::ostringstream oss;
    oss << e.what();
    emit_error(2, oss.str());
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(opt);
    if (train->parsed()) return cmd_train(opt);
    if (explain->parsed()) return cmd_explain(opt);
    if (ensemble->parsed()) return cmd_ensemble(opt);
    if (report->parsed()) return cmd_report(opt);
    emit_error(2, "no subcommand");
    return 2;
  } catch (const std::invalid_argument& e) {
    emit_error(2, e.what());
    return 2;
  } catch (const std::out_of_range& e) {
    emit_error(2, e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error(1, e.what());
    return 1;
  }
}
