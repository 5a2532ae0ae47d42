// SPDX-License-Identifier: Apache-2.0
//
// End-to-end CLI checks: exit codes, artifact determinism, and the
// synth -> train -> explain -> ensemble -> report flow on a reduced
// configuration. Runs the real binary (SPX_CLI_PATH) via std::system.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "json.hpp"
#include "spx/io.hpp"
#include "spx/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", what.c_str());
  if (!ok) ++failures;
}

int run(const std::string& args) {
  const std::string cmd = std::string(SPX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

int run_env(const std::string& env, const std::string& args) {
  const std::string cmd =
      env + " " + std::string(SPX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) { return spx::read_text_file(p); }

// Two devices with short signals and a tiny train/LIME budget keep the
// whole flow under a minute.
void write_fixtures(const fs::path& dir) {
  spx::DatasetManifest m;
  m.sample_rate = 2e6;
  m.train_fraction = 0.8;
  m.seed = 11;
  for (int c = 0; c < 2; ++c) {
    spx::DeviceSpec d;
    d.class_id = c;
    d.name = c == 0 ? "dev" : "background";
    d.n_samples = 620'000;
    d.noise_floor_sigma = 0.1;
    if (c == 0) {
      d.tones.push_back({50 * 2e6 / 446, 0.5, 0.0});
      d.tones.push_back({120 * 2e6 / 446, 0.5, 0.0});
    }
    m.classes.push_back(d);
  }
  m.save(dir / "manifest_in.json");

  json cfg;
  cfg["manifest_path"] = (dir / "manifest_in.json").string();
  cfg["train"] = {{"epochs", 1}, {"batch_size", 8}, {"train_set_size", 32},
                  {"val_set_size", 8}, {"seed", 3}};
  cfg["lime"] = {{"n_samples", 48}, {"ridge_lambda", 1.0}, {"top_n", 3},
                 {"kernel_width", 0.25}};
  cfg["n_explanations"] = 2;
  cfg["n_retrainings"] = 2;
  cfg["ensemble_class"] = 0;
  cfg["seed"] = 5;
  spx::write_text_file(dir / "config.json", cfg.dump(2));
}

}  // namespace

int main() {
  const auto base = fs::temp_directory_path() / "spx_cli_tests";
  fs::remove_all(base);
  fs::create_directories(base);
  write_fixtures(base);
  const std::string cfg = " --config " + (base / "config.json").string();

  // Usage and input errors exit with code 2.
  check(run("definitely-not-a-subcommand") == 2, "unknown subcommand exits 2");
  check(run("train --out " + (base / "empty").string() + cfg) == 2,
        "train without signals exits 2");
  {
    spx::write_text_file(base / "broken.json", "{nope");
    check(run("synth --config " + (base / "broken.json").string()) == 2,
          "malformed config exits 2");
  }

  // synth: deterministic signal files plus the manifest echo.
  const auto out1 = base / "run1";
  const auto out2 = base / "run2";
  check(run("synth --out " + out1.string() + cfg) == 0, "synth exits 0");
  check(run("synth --out " + out2.string() + cfg) == 0, "synth rerun exits 0");
  check(fs::exists(out1 / "manifest.json"), "manifest echo written");
  check(fs::exists(out1 / "signals/class_0.sig") && fs::exists(out1 / "signals/class_1.sig"),
        "one SIG1 file per class");
  check(slurp(out1 / "signals/class_0.sig") == slurp(out2 / "signals/class_0.sig") &&
            slurp(out1 / "signals/class_1.sig") == slurp(out2 / "signals/class_1.sig"),
        "signal files byte-identical across reruns");

  // train: checkpoint + report, reproducible per seed, seed-sensitive.
  check(run("train --out " + out1.string() + cfg) == 0, "train exits 0");
  check(fs::exists(out1 / "models/model_seed3.mdl1") &&
            fs::exists(out1 / "reports/train_seed3.json"),
        "train writes checkpoint and report");
  check(run("train --out " + out2.string() + cfg) == 0, "train rerun exits 0");
  check(slurp(out1 / "models/model_seed3.mdl1") == slurp(out2 / "models/model_seed3.mdl1"),
        "checkpoints byte-identical across reruns");
  check(run("train --seed 4 --out " + out2.string() + cfg) == 0, "train with --seed 4");
  check(slurp(out1 / "models/model_seed3.mdl1") != slurp(out2 / "models/model_seed4.mdl1"),
        "different seed changes checkpoint bytes");
  check(run_env("SPECTRO_EXPLAIN_SEED=4", "train --out " + out1.string() + cfg) == 0,
        "train with env seed");
  check(slurp(out1 / "models/model_seed4.mdl1") == slurp(out2 / "models/model_seed4.mdl1"),
        "env seed equals flag seed byte-for-byte");

  // explain: per-explanation files, aggregate, profiles; deterministic.
  check(run("explain --class 9 --out " + out1.string() + cfg) == 2,
        "explain with unknown class exits 2");
  check(run("explain --class 0 --out " + out1.string() + cfg) == 0, "explain exits 0");
  const auto cls = out1 / "explanations/class_0";
  check(fs::exists(cls / "exp_0.exp1") && fs::exists(cls / "exp_1.exp1") &&
            !fs::exists(cls / "exp_2.exp1"),
        "n_explanations explanation files written");
  check(fs::exists(cls / "exp_0.exp1.json"), "explanation sidecar written");
  check(fs::exists(cls / "aggregate.spc1") && fs::exists(cls / "projection.csv") &&
            fs::exists(cls / "derivative.csv") && fs::exists(cls / "welch.csv"),
        "aggregate and profile artifacts written");
  check(run("explain --class 0 --out " + out2.string() + cfg) == 0, "explain rerun");
  check(slurp(cls / "aggregate.spc1") ==
            slurp(out2 / "explanations/class_0/aggregate.spc1") &&
            slurp(cls / "derivative.csv") ==
                slurp(out2 / "explanations/class_0/derivative.csv"),
        "aggregate and csv byte-identical across reruns");

  // ensemble: per-run artifacts, mean/std, resume.
  check(run("ensemble --out " + out1.string() + cfg) == 0, "ensemble exits 0");
  check(fs::exists(out1 / "ensemble/run0/derivative.spc1") &&
            fs::exists(out1 / "ensemble/run1/derivative.spc1") &&
            fs::exists(out1 / "ensemble/derivative_mean_std.csv"),
        "ensemble artifacts written");
  const auto mean_before = slurp(out1 / "ensemble/derivative_mean_std.csv");
  check(run("ensemble --out " + out1.string() + cfg) == 0, "ensemble resume exits 0");
  check(slurp(out1 / "ensemble/derivative_mean_std.csv") == mean_before,
        "resumed ensemble reproduces the mean/std csv");

  // report: figure set from existing artifacts.
  check(run("report --out " + (base / "nothing").string() + cfg) == 2,
        "report over empty dir exits 2");
  check(run("report --out " + out1.string() + cfg) == 0, "report exits 0");
  check(fs::exists(out1 / "report/fig_accuracy.svg") &&
            fs::exists(out1 / "report/fig_confusion.svg") &&
            fs::exists(out1 / "report/fig_aggregate_class_0.svg") &&
            fs::exists(out1 / "report/fig_ensemble_mean.svg"),
        "report renders the figure set");

  std::printf("%s: %d failure(s)\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
