// Copyright 2026 The gunn-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gunn/gunn.hpp"

namespace {

using namespace gunn;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

// ---------------------------------------------------------------------------
// Shared helpers

std::string with_commas(std::size_t v) {
  std::string s = std::to_string(v);
  for (int i = int(s.size()) - 3; i > 0; i -= 3) s.insert(std::size_t(i), ",");
  return s;
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

/// One-line provenance of a run: tool version, command, seed and a digest of the inputs.
std::string repro_header(const std::string& command, const std::string& seed, const std::string& digest) {
  return std::string("# gunn ") + kVersion + " command=" + command + " seed=" + seed + " config=" + digest;
}

void announce(const std::string& header) { std::cerr << header << "\n"; }

struct NetworkChoice {
  std::string preset;
  std::string config;
  std::optional<std::size_t> classes;
  std::string mode;
  std::string scale;

  void add_options(CLI::App* cmd, bool positional = true) {
    cmd->add_option(positional ? "preset,--preset" : "--preset", preset,
                    "Preset: gunn15|gunn24|gunn18|wide-gunn18|gunn15-nores|tiny|tiny-nores");
    cmd->add_option("--config", config, "Network config file (JSON)");
    cmd->add_option("--classes", classes, "Number of classes");
    cmd->add_option("--mode", mode, "Update mode override: gunn|sunn")->check(CLI::IsMember({"gunn", "sunn"}));
    cmd->add_option("--scale", scale, "Width scale for the tiny presets, e.g. 1/12");
  }

  NetworkSpec resolve() const {
    NetworkSpec spec;
    if (!config.empty()) {
      if (!preset.empty()) throw ValidationError("give either a preset or --config, not both");
      spec = load_spec(config);
      if (classes && *classes != spec.classes) {
        throw ValidationError("--classes " + std::to_string(*classes) + " contradicts the config's " +
                              std::to_string(spec.classes));
      }
    } else if (preset.empty()) {
      throw ValidationError("no network given: name a preset or pass --config");
    } else if (preset == "tiny" || preset == "tiny-nores" || preset == "tiny_nores") {
      TinyOptions o = TinyOptions::desk();
      if (!scale.empty()) o.scale = Fraction::parse(scale);
      if (preset != "tiny") o.shortcut = ShortcutKind::none;
      spec = build_tiny_pair(o, classes.value_or(10)).first;
    } else {
      if (!scale.empty()) throw ValidationError("--scale applies to the tiny presets only");
      const bool imagenet = preset == "gunn18" || preset == "wide-gunn18" || preset == "wide_gunn18";
      spec = build_preset(preset, classes.value_or(imagenet ? 1000 : 10));
    }
    if (!mode.empty()) spec = convert_mode(spec, parse_mode(mode));
    spec.validate();
    return spec;
  }
};

std::string spec_digest(const NetworkSpec& spec) { return digest_hex(to_json(spec).dump()); }

fs::path data_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("GUNN_DATA_ROOT"); env && *env) return env;
  throw ValidationError("no data root: pass --data-root, set GUNN_DATA_ROOT, or use --surrogate");
}

std::string layout_of(const NetworkSpec& spec, std::size_t row) {
  if (row == 0) {
    std::string s = "conv" + std::to_string(spec.stem.kernel) + "x" + std::to_string(spec.stem.kernel) + " " +
                    std::to_string(spec.input_channels) + "->" + std::to_string(spec.stem.out) + " stride " +
                    std::to_string(spec.stem.stride);
    if (spec.stem.pool != PoolKind::none) s += " " + to_string(spec.stem.pool) + "pool";
    if (spec.stem.expand_to) s += ", 1x1 ->" + std::to_string(spec.stem.expand_to);
    return s;
  }
  if (row == spec.stages.size() + 1) {
    return "fc " + std::to_string(spec.head.features) + "->" + std::to_string(spec.head.classes);
  }
  const auto& st = spec.stages[row - 1];
  if (const auto* g = std::get_if<GunnStageSpec>(&st)) {
    const auto& c = g->layer;
    return to_string(g->mode) + " N=" + std::to_string(c.N) + " P=" + std::to_string(c.P) + " K=" +
           std::to_string(c.K) + " M=" + std::to_string(c.M) + " " + to_string(g->shortcut);
  }
  const auto& t = std::get<TransitionSpec>(st);
  return "1x1 ->" + std::to_string(t.out) + (t.pool == PoolKind::none ? "" : " " + to_string(t.pool) + "pool");
}

// ---------------------------------------------------------------------------
// build

struct BuildArgs {
  NetworkChoice net;
  bool csv = false;
  std::string save_config;
};

int cmd_build(const BuildArgs& a) {
  const NetworkSpec spec = a.net.resolve();
  announce(repro_header("build", "n/a", spec_digest(spec)));
  const auto b = parameter_breakdown(spec);
  if (a.csv) {
    std::cout << "stage,layout,params\n";
    for (std::size_t i = 0; i < b.stages.size(); ++i)
      std::cout << b.stages[i].label << ",\"" << layout_of(spec, i) << "\"," << b.stages[i].params << "\n";
    std::cout << "total,," << b.total << "\n";
  } else {
    std::cout << "network " << spec.name << " (" << spec.classes << " classes, input " << spec.input_channels << "x"
              << spec.input_size << "x" << spec.input_size << ")\n";
    std::cout << std::left << std::setw(20) << "stage" << std::setw(44) << "layout" << std::right << std::setw(14)
              << "params" << "\n";
    for (std::size_t i = 0; i < b.stages.size(); ++i) {
      std::cout << std::left << std::setw(20) << b.stages[i].label << std::setw(44) << layout_of(spec, i) << std::right
                << std::setw(14) << with_commas(b.stages[i].params) << "\n";
    }
    std::cout << std::left << std::setw(64) << "total" << std::right << std::setw(14) << with_commas(b.total) << "\n";
  }
  if (!a.save_config.empty()) save_spec(spec, a.save_config);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  NetworkChoice net;
  std::string train_config;
  std::uint64_t seed = 0;
  std::optional<std::size_t> epochs;
  std::vector<std::size_t> milestones;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> subset;
  std::optional<std::size_t> test_subset;
  std::string out;
  std::string data_root;
  bool surrogate = false;
  std::string precision = "f32";
  std::string resume;
  bool no_augment = false;
};

train::TrainConfig train_config(const TrainArgs& a) {
  train::TrainConfig c;
  if (!a.train_config.empty()) {
    std::ifstream in(a.train_config);
    if (!in) throw ValidationError("cannot open " + a.train_config);
    try {
      c = train::train_config_from_json(Json::parse(in));
    } catch (const Json::exception& e) {
      throw ValidationError(a.train_config + ": " + e.what());
    }
  }
  if (a.epochs) {
    c.epochs = *a.epochs;
    c.milestones = {c.epochs / 2, c.epochs * 3 / 4};
    if (c.milestones[0] == 0 || c.milestones[1] <= c.milestones[0]) c.milestones.clear();
  }
  if (!a.milestones.empty()) c.milestones = a.milestones;
  if (a.batch) c.batch = *a.batch;
  c.seed = a.seed;
  c.precision = train::parse_precision(a.precision);
  if (a.no_augment) c.augment = false;
  c.validate();
  return c;
}

template <typename T>
int run_training(const TrainArgs& a, const NetworkSpec& spec, const train::TrainConfig& cfg, const train::SplitPair& data,
                 const std::optional<train::Checkpoint>& resume, const std::string& header, const std::string& source) {
  std::unique_ptr<train::Trainer<T>> trainer =
      resume ? std::make_unique<train::Trainer<T>>(*resume) : std::make_unique<train::Trainer<T>>(spec, cfg, data.train.norm);
  std::cout << std::left << std::setw(7) << "epoch" << std::right << std::setw(12) << "lr" << std::setw(14)
            << "train_loss" << std::setw(12) << "train_err" << std::setw(12) << "test_err" << "\n";
  trainer->on_epoch = [](const train::EpochSummary& e) {
    std::cout << std::left << std::setw(7) << e.epoch << std::right << std::setw(12) << e.lr << std::setw(14)
              << std::fixed << std::setprecision(5) << e.train_loss << std::setw(12) << e.train_err << std::setw(12)
              << e.test_err << std::defaultfloat << std::setprecision(6) << "\n"
              << std::flush;
  };
  const auto result = trainer->run(data.train, &data.test);

  const fs::path out(a.out);
  {
    std::ofstream csv(out / "metrics.csv");
    csv << header << "\n";
    result.log.write_csv(csv);
  }
  train::save_checkpoint(result.checkpoint, out / "checkpoint.gckp");
  Json run;
  run["version"] = kVersion;
  run["seed"] = cfg.seed;
  run["config_digest"] = digest_hex(to_json(spec).dump() + to_json(cfg).dump());
  run["network_digest"] = spec_digest(spec);
  run["network"] = to_json(spec);
  run["train"] = to_json(cfg);
  run["data"] = source;
  run["train_images"] = data.train.size();
  run["test_images"] = data.test.size();
  run["metrics_digest"] = result.log.digest();
  run["diverged"] = result.diverged;
  if (!result.epochs.empty()) {
    run["final_train_loss"] = result.epochs.back().train_loss;
    run["final_test_err"] = result.epochs.back().test_err;
  }
  std::ofstream(out / "run.json") << run.dump(2) << "\n";
  std::cerr << "metrics digest " << result.log.digest() << "\n";
  if (result.diverged) {
    std::cerr << "error: " << result.message << "; last good state saved to " << (out / "checkpoint.gckp").string()
              << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_train(const TrainArgs& a) {
  if (a.out.empty()) throw ValidationError("--out is required");
  std::optional<train::Checkpoint> resume;
  NetworkSpec spec;
  train::TrainConfig cfg;
  if (!a.resume.empty()) {
    resume = train::load_checkpoint(a.resume);
    spec = resume->spec;
    cfg = resume->config;
  } else {
    spec = a.net.resolve();
    cfg = train_config(a);
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  fs::path root;
  std::string source;
  if (a.surrogate) {
    root = out / "surrogate-data";
    train::SurrogateOptions so;
    so.train_count = a.subset.value_or(so.train_count);
    so.test_count = a.test_subset.value_or(so.test_count);
    train::generate_surrogate(root, so);
    source = "surrogate";
  } else {
    root = data_root(a.data_root);
    source = root.string();
  }
  const std::string header =
      repro_header("train", std::to_string(cfg.seed), digest_hex(to_json(spec).dump() + to_json(cfg).dump()));
  announce(header);
  const std::uint64_t data_seed = cfg.seed;
  auto data = train::load_splits(root, int(spec.classes), a.subset, a.test_subset, data_seed);
  if (resume) {
    const auto train_raw = train::load_cifar({root, train::Split::train, a.subset, int(spec.classes), data_seed});
    const auto test_raw = train::load_cifar({root, train::Split::test, a.test_subset, int(spec.classes), data_seed});
    data = {train::normalize(train_raw, resume->norm), train::normalize(test_raw, resume->norm)};
  }
  if (cfg.precision == train::Precision::f64) return run_training<double>(a, spec, cfg, data, resume, header, source);
  return run_training<float>(a, spec, cfg, data, resume, header, source);
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string data_root;
  std::string split = "test";
  std::optional<std::size_t> subset;
  std::string mode;
  std::string precision = "f32";
  bool csv = false;
};

int cmd_eval(const EvalArgs& a) {
  const auto c = train::load_checkpoint(a.checkpoint);
  std::optional<UpdateMode> mode;
  if (!a.mode.empty()) mode = parse_mode(a.mode);
  const auto split = a.split == "train" ? train::Split::train : train::Split::test;
  announce(repro_header("eval", std::to_string(c.config.seed), spec_digest(c.spec)));
  const auto raw = train::load_cifar({data_root(a.data_root), split, a.subset, int(c.spec.classes), c.config.seed});
  const auto data = train::normalize(raw, c.norm);
  const auto r = train::parse_precision(a.precision) == train::Precision::f64
                     ? train::evaluate_checkpoint<double>(c, data, mode)
                     : train::evaluate_checkpoint<float>(c, data, mode);
  const std::string mode_name = mode ? to_string(*mode) : "as-trained";
  if (a.csv) {
    std::cout << "split,mode,count,loss,top1_err,top5_err\n"
              << a.split << "," << mode_name << "," << r.count << "," << train::format_number(r.loss) << ","
              << train::format_number(r.top1_err) << "," << (r.top5_err ? train::format_number(*r.top5_err) : "")
              << "\n";
  } else {
    std::cout << "split " << a.split << ", " << r.count << " images, mode " << mode_name << "\n"
              << "loss       " << std::fixed << std::setprecision(5) << r.loss << "\n"
              << "top-1 err  " << r.top1_err << "\n";
    if (r.top5_err) std::cout << "top-5 err  " << *r.top5_err << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  GradcheckOptions opt;
  std::string mode = "gunn";
  bool csv = false;
};

int cmd_gradcheck(GradcheckArgs a) {
  a.opt.mode = parse_mode(a.mode);
  announce(repro_header("gradcheck", std::to_string(a.opt.seed),
                        digest_hex(a.mode + "/" + std::to_string(a.opt.configs) + "/" + sci(a.opt.oracle_tolerance) +
                                   "/" + sci(a.opt.fd_tolerance))));
  const auto r = run_gradcheck(a.opt);
  if (a.csv) {
    std::cout << "config,oracle_err,fd_err,kinks_skipped,pass\n";
    for (const auto& c : r.cases)
      std::cout << "\"" << c.config << "\"," << sci(c.oracle_error) << "," << sci(c.fd_error) << "," << c.kinks << ","
                << (c.pass ? "1" : "0") << "\n";
  } else {
    std::cout << std::left << std::setw(46) << "config" << std::right << std::setw(12) << "oracle_err" << std::setw(12)
              << "fd_err" << std::setw(8) << "kinks" << "  status\n";
    for (const auto& c : r.cases) {
      std::cout << std::left << std::setw(46) << c.config << std::right << std::setw(12) << sci(c.oracle_error)
                << std::setw(12) << sci(c.fd_error) << std::setw(8) << c.kinks << "  "
                << (c.pass ? "ok" : "FAIL " + c.worst_block) << "\n";
    }
    std::cout << "max oracle error " << sci(r.max_oracle_error) << " (tolerance " << sci(a.opt.oracle_tolerance)
              << "), max finite-difference error " << sci(r.max_fd_error) << " (tolerance " << sci(a.opt.fd_tolerance)
              << ")\n";
  }
  for (const auto& v : r.violations) std::cerr << "violation: " << v << "\n";
  return r.pass() ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------
// singularity

struct SingularityArgs {
  lab::CollapseExperimentConfig cfg;
  std::string form = "gradual";
  bool collapse_init = false;
  std::string out;
};

int cmd_singularity(SingularityArgs a) {
  a.cfg.form = lab::parse_form(a.form);
  a.cfg.coincident = a.collapse_init;
  std::ostringstream desc;
  lab::write_collapse_csv(desc, lab::CollapseSeries{a.cfg, {}});
  const std::string header = repro_header("singularity", std::to_string(a.cfg.seed), digest_hex(desc.str()));
  announce(header);
  const auto s = lab::run_collapse_experiment(a.cfg);
  auto emit = [&](std::ostream& os) {
    os << header << "\n";
    lab::write_collapse_csv(os, s);
  };
  if (a.out.empty()) {
    emit(std::cout);
  } else {
    std::ofstream os(a.out);
    if (!os) throw ValidationError("cannot write " + a.out);
    emit(os);
  }
  double lo = INFINITY, hi = 0;
  for (const auto& st : s.steps) lo = std::min(lo, st.gap), hi = std::max(hi, st.gap);
  std::cerr << "gap range over " << s.steps.size() << " records: [" << sci(lo) << ", " << sci(hi) << "], final loss "
            << s.steps.back().loss << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// convert

struct ConvertArgs {
  std::string input;
  std::string to;
  std::string out;
};

int cmd_convert(const ConvertArgs& a) {
  const auto c = train::load_checkpoint(a.input);
  const auto converted = train::convert_checkpoint(c, parse_mode(a.to));
  announce(repro_header("convert", std::to_string(c.config.seed), spec_digest(converted.spec)));
  train::save_checkpoint(converted, a.out);
  std::cerr << "wrote " << a.out << " (" << to_string(parse_mode(a.to)) << ", " << converted.records.size()
            << " records)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// memplan

struct MemplanArgs {
  NetworkChoice net;
  std::size_t batch = 64;
  std::string precision = "f32";
  bool csv = false;
};

int cmd_memplan(const MemplanArgs& a) {
  const NetworkSpec spec = a.net.resolve();
  if (a.batch == 0) throw ValidationError("--batch must be positive");
  const std::size_t bytes = train::parse_precision(a.precision) == train::Precision::f64 ? 8 : 4;
  announce(repro_header("memplan", "n/a", spec_digest(spec)));
  const auto plan = memory_plan(spec, a.batch, bytes);
  auto mib = [](std::size_t b) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << double(b) / (1024.0 * 1024.0);
    return os.str();
  };
  auto ratio = [](std::size_t x, std::size_t y) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << double(x) / double(y);
    return os.str();
  };
  if (a.csv) {
    std::cout << "stage,gradual_bytes,simultaneous_bytes,naive_bytes,gradual_over_simultaneous,naive_over_gradual\n";
    for (const auto& m : plan)
      std::cout << m.label << "," << m.gradual << "," << m.simultaneous << "," << m.naive << ","
                << ratio(m.gradual, m.simultaneous) << "," << ratio(m.naive, m.gradual) << "\n";
  } else {
    std::cout << spec.name << ", batch " << a.batch << ", " << bytes << "-byte elements (MiB)\n";
    std::cout << std::left << std::setw(10) << "stage" << std::right << std::setw(12) << "gradual" << std::setw(14)
              << "simultaneous" << std::setw(12) << "naive" << std::setw(12) << "grad/sim" << std::setw(12)
              << "naive/grad" << "\n";
    for (const auto& m : plan) {
      std::cout << std::left << std::setw(10) << m.label << std::right << std::setw(12) << mib(m.gradual)
                << std::setw(14) << mib(m.simultaneous) << std::setw(12) << mib(m.naive) << std::setw(12)
                << ratio(m.gradual, m.simultaneous) << std::setw(12) << ratio(m.naive, m.gradual) << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradually updated neural networks: build, train, evaluate and inspect"};
  app.set_version_flag("--version", std::string(gunn::kVersion));
  app.require_subcommand(1);

  BuildArgs build;
  auto* c_build = app.add_subcommand("build", "Print the stage table and parameter count of a network");
  build.net.add_options(c_build);
  c_build->add_flag("--csv", build.csv, "CSV on stdout instead of the table");
  c_build->add_option("--save-config", build.save_config, "Write the resolved network config (JSON)");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a network on CIFAR binary data");
  tr.net.add_options(c_train);
  c_train->add_option("--train-config", tr.train_config, "Training config file (JSON)");
  c_train->add_option("--seed", tr.seed, "Seed for initialization, shuffling and augmentation");
  c_train->add_option("--epochs", tr.epochs, "Epochs; the schedule steps at 50% and 75%");
  c_train->add_option("--milestones", tr.milestones, "Explicit learning-rate milestones")->delimiter(',');
  c_train->add_option("--batch", tr.batch, "Mini-batch size");
  c_train->add_option("--subset", tr.subset, "Number of training images to use");
  c_train->add_option("--test-subset", tr.test_subset, "Number of test images to use");
  c_train->add_option("--out", tr.out, "Output directory")->required();
  c_train->add_option("--data-root", tr.data_root, "CIFAR binary directory (default: $GUNN_DATA_ROOT)");
  c_train->add_flag("--surrogate", tr.surrogate, "Generate and use the synthetic stand-in dataset");
  c_train->add_option("--precision", tr.precision, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));
  c_train->add_option("--resume", tr.resume, "Continue from a checkpoint");
  c_train->add_flag("--no-augment", tr.no_augment, "Disable mirroring and shifting");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  c_eval->add_option("checkpoint", ev.checkpoint, "Checkpoint file")->required();
  c_eval->add_option("--data-root", ev.data_root, "CIFAR binary directory (default: $GUNN_DATA_ROOT)");
  c_eval->add_option("--split", ev.split, "train|test")->check(CLI::IsMember({"train", "test"}));
  c_eval->add_option("--subset", ev.subset, "Number of images to use");
  c_eval->add_option("--mode", ev.mode, "Evaluate in gunn|sunn mode")->check(CLI::IsMember({"gunn", "sunn"}));
  c_eval->add_option("--precision", ev.precision, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));
  c_eval->add_flag("--csv", ev.csv, "CSV on stdout instead of the table");

  GradcheckArgs gc;
  auto* c_grad = app.add_subcommand("gradcheck", "Check layer gradients against the unrolled reference and finite differences");
  c_grad->add_option("--seed", gc.opt.seed, "Seed for the sampled configurations");
  c_grad->add_option("--configs", gc.opt.configs, "Number of sampled configurations");
  c_grad->add_option("--mode", gc.mode, "gunn|sunn")->check(CLI::IsMember({"gunn", "sunn"}));
  c_grad->add_option("--tolerance", gc.opt.oracle_tolerance, "Tolerance against the unrolled reference");
  c_grad->add_option("--fd-tolerance", gc.opt.fd_tolerance, "Tolerance against finite differences");
  c_grad->add_option("--fd-stride", gc.opt.fd_stride, "Probe every k-th entry")->check(CLI::PositiveNumber);
  c_grad->add_flag("--csv", gc.csv, "CSV on stdout instead of the table");

  SingularityArgs sg;
  auto* c_sing = app.add_subcommand("singularity", "Run the neuron-collapse experiment on a linear model");
  c_sing->add_option("--form", sg.form, "plain|residual|gradual")->check(CLI::IsMember({"plain", "residual", "gradual"}));
  c_sing->add_option("--n", sg.cfg.n, "Number of neurons");
  c_sing->add_option("--steps", sg.cfg.steps, "Gradient-descent steps");
  c_sing->add_option("--seed", sg.cfg.seed, "Seed");
  c_sing->add_option("--lr", sg.cfg.learning_rate, "Learning rate");
  c_sing->add_option("--samples", sg.cfg.samples, "Training samples");
  c_sing->add_option("--probes", sg.cfg.probes, "Probe inputs for the gap");
  c_sing->add_flag("--collapse-init", sg.collapse_init, "Start from coincident outputs p and p+1");
  c_sing->add_option("--out", sg.out, "CSV file (default: stdout)");

  ConvertArgs cv;
  auto* c_conv = app.add_subcommand("convert", "Switch a checkpoint between gradual and simultaneous mode");
  c_conv->add_option("checkpoint", cv.input, "Input checkpoint")->required();
  c_conv->add_option("--to", cv.to, "gunn|sunn")->required()->check(CLI::IsMember({"gunn", "sunn"}));
  c_conv->add_option("--out", cv.out, "Output checkpoint")->required();

  MemplanArgs mp;
  auto* c_mem = app.add_subcommand("memplan", "Activation memory per gunn stage under each backward strategy");
  mp.net.add_options(c_mem);
  c_mem->add_option("--batch", mp.batch, "Batch size");
  c_mem->add_option("--precision", mp.precision, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));
  c_mem->add_flag("--csv", mp.csv, "CSV on stdout instead of the table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (c_build->parsed()) return cmd_build(build);
    if (c_train->parsed()) return cmd_train(tr);
    if (c_eval->parsed()) return cmd_eval(ev);
    if (c_grad->parsed()) return cmd_gradcheck(gc);
    if (c_sing->parsed()) return cmd_singularity(sg);
    if (c_conv->parsed()) return cmd_convert(cv);
    if (c_mem->parsed()) return cmd_memplan(mp);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
