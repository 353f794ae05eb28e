#include "nvt/cli/commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "nvt/checkpoint.hpp"
#include "nvt/cli/run_config.hpp"
#include "nvt/container.hpp"
#include "nvt/error.hpp"
#include "nvt/evaluator.hpp"
#include "nvt/gradient_suite.hpp"
#include "nvt/json_io.hpp"
#include "nvt/rng.hpp"
#include "nvt/trainer.hpp"

namespace nvt::cli {

using nlohmann::json;
namespace fs = std::filesystem;

unsigned worker_threads_from_env() {
  const char* raw = std::getenv("NVT_THREADS");
  if (raw == nullptr || *raw == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096) throw ConfigError("NVT_THREADS: expected a positive integer, got '" + std::string(raw) + "'");
  return static_cast<unsigned>(v);
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void require_file(const std::string& path, const std::string& flag) {
  if (!fs::is_regular_file(path)) throw ConfigError(flag + ": '" + path + "' does not exist");
}

bool is_container_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string(magic, 4) == "NVT1";
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string config;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig rc = load_run_config(a.config);
  check_data_paths(rc.data.train, "data.train");
  check_data_paths(rc.data.val, "data.val");
  const data::Dataset train_set = load_source(rc.data.train);
  const data::Dataset val_set = load_source(rc.data.val);
  if (train_set.num_classes() != rc.model.num_classes)
    throw ConfigError("model.num_classes: " + std::to_string(rc.model.num_classes) + " but data.train has " +
                      std::to_string(train_set.num_classes()) + " classes");
  if (val_set.class_names != train_set.class_names) throw ConfigError("data.val: class names differ from data.train");

  const data::NormStats stats = rc.data.norm_stats ? *rc.data.norm_stats : data::compute_norm_stats(train_set);
  err << "train: " << train_set.size() << " train / " << val_set.size() << " val samples, " << train_set.num_classes()
      << " classes, noise " << (rc.noise ? noise::kind_name(rc.noise->quality.kind) : std::string("none")) << '\n';

  const vit::ModelParams init = vit::init_params(rc.model, derive_seed(rc.train.seed, {0x696e6974ULL}));
  train::TrainOptions opts;
  opts.augment = rc.data.augment;
  opts.crop = rc.data.crop;
  opts.stats = stats;
  opts.checkpoint_path = rc.output.checkpoint_path();
  opts.history_path = rc.output.history_path();
  opts.log = &err;
  const auto t0 = std::chrono::steady_clock::now();
  const train::TrainResult result = train::train(rc.model, init, rc.noise, train_set, val_set, rc.train, opts);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto& best = result.history.epochs.at(result.history.best_epoch - 1);
  const auto& last = result.history.epochs.back();
  json j;
  j["command"] = "train";
  j["best_epoch"] = result.history.best_epoch;
  j["best_val_top1"] = best.val_top1;
  j["best_val_top5"] = best.val_top5;
  j["epochs_run"] = result.history.epochs.size();
  j["final_train_loss"] = last.train_loss;
  j["final_train_accuracy"] = last.train_accuracy;
  j["checkpoint"] = opts.checkpoint_path->string();
  j["history"] = opts.history_path->string();
  j["params"] = vit::param_count(rc.model);
  j["seconds"] = seconds;
  out << j.dump(2) << '\n';
  return kOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string config;
  std::string checkpoint;
  std::string packed;
  std::string folder;
  std::string split = "val";
  std::size_t batch_size = 0;
  std::size_t topk = 5;
  std::string csv;
  std::size_t latency_iterations = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  std::optional<RunConfig> rc;
  if (!a.config.empty()) rc = load_run_config(a.config);
  if (a.topk < 1) throw ConfigError("--topk: must be >= 1");

  std::string ck_path = a.checkpoint;
  if (ck_path.empty() && rc) ck_path = rc->output.checkpoint_path().string();
  if (ck_path.empty()) throw ConfigError("--checkpoint: required (or --config with output.checkpoint_dir)");
  require_file(ck_path, "--checkpoint");

  DataSource src;
  std::string src_field;
  if (!a.packed.empty()) {
    src = {DataSource::Kind::Packed, a.packed, "", {}};
    src_field = "--packed";
  } else if (!a.folder.empty()) {
    src = {DataSource::Kind::Folder, a.folder, a.split, {}};
    src_field = "--folder";
  } else if (rc) {
    src = rc->data.val;
    src_field = "data.val";
  } else {
    throw ConfigError("eval: one of --packed, --folder or --config is required");
  }
  check_data_paths(src, src_field);

  const vit::Checkpoint ck = vit::load_checkpoint(ck_path);
  const data::Dataset dataset = load_source(src);
  if (dataset.num_classes() != ck.config.num_classes)
    throw ConfigError(src_field + ": dataset has " + std::to_string(dataset.num_classes()) + " classes, checkpoint has " +
                      std::to_string(ck.config.num_classes));
  if (!ck.meta.class_names.empty() && ck.meta.class_names != dataset.class_names)
    err << "eval: warning: dataset class names differ from the checkpoint's\n";

  data::NormStats stats;
  if (ck.meta.norm_stats) {
    stats = *ck.meta.norm_stats;
  } else if (rc && rc->data.norm_stats) {
    stats = *rc->data.norm_stats;
  } else {
    err << "eval: checkpoint carries no normalization statistics; computing them from the evaluation set\n";
    stats = data::compute_norm_stats(dataset);
  }
  const std::size_t batch = a.batch_size ? a.batch_size : ck.meta.eval_batch_size.value_or(1);

  const eval::Model model{ck.config, ck.params, ck.noise};
  Tensor logits;
  eval::MetricsReport report = eval::evaluate(model, dataset, {ck.config.image_size, stats, batch}, &logits);
  if (a.latency_iterations) {
    report.latency_ms_per_image =
        eval::latency_bench(model, ck.config.image_size, a.latency_iterations, 2).median_ms;
  }

  json j = json::parse(eval::to_json_string(report));
  const std::size_t C = ck.config.num_classes;
  const std::size_t k = std::min(a.topk, C);
  const auto labels = dataset.labels();
  json topk{{"requested", a.topk}, {"k", k}, {"accuracy", eval::topk_accuracy(logits, labels, k)}, {"clamped", k != a.topk}};
  if (k != a.topk) {
    const std::string note = "top-" + std::to_string(a.topk) + " clamped to top-" + std::to_string(k) + " (" +
                             std::to_string(C) + " classes)";
    topk["note"] = note;
    err << "eval: " << note << '\n';
  }
  j["topk"] = std::move(topk);
  j["command"] = "eval";
  j["checkpoint"] = ck_path;
  j["checkpoint_epoch"] = ck.meta.epoch;
  j["noise"] = ck.noise ? nvt::to_json(*ck.noise) : json(nullptr);
  j["class_names"] = dataset.class_names;
  if (!a.csv.empty()) {
    const std::string csv = eval::per_class_csv(report, dataset.class_names);
    write_file_bytes(a.csv, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    j["csv"] = a.csv;
  }
  out << j.dump(2) << '\n';
  return kOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string config;
  std::string checkpoint;
  std::vector<std::size_t> resolutions{224, 384};
  std::size_t iterations = 20;
  std::size_t warmup = 3;
  std::uint64_t seed = 0;
};

vit::ViTConfig desk_bench_config() {
  vit::ViTConfig c;
  c.image_size = 224;
  c.patch_size = 16;
  c.embed_dim = 64;
  c.depth = 2;
  c.num_heads = 2;
  c.num_classes = 10;
  return c;
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  if (a.resolutions.empty()) throw ConfigError("--resolutions: at least one value required");
  if (a.iterations < 10) throw ConfigError("--iterations: must be >= 10");
  if (a.warmup < 1) throw ConfigError("--warmup: must be >= 1");
  eval::Model model;
  std::string source = "desk-default";
  if (!a.checkpoint.empty()) {
    require_file(a.checkpoint, "--checkpoint");
    vit::Checkpoint ck = vit::load_checkpoint(a.checkpoint);
    model = {ck.config, std::move(ck.params), ck.noise};
    source = a.checkpoint;
  } else {
    vit::ViTConfig cfg = desk_bench_config();
    std::optional<noise::NoiseConfig> noise;
    if (!a.config.empty()) {
      const RunConfig rc = load_run_config(a.config);
      cfg = rc.model;
      noise = rc.noise;
      source = a.config;
    }
    model = {cfg, vit::init_params(cfg, a.seed), noise};
  }
  for (std::size_t r : a.resolutions)
    if (r == 0 || r % model.config.patch_size != 0)
      throw ConfigError("--resolutions: " + std::to_string(r) + " is not a positive multiple of patch_size " +
                        std::to_string(model.config.patch_size));

  json results = json::array();
  std::string environment;
  for (std::size_t r : a.resolutions) {
    const eval::LatencyResult lr = eval::latency_bench(model, r, a.iterations, a.warmup);
    err << "bench: " << r << "x" << r << " median " << lr.median_ms << " ms/image\n";
    results.push_back({{"resolution", lr.resolution},
                       {"params", lr.params},
                       {"median_ms", lr.median_ms},
                       {"iterations", lr.iterations},
                       {"warmup", lr.warmup}});
    environment = lr.environment;
  }
  json j;
  j["command"] = "bench";
  j["model_source"] = source;
  j["model"] = nvt::to_json(model.config);
  j["noise"] = model.noise ? nvt::to_json(*model.noise) : json(nullptr);
  j["results"] = std::move(results);
  j["environment"] = environment;
  j["threads"] = worker_threads_from_env();
  out << j.dump(2) << '\n';
  return kOk;
}

// ---- inspect-noise --------------------------------------------------------

struct InspectArgs {
  std::string config;
  std::string checkpoint;
  std::string kind;
  double alpha = 0.0;
  std::size_t batch = 0;
  std::size_t tokens = 0;
  std::size_t dim = 0;
  bool empirical = false;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
};

constexpr std::size_t kEmpiricalMaxDims = 512;

int cmd_inspect_noise(const InspectArgs& a, CLI::App& app, std::ostream& out, std::ostream& err) {
  vit::ViTConfig model;
  std::optional<noise::NoiseConfig> noise;
  std::size_t batch = 0;
  std::string source;

  auto use_checkpoint = [&](const std::string& path) {
    const vit::Checkpoint ck = vit::load_checkpoint(path);
    model = ck.config;
    noise = ck.noise;
    batch = ck.meta.eval_batch_size.value_or(0);
    source = path;
  };
  if (!a.kind.empty()) {
    noise::QualityKind q;
    q.kind = noise::parse_kind(a.kind);
    if (q.kind == noise::NoiseKind::Custom) throw ConfigError("--kind: custom matrices come from a config file");
    const bool cyclic = q.kind != noise::NoiseKind::Identity;
    if (app.count("--alpha") && !cyclic) throw ConfigError("--alpha: only valid for cyclic kinds");
    if (cyclic && !app.count("--alpha")) throw ConfigError("--alpha: required for cyclic kinds (no default)");
    if (cyclic) q.alpha = a.alpha;
    noise = noise::default_noise_config(model.depth, q);
    noise->validate(model.depth);
    source = "--kind";
  } else if (!a.checkpoint.empty()) {
    require_file(a.checkpoint, "--checkpoint");
    use_checkpoint(a.checkpoint);
  } else if (!a.config.empty()) {
    require_file(a.config, "--config");
    if (is_container_file(a.config)) {
      use_checkpoint(a.config);
    } else {
      const RunConfig rc = load_run_config(a.config);
      model = rc.model;
      noise = rc.noise;
      batch = rc.train.batch_size;
      source = a.config;
    }
  } else {
    throw ConfigError("inspect-noise: one of --config, --checkpoint or --kind is required");
  }
  if (a.batch) batch = a.batch;
  if (batch == 0) throw ConfigError("--batch: required when the source gives no batch size");
  const std::size_t tokens = a.tokens ? a.tokens : model.seq_len();
  const std::size_t dim = a.dim ? a.dim : model.embed_dim;

  const noise::QualityKind kind = noise ? noise->quality : noise::QualityKind::identity();
  if (!noise) err << "inspect-noise: no noise configured; analysing the identity\n";
  const noise::QualityMatrix q = noise::build_quality_matrix(kind, batch);
  const noise::EntropyReport exact = noise::entropy_delta_exact(q, tokens, dim);

  json rows = json::array();
  for (std::size_t r = 0; r < batch; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < batch; ++c) row.push_back(q.realized.at({r, c}));
    rows.push_back(std::move(row));
  }
  json j;
  j["command"] = "inspect-noise";
  j["source"] = source;
  j["noise"] = noise ? nvt::to_json(*noise) : json(nullptr);
  j["batch"] = batch;
  j["tokens"] = tokens;
  j["dim"] = dim;
  j["q"] = std::move(rows);
  j["sign"] = exact.sign;
  j["singular"] = exact.singular;
  j["log_abs_det_q"] = finite_or_null(exact.log_abs_det_q);
  j["delta_h"] = finite_or_null(exact.effective_log_det);
  if (exact.singular) err << "inspect-noise: quality matrix is singular; entropy change is -inf\n";

  if (a.empirical) {
    const std::size_t n = batch * tokens * dim;
    if (n > kEmpiricalMaxDims)
      throw ConfigError("--empirical: batch*tokens*dim = " + std::to_string(n) + " exceeds " +
                        std::to_string(kEmpiricalMaxDims) + "; pass smaller --tokens/--dim");
    if (a.trials < 1000) throw ConfigError("--trials: must be >= 1000");
    if (exact.singular) {
      j["empirical"] = {{"skipped", "singular quality matrix"}};
    } else {
      try {
        const noise::EntropyReport emp = noise::entropy_delta_empirical(q, tokens, dim, a.trials, a.seed);
        json e{{"delta_h", *emp.empirical_delta}, {"trials", emp.sample_count}, {"seed", a.seed}};
        e["standard_error"] = emp.standard_error ? json(*emp.standard_error) : json(nullptr);
        j["empirical"] = std::move(e);
      } catch (const EstimationError& e) {
        j["empirical"] = {{"skipped", e.what()}};
      }
    }
  }
  out << j.dump(2) << '\n';
  return kOk;
}

// ---- dataset --------------------------------------------------------------

struct DatasetArgs {
  std::string root;
  std::string split = "train";
  std::string packed;
  std::string out_path;
  std::size_t classes = 8;
  std::size_t per_class = 64;
  std::size_t size = 32;
  std::uint64_t seed = 0;
};

json class_counts(const data::Dataset& d) {
  std::vector<std::size_t> counts(d.num_classes(), 0);
  for (const auto& s : d.samples) ++counts[s.label];
  return counts;
}

data::Dataset dataset_from_flags(const DatasetArgs& a) {
  if (!a.packed.empty()) {
    require_file(a.packed, "--packed");
    return data::load_packed_dataset(a.packed);
  }
  if (a.root.empty()) throw ConfigError("--root or --packed: one is required");
  check_data_paths({DataSource::Kind::Folder, a.root, a.split, {}}, "--root");
  return data::load_manifest(data::scan_image_folder(a.root, a.split));
}

int cmd_dataset_scan(const DatasetArgs& a, std::ostream& out) {
  check_data_paths({DataSource::Kind::Folder, a.root, a.split, {}}, "--root");
  const data::DatasetManifest m = data::scan_image_folder(a.root, a.split);
  std::vector<std::size_t> counts(m.class_names.size(), 0);
  for (const auto& e : m.entries) ++counts[e.label];
  json j{{"command", "dataset scan"}, {"root", a.root}, {"split", m.split},   {"class_names", m.class_names},
         {"counts", counts},          {"entries", m.entries.size()},          {"skipped", m.skipped}};
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_dataset_convert(const DatasetArgs& a, std::ostream& out) {
  const data::Dataset d = dataset_from_flags(a);
  data::save_packed_dataset(a.out_path, d);
  json j{{"command", "dataset convert"}, {"out", a.out_path},          {"samples", d.size()},
         {"class_names", d.class_names}, {"counts", class_counts(d)}};
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_dataset_synth(const DatasetArgs& a, std::ostream& out) {
  if (a.classes < 1 || a.per_class < 1) throw ConfigError("--classes, --per-class: must be >= 1");
  if (a.size < 4) throw ConfigError("--size: must be >= 4");
  const data::Dataset d = data::synth_dataset(a.classes, a.per_class, a.size, a.seed);
  data::save_packed_dataset(a.out_path, d);
  json j{{"command", "dataset synth"}, {"out", a.out_path}, {"samples", d.size()},
         {"classes", d.num_classes()}, {"image_size", a.size}, {"seed", a.seed}};
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_dataset_stats(const DatasetArgs& a, std::ostream& out) {
  const data::Dataset d = dataset_from_flags(a);
  json j{{"command", "dataset stats"}, {"samples", d.size()}, {"norm_stats", nvt::to_json(data::compute_norm_stats(d))}};
  out << j.dump(2) << '\n';
  return kOk;
}

// ---- gradcheck ------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradient_suite(seed);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json cases = json::array();
  json failed = json::array();
  for (const auto& r : results) {
    cases.push_back({{"name", r.name}, {"max_rel_error", r.max_rel_error}, {"passed", r.passed}});
    if (!r.passed) {
      failed.push_back(r.name);
      err << "gradcheck: FAILED " << r.name << " max relative error " << r.max_rel_error << '\n';
    }
  }
  json j{{"command", "gradcheck"}, {"seed", seed},       {"tolerance", kGradTolerance}, {"cases", std::move(cases)},
         {"failed", failed},       {"passed", failed.empty()}, {"seconds", seconds}};
  out << j.dump(2) << '\n';
  return failed.empty() ? kOk : kVerificationFailure;
}

// ---- error reporting ------------------------------------------------------

int report_error(std::ostream& out, std::ostream& err, int code, const std::string& kind, const std::string& message,
                 std::optional<std::uint64_t> offset = std::nullopt) {
  err << "nvt: " << kind << " error: " << message << '\n';
  json e{{"kind", kind}, {"exit_code", code}, {"message", message}};
  if (offset) e["offset"] = *offset;
  out << json{{"error", std::move(e)}}.dump(2) << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise-injected vision transformer workbench", "nvt"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Fine-tune a model from a run config");
  train_cmd->add_option("--config", train_args.config, "RunConfig JSON")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--config", eval_args.config, "RunConfig JSON (checkpoint dir and data.val)");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--packed", eval_args.packed, "Packed dataset");
  eval_cmd->add_option("--folder", eval_args.folder, "Image folder root");
  eval_cmd->add_option("--split", eval_args.split, "Split under --folder")->capture_default_str();
  eval_cmd->add_option("--batch-size", eval_args.batch_size, "Evaluation batch size (default: from checkpoint)");
  eval_cmd->add_option("--topk", eval_args.topk, "Extra top-k accuracy to report")->capture_default_str();
  eval_cmd->add_option("--csv", eval_args.csv, "Write per-class rows to this CSV file");
  eval_cmd->add_option("--latency", eval_args.latency_iterations, "Also time this many single-image forwards (>= 10)");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Median single-image forward latency per resolution");
  bench_cmd->add_option("--config", bench_args.config, "RunConfig JSON providing the model");
  bench_cmd->add_option("--checkpoint", bench_args.checkpoint, "Checkpoint providing the model");
  bench_cmd->add_option("--resolutions", bench_args.resolutions, "Comma-separated sizes")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--iterations", bench_args.iterations, "Timed forwards per resolution")->capture_default_str();
  bench_cmd->add_option("--warmup", bench_args.warmup, "Untimed forwards first")->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed, "Weight seed when no checkpoint is given")->capture_default_str();

  InspectArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect-noise", "Realized quality matrix and entropy change");
  inspect_cmd->add_option("--config", inspect_args.config, "RunConfig JSON or checkpoint");
  inspect_cmd->add_option("--checkpoint", inspect_args.checkpoint, "Checkpoint file");
  inspect_cmd->add_option("--kind", inspect_args.kind, "identity | cyclic_mix | cyclic_shift_add");
  inspect_cmd->add_option("--alpha", inspect_args.alpha, "Mixing strength, required for cyclic kinds");
  inspect_cmd->add_option("--batch", inspect_args.batch, "Batch size B");
  inspect_cmd->add_option("--tokens", inspect_args.tokens, "Tokens T (default: model sequence length)");
  inspect_cmd->add_option("--dim", inspect_args.dim, "Channels D (default: model width)");
  inspect_cmd->add_flag("--empirical", inspect_args.empirical, "Also run the sampling estimator");
  inspect_cmd->add_option("--trials", inspect_args.trials, "Estimator draws")->capture_default_str();
  inspect_cmd->add_option("--seed", inspect_args.seed, "Estimator seed")->capture_default_str();

  DatasetArgs ds_args;
  auto* ds_cmd = app.add_subcommand("dataset", "Dataset utilities");
  ds_cmd->require_subcommand(1);
  auto* ds_scan = ds_cmd->add_subcommand("scan", "Index an image folder split");
  ds_scan->add_option("--root", ds_args.root, "Folder root")->required();
  ds_scan->add_option("--split", ds_args.split, "Split directory")->capture_default_str();
  auto* ds_convert = ds_cmd->add_subcommand("convert", "Pack an image folder split");
  ds_convert->add_option("--root", ds_args.root, "Folder root")->required();
  ds_convert->add_option("--split", ds_args.split, "Split directory")->capture_default_str();
  ds_convert->add_option("--out", ds_args.out_path, "Packed output file")->required();
  auto* ds_synth = ds_cmd->add_subcommand("synth", "Write a synthetic packed dataset");
  ds_synth->add_option("--classes", ds_args.classes, "Class count")->capture_default_str();
  ds_synth->add_option("--per-class", ds_args.per_class, "Images per class")->capture_default_str();
  ds_synth->add_option("--size", ds_args.size, "Image side")->capture_default_str();
  ds_synth->add_option("--seed", ds_args.seed, "Generator seed")->capture_default_str();
  ds_synth->add_option("--out", ds_args.out_path, "Packed output file")->required();
  auto* ds_stats = ds_cmd->add_subcommand("stats", "Per-channel normalization statistics");
  ds_stats->add_option("--packed", ds_args.packed, "Packed dataset");
  ds_stats->add_option("--root", ds_args.root, "Folder root");
  ds_stats->add_option("--split", ds_args.split, "Split directory")->capture_default_str();

  std::uint64_t grad_seed = 0;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable operation");
  grad_cmd->add_option("--seed", grad_seed, "Point seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    err << app.help();
    out << json{{"usage", app.help()}}.dump(2) << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    return report_error(out, err, kConfigError, "usage", e.what());
  }

  try {
    const unsigned threads = worker_threads_from_env();
    if (threads > 1) err << "nvt: NVT_THREADS=" << threads << "; computation is single-threaded (reduction order is fixed)\n";
    if (*train_cmd) return cmd_train(train_args, out, err);
    if (*eval_cmd) return cmd_eval(eval_args, out, err);
    if (*bench_cmd) return cmd_bench(bench_args, out, err);
    if (*inspect_cmd) return cmd_inspect_noise(inspect_args, *inspect_cmd, out, err);
    if (*ds_scan) return cmd_dataset_scan(ds_args, out);
    if (*ds_convert) return cmd_dataset_convert(ds_args, out);
    if (*ds_synth) return cmd_dataset_synth(ds_args, out);
    if (*ds_stats) return cmd_dataset_stats(ds_args, out);
    if (*grad_cmd) return cmd_gradcheck(grad_seed, out, err);
  } catch (const ConfigError& e) {
    return report_error(out, err, kConfigError, "config", e.what());
  } catch (const DatasetError& e) {
    return report_error(out, err, kConfigError, "dataset", e.what());
  } catch (const TrainingAbort& e) {
    return report_error(out, err, kTrainingAbort, "training", e.what());
  } catch (const FormatError& e) {
    return report_error(out, err, kFormatError, "format", e.what(), e.offset());
  } catch (const std::exception& e) {
    return report_error(out, err, kFailure, "internal", e.what());
  }
  return report_error(out, err, kConfigError, "usage", "no subcommand");
}

}  // namespace nvt::cli
