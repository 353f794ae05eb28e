// End-to-end acceptance run: one PASS/FAIL line per headline criterion.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nvt/checkpoint.hpp"
#include "nvt/cli/commands.hpp"
#include "nvt/cli/run_config.hpp"
#include "nvt/container.hpp"
#include "nvt/evaluator.hpp"
#include "nvt/gradient_suite.hpp"
#include "nvt/linalg.hpp"
#include "nvt/noise.hpp"
#include "nvt/ops.hpp"
#include "nvt/trainer.hpp"
#include "nvt/vit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nvt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct CliRun {
  int code = -1;
  json doc;
};

CliRun cli_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run_cli(args, out, err);
  r.doc = json::parse(out.str());
  std::cerr << err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nvt_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Copy of a shipped config with outputs redirected into `dir`.
std::string redirected_config(const std::string& shipped, const fs::path& dir) {
  std::ifstream in(fs::path(NVT_SOURCE_DIR) / "configs" / shipped);
  json j = json::parse(in);
  j["output"] = {{"log_dir", (dir / "logs").string()}, {"checkpoint_dir", (dir / "ckpt").string()}};
  const fs::path p = dir / shipped;
  std::ofstream(p) << j.dump(2);
  return p.string();
}

std::vector<json> read_history(const fs::path& p) {
  std::ifstream in(p);
  std::vector<json> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(json::parse(line));
  return rows;
}

Outcome gradient_suite_check() {
  const auto t0 = Clock::now();
  const auto results = run_gradient_suite(0);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name, failed;
  for (const auto& r : results) {
    if (r.max_rel_error > worst) worst = r.max_rel_error, worst_name = r.name;
    if (!r.passed) failed += " " + r.name;
  }
  const bool ok = failed.empty() && secs < 60.0;
  return {ok, fmt("%zu cases, worst %.2e (%s), %.1f s%s", results.size(), worst, worst_name.c_str(), secs,
                  failed.empty() ? "" : (" failed:" + failed).c_str())};
}

Outcome entropy_exactness() {
  std::size_t checked = 0, singular = 0;
  double worst = 0.0;
  bool ok = true;
  for (std::size_t B = 1; B <= 6; ++B)
    for (double a : {0.0, 0.25, 0.5, 0.75, 1.0})
      for (const auto& kind :
           {noise::QualityKind::identity(), noise::QualityKind::cyclic_mix(a), noise::QualityKind::cyclic_shift_add(a)}) {
        const auto q = noise::build_quality_matrix(kind, B);
        const auto [c0, c1] = kind.circulant_coefficients().value();
        const double closed = std::abs(std::pow(c0, double(B)) - std::pow(-c1, double(B)));
        const LogDet ld = lu_logdet(q.realized);
        const auto rep = noise::entropy_delta_exact(q, 1, 1);
        ++checked;
        if (closed == 0.0) {
          ++singular;
          ok &= ld.singular() && rep.singular;
          continue;
        }
        const double err = ld.singular() ? INFINITY : std::abs(std::exp(ld.log_abs) - closed);
        worst = std::max(worst, err);
        ok &= err <= 1e-9 && !rep.singular;
      }
  const auto flagged = noise::entropy_delta_exact(noise::build_quality_matrix(noise::QualityKind::cyclic_mix(0.5), 2), 1, 1);
  ok &= flagged.singular;
  return {ok, fmt("%zu matrices, worst |det| error %.1e, %zu singular flagged", checked, worst, singular)};
}

Outcome entropy_empiricism() {
  const auto q = noise::build_quality_matrix(noise::QualityKind::cyclic_shift_add(0.5), 3);
  const double exact = noise::entropy_delta_exact(q, 1, 2).effective_log_det;
  const auto t0 = Clock::now();
  const auto rep = noise::entropy_delta_empirical(q, 1, 2, 100000, 0);
  const double secs = seconds_since(t0);
  const double rel = std::abs(*rep.empirical_delta - exact) / std::abs(exact);
  return {rel <= 0.05 && secs < 120.0 && std::abs(exact - 2.0 * std::log(1.125)) < 1e-12,
          fmt("exact %.10f, empirical %.10f (se %.1e), rel %.1e, %.1f s", exact, *rep.empirical_delta,
              *rep.standard_error, rel, secs)};
}

Outcome fixed_layer_contract() {
  const fs::path dir = scratch("fixed_layer");
  vit::ViTConfig cfg;
  cfg.image_size = 32;
  cfg.patch_size = 8;
  cfg.embed_dim = 16;
  cfg.depth = 3;
  cfg.num_heads = 2;
  cfg.num_classes = 4;
  const auto nz = noise::random_layer_noise_config(cfg.depth, noise::QualityKind::cyclic_shift_add(0.5), 17);
  const auto tr = data::synth_dataset(4, 6, 32, 0), va = data::synth_dataset(4, 5, 32, 1);
  train::TrainConfig tc;
  tc.base_lr = 1e-3;
  tc.epochs = 2;
  tc.batch_size = 6;
  train::TrainOptions opts;
  opts.stats = data::compute_norm_stats(tr);
  opts.checkpoint_path = dir / "best.nvt";
  const auto res = train::train(cfg, vit::init_params(cfg, 2), nz, tr, va, tc, opts);

  const vit::Checkpoint ck = vit::load_checkpoint(dir / "best.nvt");
  const bool round_trip = ck.noise == std::optional{nz} && ck.config == cfg;
  const eval::EvalOptions eo{cfg.image_size, opts.stats, 3};
  Tensor in_process, reloaded;
  eval::evaluate({cfg, res.best_params, nz}, va, eo, &in_process);
  eval::evaluate({ck.config, ck.params, ck.noise}, va, {cfg.image_size, *ck.meta.norm_stats, 3}, &reloaded);
  const bool bit_equal = in_process.numel() == reloaded.numel() &&
                         std::memcmp(in_process.data().data(), reloaded.data().data(), in_process.numel() * 8) == 0;
  fs::remove_all(dir);
  return {round_trip && bit_equal, fmt("noise layer %zu of %zu round trip %s, logits bit-equal %s", nz.layer_index,
                                       cfg.depth, round_trip ? "yes" : "no", bit_equal ? "yes" : "no")};
}

Outcome parameter_count() {
  const std::uint64_t base = vit::param_count(vit::ViTConfig::base16(224, 1000));
  const double rel = std::abs(double(base) - 86e6) / 86e6;
  bool desk_ok = true;
  std::size_t desks = 0;
  for (std::size_t dim : {16, 32, 64})
    for (std::size_t depth : {1, 2, 3}) {
      vit::ViTConfig c;
      c.image_size = 32;
      c.patch_size = 8;
      c.embed_dim = dim;
      c.depth = depth;
      c.num_heads = 2;
      c.mlp_ratio = 2.0;
      c.num_classes = 8;
      std::uint64_t n = 0;
      for (const auto& nt : vit::init_params(c, 0).named()) n += nt.tensor.numel();
      desk_ok &= n == vit::param_count(c);
      ++desks;
    }
  return {rel < 0.01 && desk_ok, fmt("ViT-B/16 %llu (%.2f%% from 86M), %zu desk configs enumerated %s",
                                     static_cast<unsigned long long>(base), rel * 100, desks, desk_ok ? "exactly" : "WRONG")};
}

Outcome training_sanity() {
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = true;
  for (const char* shipped : {"desk_synth.json", "desk_synth_noise.json"}) {
    const fs::path dir = scratch(std::string("train_") + shipped);
    const auto r = cli_run({"train", "--config", redirected_config(shipped, dir)});
    if (r.code != 0) {
      ok = false;
      detail += fmt("%s exit %d; ", shipped, r.code);
      continue;
    }
    const auto rows = read_history(dir / "logs" / "history.jsonl");
    double best_train = 0.0, best_val = 0.0;
    std::size_t first_90 = 0;
    for (const auto& row : rows) {
      const double acc = row["train_accuracy"];
      best_train = std::max(best_train, acc);
      best_val = std::max(best_val, row["val_top1"].get<double>());
      if (acc >= 0.9 && first_90 == 0) first_90 = row["epoch"];
    }
    const bool run_ok = rows.size() <= 50 && best_train >= 0.9 && best_val >= 4.0 / 8.0;
    ok &= run_ok;
    detail += fmt("%s: train acc %.3f (>=0.9 at epoch %zu), val top1 %.3f; ", shipped, best_train, first_90, best_val);
    fs::remove_all(dir);
  }
  const double secs = seconds_since(t0);
  ok &= secs < 600.0;
  return {ok, detail + fmt("%.0f s total", secs)};
}

Outcome metric_oracle() {
  std::mt19937_64 gen(2024);
  bool ok = true;
  std::size_t ties = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t B = 1 + gen() % 64, C = 2 + gen() % 240;
    std::vector<double> z(B * C);
    std::normal_distribution<double> nd;
    const bool coarse = inst % 3 == 0;
    for (double& v : z) v = coarse ? std::round(nd(gen)) : nd(gen);
    const Tensor logits({B, C}, z);
    std::vector<std::size_t> y(B);
    for (auto& v : y) v = gen() % C;
    const std::size_t k = 1 + gen() % C;
    std::size_t hits = 0;
    for (std::size_t b = 0; b < B; ++b) {
      std::vector<std::size_t> order(C);
      for (std::size_t c = 0; c < C; ++c) order[c] = c;
      std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return z[b * C + i] > z[b * C + j]; });
      hits += std::find(order.begin(), order.begin() + k, y[b]) != order.begin() + k;
    }
    ties += coarse;
    const double acc = eval::topk_accuracy(logits, y, k);
    ok &= acc == double(hits) / double(B);
    ok &= eval::topk_accuracy(logits, y, 5) >= eval::topk_accuracy(logits, y, 1);
    ok &= eval::topk_accuracy(logits, y, C) == 1.0;
  }
  return {ok, fmt("1000 instances (%zu with heavy ties) match the sort oracle", ties)};
}

Outcome recipe_fidelity() {
  const train::TrainConfig defaults;
  bool ok = defaults.base_lr == 1e-5;
  ok &= train::cosine_lr(0, 1234, defaults.base_lr) == 1e-5;
  ok &= train::cosine_lr(1234, 1234, defaults.base_lr) == 0.0;

  const Tensor uniform_logits({3, 2}, 0.7);
  const double ls = label_smoothing_ce(uniform_logits, std::vector<std::size_t>{0, 1, 1}, 0.1).item();
  ok &= std::abs(ls - std::log(2.0)) <= 1e-12;

  train::TrainConfig cfg;
  cfg.weight_decay = 0.05;
  const double lr = 3e-4;
  std::vector<Tensor> p{Tensor({4}, {1.5, -0.25, 3.0, 1e-3})};
  const std::vector<double> before(p[0].data().begin(), p[0].data().end());
  std::vector<std::vector<double>> zero{std::vector<double>(4, 0.0)};
  train::OptimizerState st;
  train::adamw_step(p, zero, st, lr, cfg);
  bool decay_exact = true;
  for (std::size_t i = 0; i < 4; ++i) decay_exact &= p[0].data()[i] == before[i] * (1.0 - lr * cfg.weight_decay);
  ok &= decay_exact;
  return {ok, fmt("default lr %.0e, end lr 0, smoothed CE %.15f vs ln2, decoupled decay %s", defaults.base_lr, ls,
                  decay_exact ? "exact" : "inexact")};
}

Outcome determinism() {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const auto t0 = Clock::now();
  const auto ra = cli_run({"train", "--config", redirected_config("quickstart.json", a)});
  const double first_secs = seconds_since(t0);
  const auto rb = cli_run({"train", "--config", redirected_config("quickstart.json", b)});
  bool ok = ra.code == 0 && rb.code == 0;
  const bool hist = ok && read_file_bytes(a / "logs" / "history.jsonl") == read_file_bytes(b / "logs" / "history.jsonl");
  const bool ckpt = ok && read_file_bytes(a / "ckpt" / "best.nvt") == read_file_bytes(b / "ckpt" / "best.nvt");
  ok &= hist && ckpt;
  fs::remove_all(a);
  fs::remove_all(b);
  return {ok, fmt("quickstart twice: history %s, checkpoint %s (one run %.0f s)", hist ? "identical" : "DIFFERENT",
                  ckpt ? "identical" : "DIFFERENT", first_secs)};
}

Outcome latency() {
  const auto r = cli_run({"bench", "--resolutions", "224,384", "--iterations", "20", "--warmup", "3"});
  if (r.code != 0 || r.doc["results"].size() != 2) return {false, fmt("bench exit %d", r.code)};
  const double t224 = r.doc["results"][0]["median_ms"], t384 = r.doc["results"][1]["median_ms"];
  const bool schema = r.doc["results"][0].contains("params") && r.doc["results"][0]["resolution"] == 224;
  return {schema && t384 > t224, fmt("median %.2f ms at 224, %.2f ms at 384", t224, t384)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient-suite", gradient_suite_check},   {"entropy-exactness", entropy_exactness},
      {"entropy-empiricism", entropy_empiricism}, {"fixed-layer-contract", fixed_layer_contract},
      {"parameter-count", parameter_count},       {"training-sanity", training_sanity},
      {"metric-oracle", metric_oracle},           {"recipe-fidelity", recipe_fidelity},
      {"determinism", determinism},               {"latency-methodology", latency},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
