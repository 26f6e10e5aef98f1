// Command-line front end: reproducible data generation, teacher/student
// training, theorem verification, and lambda sweeps. Every command resolves
// its configuration, writes it as manifest.json into the output directory
// before doing any work, and derives all randomness from the --seed flag.
//
// Exit codes: 0 success, 1 verification/run failure, 2 usage or config
// error, 3 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "iccd/errors.hpp"
#include "iccd/kernels.hpp"
#include "iccd/losses.hpp"
#include "iccd/nets.hpp"
#include "iccd/rng.hpp"
#include "iccd/synthdata.hpp"
#include "iccd/theory.hpp"
#include "iccd/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Serialized before any work happens so no output lacks provenance.
std::string write_manifest(const fs::path& out_dir, json manifest) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw iccd::IoError("cannot create output directory: " + out_dir.string());
  const std::string hash = fnv1a_hex(manifest.dump());
  manifest["config_hash"] = hash;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw iccd::IoError("cannot write manifest: " + (out_dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
  return hash;
}

json train_config_json(const iccd::TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"lr", cfg.lr},
              {"lr_decay_epochs", cfg.lr_decay_epochs},
              {"lr_decay_factor", cfg.lr_decay_factor},
              {"lambda", cfg.lambda},
              {"delta", cfg.delta},
              {"capacity_m", cfg.capacity_m},
              {"alpha", cfg.alpha},
              {"aug_strength", cfg.aug_strength},
              {"seed", cfg.seed},
              {"cache_mode",
               cfg.cache_mode == iccd::CacheMode::drain_and_clear ? "drain_and_clear"
                                                                  : "sliding_window"},
              {"inline_intra", cfg.inline_intra},
              {"hidden_dims", cfg.hidden_dims},
              {"embed_dim", cfg.embed_dim}};
}

void write_cache_stats_jsonl(const iccd::TrainLog& log, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw iccd::IoError("cannot write cache stats: " + path.string());
  for (std::size_t epoch = 0; epoch < log.epoch_cache_stats.size(); ++epoch) {
    json row;
    row["epoch"] = epoch;
    json classes = json::object();
    for (std::size_t k = 0; k < log.epoch_cache_stats[epoch].size(); ++k) {
      const auto& s = log.epoch_cache_stats[epoch][k];
      classes[std::to_string(k)] = {{"occupancy", s.occupancy},
                                    {"admitted", s.admitted},
                                    {"rejected", s.rejected},
                                    {"drains", s.drains}};
    }
    row["classes"] = classes;
    out << row.dump() << "\n";
  }
}

void add_train_options(CLI::App* cmd, iccd::TrainConfig& cfg) {
  cmd->add_option("--epochs", cfg.epochs, "Training epochs");
  cmd->add_option("--batch-size", cfg.batch_size, "Batch size");
  cmd->add_option("--lr", cfg.lr, "Base learning rate");
  cmd->add_option("--lr-decay-epochs", cfg.lr_decay_epochs,
                  "Epochs at which the learning rate decays");
  cmd->add_option("--lr-decay-factor", cfg.lr_decay_factor, "Multiplicative decay factor");
  cmd->add_option("--lambda", cfg.lambda, "Intra-class loss weight (0 = cross-entropy only)");
  cmd->add_option("--delta", cfg.delta, "Margin threshold for the gate");
  cmd->add_option("--capacity-m", cfg.capacity_m, "Per-class cache capacity (negative count m)");
  cmd->add_option("--alpha", cfg.alpha, "Student weight on the hard-label term");
  cmd->add_option("--aug-strength", cfg.aug_strength, "Gaussian augmentation strength");
  cmd->add_option("--seed", cfg.seed, "Run seed");
  cmd->add_option("--hidden-dims", cfg.hidden_dims, "Hidden layer widths");
  cmd->add_option("--embed-dim", cfg.embed_dim, "Embedding dimension (must exceed class count)");
  cmd->add_flag("--inline-intra", cfg.inline_intra,
                "Compute the intra loss from the current batch instead of the cache");
  cmd->add_option("--cache-mode", [&cfg](const std::vector<std::string>& vals) {
        if (vals.empty()) return false;
        if (vals[0] == "drain_and_clear")
          cfg.cache_mode = iccd::CacheMode::drain_and_clear;
        else if (vals[0] == "sliding_window")
          cfg.cache_mode = iccd::CacheMode::sliding_window;
        else
          return false;
        return true;
      },
      "Cache refresh policy: drain_and_clear | sliding_window");
}

// ---------------------------------------------------------------------------
// gen-data

int cmd_gen_data(const iccd::GenParams& params, const std::string& out_dir) {
  json manifest{{"command", "gen-data"},
                {"classes", params.classes},
                {"views_per_class", params.views_per_class},
                {"per_view", params.per_view},
                {"d_in", params.d_in},
                {"class_sep", params.class_sep},
                {"view_sep", params.view_sep},
                {"noise", params.noise},
                {"seed", params.seed}};
  write_manifest(out_dir, manifest);
  const iccd::Dataset ds = iccd::generate_multiview(params);
  iccd::save_csv(ds, (fs::path(out_dir) / "dataset.csv").string());
  std::printf("gen-data: wrote %zu samples (%d classes x %d views x %d) to %s\n", ds.size(),
              params.classes, params.views_per_class, params.per_view, out_dir.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-teacher / distill

int cmd_train_teacher(const std::string& data_path, const std::string& out_dir,
                      const iccd::TrainConfig& cfg) {
  json manifest{{"command", "train-teacher"}, {"data", data_path}};
  manifest.update(train_config_json(cfg));
  write_manifest(out_dir, manifest);

  const iccd::Dataset ds = iccd::load_csv(data_path);
  const iccd::TrainResult out = iccd::train_teacher(ds, cfg);
  iccd::save_checkpoint(out.model, (fs::path(out_dir) / "teacher.ckpt").string());
  out.log.write_csv((fs::path(out_dir) / "trainlog.csv").string());
  write_cache_stats_jsonl(out.log, fs::path(out_dir) / "cache_stats.jsonl");

  const auto& last = out.log.rows.back();
  std::printf("train-teacher: %d epochs, final ce=%.4f intra=%.4f gate=%.2f acc=%.4f\n",
              cfg.epochs, last.ce, last.intra, last.gate_frac, iccd::accuracy(out.model, ds));
  return kExitOk;
}

int cmd_distill(const std::string& data_path, const std::string& teacher_path,
                const std::string& out_dir, const iccd::TrainConfig& cfg) {
  json manifest{{"command", "distill"}, {"data", data_path}, {"teacher", teacher_path}};
  manifest.update(train_config_json(cfg));
  write_manifest(out_dir, manifest);

  const iccd::Dataset ds = iccd::load_csv(data_path);
  const iccd::MLPModel teacher = iccd::load_checkpoint(teacher_path);
  const iccd::TrainResult out = iccd::distill_student(teacher, ds, cfg);
  iccd::save_checkpoint(out.model, (fs::path(out_dir) / "student.ckpt").string());
  out.log.write_csv((fs::path(out_dir) / "trainlog.csv").string());
  std::printf("distill: %d epochs, final loss=%.4f student acc=%.4f\n", cfg.epochs,
              out.log.rows.back().ce, iccd::accuracy(out.model, ds));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOptions {
  std::string out_dir = "verify_out";
  std::string checkpoint;
  std::string data_path;
  std::vector<double> lambdas{0.1, 1.0, 10.0};
  int verify_m = 8;
  int verify_n = 8;
  int free_classes = 4;
  int free_per_class = 8;
  int free_steps = 1500;
  double free_lr = 0.5;
  int verify_seeds = 3;
  std::uint64_t seed = 1;
  bool inject_bound_failure = false;
};

int cmd_verify(const VerifyOptions& opt) {
  json manifest{{"command", "verify"},
                {"checkpoint", opt.checkpoint},
                {"data", opt.data_path},
                {"lambdas", opt.lambdas},
                {"m", opt.verify_m},
                {"n", opt.verify_n},
                {"free_classes", opt.free_classes},
                {"free_per_class", opt.free_per_class},
                {"free_steps", opt.free_steps},
                {"free_lr", opt.free_lr},
                {"seeds", opt.verify_seeds},
                {"seed", opt.seed},
                {"inject_bound_failure", opt.inject_bound_failure}};
  write_manifest(opt.out_dir, manifest);

  bool all_ok = true;
  json report;

  // Constants: positivity and the product identity over a log grid.
  {
    bool ok = true;
    for (int m = 1; m <= 1000000 && ok; m *= 10)
      for (int n = 1; n <= 1000000; n *= 10) {
        const auto c = iccd::theorem2_constants(m, n);
        if (!(c.c0 > 0 && c.c1 > 0 && c.c2 > 0 && c.c3 > 0) ||
            std::abs(c.c1 * c.c3 - 1.0) > 1e-12) {
          ok = false;
          break;
        }
      }
    report["constants_grid_ok"] = ok;
    std::printf("[%s] loss-ratio constants positive, c1*c3 == 1 on the log grid\n",
                ok ? "PASS" : "FAIL");
    all_ok = all_ok && ok;
  }

  // Distance identity: exact residual must vanish; the asymptotic residual is
  // reported for context.
  {
    iccd::Dataset ds;
    iccd::Embedder embedder;
    if (!opt.checkpoint.empty()) {
      if (opt.data_path.empty())
        throw iccd::ContractError("verify: --data is required with --checkpoint");
      ds = iccd::load_csv(opt.data_path);
      embedder = iccd::model_embedder(iccd::load_checkpoint(opt.checkpoint));
    } else {
      iccd::GenParams p;
      p.classes = 4;
      p.views_per_class = 1;
      p.per_view = 64;
      p.d_in = 8;
      p.seed = opt.seed;
      ds = iccd::generate_multiview(p);
      embedder = iccd::random_unit_embedder(8, opt.seed);
    }
    json rows = json::array();
    bool ok = true;
    for (auto [m, n] : std::vector<std::pair<int, int>>{{4, 4}, {8, 16}, {16, 8}}) {
      const auto r = iccd::empirical_distances(embedder, ds, 8, m, n, opt.seed);
      const auto res = iccd::theorem1_check(r);
      ok = ok && res.exact_residual < 1e-9;
      rows.push_back({{"m", m},
                      {"n", n},
                      {"d_intra", r.d_intra},
                      {"d_inter", r.d_inter},
                      {"l_intra", r.l_intra},
                      {"l_inter", r.l_inter},
                      {"exact_residual", res.exact_residual},
                      {"asymptotic_residual", res.asymptotic_residual}});
    }
    report["distance_identity"] = rows;
    report["distance_identity_ok"] = ok;
    std::printf("[%s] finite-sample distance identity (exact residual < 1e-9)\n",
                ok ? "PASS" : "FAIL");
    all_ok = all_ok && ok;
  }

  // Loss-ratio bounds at the free-embedding minimizer.
  {
    json rows = json::array();
    bool ok = true;
    for (double lam : opt.lambdas) {
      for (int s = 0; s < opt.verify_seeds; ++s) {
        iccd::FreeEmbedConfig fcfg;
        fcfg.classes = opt.free_classes;
        fcfg.per_class = opt.free_per_class;
        fcfg.m = opt.verify_m;
        fcfg.n = opt.verify_n;
        fcfg.lambda = lam;
        fcfg.seed = opt.seed + static_cast<std::uint64_t>(s);
        fcfg.steps = opt.free_steps;
        fcfg.lr = opt.free_lr;
        const auto result = iccd::minimize_tradeoff_free_embeddings(fcfg);
        auto bounds = iccd::theorem2_bound_check(result.l_intra, result.l_inter, lam,
                                                 opt.verify_m, opt.verify_n);
        if (opt.inject_bound_failure) {
          bounds.ratio = bounds.upper + 1.0;  // negative-test fixture
          bounds.satisfied = false;
        }
        ok = ok && bounds.satisfied;
        rows.push_back({{"lambda", lam},
                        {"seed", fcfg.seed},
                        {"l_intra", result.l_intra},
                        {"l_inter", result.l_inter},
                        {"ratio", bounds.ratio},
                        {"lower", bounds.lower},
                        {"upper", bounds.upper},
                        {"satisfied", bounds.satisfied}});
        std::printf("[%s] ratio bounds at lambda=%g seed=%llu: %.4f in [%.4f, %.4f]\n",
                    bounds.satisfied ? "PASS" : "FAIL", lam,
                    static_cast<unsigned long long>(fcfg.seed), bounds.ratio, bounds.lower,
                    bounds.upper);
      }
    }
    report["bounds"] = rows;
    report["bounds_ok"] = ok;
    all_ok = all_ok && ok;
  }

  report["passed"] = all_ok;
  {
    std::ofstream out(fs::path(opt.out_dir) / "verify_report.json");
    if (!out) throw iccd::IoError("cannot write verify report");
    out << report.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(opt.out_dir) / "verify_rows.csv");
    out << "lambda,seed,ratio,lower,upper,satisfied\n";
    for (const auto& row : report["bounds"]) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%.17g,%llu,%.17g,%.17g,%.17g,%d\n",
                    row["lambda"].get<double>(),
                    static_cast<unsigned long long>(row["seed"].get<std::uint64_t>()),
                    row["ratio"].get<double>(), row["lower"].get<double>(),
                    row["upper"].get<double>(), row["satisfied"].get<bool>() ? 1 : 0);
      out << buf;
    }
  }
  std::printf("verify: %s\n", all_ok ? "all checks passed" : "FAILURES detected");
  return all_ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(const std::string& data_path, const std::string& heldout_path,
              const std::string& out_dir, std::vector<double> lambdas, int seed_count,
              const iccd::TrainConfig& base_cfg) {
  json manifest{{"command", "sweep"},
                {"data", data_path},
                {"heldout", heldout_path},
                {"lambdas", lambdas},
                {"seed_count", seed_count}};
  manifest.update(train_config_json(base_cfg));
  const std::string config_hash = write_manifest(out_dir, manifest);

  const iccd::Dataset train_ds = iccd::load_csv(data_path);
  const iccd::Dataset heldout_ds = iccd::load_csv(heldout_path);
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < seed_count; ++s) seeds.push_back(base_cfg.seed + static_cast<std::uint64_t>(s));

  const auto sweep = iccd::lambda_sweep(train_ds, heldout_ds, lambdas, base_cfg, seeds);

  {
    std::ofstream out(fs::path(out_dir) / "sweep.csv");
    if (!out) throw iccd::IoError("cannot write sweep.csv");
    out << "experiment_id,metric,value,seed,config_hash\n";
    char buf[256];
    auto emit = [&](double lam, std::uint64_t seed, const char* metric, double value) {
      std::snprintf(buf, sizeof buf, "lambda=%g,%s,%.17g,%llu,%s\n", lam, metric, value,
                    static_cast<unsigned long long>(seed), config_hash.c_str());
      out << buf;
    };
    for (const auto& cell : sweep.cells) {
      if (cell.diverged) {
        std::snprintf(buf, sizeof buf, "lambda=%g,diverged,1,%llu,%s\n", cell.lambda,
                      static_cast<unsigned long long>(cell.seed), config_hash.c_str());
        out << buf;
        continue;
      }
      emit(cell.lambda, cell.seed, "intra_pairwise_distance", cell.intra_pairwise);
      emit(cell.lambda, cell.seed, "inter_pairwise_distance", cell.inter_pairwise);
      emit(cell.lambda, cell.seed, "softlabel_entropy", cell.entropy);
      emit(cell.lambda, cell.seed, "student_accuracy", cell.student_acc);
      emit(cell.lambda, cell.seed, "teacher_ms_per_batch", cell.teacher_ms_per_batch);
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / "summary.csv");
    if (!out) throw iccd::IoError("cannot write summary.csv");
    out << "lambda,intra_mean,intra_std,inter_mean,inter_std,entropy_mean,entropy_std,"
           "acc_mean,acc_std,ms_mean,cells,diverged\n";
    char buf[512];
    for (const auto& row : sweep.summary) {
      std::snprintf(buf, sizeof buf, "%g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.4g,%d,%d\n",
                    row.lambda, row.intra_mean, row.intra_std, row.inter_mean, row.inter_std,
                    row.entropy_mean, row.entropy_std, row.acc_mean, row.acc_std, row.ms_mean,
                    row.cells, row.diverged_cells);
      out << buf;
    }
  }

  for (const auto& row : sweep.summary)
    std::printf("lambda=%-6g intra=%.4f+-%.4f entropy=%.4f+-%.4f acc=%.4f+-%.4f%s\n", row.lambda,
                row.intra_mean, row.intra_std, row.entropy_mean, row.entropy_std, row.acc_mean,
                row.acc_std, row.diverged_cells ? " [diverged cells]" : "");
  if (sweep.overhead_ratio > 0.0)
    std::printf("intra-loss overhead: %.2fx ms/batch vs ce-only control\n", sweep.overhead_ratio);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw iccd::IoError("no manifest.json in " + dir);
  json manifest = json::parse(in, nullptr, false);
  if (manifest.is_discarded()) throw iccd::IoError("unparseable manifest in " + dir);

  std::printf("== %s ==\n", manifest.value("command", std::string("?")).c_str());
  std::printf("config_hash: %s\n", manifest.value("config_hash", std::string("?")).c_str());
  for (const auto& [key, value] : manifest.items())
    if (key != "command" && key != "config_hash")
      std::printf("  %-18s %s\n", key.c_str(), value.dump().c_str());

  const fs::path log_path = fs::path(dir) / "trainlog.csv";
  if (fs::exists(log_path)) {
    std::ifstream log(log_path);
    std::string line, last, header;
    std::getline(log, header);
    int rows = 0;
    while (std::getline(log, line))
      if (!line.empty()) {
        last = line;
        ++rows;
      }
    std::printf("trainlog: %d epochs\n  %s\n  %s\n", rows, header.c_str(), last.c_str());
  }
  for (const char* name : {"summary.csv", "verify_report.json"}) {
    const fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) continue;
    std::printf("-- %s --\n", name);
    std::ifstream extra(p);
    std::string line;
    while (std::getline(extra, line)) std::printf("%s\n", line.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"margin-gated intra-class contrastive distillation laboratory"};
  app.require_subcommand(1);
  int threads = 0;
  bool serial = false;
  app.add_option("--threads", threads, "OpenMP thread count (0 = library default)");
  app.add_flag("--serial", serial, "Disable parallel kernels");

  // gen-data
  iccd::GenParams gen_params;
  std::string gen_out = "data_out";
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic multi-view dataset");
  gen->set_config("--config");
  gen->add_option("--classes", gen_params.classes, "Class count");
  gen->add_option("--views", gen_params.views_per_class, "Views (sub-clusters) per class");
  gen->add_option("--per-view", gen_params.per_view, "Samples per view");
  gen->add_option("--d-in", gen_params.d_in, "Feature dimension");
  gen->add_option("--class-sep", gen_params.class_sep, "Pairwise class-center separation");
  gen->add_option("--view-sep", gen_params.view_sep, "Pairwise view-center separation");
  gen->add_option("--noise", gen_params.noise, "Isotropic noise scale");
  gen->add_option("--seed", gen_params.seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output directory");

  // train-teacher
  iccd::TrainConfig teacher_cfg;
  std::string teacher_data, teacher_out = "teacher_out";
  auto* teach = app.add_subcommand("train-teacher", "Train a teacher with the margin-gated "
                                                    "intra-class contrastive objective");
  teach->set_config("--config");
  teach->add_option("--data", teacher_data, "Dataset CSV")->required();
  teach->add_option("--out", teacher_out, "Output directory");
  add_train_options(teach, teacher_cfg);

  // distill
  iccd::TrainConfig student_cfg;
  std::string student_data, student_teacher, student_out = "student_out";
  auto* dist = app.add_subcommand("distill", "Distill a student from a teacher checkpoint");
  dist->set_config("--config");
  dist->add_option("--data", student_data, "Dataset CSV")->required();
  dist->add_option("--teacher", student_teacher, "Teacher checkpoint")->required();
  dist->add_option("--out", student_out, "Output directory");
  add_train_options(dist, student_cfg);

  // verify
  VerifyOptions verify_opt;
  auto* verify = app.add_subcommand("verify", "Check the distance identity and loss-ratio "
                                              "bounds numerically");
  verify->set_config("--config");
  verify->add_option("--out", verify_opt.out_dir, "Output directory");
  verify->add_option("--checkpoint", verify_opt.checkpoint,
                     "Optional model checkpoint (defaults to free-embedding mode)");
  verify->add_option("--data", verify_opt.data_path, "Dataset CSV (required with --checkpoint)");
  verify->add_option("--lambda-list", verify_opt.lambdas, "Lambdas for the bound check");
  verify->add_option("--m", verify_opt.verify_m, "Intra negative count");
  verify->add_option("--n", verify_opt.verify_n, "Inter negative count");
  verify->add_option("--free-steps", verify_opt.free_steps, "Projected-gradient steps");
  verify->add_option("--free-lr", verify_opt.free_lr, "Projected-gradient step size");
  verify->add_option("--seeds", verify_opt.verify_seeds, "Seeds per lambda");
  verify->add_option("--seed", verify_opt.seed, "Base seed");
  verify->add_flag("--inject-bound-failure", verify_opt.inject_bound_failure,
                   "Force a failing bound row (negative-test fixture)")
      ->group("");  // hidden

  // sweep
  iccd::TrainConfig sweep_cfg;
  std::string sweep_data, sweep_heldout, sweep_out = "sweep_out";
  std::vector<double> sweep_lambdas{0.0, 0.01, 0.03};
  int sweep_seed_count = 5;
  auto* sweep = app.add_subcommand("sweep", "Train teachers across lambdas and compare "
                                            "dispersion, entropy, and student accuracy");
  sweep->set_config("--config");
  sweep->add_option("--data", sweep_data, "Training dataset CSV")->required();
  sweep->add_option("--heldout", sweep_heldout, "Held-out dataset CSV")->required();
  sweep->add_option("--out", sweep_out, "Output directory");
  sweep->add_option("--lambdas", sweep_lambdas, "Lambda values (must include the 0 control)");
  sweep->add_option("--seeds", sweep_seed_count, "Seeds per lambda");
  add_train_options(sweep, sweep_cfg);

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize an output directory");
  report->add_option("--dir", report_dir, "Output directory to summarize")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  iccd::kernels::set_thread_count(threads);
  if (serial) iccd::kernels::set_parallel(false);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_params, gen_out);
    if (teach->parsed()) return cmd_train_teacher(teacher_data, teacher_out, teacher_cfg);
    if (dist->parsed()) return cmd_distill(student_data, student_teacher, student_out, student_cfg);
    if (verify->parsed()) return cmd_verify(verify_opt);
    if (sweep->parsed())
      return cmd_sweep(sweep_data, sweep_heldout, sweep_out, sweep_lambdas, sweep_seed_count,
                       sweep_cfg);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const iccd::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const iccd::TrainingDiverged& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return kExitFailure;
  } catch (const iccd::ContractError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const iccd::DimensionError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
