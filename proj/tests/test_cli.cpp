// End-to-end checks of the command-line tool: artifact layout, exit codes,
// and byte-level reproducibility. The binary path arrives via the ICCD_BIN
// environment variable (set by ctest).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* bin = std::getenv("ICCD_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "ICCD_BIN must point at the iccd binary");
  return bin;
}

int run(const std::string& args) {
  const std::string cmd = binary() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("iccd_cli_XXXXXX" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string sub(const char* name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("gen-data writes a manifest first and is byte-reproducible") {
  TempDir tmp;
  CHECK(run("gen-data --out " + tmp.sub("a") + " --classes 3 --views 2 --per-view 5 --d-in 8 "
            "--seed 11") == 0);
  CHECK(fs::exists(tmp.path / "a" / "manifest.json"));
  CHECK(fs::exists(tmp.path / "a" / "dataset.csv"));

  // row count = classes * views * per_view (+ header)
  std::ifstream csv(tmp.path / "a" / "dataset.csv");
  int lines = 0;
  std::string line;
  while (std::getline(csv, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 1 + 3 * 2 * 5);

  CHECK(run("gen-data --out " + tmp.sub("b") + " --classes 3 --views 2 --per-view 5 --d-in 8 "
            "--seed 11") == 0);
  CHECK(slurp(tmp.path / "a" / "dataset.csv") == slurp(tmp.path / "b" / "dataset.csv"));
  CHECK(slurp(tmp.path / "a" / "manifest.json") == slurp(tmp.path / "b" / "manifest.json"));
}

TEST_CASE("malformed arguments exit with the usage code") {
  CHECK(run("gen-data --definitely-not-a-flag") == 2);
  CHECK(run("") == 2);
  CHECK(run("distill --data x.csv") == 2);  // missing required --teacher
}

TEST_CASE("train, distill, and report round-trip") {
  TempDir tmp;
  REQUIRE(run("gen-data --out " + tmp.sub("data") + " --classes 2 --views 1 --per-view 30 "
              "--d-in 8 --seed 5") == 0);
  const std::string data = tmp.sub("data") + "/dataset.csv";

  CHECK(run("train-teacher --data " + data + " --out " + tmp.sub("t") +
            " --epochs 6 --batch-size 20 --lr-decay-epochs 3 --lambda 0.02 --delta 0.05 "
            "--capacity-m 3 --hidden-dims 12 --embed-dim 6 --seed 2") == 0);
  CHECK(fs::exists(tmp.path / "t" / "teacher.ckpt"));
  CHECK(fs::exists(tmp.path / "t" / "trainlog.csv"));
  CHECK(fs::exists(tmp.path / "t" / "cache_stats.jsonl"));

  // identical invocation reproduces the checkpoint byte-for-byte
  CHECK(run("train-teacher --data " + data + " --out " + tmp.sub("t2") +
            " --epochs 6 --batch-size 20 --lr-decay-epochs 3 --lambda 0.02 --delta 0.05 "
            "--capacity-m 3 --hidden-dims 12 --embed-dim 6 --seed 2") == 0);
  CHECK(slurp(tmp.path / "t" / "teacher.ckpt") == slurp(tmp.path / "t2" / "teacher.ckpt"));

  CHECK(run("distill --data " + data + " --teacher " + tmp.sub("t") + "/teacher.ckpt --out " +
            tmp.sub("s") + " --epochs 4 --batch-size 20 --alpha 0.1 --hidden-dims 8 "
            "--embed-dim 6 --seed 3") == 0);
  CHECK(fs::exists(tmp.path / "s" / "student.ckpt"));

  CHECK(run("report --dir " + tmp.sub("t")) == 0);
  CHECK(run("report --dir " + tmp.sub("nowhere")) == 3);
}

TEST_CASE("missing inputs give the io exit code") {
  TempDir tmp;
  CHECK(run("train-teacher --data " + tmp.sub("none.csv") + " --out " + tmp.sub("o")) == 3);
  REQUIRE(run("gen-data --out " + tmp.sub("d") + " --classes 2 --views 1 --per-view 8 --d-in 6 "
              "--seed 1") == 0);
  CHECK(run("distill --data " + tmp.sub("d") + "/dataset.csv --teacher " +
            tmp.sub("missing.ckpt") + " --out " + tmp.sub("s")) == 3);
}

TEST_CASE("dataset/model mismatch is a config error") {
  TempDir tmp;
  REQUIRE(run("gen-data --out " + tmp.sub("d2") + " --classes 2 --views 1 --per-view 10 "
              "--d-in 6 --seed 1") == 0);
  REQUIRE(run("gen-data --out " + tmp.sub("d3") + " --classes 3 --views 1 --per-view 10 "
              "--d-in 6 --seed 1") == 0);
  REQUIRE(run("train-teacher --data " + tmp.sub("d2") + "/dataset.csv --out " + tmp.sub("t") +
              " --epochs 2 --hidden-dims 8 --embed-dim 6 --lambda 0") == 0);
  // teacher trained for 2 classes cannot distill onto 3-class data
  CHECK(run("distill --data " + tmp.sub("d3") + "/dataset.csv --teacher " + tmp.sub("t") +
            "/teacher.ckpt --out " + tmp.sub("s") + " --epochs 2 --hidden-dims 8 "
            "--embed-dim 6") == 2);
}

TEST_CASE("verify exits 0 on success and 1 on a forced bound failure") {
  TempDir tmp;
  CHECK(run("verify --out " + tmp.sub("v") + " --lambda-list 1 --seeds 1 --free-steps 300") == 0);
  CHECK(fs::exists(tmp.path / "v" / "verify_report.json"));
  CHECK(fs::exists(tmp.path / "v" / "verify_rows.csv"));
  CHECK(run("verify --out " + tmp.sub("vf") + " --lambda-list 1 --seeds 1 --free-steps 50 "
            "--inject-bound-failure") == 1);
}

TEST_CASE("sweep emits one metrics row per cell metric and a summary") {
  TempDir tmp;
  REQUIRE(run("gen-data --out " + tmp.sub("train") + " --classes 2 --views 1 --per-view 20 "
              "--d-in 6 --seed 21") == 0);
  REQUIRE(run("gen-data --out " + tmp.sub("held") + " --classes 2 --views 1 --per-view 20 "
              "--d-in 6 --seed 22") == 0);
  CHECK(run("sweep --data " + tmp.sub("train") + "/dataset.csv --heldout " + tmp.sub("held") +
            "/dataset.csv --out " + tmp.sub("sw") + " --lambdas 0 0.03 --seeds 3 --epochs 3 "
            "--batch-size 20 --hidden-dims 8 --embed-dim 6 --capacity-m 3 --delta 0.05") == 0);
  CHECK(fs::exists(tmp.path / "sw" / "sweep.csv"));
  CHECK(fs::exists(tmp.path / "sw" / "summary.csv"));

  std::ifstream csv(tmp.path / "sw" / "sweep.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "experiment_id,metric,value,seed,config_hash");
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2 * 3 * 5);  // lambdas x seeds x metrics

  // missing 0 control is a config error
  CHECK(run("sweep --data " + tmp.sub("train") + "/dataset.csv --heldout " + tmp.sub("held") +
            "/dataset.csv --out " + tmp.sub("sw2") + " --lambdas 0.01 0.03 --seeds 3 "
            "--epochs 2 --hidden-dims 8 --embed-dim 6") == 2);
}
