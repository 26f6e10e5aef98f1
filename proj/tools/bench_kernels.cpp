// Benchmarks the OpenMP kernels against their serial reference
// implementations and verifies on the fly that both produce identical bits.
// Also times a full teacher training epoch with the parallel kernels on and
// off.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "iccd/kernels.hpp"
#include "iccd/rng.hpp"
#include "iccd/synthdata.hpp"
#include "iccd/train.hpp"

namespace k = iccd::kernels;

namespace {

using clock_type = std::chrono::steady_clock;

double time_best_of(int repeats, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock_type::now();
    fn();
    const auto dt = std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
    if (dt < best) best = dt;
  }
  return best;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  iccd::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void print_row(const char* name, double serial_ms, double omp_ms, bool identical) {
  std::printf("%-26s %10.3f ms %10.3f ms %8.2fx  %s\n", name, serial_ms, omp_ms,
              serial_ms / omp_ms, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int repeats = 5;
  if (argc > 1) repeats = std::atoi(argv[1]);
  std::printf("threads: %d, repeats: %d (best-of timing)\n\n", k::thread_count(), repeats);
  std::printf("%-26s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  {
    const int m = 256, kk = 256, n = 256;
    const auto a = random_vec(static_cast<std::size_t>(m) * kk, 1);
    const auto b = random_vec(static_cast<std::size_t>(kk) * n, 2);
    std::vector<double> c1(static_cast<std::size_t>(m) * n), c2(c1.size());
    const double ts = time_best_of(repeats, [&] { k::matmul_serial(a.data(), b.data(), c1.data(), m, kk, n); });
    const double tp = time_best_of(repeats, [&] { k::matmul_omp(a.data(), b.data(), c2.data(), m, kk, n); });
    print_row("matmul 256^3", ts, tp,
              std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(double)) == 0);
  }
  {
    const int m = 512, n = 128, kk = 256;
    const auto a = random_vec(static_cast<std::size_t>(m) * n, 3);
    const auto b = random_vec(static_cast<std::size_t>(kk) * n, 4);
    std::vector<double> c1(static_cast<std::size_t>(m) * kk), c2(c1.size());
    const double ts = time_best_of(repeats, [&] { k::matmul_nt_serial(a.data(), b.data(), c1.data(), m, n, kk); });
    const double tp = time_best_of(repeats, [&] { k::matmul_nt_omp(a.data(), b.data(), c2.data(), m, n, kk); });
    print_row("matmul_nt 512x256x128", ts, tp,
              std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(double)) == 0);
  }
  {
    const int rows = 8192, cols = 256;
    const auto x = random_vec(static_cast<std::size_t>(rows) * cols, 5);
    std::vector<double> y1(x.size()), y2(x.size());
    const double ts = time_best_of(repeats, [&] { k::softmax_rows_serial(x.data(), y1.data(), rows, cols); });
    const double tp = time_best_of(repeats, [&] { k::softmax_rows_omp(x.data(), y2.data(), rows, cols); });
    print_row("softmax_rows 8192x256", ts, tp,
              std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(double)) == 0);
  }
  {
    const int rows = 8192, cols = 256;
    const auto x = random_vec(static_cast<std::size_t>(rows) * cols, 6);
    std::vector<double> n1(static_cast<std::size_t>(rows)), n2(n1.size());
    std::vector<double> y1(x.size()), y2(x.size());
    const double ts = time_best_of(repeats, [&] {
      k::row_norms_serial(x.data(), n1.data(), rows, cols);
      k::divide_rows_serial(x.data(), n1.data(), y1.data(), rows, cols);
    });
    const double tp = time_best_of(repeats, [&] {
      k::row_norms_omp(x.data(), n2.data(), rows, cols);
      k::divide_rows_omp(x.data(), n2.data(), y2.data(), rows, cols);
    });
    print_row("l2_normalize 8192x256", ts, tp,
              std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(double)) == 0);
  }
  {
    const std::int64_t n = 1 << 22;
    const auto x = random_vec(static_cast<std::size_t>(n), 7);
    std::vector<double> y1(x.size()), y2(x.size());
    const double ts = time_best_of(repeats, [&] { k::exp_serial(x.data(), y1.data(), n); });
    const double tp = time_best_of(repeats, [&] { k::exp_omp(x.data(), y2.data(), n); });
    print_row("exp 4M", ts, tp,
              std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(double)) == 0);
  }

  // End-to-end: one teacher training run, parallel kernels off vs on.
  {
    iccd::GenParams p;
    p.classes = 4;
    p.views_per_class = 3;
    p.per_view = 50;
    p.d_in = 16;
    p.seed = 9;
    const iccd::Dataset ds = iccd::generate_multiview(p);
    iccd::TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 64;
    cfg.lr_decay_epochs = {};
    cfg.lambda = 0.02;
    cfg.delta = 0.1;
    cfg.hidden_dims = {128};
    cfg.embed_dim = 32;

    k::set_parallel(false);
    const double ts = time_best_of(1, [&] { iccd::train_teacher(ds, cfg); });
    k::set_parallel(true);
    const double tp = time_best_of(1, [&] { iccd::train_teacher(ds, cfg); });

    k::set_parallel(false);
    const auto serial_model = iccd::train_teacher(ds, cfg).model.parameters();
    k::set_parallel(true);
    const auto omp_model = iccd::train_teacher(ds, cfg).model.parameters();
    bool identical = true;
    for (std::size_t i = 0; i < serial_model.size(); ++i)
      identical = identical && std::memcmp(serial_model[i].data().data(),
                                           omp_model[i].data().data(),
                                           serial_model[i].data().size() * sizeof(double)) == 0;
    print_row("teacher epoch x5", ts, tp, identical);
  }

  return 0;
}
