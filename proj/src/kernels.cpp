#include "iccd/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace iccd::kernels {

namespace {

#ifdef _OPENMP
std::atomic<bool> g_parallel{true};
#else
std::atomic<bool> g_parallel{false};
#endif

// Below this many output elements the fork/join overhead dominates.
constexpr std::int64_t kParallelCutoff = 4096;

bool go_parallel(std::int64_t work) { return g_parallel.load() && work >= kParallelCutoff; }

}  // namespace

bool parallel_enabled() { return g_parallel.load(); }

void set_parallel(bool on) {
#ifndef _OPENMP
  on = false;
#endif
  g_parallel.store(on);
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// ---------------------------------------------------------------------------
// matmul family

void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::int64_t>(i) * n;
    std::fill(crow, crow + n, 0.0);
    const double* arow = a + static_cast<std::int64_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const double av = arow[l];
      const double* brow = b + static_cast<std::int64_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::int64_t>(i) * n;
    std::fill(crow, crow + n, 0.0);
    const double* arow = a + static_cast<std::int64_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const double av = arow[l];
      const double* brow = b + static_cast<std::int64_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  if (go_parallel(static_cast<std::int64_t>(m) * k * n))
    matmul_omp(a, b, c, m, k, n);
  else
    matmul_serial(a, b, c, m, k, n);
}

void matmul_nt_serial(const double* a, const double* b, double* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::int64_t>(i) * n;
    double* crow = c + static_cast<std::int64_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const double* brow = b + static_cast<std::int64_t>(l) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[l] = acc;
    }
  }
}

void matmul_nt_omp(const double* a, const double* b, double* c, int m, int n, int k) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::int64_t>(i) * n;
    double* crow = c + static_cast<std::int64_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const double* brow = b + static_cast<std::int64_t>(l) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[l] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int n, int k) {
  if (go_parallel(static_cast<std::int64_t>(m) * n * k))
    matmul_nt_omp(a, b, c, m, n, k);
  else
    matmul_nt_serial(a, b, c, m, n, k);
}

void matmul_tn_acc_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int l = 0; l < k; ++l) {
    double* crow = c + static_cast<std::int64_t>(l) * n;
    for (int i = 0; i < m; ++i) {
      const double av = a[static_cast<std::int64_t>(i) * k + l];
      const double* brow = b + static_cast<std::int64_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_tn_acc_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int l = 0; l < k; ++l) {
    double* crow = c + static_cast<std::int64_t>(l) * n;
    for (int i = 0; i < m; ++i) {
      const double av = a[static_cast<std::int64_t>(i) * k + l];
      const double* brow = b + static_cast<std::int64_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  if (go_parallel(static_cast<std::int64_t>(m) * k * n))
    matmul_tn_acc_omp(a, b, c, m, k, n);
  else
    matmul_tn_acc_serial(a, b, c, m, k, n);
}

// ---------------------------------------------------------------------------
// elementwise

void relu_serial(const double* x, double* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_omp(const double* x, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu(const double* x, double* y, std::int64_t n) {
  if (go_parallel(n))
    relu_omp(x, y, n);
  else
    relu_serial(x, y, n);
}

void relu_backward_serial(const double* x, const double* dy, double* dx, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

void relu_backward_omp(const double* x, const double* dy, double* dx, std::int64_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

void relu_backward(const double* x, const double* dy, double* dx, std::int64_t n) {
  if (go_parallel(n))
    relu_backward_omp(x, dy, dx, n);
  else
    relu_backward_serial(x, dy, dx, n);
}

void exp_serial(const double* x, double* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

void exp_omp(const double* x, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

void exp(const double* x, double* y, std::int64_t n) {
  if (go_parallel(n))
    exp_omp(x, y, n);
  else
    exp_serial(x, y, n);
}

// The floor guards against log(0) on one-hot probabilities; NaN must pass
// through untouched so divergence remains observable upstream.
void log_clamped_serial(const double* x, double* y, double floor, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i)
    y[i] = std::isnan(x[i]) ? x[i] : std::log(x[i] > floor ? x[i] : floor);
}

void log_clamped_omp(const double* x, double* y, double floor, std::int64_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    y[i] = std::isnan(x[i]) ? x[i] : std::log(x[i] > floor ? x[i] : floor);
}

void log_clamped(const double* x, double* y, double floor, std::int64_t n) {
  if (go_parallel(n))
    log_clamped_omp(x, y, floor, n);
  else
    log_clamped_serial(x, y, floor, n);
}

void log_clamped_backward_serial(const double* x, const double* dy, double* dx, double floor,
                                 std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i)
    if (x[i] > floor) dx[i] += dy[i] / x[i];
}

void log_clamped_backward_omp(const double* x, const double* dy, double* dx, double floor,
                              std::int64_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    if (x[i] > floor) dx[i] += dy[i] / x[i];
}

void log_clamped_backward(const double* x, const double* dy, double* dx, double floor,
                          std::int64_t n) {
  if (go_parallel(n))
    log_clamped_backward_omp(x, dy, dx, floor, n);
  else
    log_clamped_backward_serial(x, dy, dx, floor, n);
}

// ---------------------------------------------------------------------------
// row-wise

namespace {

inline void softmax_row(const double* xr, double* yr, int cols) {
  double mx = xr[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
  double denom = 0.0;
  for (int j = 0; j < cols; ++j) {
    yr[j] = std::exp(xr[j] - mx);
    denom += yr[j];
  }
  for (int j = 0; j < cols; ++j) yr[j] /= denom;
}

inline void softmax_row_backward(const double* yr, const double* dyr, double* dxr, int cols) {
  double inner = 0.0;
  for (int j = 0; j < cols; ++j) inner += dyr[j] * yr[j];
  for (int j = 0; j < cols; ++j) dxr[j] += yr[j] * (dyr[j] - inner);
}

inline double row_norm(const double* xr, int cols) {
  double acc = 0.0;
  for (int j = 0; j < cols; ++j) acc += xr[j] * xr[j];
  return std::sqrt(acc);
}

inline void l2_row_backward(const double* yr, const double* dyr, double norm, double* dxr,
                            int cols) {
  double inner = 0.0;
  for (int j = 0; j < cols; ++j) inner += dyr[j] * yr[j];
  for (int j = 0; j < cols; ++j) dxr[j] += (dyr[j] - yr[j] * inner) / norm;
}

}  // namespace

void softmax_rows_serial(const double* x, double* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    softmax_row(x + static_cast<std::int64_t>(i) * cols, y + static_cast<std::int64_t>(i) * cols,
                cols);
}

void softmax_rows_omp(const double* x, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    softmax_row(x + static_cast<std::int64_t>(i) * cols, y + static_cast<std::int64_t>(i) * cols,
                cols);
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
  if (go_parallel(static_cast<std::int64_t>(rows) * cols))
    softmax_rows_omp(x, y, rows, cols);
  else
    softmax_rows_serial(x, y, rows, cols);
}

void softmax_rows_backward_serial(const double* y, const double* dy, double* dx, int rows,
                                  int cols) {
  for (int i = 0; i < rows; ++i) {
    const std::int64_t off = static_cast<std::int64_t>(i) * cols;
    softmax_row_backward(y + off, dy + off, dx + off, cols);
  }
}

void softmax_rows_backward_omp(const double* y, const double* dy, double* dx, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const std::int64_t off = static_cast<std::int64_t>(i) * cols;
    softmax_row_backward(y + off, dy + off, dx + off, cols);
  }
}

void softmax_rows_backward(const double* y, const double* dy, double* dx, int rows, int cols) {
  if (go_parallel(static_cast<std::int64_t>(rows) * cols))
    softmax_rows_backward_omp(y, dy, dx, rows, cols);
  else
    softmax_rows_backward_serial(y, dy, dx, rows, cols);
}

void row_norms_serial(const double* x, double* norms, int rows, int cols) {
  for (int i = 0; i < rows; ++i) norms[i] = row_norm(x + static_cast<std::int64_t>(i) * cols, cols);
}

void row_norms_omp(const double* x, double* norms, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) norms[i] = row_norm(x + static_cast<std::int64_t>(i) * cols, cols);
}

void row_norms(const double* x, double* norms, int rows, int cols) {
  if (go_parallel(static_cast<std::int64_t>(rows) * cols))
    row_norms_omp(x, norms, rows, cols);
  else
    row_norms_serial(x, norms, rows, cols);
}

void divide_rows_serial(const double* x, const double* norms, double* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const std::int64_t off = static_cast<std::int64_t>(i) * cols;
    for (int j = 0; j < cols; ++j) y[off + j] = x[off + j] / norms[i];
  }
}

void divide_rows_omp(const double* x, const double* norms, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const std::int64_t off = static_cast<std::int64_t>(i) * cols;
    for (int j = 0; j < cols; ++j) y[off + j] = x[off + j] / norms[i];
  }
}

void divide_rows(const double* x, const double* norms, double* y, int rows, int cols) {
  if (go_parallel(static_cast<std::int64_t>(rows) * cols))
    divide_rows_omp(x, norms, y, rows, cols);
  else
    divide_rows_serial(x, norms, y, rows, cols);
}

void l2_normalize_rows_backward_serial(const double* y, const double* dy, const double* norms,
                                       double* dx, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const std::int64_t off = static_cast<std::int64_t>(i) * cols;
    l2_row_backward(y + off, dy + off, norms[i], dx + off, cols);
  }
}

void l2_normalize_rows_backward_omp(const double* y, const double* dy, const double* norms,
                                    double* dx, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const std::int64_t off = static_cast<std::int64_t>(i) * cols;
    l2_row_backward(y + off, dy + off, norms[i], dx + off, cols);
  }
}

void l2_normalize_rows_backward(const double* y, const double* dy, const double* norms, double* dx,
                                int rows, int cols) {
  if (go_parallel(static_cast<std::int64_t>(rows) * cols))
    l2_normalize_rows_backward_omp(y, dy, norms, dx, rows, cols);
  else
    l2_normalize_rows_backward_serial(y, dy, norms, dx, rows, cols);
}

// ---------------------------------------------------------------------------
// linear combinations

void add_serial(const double* a, const double* b, double* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void add_omp(const double* a, const double* b, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void add(const double* a, const double* b, double* y, std::int64_t n) {
  if (go_parallel(n))
    add_omp(a, b, y, n);
  else
    add_serial(a, b, y, n);
}

void scale_serial(const double* x, double* y, double c, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] = c * x[i];
}

void scale_omp(const double* x, double* y, double c, std::int64_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) y[i] = c * x[i];
}

void scale(const double* x, double* y, double c, std::int64_t n) {
  if (go_parallel(n))
    scale_omp(x, y, c, n);
  else
    scale_serial(x, y, c, n);
}

void axpy_serial(double a, const double* x, double* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpy_omp(double a, const double* x, double* y, std::int64_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpy(double a, const double* x, double* y, std::int64_t n) {
  if (go_parallel(n))
    axpy_omp(a, x, y, n);
  else
    axpy_serial(a, x, y, n);
}

double sum(const double* x, std::int64_t n) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double dot(const double* a, const double* b, std::int64_t n) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace iccd::kernels
