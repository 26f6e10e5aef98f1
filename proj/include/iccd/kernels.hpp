#pragma once

#include <cstdint>

// Dense math kernels behind the tensor ops. Every kernel comes in a serial
// reference variant and an OpenMP variant; the unsuffixed entry points
// dispatch at runtime. Parallel variants partition whole output elements
// (rows for matmul and row-wise ops, chunks for elementwise ops), so each
// element is produced by one thread with a fixed inner summation order and
// the two variants are bit-identical. Scalar reductions stay serial.
namespace iccd::kernels {

// Runtime switch for the dispatching entry points. Defaults to on when
// compiled with OpenMP.
bool parallel_enabled();
void set_parallel(bool on);
int thread_count();
void set_thread_count(int n);

// C[M,N] = A[M,K] * B[K,N]
void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul(const double* a, const double* b, double* c, int m, int k, int n);

// C[M,K] = A[M,N] * B[K,N]^T   (i.e. C[i,l] = sum_j A[i,j] B[l,j])
void matmul_nt_serial(const double* a, const double* b, double* c, int m, int n, int k);
void matmul_nt_omp(const double* a, const double* b, double* c, int m, int n, int k);
void matmul_nt(const double* a, const double* b, double* c, int m, int n, int k);

// C[K,N] += A[M,K]^T * B[M,N]  (accumulating: used for weight gradients)
void matmul_tn_acc_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn_acc_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n);

// y = max(x, 0)
void relu_serial(const double* x, double* y, std::int64_t n);
void relu_omp(const double* x, double* y, std::int64_t n);
void relu(const double* x, double* y, std::int64_t n);

// dx += dy where x > 0
void relu_backward_serial(const double* x, const double* dy, double* dx, std::int64_t n);
void relu_backward_omp(const double* x, const double* dy, double* dx, std::int64_t n);
void relu_backward(const double* x, const double* dy, double* dx, std::int64_t n);

void exp_serial(const double* x, double* y, std::int64_t n);
void exp_omp(const double* x, double* y, std::int64_t n);
void exp(const double* x, double* y, std::int64_t n);

// y = log(max(x, floor)); entries below the floor are treated as constant,
// so their gradient is zero.
void log_clamped_serial(const double* x, double* y, double floor, std::int64_t n);
void log_clamped_omp(const double* x, double* y, double floor, std::int64_t n);
void log_clamped(const double* x, double* y, double floor, std::int64_t n);

void log_clamped_backward_serial(const double* x, const double* dy, double* dx, double floor,
                                 std::int64_t n);
void log_clamped_backward_omp(const double* x, const double* dy, double* dx, double floor,
                              std::int64_t n);
void log_clamped_backward(const double* x, const double* dy, double* dx, double floor,
                          std::int64_t n);

// Row-wise softmax with row-max subtraction.
void softmax_rows_serial(const double* x, double* y, int rows, int cols);
void softmax_rows_omp(const double* x, double* y, int rows, int cols);
void softmax_rows(const double* x, double* y, int rows, int cols);

// dx += y .* (dy - sum_row(dy .* y))
void softmax_rows_backward_serial(const double* y, const double* dy, double* dx, int rows,
                                  int cols);
void softmax_rows_backward_omp(const double* y, const double* dy, double* dx, int rows, int cols);
void softmax_rows_backward(const double* y, const double* dy, double* dx, int rows, int cols);

// Euclidean norm of each row.
void row_norms_serial(const double* x, double* norms, int rows, int cols);
void row_norms_omp(const double* x, double* norms, int rows, int cols);
void row_norms(const double* x, double* norms, int rows, int cols);

// y[i,:] = x[i,:] / norms[i]
void divide_rows_serial(const double* x, const double* norms, double* y, int rows, int cols);
void divide_rows_omp(const double* x, const double* norms, double* y, int rows, int cols);
void divide_rows(const double* x, const double* norms, double* y, int rows, int cols);

// dx += (dy - y * dot_row(dy, y)) / norm, for y = x / ||x||
void l2_normalize_rows_backward_serial(const double* y, const double* dy, const double* norms,
                                       double* dx, int rows, int cols);
void l2_normalize_rows_backward_omp(const double* y, const double* dy, const double* norms,
                                    double* dx, int rows, int cols);
void l2_normalize_rows_backward(const double* y, const double* dy, const double* norms, double* dx,
                                int rows, int cols);

// y = a + b; y = x * c; y += a * x
void add_serial(const double* a, const double* b, double* y, std::int64_t n);
void add_omp(const double* a, const double* b, double* y, std::int64_t n);
void add(const double* a, const double* b, double* y, std::int64_t n);

void scale_serial(const double* x, double* y, double c, std::int64_t n);
void scale_omp(const double* x, double* y, double c, std::int64_t n);
void scale(const double* x, double* y, double c, std::int64_t n);

void axpy_serial(double a, const double* x, double* y, std::int64_t n);
void axpy_omp(double a, const double* x, double* y, std::int64_t n);
void axpy(double a, const double* x, double* y, std::int64_t n);

// Serial on purpose: a parallel reduction would reorder the summation and
// break run-to-run bit determinism.
double sum(const double* x, std::int64_t n);
double dot(const double* a, const double* b, std::int64_t n);

}  // namespace iccd::kernels
