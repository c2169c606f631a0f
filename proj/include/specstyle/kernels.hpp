// include/specstyle/kernels.hpp
//
// Flat-array arithmetic kernels behind the tensor ops. Every entry point has
// a scalar reference implementation and, on x86-64, an AVX2+FMA variant; the
// backend is picked once at startup (cpuid + SPECSTYLE_KERNELS override) and
// can be switched explicitly for equivalence testing.
//
// Determinism contract: for a fixed backend, every kernel reduces in a fixed
// order, so identical inputs give bitwise-identical outputs.

#pragma once

#include <cstddef>

namespace specstyle::kernels {

enum class Backend { scalar, avx2 };

// Currently active backend.
Backend active_backend();

// Best backend this CPU supports (after the env override).
Backend best_backend();

// Switch backends; returns false (and keeps the old one) if unsupported.
bool set_backend(Backend b);

const char* backend_name(Backend b);

// ---- elementwise / reduction kernels, float and double -------------------

float dot(const float* a, const float* b, size_t n);
double dot(const double* a, const double* b, size_t n);

// y[i] += alpha * x[i]
void axpy(float alpha, const float* x, float* y, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);

void add(const float* a, const float* b, float* out, size_t n);
void add(const double* a, const double* b, double* out, size_t n);

void sub(const float* a, const float* b, float* out, size_t n);
void sub(const double* a, const double* b, double* out, size_t n);

void mul(const float* a, const float* b, float* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);

void scale(float alpha, const float* x, float* out, size_t n);
void scale(double alpha, const double* x, double* out, size_t n);

float sum(const float* x, size_t n);
double sum(const double* x, size_t n);

// sum_i (a[i] - b[i])^2
float sumsq_diff(const float* a, const float* b, size_t n);
double sumsq_diff(const double* a, const double* b, size_t n);

// out[i] = max(0, x[i])
void relu(const float* x, float* out, size_t n);
void relu(const double* x, double* out, size_t n);

// gin[i] += gout[i] where x[i] > 0  (subgradient 0 at x == 0)
void relu_backward(const float* x, const float* gout, float* gin, size_t n);
void relu_backward(const double* x, const double* gout, double* gin, size_t n);

// C[m x n] += A[m x k] * B[k x n], all row-major.
void matmul_nn_accum(float* c, const float* a, const float* b,
                     size_t m, size_t k, size_t n);
void matmul_nn_accum(double* c, const double* a, const double* b,
                     size_t m, size_t k, size_t n);

// C[m x n] += A[m x k] * B[n x k]^T, i.e. C[i][j] += dot(A_i, B_j).
void matmul_nt_accum(float* c, const float* a, const float* b,
                     size_t m, size_t k, size_t n);
void matmul_nt_accum(double* c, const double* a, const double* b,
                     size_t m, size_t k, size_t n);

// Bias-corrected Adam update for one parameter block.
// g_eff = g + wd * p;  m = b1*m + (1-b1)*g_eff;  v = b2*v + (1-b2)*g_eff^2;
// p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)  with bc1 = 1-b1^t, bc2 = 1-b2^t.
void adam_update(float* p, const float* g, float* m, float* v, size_t n,
                 float lr, float b1, float b2, float eps, float wd,
                 float bc1, float bc2);
void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double b1, double b2, double eps, double wd,
                 double bc1, double bc2);

}  // namespace specstyle::kernels
