#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace cameo {

// Row-major kernels. Each output row is produced by exactly one OpenMP
// thread with a fixed arithmetic order, so results are bit-identical for any
// thread count.

// C[M x N] = A[M x K] * B[K x N]
template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    T* crow = c + std::size_t(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = T(0);
    const T* arow = a + std::size_t(i) * k;
    for (int p = 0; p < k; ++p) {
      T av = arow[p];
      const T* brow = b + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M x N] = A[M x K] * B[N x K]^T
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* arow = a + std::size_t(i) * k;
    T* crow = c + std::size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + std::size_t(j) * k;
      T s = T(0);
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = s;
    }
  }
}

// C[K x N] += A[M x K]^T * B[M x N]
template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < k; ++i) {
    T* crow = c + std::size_t(i) * n;
    for (int p = 0; p < m; ++p) {
      T av = a[std::size_t(p) * k + i];
      const T* brow = b + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void matmul_acc(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    T* crow = c + std::size_t(i) * n;
    const T* arow = a + std::size_t(i) * k;
    for (int p = 0; p < k; ++p) {
      T av = arow[p];
      const T* brow = b + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M x N] += A[M x K] * B[N x K]^T
template <typename T>
void matmul_nt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* arow = a + std::size_t(i) * k;
    T* crow = c + std::size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + std::size_t(j) * k;
      T s = T(0);
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

// In-place row-wise softmax with max subtraction; rows of length n.
template <typename T>
void softmax_rows(T* x, int rows, int n) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    T* row = x + std::size_t(r) * n;
    T mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    T inv = T(1) / sum;
    for (int j = 0; j < n; ++j) row[j] *= inv;
  }
}

// d_logits[r] = probs[r] * (d_probs[r] - dot(d_probs[r], probs[r]))
template <typename T>
void softmax_backward_rows(const T* probs, const T* d_probs, T* d_logits,
                           int rows, int n) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const T* p = probs + std::size_t(r) * n;
    const T* dp = d_probs + std::size_t(r) * n;
    T* dl = d_logits + std::size_t(r) * n;
    T dotv = T(0);
    for (int j = 0; j < n; ++j) dotv += dp[j] * p[j];
    for (int j = 0; j < n; ++j) dl[j] = p[j] * (dp[j] - dotv);
  }
}

template <typename T>
T gelu_tanh(T x) {
  const T k = T(0.7978845608028654);  // sqrt(2/pi)
  T inner = k * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(inner));
}

template <typename T>
T gelu_tanh_grad(T x) {
  const T k = T(0.7978845608028654);
  T x3 = x * x * x;
  T inner = k * (x + T(0.044715) * x3);
  T th = std::tanh(inner);
  T sech2 = T(1) - th * th;
  return T(0.5) * (T(1) + th) +
         T(0.5) * x * sech2 * k * (T(1) + T(0.134145) * x * x);
}

// Per-row layernorm over feature dim n, with scale g and shift b.
template <typename T>
void layernorm_forward(const T* x, const T* g, const T* b, T* out, T* mean,
                       T* rstd, int rows, int n) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const T* row = x + std::size_t(r) * n;
    T m = T(0);
    for (int j = 0; j < n; ++j) m += row[j];
    m /= T(n);
    T v = T(0);
    for (int j = 0; j < n; ++j) {
      T d = row[j] - m;
      v += d * d;
    }
    v /= T(n);
    T rs = T(1) / std::sqrt(v + T(1e-5));
    mean[r] = m;
    rstd[r] = rs;
    T* orow = out + std::size_t(r) * n;
    for (int j = 0; j < n; ++j) orow[j] = (row[j] - m) * rs * g[j] + b[j];
  }
}

template <typename T>
void layernorm_backward(const T* x, const T* g, const T* mean, const T* rstd,
                        const T* d_out, T* d_x_acc, T* d_g_acc, T* d_b_acc,
                        int rows, int n) {
  // d_g/d_b are shared across rows; accumulate serially to stay
  // deterministic (cost is rows*n, negligible next to the matmuls).
  for (int r = 0; r < rows; ++r) {
    const T* row = x + std::size_t(r) * n;
    const T* dout = d_out + std::size_t(r) * n;
    T m = mean[r], rs = rstd[r];
    for (int j = 0; j < n; ++j) {
      T xhat = (row[j] - m) * rs;
      d_g_acc[j] += dout[j] * xhat;
      d_b_acc[j] += dout[j];
    }
  }
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const T* row = x + std::size_t(r) * n;
    const T* dout = d_out + std::size_t(r) * n;
    T* dx = d_x_acc + std::size_t(r) * n;
    T m = mean[r], rs = rstd[r];
    T sum1 = T(0), sum2 = T(0);
    for (int j = 0; j < n; ++j) {
      T xhat = (row[j] - m) * rs;
      T dy = dout[j] * g[j];
      sum1 += dy;
      sum2 += dy * xhat;
    }
    sum1 /= T(n);
    sum2 /= T(n);
    for (int j = 0; j < n; ++j) {
      T xhat = (row[j] - m) * rs;
      T dy = dout[j] * g[j];
      dx[j] += (dy - sum1 - xhat * sum2) * rs;
    }
  }
}

// Column sums: out[j] += sum_i a[i, j]
template <typename T>
void colsum_acc(const T* a, T* out, int rows, int n) {
  for (int r = 0; r < rows; ++r) {
    const T* row = a + std::size_t(r) * n;
    for (int j = 0; j < n; ++j) out[j] += row[j];
  }
}

}  // namespace cameo
