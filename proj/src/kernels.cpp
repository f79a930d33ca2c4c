#include "cq/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include <cblas.h>
#include <omp.h>

namespace cq::kernels {

namespace {
GemmBackend g_backend = GemmBackend::Blas;

void scale_c(float* C, int64_t M, int64_t N, int64_t ldc, float beta) {
  if (beta == 1.0f) return;
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t i = 0; i < M; ++i) {
    float* row = C + i * ldc;
    if (beta == 0.0f) {
      std::memset(row, 0, sizeof(float) * static_cast<size_t>(N));
    } else {
      for (int64_t j = 0; j < N; ++j) row[j] *= beta;
    }
  }
}

void gemm_omp(bool ta, bool tb, int64_t M, int64_t N, int64_t K, float alpha,
              const float* A, int64_t lda, const float* B, int64_t ldb,
              float beta, float* C, int64_t ldc) {
  scale_c(C, M, N, ldc, beta);
  if (!ta && !tb) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
    for (int64_t i = 0; i < M; ++i) {
      float* crow = C + i * ldc;
      for (int64_t k = 0; k < K; ++k) {
        const float a = alpha * A[i * lda + k];
        if (a == 0.0f) continue;
        const float* brow = B + k * ldb;
#pragma omp simd
        for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  } else if (ta && !tb) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
    for (int64_t i = 0; i < M; ++i) {
      float* crow = C + i * ldc;
      for (int64_t k = 0; k < K; ++k) {
        const float a = alpha * A[k * lda + i];
        if (a == 0.0f) continue;
        const float* brow = B + k * ldb;
#pragma omp simd
        for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  } else if (!ta && tb) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
    for (int64_t i = 0; i < M; ++i) {
      const float* arow = A + i * lda;
      float* crow = C + i * ldc;
      for (int64_t j = 0; j < N; ++j) {
        const float* brow = B + j * ldb;
        float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
        for (int64_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
        crow[j] += alpha * acc;
      }
    }
  } else {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
    for (int64_t i = 0; i < M; ++i) {
      float* crow = C + i * ldc;
      for (int64_t j = 0; j < N; ++j) {
        float acc = 0.0f;
        for (int64_t k = 0; k < K; ++k) acc += A[k * lda + i] * B[j * ldb + k];
        crow[j] += alpha * acc;
      }
    }
  }
}
}  // namespace

GemmBackend gemm_backend() { return g_backend; }
void set_gemm_backend(GemmBackend b) { g_backend = b; }

void gemm(bool ta, bool tb, int64_t M, int64_t N, int64_t K, float alpha,
          const float* A, int64_t lda, const float* B, int64_t ldb, float beta,
          float* C, int64_t ldc) {
  if (M == 0 || N == 0) return;
  if (g_backend == GemmBackend::Blas) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
                tb ? CblasTrans : CblasNoTrans, static_cast<int>(M),
                static_cast<int>(N), static_cast<int>(K), alpha, A,
                static_cast<int>(lda), B, static_cast<int>(ldb), beta, C,
                static_cast<int>(ldc));
  } else {
    gemm_omp(ta, tb, M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
  }
}

void im2col(const float* x, int64_t C, int64_t H, int64_t W, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, float* col) {
  const int64_t Ho = conv_out_dim(H, kh, stride, pad);
  const int64_t Wo = conv_out_dim(W, kw, stride, pad);
  const int64_t rows = C * kh * kw;
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t kx = r % kw;
    const int64_t ky = (r / kw) % kh;
    const int64_t c = r / (kh * kw);
    const float* plane = x + c * H * W;
    float* out = col + r * Ho * Wo;
    for (int64_t oy = 0; oy < Ho; ++oy) {
      const int64_t y = oy * stride + ky - pad;
      if (y < 0 || y >= H) {
        std::memset(out + oy * Wo, 0, sizeof(float) * static_cast<size_t>(Wo));
        continue;
      }
      const float* src = plane + y * W;
      for (int64_t ox = 0; ox < Wo; ++ox) {
        const int64_t xx = ox * stride + kx - pad;
        out[oy * Wo + ox] = (xx >= 0 && xx < W) ? src[xx] : 0.0f;
      }
    }
  }
}

void col2im(const float* col, int64_t C, int64_t H, int64_t W, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, float* x) {
  const int64_t Ho = conv_out_dim(H, kh, stride, pad);
  const int64_t Wo = conv_out_dim(W, kw, stride, pad);
  // gather form: each input element sums its contributing col entries
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t c = 0; c < C; ++c) {
    float* plane = x + c * H * W;
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t xx = 0; xx < W; ++xx) {
        float acc = 0.0f;
        for (int64_t ky = 0; ky < kh; ++ky) {
          const int64_t ty = y + pad - ky;
          if (ty < 0 || ty % stride != 0) continue;
          const int64_t oy = ty / stride;
          if (oy >= Ho) continue;
          for (int64_t kx = 0; kx < kw; ++kx) {
            const int64_t tx = xx + pad - kx;
            if (tx < 0 || tx % stride != 0) continue;
            const int64_t ox = tx / stride;
            if (ox >= Wo) continue;
            const int64_t r = (c * kh + ky) * kw + kx;
            acc += col[r * Ho * Wo + oy * Wo + ox];
          }
        }
        plane[y * W + xx] = acc;
      }
    }
  }
}

void maxpool2x2(const float* x, int64_t B, int64_t C, int64_t H, int64_t W,
                float* y, int32_t* argmax) {
  const int64_t Ho = H / 2, Wo = W / 2;
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const float* plane = x + bc * H * W;
    float* out = y + bc * Ho * Wo;
    int32_t* amax = argmax + bc * Ho * Wo;
    for (int64_t oy = 0; oy < Ho; ++oy) {
      for (int64_t ox = 0; ox < Wo; ++ox) {
        const int64_t base = (2 * oy) * W + 2 * ox;
        int32_t best = static_cast<int32_t>(base);
        float v = plane[base];
        const int64_t cands[3] = {base + 1, base + W, base + W + 1};
        for (int64_t cand : cands) {
          if (plane[cand] > v) {
            v = plane[cand];
            best = static_cast<int32_t>(cand);
          }
        }
        out[oy * Wo + ox] = v;
        amax[oy * Wo + ox] = best;
      }
    }
  }
}

void maxpool2x2_backward(const float* dy, const int32_t* argmax, int64_t B,
                         int64_t C, int64_t H, int64_t W, float* dx) {
  const int64_t Ho = H / 2, Wo = W / 2;
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t bc = 0; bc < B * C; ++bc) {
    float* plane = dx + bc * H * W;
    const float* g = dy + bc * Ho * Wo;
    const int32_t* amax = argmax + bc * Ho * Wo;
    for (int64_t i = 0; i < Ho * Wo; ++i) plane[amax[i]] += g[i];
  }
}

void upsample2x(const float* x, int64_t B, int64_t C, int64_t H, int64_t W,
                float* y) {
  const int64_t Ho = H * 2, Wo = W * 2;
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const float* in = x + bc * H * W;
    float* out = y + bc * Ho * Wo;
    for (int64_t oy = 0; oy < Ho; ++oy) {
      const float* src = in + (oy / 2) * W;
      float* dst = out + oy * Wo;
      for (int64_t ox = 0; ox < Wo; ++ox) dst[ox] = src[ox / 2];
    }
  }
}

void upsample2x_backward(const float* dy, int64_t B, int64_t C, int64_t H,
                         int64_t W, float* dx) {
  const int64_t Wo = W * 2;
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const float* g = dy + bc * 4 * H * W;
    float* out = dx + bc * H * W;
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t x = 0; x < W; ++x) {
        const float* g00 = g + (2 * y) * Wo + 2 * x;
        out[y * W + x] += g00[0] + g00[1] + g00[Wo] + g00[Wo + 1];
      }
    }
  }
}

void bn_stats(const float* x, int64_t B, int64_t C, int64_t HW, float* mean,
              float* var) {
  const double n = static_cast<double>(B * HW);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (int64_t b = 0; b < B; ++b) {
      const float* p = x + (b * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) s += p[i];
    }
    const double mu = s / n;
    double v = 0.0;
    for (int64_t b = 0; b < B; ++b) {
      const float* p = x + (b * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) {
        const double d = p[i] - mu;
        v += d * d;
      }
    }
    mean[c] = static_cast<float>(mu);
    var[c] = static_cast<float>(v / n);
  }
}

void channel_softmax(const float* x, int64_t B, int64_t C, int64_t P, float* y) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t bp = 0; bp < B * P; ++bp) {
    const int64_t b = bp / P, p = bp % P;
    const float* in = x + b * C * P + p;
    float* out = y + b * C * P + p;
    float mx = in[0];
    for (int64_t c = 1; c < C; ++c) mx = std::max(mx, in[c * P]);
    double z = 0.0;
    for (int64_t c = 0; c < C; ++c) {
      const float e = std::exp(in[c * P] - mx);
      out[c * P] = e;
      z += e;
    }
    const float inv = static_cast<float>(1.0 / z);
    for (int64_t c = 0; c < C; ++c) out[c * P] *= inv;
  }
}

void topk_softmax(const float* x, int64_t B, int64_t C, int64_t P, int64_t K,
                  float* y, int32_t* sel) {
  assert(C <= 256 && K >= 1 && K <= C);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t bp = 0; bp < B * P; ++bp) {
    const int64_t b = bp / P, p = bp % P;
    const float* in = x + b * C * P + p;
    float* out = y + b * C * P + p;
    int32_t* s = sel + b * K * P + p;
    for (int64_t c = 0; c < C; ++c) out[c * P] = 0.0f;
    // K selection passes; strict > keeps the lowest index on ties
    bool taken[256] = {};
    float mx = -1e30f;
    for (int64_t k = 0; k < K; ++k) {
      int64_t best = -1;
      float bv = 0.0f;
      for (int64_t c = 0; c < C; ++c) {
        if (taken[c]) continue;
        if (best < 0 || in[c * P] > bv) {
          best = c;
          bv = in[c * P];
        }
      }
      taken[best] = true;
      s[k * P] = static_cast<int32_t>(best);
      if (k == 0) mx = bv;
    }
    double z = 0.0;
    for (int64_t k = 0; k < K; ++k) {
      const int64_t c = s[k * P];
      const float e = std::exp(in[c * P] - mx);
      out[c * P] = e;
      z += e;
    }
    const float inv = static_cast<float>(1.0 / z);
    for (int64_t k = 0; k < K; ++k) out[s[k * P] * P] *= inv;
  }
}

void pool_channels(const float* h, int64_t B, int64_t D, int64_t P, int64_t C,
                   float* out) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const int64_t b = bc / C, c = bc % C;
    const int64_t d0 = c * D / C, d1 = (c + 1) * D / C;
    const float inv = 1.0f / static_cast<float>(d1 - d0);
    float* dst = out + (b * C + c) * P;
    std::memset(dst, 0, sizeof(float) * static_cast<size_t>(P));
    for (int64_t d = d0; d < d1; ++d) {
      const float* src = h + (b * D + d) * P;
#pragma omp simd
      for (int64_t p = 0; p < P; ++p) dst[p] += src[p];
    }
#pragma omp simd
    for (int64_t p = 0; p < P; ++p) dst[p] *= inv;
  }
}

void pool_channels_backward(const float* dout, int64_t B, int64_t D, int64_t P,
                            int64_t C, float* dh) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t bd = 0; bd < B * D; ++bd) {
    const int64_t b = bd / D, d = bd % D;
    // inverse of the slice partition: largest c with floor(c*D/C) <= d
    const int64_t c = ((d + 1) * C + D - 1) / D - 1;
    const int64_t d0 = c * D / C, d1 = (c + 1) * D / C;
    (void)d0;
    const float inv = 1.0f / static_cast<float>(d1 - d0);
    const float* src = dout + (b * C + c) * P;
    float* dst = dh + (b * D + d) * P;
#pragma omp simd
    for (int64_t p = 0; p < P; ++p) dst[p] += src[p] * inv;
  }
}

double sum_all(const float* x, int64_t n) {
  constexpr int64_t kChunk = 1 << 14;
  const int64_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(static_cast<size_t>(chunks), 0.0);
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int64_t c = 0; c < chunks; ++c) {
    const int64_t lo = c * kChunk, hi = std::min(n, lo + kChunk);
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += x[i];
    partial[static_cast<size_t>(c)] = s;
  }
  double s = 0.0;
  for (double v : partial) s += v;
  return s;
}

}  // namespace cq::kernels

namespace cq::ref {

void gemm(bool ta, bool tb, int64_t M, int64_t N, int64_t K, float alpha,
          const float* A, int64_t lda, const float* B, int64_t ldb, float beta,
          float* C, int64_t ldc) {
  for (int64_t i = 0; i < M; ++i) {
    for (int64_t j = 0; j < N; ++j) {
      float acc = 0.0f;
      for (int64_t k = 0; k < K; ++k) {
        const float a = ta ? A[k * lda + i] : A[i * lda + k];
        const float b = tb ? B[j * ldb + k] : B[k * ldb + j];
        acc += a * b;
      }
      C[i * ldc + j] = alpha * acc + (beta == 0.0f ? 0.0f : beta * C[i * ldc + j]);
    }
  }
}

void conv2d_direct(const float* x, const float* w, const float* bias,
                   int64_t B, int64_t Cin, int64_t H, int64_t W, int64_t Cout,
                   int64_t k, int64_t stride, int64_t pad, float* y) {
  const int64_t Ho = cq::kernels::conv_out_dim(H, k, stride, pad);
  const int64_t Wo = cq::kernels::conv_out_dim(W, k, stride, pad);
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t co = 0; co < Cout; ++co) {
      for (int64_t oy = 0; oy < Ho; ++oy) {
        for (int64_t ox = 0; ox < Wo; ++ox) {
          float acc = bias ? bias[co] : 0.0f;
          for (int64_t ci = 0; ci < Cin; ++ci) {
            for (int64_t ky = 0; ky < k; ++ky) {
              const int64_t yy = oy * stride + ky - pad;
              if (yy < 0 || yy >= H) continue;
              for (int64_t kx = 0; kx < k; ++kx) {
                const int64_t xx = ox * stride + kx - pad;
                if (xx < 0 || xx >= W) continue;
                acc += x[((b * Cin + ci) * H + yy) * W + xx] *
                       w[((co * Cin + ci) * k + ky) * k + kx];
              }
            }
          }
          y[((b * Cout + co) * Ho + oy) * Wo + ox] = acc;
        }
      }
    }
  }
}

void maxpool2x2(const float* x, int64_t B, int64_t C, int64_t H, int64_t W,
                float* y) {
  const int64_t Ho = H / 2, Wo = W / 2;
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const float* plane = x + bc * H * W;
    float* out = y + bc * Ho * Wo;
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox) {
        const int64_t base = (2 * oy) * W + 2 * ox;
        float v = plane[base];
        v = std::max(v, plane[base + 1]);
        v = std::max(v, plane[base + W]);
        v = std::max(v, plane[base + W + 1]);
        out[oy * Wo + ox] = v;
      }
  }
}

void upsample2x(const float* x, int64_t B, int64_t C, int64_t H, int64_t W,
                float* y) {
  const int64_t Ho = H * 2, Wo = W * 2;
  for (int64_t bc = 0; bc < B * C; ++bc)
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox)
        y[bc * Ho * Wo + oy * Wo + ox] = x[bc * H * W + (oy / 2) * W + ox / 2];
}

void topk_softmax(const float* x, int64_t B, int64_t C, int64_t P, int64_t K,
                  float* y) {
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t p = 0; p < P; ++p) {
      const float* in = x + b * C * P + p;
      float* out = y + b * C * P + p;
      std::vector<int64_t> order(static_cast<size_t>(C));
      for (int64_t c = 0; c < C; ++c) order[static_cast<size_t>(c)] = c;
      std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t c) {
        return in[a * P] > in[c * P];
      });
      double z = 0.0;
      const float mx = in[order[0] * P];
      for (int64_t c = 0; c < C; ++c) out[c * P] = 0.0f;
      for (int64_t k = 0; k < K; ++k) {
        const int64_t c = order[static_cast<size_t>(k)];
        out[c * P] = std::exp(in[c * P] - mx);
        z += out[c * P];
      }
      for (int64_t k = 0; k < K; ++k)
        out[order[static_cast<size_t>(k)] * P] /= static_cast<float>(z);
    }
  }
}

void pool_channels(const float* h, int64_t B, int64_t D, int64_t P, int64_t C,
                   float* out) {
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      const int64_t d0 = c * D / C, d1 = (c + 1) * D / C;
      for (int64_t p = 0; p < P; ++p) {
        double s = 0.0;
        for (int64_t d = d0; d < d1; ++d) s += h[(b * D + d) * P + p];
        out[(b * C + c) * P + p] = static_cast<float>(s / static_cast<double>(d1 - d0));
      }
    }
}

}  // namespace cq::ref
