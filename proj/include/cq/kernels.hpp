#pragma once

#include <cstdint>

// Data-parallel kernels behind the tensor ops. Every kernel writes each
// output element from exactly one thread, so results are bit-identical for
// any thread count; reductions use fixed-order chunked accumulation for the
// same reason. GEMM dispatches to OpenBLAS (single-threaded, batch-level
// parallelism happens above it) or to the in-tree OpenMP implementation.
namespace cq::kernels {

enum class GemmBackend { Blas, OpenMP };

GemmBackend gemm_backend();
void set_gemm_backend(GemmBackend b);

// C = alpha * op(A) * op(B) + beta * C, row-major.
void gemm(bool ta, bool tb, int64_t M, int64_t N, int64_t K, float alpha,
          const float* A, int64_t lda, const float* B, int64_t ldb, float beta,
          float* C, int64_t ldc);

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// x: (C,H,W) -> col: (C*kh*kw, Hout*Wout)
void im2col(const float* x, int64_t C, int64_t H, int64_t W, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, float* col);

// col: (C*kh*kw, Hout*Wout) -> x: (C,H,W), overwriting x with the scatter sum
void col2im(const float* col, int64_t C, int64_t H, int64_t W, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, float* x);

// y (B,C,Ho,Wo) and argmax indices into the (H*W) plane
void maxpool2x2(const float* x, int64_t B, int64_t C, int64_t H, int64_t W,
                float* y, int32_t* argmax);
void maxpool2x2_backward(const float* dy, const int32_t* argmax, int64_t B,
                         int64_t C, int64_t H, int64_t W, float* dx);

void upsample2x(const float* x, int64_t B, int64_t C, int64_t H, int64_t W,
                float* y);
void upsample2x_backward(const float* dy, int64_t B, int64_t C, int64_t H,
                         int64_t W, float* dx);

// per-channel mean and biased variance over (B, HW); double accumulation
void bn_stats(const float* x, int64_t B, int64_t C, int64_t HW, float* mean,
              float* var);

// softmax over the channel dimension of (B,C,P), per pixel
void channel_softmax(const float* x, int64_t B, int64_t C, int64_t P, float* y);

// top-K softmax over the channel dimension; non-selected channels get 0.
// sel (B,K,P) records the selected channel indices (ties -> lowest index).
void topk_softmax(const float* x, int64_t B, int64_t C, int64_t P, int64_t K,
                  float* y, int32_t* sel);

// mean over contiguous channel slices [c*D/C, (c+1)*D/C) of h (B,D,P)
void pool_channels(const float* h, int64_t B, int64_t D, int64_t P, int64_t C,
                   float* out);
void pool_channels_backward(const float* dout, int64_t B, int64_t D, int64_t P,
                            int64_t C, float* dh);

// fixed-order chunked sum; deterministic for any thread count
double sum_all(const float* x, int64_t n);

}  // namespace cq::kernels

// Plain serial reference implementations used by tests and the kernel
// benchmark; kept deliberately naive.
namespace cq::ref {

void gemm(bool ta, bool tb, int64_t M, int64_t N, int64_t K, float alpha,
          const float* A, int64_t lda, const float* B, int64_t ldb, float beta,
          float* C, int64_t ldc);

void conv2d_direct(const float* x, const float* w, const float* bias,
                   int64_t B, int64_t Cin, int64_t H, int64_t W, int64_t Cout,
                   int64_t k, int64_t stride, int64_t pad, float* y);

void maxpool2x2(const float* x, int64_t B, int64_t C, int64_t H, int64_t W,
                float* y);

void upsample2x(const float* x, int64_t B, int64_t C, int64_t H, int64_t W,
                float* y);

void topk_softmax(const float* x, int64_t B, int64_t C, int64_t P, int64_t K,
                  float* y);

void pool_channels(const float* h, int64_t B, int64_t D, int64_t P, int64_t C,
                   float* out);

}  // namespace cq::ref
