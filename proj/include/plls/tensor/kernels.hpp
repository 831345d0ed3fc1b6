#pragma once

#include <cstddef>
#include <span>

#include "plls/config.hpp"

// Dense compute kernels. Every kernel in the top-level namespace is
// OpenMP-parallel; the `serial` namespace keeps straightforward loop versions
// of the same contracts, used as test references and benchmark baselines.
//
// All matrices are row-major and contiguous. When `accumulate` is false the
// output is overwritten, otherwise the product is added to it.
namespace plls::inline PLLS_ABI::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;

  std::size_t out_height() const { return (height - kernel) / stride + 1; }
  std::size_t out_width() const { return (width - kernel) / stride + 1; }
  std::size_t patch_size() const { return in_channels * kernel * kernel; }
  std::size_t out_positions() const { return out_height() * out_width(); }
};

// C[m x n] (+)= A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate);
// C[m x n] (+)= A[m x k] * B[n x k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate);
// C[m x n] (+)= A[k x m]^T * B[k x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate);

// Unfolds a batch of [in_channels x height x width] images into a
// [patch_size x (batch * out_positions)] matrix; column b*P + p holds the
// window of output position p in image b.
void im2col(const ConvGeometry& g, const Real* images, Real* columns);
// Adjoint of im2col: scatters (adds) columns back into image layout.
void col2im(const ConvGeometry& g, const Real* columns, Real* images);

// Valid cross-correlation, input [B x C x H x W], kernels [F x C x k x k],
// bias [F] (may be null), output [B x F x H' x W'].
void conv2d_forward(const ConvGeometry& g, std::size_t filters, const Real* input,
                    const Real* kernels, const Real* bias, Real* output);

// Transposed convolution: the adjoint of conv2d_forward for a geometry whose
// input is the deconvolution output. `g` describes the *output* image
// ([B x out_channels x H x W]); the input is [B x in_channels x H' x W'] and
// kernels are [in_channels x out_channels x k x k].
void deconv2d_forward(const ConvGeometry& g, std::size_t in_channels, const Real* input,
                      const Real* kernels, const Real* bias, Real* output);

namespace serial {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate);
void conv2d_forward(const ConvGeometry& g, std::size_t filters, const Real* input,
                    const Real* kernels, const Real* bias, Real* output);
void deconv2d_forward(const ConvGeometry& g, std::size_t in_channels, const Real* input,
                      const Real* kernels, const Real* bias, Real* output);

}  // namespace serial

// Thread count used by the parallel kernels and rollout workers; 0 restores
// the OpenMP default.
void set_num_threads(int threads);
int num_threads();

}  // namespace plls::inline PLLS_ABI::kernels
