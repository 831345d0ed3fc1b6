#include "plls/tensor/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace plls::inline PLLS_ABI::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1u << 15;

void transpose(std::size_t rows, std::size_t cols, const Real* in, Real* out) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((m + 3) / 4);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i = static_cast<std::size_t>(blk) * 4;
    if (i + 4 <= m) {
      Real* c0 = c + i * n;
      Real* c1 = c0 + n;
      Real* c2 = c1 + n;
      Real* c3 = c2 + n;
      if (!accumulate) {
        std::fill(c0, c0 + 4 * n, Real{0});
      }
      const Real* a0 = a + i * k;
      const Real* a1 = a0 + k;
      const Real* a2 = a1 + k;
      const Real* a3 = a2 + k;
      for (std::size_t p = 0; p < k; ++p) {
        const Real v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
        const Real* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) {
          const Real bv = bp[j];
          c0[j] += v0 * bv;
          c1[j] += v1 * bv;
          c2[j] += v2 * bv;
          c3[j] += v3 * bv;
        }
      }
    } else {
      for (std::size_t r = i; r < m; ++r) {
        Real* cr = c + r * n;
        if (!accumulate) std::fill(cr, cr + n, Real{0});
        const Real* ar = a + r * k;
        for (std::size_t p = 0; p < k; ++p) {
          const Real v = ar[p];
          const Real* bp = b + p * n;
          for (std::size_t j = 0; j < n; ++j) cr[j] += v * bp[j];
        }
      }
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  std::vector<Real> bt(k * n);
  transpose(n, k, b, bt.data());
  gemm_nn(m, n, k, a, bt.data(), c, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  std::vector<Real> at(m * k);
  transpose(k, m, a, at.data());
  gemm_nn(m, n, k, at.data(), b, c, accumulate);
}

void im2col(const ConvGeometry& g, const Real* images, Real* columns) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), positions = ho * wo;
  const std::size_t row_len = g.batch * positions;
  const std::size_t image_size = g.in_channels * g.height * g.width;
  const auto rows = static_cast<std::ptrdiff_t>(g.patch_size());
#pragma omp parallel for schedule(static) if (g.patch_size() * row_len > kParallelWork)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t row = static_cast<std::size_t>(r);
    const std::size_t kj = row % g.kernel;
    const std::size_t ki = (row / g.kernel) % g.kernel;
    const std::size_t ch = row / (g.kernel * g.kernel);
    Real* out = columns + row * row_len;
    for (std::size_t b = 0; b < g.batch; ++b) {
      const Real* plane = images + b * image_size + ch * g.height * g.width;
      for (std::size_t oy = 0; oy < ho; ++oy) {
        const Real* src = plane + (oy * g.stride + ki) * g.width + kj;
        Real* dst = out + b * positions + oy * wo;
        for (std::size_t ox = 0; ox < wo; ++ox) dst[ox] = src[ox * g.stride];
      }
    }
  }
}

void col2im(const ConvGeometry& g, const Real* columns, Real* images) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), positions = ho * wo;
  const std::size_t row_len = g.batch * positions;
  const std::size_t image_size = g.in_channels * g.height * g.width;
  const auto channels = static_cast<std::ptrdiff_t>(g.in_channels);
#pragma omp parallel for schedule(static) if (g.patch_size() * row_len > kParallelWork)
  for (std::ptrdiff_t c = 0; c < channels; ++c) {
    const std::size_t ch = static_cast<std::size_t>(c);
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const std::size_t row = (ch * g.kernel + ki) * g.kernel + kj;
        const Real* in = columns + row * row_len;
        for (std::size_t b = 0; b < g.batch; ++b) {
          Real* plane = images + b * image_size + ch * g.height * g.width;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            Real* dst = plane + (oy * g.stride + ki) * g.width + kj;
            const Real* src = in + b * positions + oy * wo;
            for (std::size_t ox = 0; ox < wo; ++ox) dst[ox * g.stride] += src[ox];
          }
        }
      }
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::size_t filters, const Real* input,
                    const Real* kernels, const Real* bias, Real* output) {
  const std::size_t positions = g.out_positions();
  const std::size_t cols = g.batch * positions;
  std::vector<Real> columns(g.patch_size() * cols);
  im2col(g, input, columns.data());
  std::vector<Real> product(filters * cols);
  gemm_nn(filters, cols, g.patch_size(), kernels, columns.data(), product.data(), false);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t f = 0; f < filters; ++f) {
      const Real shift = bias ? bias[f] : Real{0};
      const Real* src = product.data() + f * cols + b * positions;
      Real* dst = output + (b * filters + f) * positions;
      for (std::size_t p = 0; p < positions; ++p) dst[p] = src[p] + shift;
    }
  }
}

void deconv2d_forward(const ConvGeometry& g, std::size_t in_channels, const Real* input,
                      const Real* kernels, const Real* bias, Real* output) {
  const std::size_t positions = g.out_positions();
  const std::size_t cols = g.batch * positions;
  // Channel-major gather: [in_channels x batch*positions].
  std::vector<Real> gathered(in_channels * cols);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < in_channels; ++c)
      std::copy_n(input + (b * in_channels + c) * positions, positions,
                  gathered.data() + c * cols + b * positions);
  std::vector<Real> columns(g.patch_size() * cols);
  gemm_tn(g.patch_size(), cols, in_channels, kernels, gathered.data(), columns.data(), false);
  const std::size_t plane = g.height * g.width;
  std::fill(output, output + g.batch * g.in_channels * plane, Real{0});
  col2im(g, columns.data(), output);
  if (bias) {
    for (std::size_t b = 0; b < g.batch; ++b)
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        Real* dst = output + (b * g.in_channels + c) * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] += bias[c];
      }
  }
}

namespace serial {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Real sum = accumulate ? c[i * n + j] : Real{0};
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = sum;
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Real sum = accumulate ? c[i * n + j] : Real{0};
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[j * k + p];
      c[i * n + j] = sum;
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Real sum = accumulate ? c[i * n + j] : Real{0};
      for (std::size_t p = 0; p < k; ++p) sum += a[p * m + i] * b[p * n + j];
      c[i * n + j] = sum;
    }
}

void conv2d_forward(const ConvGeometry& g, std::size_t filters, const Real* input,
                    const Real* kernels, const Real* bias, Real* output) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t f = 0; f < filters; ++f)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          Real sum = bias ? bias[f] : Real{0};
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ki = 0; ki < k; ++ki)
              for (std::size_t kj = 0; kj < k; ++kj) {
                const Real x = input[((b * g.in_channels + c) * g.height + oy * g.stride + ki) * g.width +
                                     ox * g.stride + kj];
                sum += x * kernels[((f * g.in_channels + c) * k + ki) * k + kj];
              }
          output[((b * filters + f) * ho + oy) * wo + ox] = sum;
        }
}

void deconv2d_forward(const ConvGeometry& g, std::size_t in_channels, const Real* input,
                      const Real* kernels, const Real* bias, Real* output) {
  const std::size_t hi = g.out_height(), wi = g.out_width(), k = g.kernel;
  const std::size_t co = g.in_channels;
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < co; ++c)
      for (std::size_t p = 0; p < g.height * g.width; ++p)
        output[(b * co + c) * g.height * g.width + p] = bias ? bias[c] : Real{0};
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t ci = 0; ci < in_channels; ++ci)
      for (std::size_t y = 0; y < hi; ++y)
        for (std::size_t x = 0; x < wi; ++x) {
          const Real v = input[((b * in_channels + ci) * hi + y) * wi + x];
          for (std::size_t c = 0; c < co; ++c)
            for (std::size_t ki = 0; ki < k; ++ki)
              for (std::size_t kj = 0; kj < k; ++kj)
                output[((b * co + c) * g.height + y * g.stride + ki) * g.width + x * g.stride + kj] +=
                    v * kernels[((ci * co + c) * k + ki) * k + kj];
        }
}

}  // namespace serial

void set_num_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) {
    omp_set_num_threads(threads);
  } else {
    omp_set_num_threads(omp_get_num_procs());
  }
#else
  (void)threads;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace plls::inline PLLS_ABI::kernels
