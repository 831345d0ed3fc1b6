#include "plls/vae/samples.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::vae {

Tensor SampleSource::batch(std::span<const std::size_t> indices) const {
  Shape shape{indices.size()};
  const Shape sample = sample_shape();
  shape.insert(shape.end(), sample.begin(), sample.end());
  Tensor out(shape);
  gather(indices, out.data());
  return out;
}

DenseSamples::DenseSamples(Shape sample_shape, std::vector<Real> values)
    : shape_(std::move(sample_shape)), values_(std::move(values)) {
  const std::size_t n = shape_numel(shape_);
  if (values_.size() % n != 0) throw DimensionError("dense samples: value count not a multiple of sample size");
  count_ = values_.size() / n;
}

void DenseSamples::gather(std::span<const std::size_t> indices, std::span<Real> out) const {
  const std::size_t n = shape_numel(shape_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(indices[i] * n), n, out.begin() + i * n);
  }
}

QuantizedSamples::QuantizedSamples(Shape sample_shape, std::vector<std::uint8_t> values, Real scale)
    : shape_(std::move(sample_shape)), values_(std::move(values)), scale_(scale) {
  const std::size_t n = shape_numel(shape_);
  if (values_.size() % n != 0) throw DimensionError("quantized samples: value count not a multiple of sample size");
  count_ = values_.size() / n;
}

void QuantizedSamples::gather(std::span<const std::size_t> indices, std::span<Real> out) const {
  const std::size_t n = shape_numel(shape_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::uint8_t* src = values_.data() + indices[i] * n;
    Real* dst = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] = static_cast<Real>(src[j]) * scale_;
  }
}

SubsetSamples::SubsetSamples(std::shared_ptr<const SampleSource> base, std::vector<std::size_t> indices)
    : base_(std::move(base)), indices_(std::move(indices)) {}

void SubsetSamples::gather(std::span<const std::size_t> indices, std::span<Real> out) const {
  std::vector<std::size_t> mapped(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) mapped[i] = indices_.at(indices[i]);
  base_->gather(mapped, out);
}

Split split_samples(std::shared_ptr<const SampleSource> all, std::size_t train_count, std::uint64_t seed) {
  const std::size_t n = all->size();
  if (train_count > n) throw std::invalid_argument("split: train count exceeds sample count");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
  return {std::make_shared<SubsetSamples>(all, std::move(train)), std::make_shared<SubsetSamples>(all, std::move(test))};
}

Split split_fraction(std::shared_ptr<const SampleSource> all, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction <= 1)) throw std::invalid_argument("split: fraction outside (0, 1]");
  const auto count = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(all->size())));
  return split_samples(std::move(all), count, seed);
}

}  // namespace plls::inline PLLS_ABI::vae
