#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "plls/tensor/tensor.hpp"

namespace plls::inline PLLS_ABI::vae {

// Read-only collection of equally shaped samples (actions, frames, ...).
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual Shape sample_shape() const = 0;
  /// Writes samples `indices` back to back into `out`.
  virtual void gather(std::span<const std::size_t> indices, std::span<Real> out) const = 0;

  std::size_t sample_numel() const { return shape_numel(sample_shape()); }
  /// Stacks the chosen samples into a [n x sample_shape...] tensor.
  Tensor batch(std::span<const std::size_t> indices) const;
};

class DenseSamples final : public SampleSource {
 public:
  DenseSamples(Shape sample_shape, std::vector<Real> values);
  std::size_t size() const override { return count_; }
  Shape sample_shape() const override { return shape_; }
  void gather(std::span<const std::size_t> indices, std::span<Real> out) const override;

 private:
  Shape shape_;
  std::vector<Real> values_;
  std::size_t count_;
};

/// 8-bit samples decoded as value * scale.
class QuantizedSamples final : public SampleSource {
 public:
  QuantizedSamples(Shape sample_shape, std::vector<std::uint8_t> values, Real scale);
  std::size_t size() const override { return count_; }
  Shape sample_shape() const override { return shape_; }
  void gather(std::span<const std::size_t> indices, std::span<Real> out) const override;

 private:
  Shape shape_;
  std::vector<std::uint8_t> values_;
  Real scale_;
  std::size_t count_;
};

/// A subset of another source, in the given order.
class SubsetSamples final : public SampleSource {
 public:
  SubsetSamples(std::shared_ptr<const SampleSource> base, std::vector<std::size_t> indices);
  std::size_t size() const override { return indices_.size(); }
  Shape sample_shape() const override { return base_->sample_shape(); }
  void gather(std::span<const std::size_t> indices, std::span<Real> out) const override;

 private:
  std::shared_ptr<const SampleSource> base_;
  std::vector<std::size_t> indices_;
};

struct Split {
  std::shared_ptr<const SampleSource> train;
  std::shared_ptr<const SampleSource> test;
};

/// Seeded shuffle, then the first `train_count` samples train and the rest test.
Split split_samples(std::shared_ptr<const SampleSource> all, std::size_t train_count, std::uint64_t seed);
/// Same, with train_count = round(fraction * size).
Split split_fraction(std::shared_ptr<const SampleSource> all, double train_fraction, std::uint64_t seed);

}  // namespace plls::inline PLLS_ABI::vae
