#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "msgpca/eigen_state.hpp"

namespace msgpca {

// A seedable stream of samples. Identical seeds give identical sequences.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual Index dim() const = 0;
  virtual Sample next() = 0;
  // A fresh stream of the same source with a different seed.
  virtual std::unique_ptr<Sampler> clone(std::uint64_t seed) const = 0;
};

// Discrete distribution over the standard basis: e_i is drawn with
// probability Sigma_ii where Sigma_ii = tau^-i / sum_j tau^-j, so that
// E[x x^T] = diag(Sigma) and ||x|| = 1 for every sample.
class OrthogonalDistribution final : public Sampler {
 public:
  explicit OrthogonalDistribution(Index dim = 32, double tau = 1.1, std::uint64_t seed = 0);

  Index dim() const override { return second_moments_.size(); }
  Sample next() override;
  std::unique_ptr<Sampler> clone(std::uint64_t seed) const override;

  // Index of the next basis vector, advancing the stream.
  Index next_direction();
  double tau() const { return tau_; }
  // Diagonal of E[x x^T]; sums to one.
  const Eigen::VectorXd& second_moments() const { return second_moments_; }

 private:
  double tau_;
  Eigen::VectorXd second_moments_;
  std::mt19937_64 rng_;
  std::discrete_distribution<int> pick_;
};

// Two-point source in R^2: [sqrt 3, 0] with probability 1/3 and [0, sqrt 2]
// with probability 2/3. E[x x^T] = diag(1, 4/3).
class TrapDistribution final : public Sampler {
 public:
  explicit TrapDistribution(std::uint64_t seed = 0);

  Index dim() const override { return 2; }
  Sample next() override;
  std::unique_ptr<Sampler> clone(std::uint64_t seed) const override;

  static Eigen::VectorXd second_moments();

 private:
  std::mt19937_64 rng_;
};

struct Split {
  std::vector<Index> train;
  std::vector<Index> validation;
  std::vector<Index> test;
};

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// In-memory data set, one sample per row.
struct DatasetSource {
  RowMatrixF rows;
  std::optional<Split> split;

  Index size() const { return rows.rows(); }
  Index dim() const { return rows.cols(); }
  Sample sample(Index i) const { return rows.row(i).transpose().cast<double>(); }
  // Rows listed in `indices` as a double matrix.
  Eigen::MatrixXd gather(const std::vector<Index>& indices) const;
};

// Reads a big-endian IDX file. The first axis indexes samples and the
// remaining axes are flattened, so 28x28 images become 784-vectors and a
// rank-1 label file yields scalar samples. Unsigned-byte data is scaled to
// [0, 1]; other element types are converted as-is.
//
// Throws BadMagic, TruncatedFile, UnsupportedElementType or DataError (I/O).
DatasetSource load_idx(const std::filesystem::path& path);

// Writes an unsigned-byte IDX file with the given axes (first axis =
// samples). Used to build fixtures.
void write_idx_u8(const std::filesystem::path& path, const std::vector<std::uint8_t>& payload,
                  const std::vector<std::uint32_t>& shape);

// Seeded 40/20/40 train/validation/test split of n samples. The rounding
// residue goes to the test split. Requires n >= 5.
Split split(Index n, std::uint64_t seed);

struct NormalizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // divisor applied after centering
};

// Centering and scaling statistics from the train split (all rows when no
// split is attached). Features are divided by std * sqrt(d'), d' being the
// number of features with nonzero variance, so E||x||^2 = 1 on the train
// split. Zero-variance features are only centered.
NormalizationStats normalization_stats(const DatasetSource& data);
DatasetSource normalize(const DatasetSource& data);
DatasetSource apply_normalization(const DatasetSource& data, const NormalizationStats& stats);

// Flat little-endian cache: "MSGPCA01", uint64 d, uint64 n, n*d float32.
void write_cache(const std::filesystem::path& path, const DatasetSource& data);
DatasetSource read_cache(const std::filesystem::path& path);

// read_cache for files starting with the cache magic, load_idx otherwise.
DatasetSource load_dataset(const std::filesystem::path& path);

// Single pass over selected rows of a data set in a seeded random order.
class DatasetSampler final : public Sampler {
 public:
  DatasetSampler(std::shared_ptr<const DatasetSource> data, std::vector<Index> rows,
                 std::uint64_t seed);

  Index dim() const override { return data_->dim(); }
  Sample next() override;  // throws StreamExhausted after the last row
  std::unique_ptr<Sampler> clone(std::uint64_t seed) const override;

  Index remaining() const { return static_cast<Index>(order_.size()) - position_; }

 private:
  std::shared_ptr<const DatasetSource> data_;
  std::vector<Index> rows_;
  std::vector<Index> order_;
  Index position_ = 0;
};

}  // namespace msgpca
