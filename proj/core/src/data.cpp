#include "msgpca/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <string_view>

#include "msgpca/error.hpp"

namespace msgpca {
namespace {

constexpr std::array<char, 8> kCacheMagic = {'M', 'S', 'G', 'P', 'C', 'A', '0', '1'};

template <typename T>
T from_big_endian(const unsigned char* bytes) {
  T value;
  std::array<unsigned char, sizeof(T)> buf;
  std::memcpy(buf.data(), bytes, sizeof(T));
  if constexpr (std::endian::native == std::endian::little) std::reverse(buf.begin(), buf.end());
  std::memcpy(&value, buf.data(), sizeof(T));
  return value;
}

template <typename T>
void write_little_endian(std::ostream& out, T value) {
  std::array<char, sizeof(T)> buf;
  std::memcpy(buf.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  out.write(buf.data(), sizeof(T));
}

template <typename T>
T read_little_endian(std::istream& in, const std::filesystem::path& path) {
  std::array<char, sizeof(T)> buf;
  if (!in.read(buf.data(), sizeof(T))) {
    throw TruncatedFile("dataset cache " + path.string() + " is truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  T value;
  std::memcpy(&value, buf.data(), sizeof(T));
  return value;
}

std::size_t element_size(unsigned char type) {
  switch (type) {
    case 0x08:
    case 0x09:
      return 1;
    case 0x0B:
      return 2;
    case 0x0C:
    case 0x0D:
      return 4;
    case 0x0E:
      return 8;
    default:
      return 0;
  }
}

float decode_element(unsigned char type, const unsigned char* p) {
  switch (type) {
    case 0x08:
      return static_cast<float>(p[0]) / 255.0f;
    case 0x09:
      return static_cast<float>(static_cast<signed char>(p[0]));
    case 0x0B:
      return static_cast<float>(from_big_endian<std::int16_t>(p));
    case 0x0C:
      return static_cast<float>(from_big_endian<std::int32_t>(p));
    case 0x0D:
      return from_big_endian<float>(p);
    default:
      return static_cast<float>(from_big_endian<double>(p));
  }
}

}  // namespace

OrthogonalDistribution::OrthogonalDistribution(Index dim, double tau, std::uint64_t seed)
    : tau_(tau), second_moments_(dim), rng_(seed) {
  if (dim <= 0) throw InvalidConfig("OrthogonalDistribution: dimension must be positive");
  if (!(tau > 1.0) || !std::isfinite(tau)) {
    throw InvalidConfig("OrthogonalDistribution: decay tau must be a finite value > 1");
  }
  // tau^-i relative to tau^-1 to stay representable for large tau.
  const double log_tau = std::log(tau);
  for (Index i = 0; i < dim; ++i) second_moments_[i] = std::exp(-static_cast<double>(i) * log_tau);
  second_moments_ /= second_moments_.sum();
  pick_ = std::discrete_distribution<int>(second_moments_.data(),
                                          second_moments_.data() + second_moments_.size());
}

Index OrthogonalDistribution::next_direction() { return pick_(rng_); }

Sample OrthogonalDistribution::next() { return Sample::Unit(dim(), next_direction()); }

std::unique_ptr<Sampler> OrthogonalDistribution::clone(std::uint64_t seed) const {
  return std::make_unique<OrthogonalDistribution>(dim(), tau_, seed);
}

TrapDistribution::TrapDistribution(std::uint64_t seed) : rng_(seed) {}

Sample TrapDistribution::next() {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Sample x = Sample::Zero(2);
  if (uniform(rng_) < 1.0 / 3.0) {
    x[0] = std::sqrt(3.0);
  } else {
    x[1] = std::sqrt(2.0);
  }
  return x;
}

std::unique_ptr<Sampler> TrapDistribution::clone(std::uint64_t seed) const {
  return std::make_unique<TrapDistribution>(seed);
}

Eigen::VectorXd TrapDistribution::second_moments() {
  Eigen::VectorXd m(2);
  m << 1.0, 4.0 / 3.0;
  return m;
}

Eigen::MatrixXd DatasetSource::gather(const std::vector<Index>& indices) const {
  Eigen::MatrixXd out(static_cast<Index>(indices.size()), dim());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Index>(i)) = rows.row(indices[i]).cast<double>();
  }
  return out;
}

DatasetSource load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());

  std::array<unsigned char, 4> magic{};
  if (!in.read(reinterpret_cast<char*>(magic.data()), 4)) {
    throw TruncatedFile(path.string() + ": missing IDX header");
  }
  if (magic[0] != 0 || magic[1] != 0 || magic[3] == 0) {
    throw BadMagic(path.string() + ": not an IDX file (bad magic number)");
  }
  const unsigned char type = magic[2];
  const std::size_t width = element_size(type);
  if (width == 0) {
    throw UnsupportedElementType(path.string() + ": unsupported IDX element type 0x" +
                                 std::to_string(static_cast<int>(type)));
  }

  const int rank = magic[3];
  std::vector<std::uint32_t> dims(static_cast<std::size_t>(rank));
  for (auto& extent : dims) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
      throw TruncatedFile(path.string() + ": truncated IDX dimension list");
    }
    extent = from_big_endian<std::uint32_t>(b.data());
  }
  const auto n = static_cast<Index>(dims[0]);
  Index d = 1;
  for (std::size_t a = 1; a < dims.size(); ++a) d *= static_cast<Index>(dims[a]);

  DatasetSource out;
  out.rows.resize(n, d);
  std::vector<unsigned char> row_bytes(static_cast<std::size_t>(d) * width);
  for (Index i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(row_bytes.data()),
                 static_cast<std::streamsize>(row_bytes.size()))) {
      throw TruncatedFile(path.string() + ": payload truncated at sample " + std::to_string(i) +
                          " of " + std::to_string(n));
    }
    for (Index j = 0; j < d; ++j) {
      out.rows(i, j) = decode_element(type, row_bytes.data() + static_cast<std::size_t>(j) * width);
    }
  }
  return out;
}

void write_idx_u8(const std::filesystem::path& path, const std::vector<std::uint8_t>& payload,
                  const std::vector<std::uint32_t>& shape) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::array<char, 4> magic = {0, 0, 0x08, static_cast<char>(shape.size())};
  out.write(magic.data(), 4);
  for (std::uint32_t extent : shape) {
    const std::array<char, 4> b = {static_cast<char>(extent >> 24), static_cast<char>(extent >> 16),
                                   static_cast<char>(extent >> 8), static_cast<char>(extent)};
    out.write(b.data(), 4);
  }
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
}

Split split(Index n, std::uint64_t seed) {
  if (n < 5) throw DataError("split: need at least 5 samples, got " + std::to_string(n));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto train = static_cast<std::size_t>((n * 2) / 5);
  const auto validation = static_cast<std::size_t>(n / 5);
  Split out;
  out.train.assign(order.begin(), order.begin() + train);
  out.validation.assign(order.begin() + train, order.begin() + train + validation);
  out.test.assign(order.begin() + train + validation, order.end());
  return out;
}

NormalizationStats normalization_stats(const DatasetSource& data) {
  std::vector<Index> rows;
  if (data.split) {
    rows = data.split->train;
  } else {
    rows.resize(static_cast<std::size_t>(data.size()));
    std::iota(rows.begin(), rows.end(), Index{0});
  }
  if (rows.empty()) throw DataError("normalize: empty training set");

  const Index d = data.dim();
  NormalizationStats stats;
  stats.mean = Eigen::VectorXd::Zero(d);
  for (Index i : rows) stats.mean += data.rows.row(i).transpose().cast<double>();
  stats.mean /= static_cast<double>(rows.size());

  Eigen::VectorXd variance = Eigen::VectorXd::Zero(d);
  for (Index i : rows) {
    variance += (data.rows.row(i).transpose().cast<double>() - stats.mean).array().square().matrix();
  }
  variance /= static_cast<double>(rows.size());

  const Eigen::VectorXd stddev = variance.cwiseSqrt();
  Index varying = 0;
  for (Index j = 0; j < d; ++j) varying += stddev[j] > 1e-12 ? 1 : 0;
  const double dim_factor = std::sqrt(static_cast<double>(std::max<Index>(varying, 1)));
  stats.scale.resize(d);
  for (Index j = 0; j < d; ++j) stats.scale[j] = stddev[j] > 1e-12 ? stddev[j] * dim_factor : 1.0;
  return stats;
}

DatasetSource apply_normalization(const DatasetSource& data, const NormalizationStats& stats) {
  if (stats.mean.size() != data.dim() || stats.scale.size() != data.dim()) {
    throw DimensionMismatch("apply_normalization: statistics do not match the data dimension");
  }
  DatasetSource out;
  out.split = data.split;
  out.rows.resize(data.size(), data.dim());
  for (Index i = 0; i < data.size(); ++i) {
    out.rows.row(i) = ((data.rows.row(i).transpose().cast<double>() - stats.mean).array() /
                       stats.scale.array())
                          .matrix()
                          .transpose()
                          .cast<float>();
  }
  return out;
}

DatasetSource normalize(const DatasetSource& data) {
  if (data.size() == 0) throw DataError("normalize: empty dataset");
  return apply_normalization(data, normalization_stats(data));
}

void write_cache(const std::filesystem::path& path, const DatasetSource& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kCacheMagic.data(), kCacheMagic.size());
  write_little_endian<std::uint64_t>(out, static_cast<std::uint64_t>(data.dim()));
  write_little_endian<std::uint64_t>(out, static_cast<std::uint64_t>(data.size()));
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.dim(); ++j) write_little_endian<float>(out, data.rows(i, j));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

DatasetSource read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size())) throw TruncatedFile(path.string() + ": missing header");
  if (magic != kCacheMagic) throw BadMagic(path.string() + ": not a dataset cache");
  const auto d = static_cast<Index>(read_little_endian<std::uint64_t>(in, path));
  const auto n = static_cast<Index>(read_little_endian<std::uint64_t>(in, path));
  DatasetSource out;
  out.rows.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) out.rows(i, j) = read_little_endian<float>(in, path);
  }
  return out;
}

DatasetSampler::DatasetSampler(std::shared_ptr<const DatasetSource> data, std::vector<Index> rows,
                               std::uint64_t seed)
    : data_(std::move(data)), rows_(std::move(rows)), order_(rows_) {
  std::mt19937_64 rng(seed);
  std::shuffle(order_.begin(), order_.end(), rng);
}

Sample DatasetSampler::next() {
  if (position_ >= static_cast<Index>(order_.size())) {
    throw StreamExhausted("dataset stream exhausted after " + std::to_string(order_.size()) +
                          " samples");
  }
  return data_->sample(order_[static_cast<std::size_t>(position_++)]);
}

std::unique_ptr<Sampler> DatasetSampler::clone(std::uint64_t seed) const {
  return std::make_unique<DatasetSampler>(data_, rows_, seed);
}

DatasetSource load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  in.close();
  if (std::string_view(magic, sizeof magic) == "MSGPCA01") return read_cache(path);
  return load_idx(path);
}

}  // namespace msgpca
