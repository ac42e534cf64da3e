#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "purm/dist_math.hpp"
#include "purm/errors.hpp"

namespace purm {

// Overlap-based uncertainty of one reward distribution against a reference
// population: mean Bhattacharyya coefficient over a sliding window.
//
// Entries are kept forever and the window is applied at query time over the
// latest w; memory therefore grows with total pushes, which is fine at desk
// scale but worth an eviction policy in long-running services.
class DistributionBuffer {
 public:
  DistributionBuffer(int initial_size, std::int64_t window)
      : k_(initial_size), w_(window) {
    if (k_ < 1) throw std::invalid_argument("buffer: initial_size must be >= 1");
    if (w_ < 1) throw std::invalid_argument("buffer: window must be >= 1");
  }

  int initial_size() const { return k_; }
  std::int64_t window() const { return w_; }
  std::size_t size() const { return mu_.size(); }

  void push(const GaussianReward& d) {
    mu_.push_back(d.mu);
    sigma_.push_back(d.sigma());
  }

  // None until the buffer holds more than initial_size entries; afterwards
  // the mean closed-form BC of d against the latest min(window, size)
  // entries. When d is itself the newest entry, that entry is skipped so the
  // self-overlap of 1 does not dilute the average.
  std::optional<double> uncertainty_of(const GaussianReward& d) const {
    const std::int64_t n = static_cast<std::int64_t>(mu_.size());
    if (n <= k_) return std::nullopt;
    const double ds = d.sigma();
    const std::int64_t lo = (n > w_) ? n - w_ : 0;
    std::int64_t count = n - lo;
    double acc = 0.0;
    std::int64_t last = n;
    if (mu_.back() == d.mu && sigma_.back() == ds) {
      last = n - 1;
      --count;
      if (count == 0) return 1.0;  // window held only the query itself
    }
    for (std::int64_t i = lo; i < last; ++i) {
      acc += bc_closed_form(d.mu, ds, mu_[i], sigma_[i]);
    }
    return acc / static_cast<double>(count);
  }

  // Versioned little-endian snapshot; see restore() for the layout.
  std::vector<std::uint8_t> snapshot() const {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(24 + 16 * mu_.size());
    append_bytes(bytes, kMagic, 8);
    append_u64(bytes, 1);  // version
    append_u64(bytes, static_cast<std::uint64_t>(k_));
    append_u64(bytes, static_cast<std::uint64_t>(w_));
    append_u64(bytes, mu_.size());
    for (std::size_t i = 0; i < mu_.size(); ++i) {
      append_f64(bytes, mu_[i]);
      append_f64(bytes, sigma_[i]);
    }
    return bytes;
  }

  static DistributionBuffer restore(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    char magic[8];
    read_bytes(bytes, pos, magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) {
      throw DataError("buffer snapshot: bad magic");
    }
    const std::uint64_t version = read_u64(bytes, pos);
    if (version != 1) {
      throw DataError("buffer snapshot: unsupported version " +
                      std::to_string(version));
    }
    const std::uint64_t k = read_u64(bytes, pos);
    const std::uint64_t w = read_u64(bytes, pos);
    const std::uint64_t n = read_u64(bytes, pos);
    if (k < 1 || w < 1) throw DataError("buffer snapshot: bad header");
    if (bytes.size() - pos != 16 * n) {
      throw DataError("buffer snapshot: truncated payload");
    }
    DistributionBuffer buf(static_cast<int>(k), static_cast<std::int64_t>(w));
    buf.mu_.reserve(n);
    buf.sigma_.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      buf.mu_.push_back(read_f64(bytes, pos));
      const double s = read_f64(bytes, pos);
      if (!(s > 0.0)) throw DataError("buffer snapshot: non-positive sigma");
      buf.sigma_.push_back(s);
    }
    return buf;
  }

  // ordered (mu, sigma) views, oldest first
  const std::vector<double>& mus() const { return mu_; }
  const std::vector<double>& sigmas() const { return sigma_; }

 private:
  static constexpr char kMagic[9] = "PURMBUF\x01";

  static void append_bytes(std::vector<std::uint8_t>& out, const char* p,
                           std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(static_cast<std::uint8_t>(p[i]));
    }
  }
  static void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back((v >> (8 * b)) & 0xFF);
  }
  static void append_f64(std::vector<std::uint8_t>& out, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    append_u64(out, bits);
  }
  static void read_bytes(std::span<const std::uint8_t> in, std::size_t& pos,
                         char* p, std::size_t n) {
    if (pos + n > in.size()) throw DataError("buffer snapshot: truncated");
    std::memcpy(p, in.data() + pos, n);
    pos += n;
  }
  static std::uint64_t read_u64(std::span<const std::uint8_t> in,
                                std::size_t& pos) {
    if (pos + 8 > in.size()) throw DataError("buffer snapshot: truncated");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
      v |= static_cast<std::uint64_t>(in[pos + b]) << (8 * b);
    }
    pos += 8;
    return v;
  }
  static double read_f64(std::span<const std::uint8_t> in, std::size_t& pos) {
    const std::uint64_t bits = read_u64(in, pos);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
  }

  int k_;
  std::int64_t w_;
  std::vector<double> mu_;
  std::vector<double> sigma_;
};

// Mean pairwise Bhattacharyya coefficient over all unordered pairs:
// (2 / (N(N-1))) * sum_{i<j} BC(d_i, d_j).
inline double dataset_uncertainty(std::span<const GaussianReward> dists) {
  const std::size_t n = dists.size();
  if (n < 2) {
    throw std::invalid_argument("dataset_uncertainty: need >= 2 distributions");
  }
  std::vector<double> sig(n);
  for (std::size_t i = 0; i < n; ++i) sig[i] = dists[i].sigma();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      acc += bc_closed_form(dists[i].mu, sig[i], dists[j].mu, sig[j]);
    }
  }
  return 2.0 * acc / (static_cast<double>(n) * static_cast<double>(n - 1));
}

// r' = r - lambda * u.
inline double penalized_reward(double mu, double u, double lambda) {
  if (!(lambda >= 0.0)) {
    throw std::invalid_argument("penalized_reward: lambda must be >= 0");
  }
  return mu - lambda * u;
}

}  // namespace purm
