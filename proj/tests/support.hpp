#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <abdo/metrics.hpp>
#include <abdo/volume.hpp>

namespace testing_support {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("abdo_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline abdo::Geometry grid(abdo::Shape shape, abdo::Spacing spacing = {1.0, 1.0, 1.0}) {
  return abdo::Geometry(shape, spacing);
}

/// Box [lo, hi) set to 1.
inline abdo::BinaryMask box_mask(const abdo::Geometry& g, abdo::Index3 lo, abdo::Index3 hi) {
  abdo::BinaryMask m(g, 0);
  for (auto z = lo[2]; z < hi[2]; ++z)
    for (auto y = lo[1]; y < hi[1]; ++y)
      for (auto x = lo[0]; x < hi[0]; ++x) m(x, y, z) = 1;
  return m;
}

/// Random blobby mask: a few random boxes plus sprinkled voxels.
inline abdo::BinaryMask random_mask(const abdo::Geometry& g, std::mt19937_64& rng) {
  abdo::BinaryMask m(g, 0);
  const auto& s = g.shape();
  std::uniform_int_distribution<int> boxes(1, 3);
  const int nb = boxes(rng);
  for (int b = 0; b < nb; ++b) {
    abdo::Index3 lo{}, hi{};
    for (int k = 0; k < 3; ++k) {
      std::uniform_int_distribution<std::int64_t> pos(0, s[k] - 1);
      auto a = pos(rng), c = pos(rng);
      if (a > c) std::swap(a, c);
      lo[k] = a;
      hi[k] = c + 1;
    }
    for (auto z = lo[2]; z < hi[2]; ++z)
      for (auto y = lo[1]; y < hi[1]; ++y)
        for (auto x = lo[0]; x < hi[0]; ++x) m(x, y, z) = 1;
  }
  std::bernoulli_distribution sprinkle(0.03);
  for (auto& v : m.data())
    if (sprinkle(rng)) v = 1;
  return m;
}

}  // namespace testing_support
