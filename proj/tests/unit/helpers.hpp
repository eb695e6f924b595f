#pragma once

#include <atomic>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include <unistd.h>

#include "sdss/label_core.hpp"
#include "sdss/sim.hpp"

namespace testing {

inline constexpr sdss::Label I = sdss::kIgnore;

inline sdss::LabelMap map_of(std::size_t w, std::size_t h, std::size_t k, std::initializer_list<sdss::Label> v) {
  return sdss::LabelMap(w, h, k, std::vector<sdss::Label>(v));
}

/// Row of K probabilities per pixel, given pixel-major for readability.
inline sdss::ProbVolume volume_of(std::size_t w, std::size_t h, std::size_t k, const std::vector<std::vector<float>>& pixels,
                                  bool normalized = true) {
  std::vector<float> data(w * h * k);
  for (std::size_t p = 0; p < pixels.size(); ++p)
    for (std::size_t c = 0; c < k; ++c) data[c * w * h + p] = pixels[p][c];
  return sdss::ProbVolume(w, h, k, std::move(data), normalized);
}

/// Uniformly random labels, with ignore at the given rate.
inline sdss::LabelMap random_map(sdss::Rng& rng, std::size_t w, std::size_t h, std::size_t k, double ignore_rate) {
  sdss::LabelMap m(w, h, k);
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = rng.bernoulli(ignore_rate) ? sdss::kIgnore : static_cast<sdss::Label>(rng.below(k));
  return m;
}

/// Dirichlet-ish normalized volume; some pixels get exact ties.
inline sdss::ProbVolume random_volume(sdss::Rng& rng, std::size_t w, std::size_t h, std::size_t k) {
  const std::size_t n = w * h;
  std::vector<float> data(n * k);
  std::vector<double> raw(k);
  for (std::size_t p = 0; p < n; ++p) {
    double sum = 0;
    const bool tie = k > 1 && rng.bernoulli(0.05);
    for (auto& r : raw) sum += (r = tie ? 1.0 : -std::log(1.0 - rng.uniform()));
    for (std::size_t c = 0; c < k; ++c) data[c * n + p] = static_cast<float>(raw[c] / sum);
  }
  return sdss::ProbVolume(w, h, k, std::move(data), true);
}

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sdss_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
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

}  // namespace testing
