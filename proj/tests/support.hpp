#ifndef TSFORGE_TESTS_SUPPORT_HPP
#define TSFORGE_TESTS_SUPPORT_HPP

#include "tsforge/core_data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

namespace testing {

using namespace tsforge;

/// Scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag = "tsforge") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
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

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Vector sinusoid(Index n, double period, double amplitude = 1.0, double phase = 0.0) {
  Vector v(n);
  for (Index t = 0; t < n; ++t) v(t) = amplitude * std::sin(2 * std::numbers::pi * static_cast<double>(t) / period + phase);
  return v;
}

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

/// Windows of a phase- and amplitude-jittered sinusoid family with a little noise.
inline Matrix sinusoid_family(Index instances, Index length, std::mt19937_64& rng, double period = 25.0) {
  std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi), amp(0.8, 1.2);
  std::normal_distribution<double> noise(0.0, 0.05);
  Matrix m(instances, length);
  for (Index i = 0; i < instances; ++i) {
    const double p = phase(rng), a = amp(rng);
    for (Index t = 0; t < length; ++t)
      m(i, t) = a * std::sin(2 * std::numbers::pi * static_cast<double>(t) / period + p) + noise(rng);
  }
  return m;
}

/// Pearson correlation of two equally long vectors.
template <typename A, typename B>
double correlation(const A& a, const B& b) {
  const Vector x = a.reshaped().array() - a.mean();
  const Vector y = b.reshaped().array() - b.mean();
  return x.dot(y) / (x.norm() * y.norm());
}

}  // namespace testing

#endif  // TSFORGE_TESTS_SUPPORT_HPP
