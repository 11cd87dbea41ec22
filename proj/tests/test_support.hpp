#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Core>

#include "emfield/grid.hpp"

namespace emfield::testing
{

inline Eigen::Map<const Eigen::VectorXcd> flat(const ComplexFieldd &f)
{
  return {f.values.data(), f.values.size()};
}

inline double rel_l2(const ComplexFieldd &a, const ComplexFieldd &b)
{
  return (flat(a) - flat(b)).norm() / flat(b).norm();
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
  TempDir()
  {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("emfield_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir()
  {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

}  // namespace emfield::testing
