#pragma once

// Staged command outputs and the plain-text run record written beside them.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "emfield/errors.hpp"

namespace emfield::cli
{

/// Files are written under "<name>.partial" and renamed into place by
/// commit(). Anything staged but not committed is deleted on destruction, so
/// a failing command leaves no outputs behind.
class OutputSet
{
public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir))
  {
    std::error_code ec;
    if (!std::filesystem::exists(dir_))
    {
      std::filesystem::create_directories(dir_, ec);
      if (ec)
      {
        throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
      }
      created_dir_ = true;
    }
    else if (!std::filesystem::is_directory(dir_))
    {
      throw IoError("output path is not a directory: " + dir_.string());
    }
  }

  OutputSet(const OutputSet &) = delete;
  OutputSet &operator=(const OutputSet &) = delete;

  ~OutputSet()
  {
    if (committed_)
    {
      return;
    }
    std::error_code ec;
    for (const auto &[tmp, final_path] : staged_)
    {
      std::filesystem::remove(tmp, ec);
    }
    if (created_dir_ && std::filesystem::is_empty(dir_, ec))
    {
      std::filesystem::remove(dir_, ec);
    }
  }

  /// Temporary path to write `name` to.
  std::filesystem::path stage(const std::string &name)
  {
    const auto final_path = dir_ / name;
    auto tmp = final_path;
    tmp += ".partial";
    staged_.emplace_back(tmp, final_path);
    return tmp;
  }

  std::vector<std::filesystem::path> final_paths() const
  {
    std::vector<std::filesystem::path> out;
    for (const auto &s : staged_)
    {
      out.push_back(s.second);
    }
    return out;
  }

  void commit()
  {
    for (const auto &[tmp, final_path] : staged_)
    {
      std::error_code ec;
      std::filesystem::rename(tmp, final_path, ec);
      if (ec)
      {
        throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
      }
    }
    committed_ = true;
  }

  const std::filesystem::path &dir() const { return dir_; }

private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;
  bool created_dir_ = false;
  bool committed_ = false;
};

/// Ordered key/value report.
class RunRecord
{
public:
  explicit RunRecord(std::string command) { add("command", std::move(command)); }

  template <typename T>
  void add(const std::string &key, const T &value)
  {
    std::ostringstream os;
    os.precision(17);
    os << value;
    entries_.emplace_back(key, os.str());
  }

  void add_crc(const std::string &key, std::uint32_t crc)
  {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    entries_.emplace_back(key, buf);
  }

  std::string str() const
  {
    std::string out;
    for (const auto &[k, v] : entries_)
    {
      out += k + ": " + v + "\n";
    }
    return out;
  }

  void write(const std::filesystem::path &path) const
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
    {
      throw IoError("cannot write run record " + path.string());
    }
    out << str();
  }

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

class Stopwatch
{
public:
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace emfield::cli
