#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "emfield/dataset_io.hpp"
#include "emfield/errors.hpp"

namespace emfield::io
{

namespace
{

std::string trim(const std::string &s)
{
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos)
  {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string &key, const std::string &value)
{
  double out = 0.0;
  const auto *end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
  {
    throw ValidationError("manifest key '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

long parse_long(const std::string &key, const std::string &value)
{
  long out = 0;
  const auto *end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
  {
    throw ValidationError("manifest key '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path &base, const std::string &value)
{
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

void require_file(const std::filesystem::path &p, const char *key)
{
  if (!std::filesystem::is_regular_file(p))
  {
    throw IoError(std::string("manifest ") + key + " does not exist: " + p.string());
  }
}

}  // namespace

SceneManifest parse_manifest(const std::string &text, const std::filesystem::path &base_dir)
{
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line))
  {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
    {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty())
    {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
    {
      throw ValidationError("manifest line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
    {
      throw ValidationError("manifest line " + std::to_string(lineno) + ": empty key or value");
    }
    if (!kv.emplace(key, value).second)
    {
      throw ValidationError("manifest key '" + key + "' given twice");
    }
  }

  auto take = [&](const std::string &key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end())
    {
      return std::nullopt;
    }
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto need = [&](const std::string &key) {
    auto v = take(key);
    if (!v)
    {
      throw ValidationError("manifest is missing required key '" + key + "'");
    }
    return *v;
  };

  SceneManifest m;
  m.height = parse_long("height", need("height"));
  m.width = parse_long("width", need("width"));
  m.pixel_length_m = parse_double("pixel_length_m", need("pixel_length_m"));
  m.frequency_hz = parse_double("frequency_hz", need("frequency_hz"));
  m.tx_row = parse_long("tx_row", need("tx_row"));
  m.tx_col = parse_long("tx_col", need("tx_col"));
  if (auto v = take("eps_r"))
  {
    m.eps_r = parse_double("eps_r", *v);
  }
  if (auto v = take("sigma_s_per_m"))
  {
    m.sigma_s_per_m = parse_double("sigma_s_per_m", *v);
  }
  m.mask_path = resolve(base_dir, need("mask_path"));
  if (auto v = take("truth_path"))
  {
    m.truth_path = resolve(base_dir, *v);
  }
  if (auto v = take("terrain_path"))
  {
    m.terrain_path = resolve(base_dir, *v);
  }
  m.window.min_db = parse_double("norm_min_db", need("norm_min_db"));
  m.window.max_db = parse_double("norm_max_db", need("norm_max_db"));
  if (!kv.empty())
  {
    throw ValidationError("manifest has unknown key '" + kv.begin()->first + "'");
  }
  m.window.validate();
  detail::require(m.height >= 2 && m.width >= 2, "manifest grid must be at least 2x2");
  return m;
}

SceneManifest read_manifest(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw IoError("cannot open manifest " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  SceneManifest m = parse_manifest(buffer.str(), path.parent_path());
  m.source = path;
  return m;
}

LoadedScene load_scene(const std::filesystem::path &manifest_path)
{
  LoadedScene out;
  out.manifest = read_manifest(manifest_path);
  const SceneManifest &m = out.manifest;

  // existence of everything first, so nothing is computed on a broken manifest
  require_file(m.mask_path, "mask_path");
  if (m.truth_path)
  {
    require_file(*m.truth_path, "truth_path");
  }
  if (m.terrain_path)
  {
    require_file(*m.terrain_path, "terrain_path");
  }

  const GridSpec grid = make_grid(m.height, m.width, m.pixel_length_m, m.frequency_hz);
  MaskArray mask = load_building_mask(m.mask_path);
  detail::require(mask.rows() == grid.rows() && mask.cols() == grid.cols(),
                  "mask " + m.mask_path.string() + " is " + std::to_string(mask.cols()) + "x" +
                      std::to_string(mask.rows()) + ", manifest declares " +
                      std::to_string(m.width) + "x" + std::to_string(m.height));
  if (m.terrain_path)
  {
    auto terrain = image_to_gray(read_image(*m.terrain_path), LumaReduction::reject);
    detail::require(terrain.rows() == grid.rows() && terrain.cols() == grid.cols(),
                    "terrain image dimensions do not match the manifest");
    out.terrain = std::move(terrain);
  }
  if (m.truth_path)
  {
    out.truth = load_groundtruth_map(*m.truth_path, grid, m.window);
  }
  out.scene = make_scene(grid, std::move(mask), m.tx_row, m.tx_col, {m.eps_r, m.sigma_s_per_m});
  return out;
}

}  // namespace emfield::io
