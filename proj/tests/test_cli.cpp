#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "emfield/dataset_io.hpp"
#include "test_support.hpp"

using emfield::testing::TempDir;
namespace fs = std::filesystem;

namespace
{

const std::string kCli = EMFIELD_CLI_PATH;
const fs::path kData = fs::path(EMFIELD_DATA_DIR) / "synthetic64";

struct Run
{
  int code;
  std::string out;
};

Run run(const std::string &args)
{
  const std::string cmd = kCli + " " + args + " 2>/dev/null";
  FILE *pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe))
  {
    out.append(buf.data(), n);
  }
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::map<std::string, std::string> parse_record(const std::string &text)
{
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
  {
    const auto colon = line.find(": ");
    if (colon != std::string::npos && line.compare(0, colon, "output") != 0)
    {
      kv[line.substr(0, colon)] = line.substr(colon + 2);
    }
  }
  return kv;
}

std::string slurp(const fs::path &p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// copy of the bundled scene with some keys replaced
fs::path variant(const TempDir &dir, const std::string &name, const std::map<std::string, std::string> &over)
{
  std::ifstream in(kData / "synthetic64.manifest");
  std::ofstream out(dir / name);
  for (std::string line; std::getline(in, line);)
  {
    const auto key = line.substr(0, line.find(' '));
    if (over.count(key) == 0)
    {
      out << line << "\n";
    }
  }
  for (const auto &[k, v] : over)
  {
    if (!v.empty())
    {
      out << k << " = " << v << "\n";
    }
  }
  fs::copy_file(kData / "mask.png", dir / "mask.png", fs::copy_options::skip_existing);
  fs::copy_file(kData / "truth.png", dir / "truth.png", fs::copy_options::skip_existing);
  return dir / name;
}

}  // namespace

TEST_CASE("selftest passes on the documented instance")
{
  const Run r = run("selftest --size 12 --seed 7");
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("selftest size=12 seed=7: PASS") != std::string::npos);
  CHECK(run("selftest --size 3").code == 1);
}

TEST_CASE("incident writes the field, heatmap and run record")
{
  TempDir dir;
  const auto out = dir / "inc";
  REQUIRE(run("incident " + (kData / "synthetic64.manifest").string() + " --out " + out.string()).code == 0);
  CHECK(fs::exists(out / "incident.emfg"));
  CHECK(fs::exists(out / "incident_magnitude.png"));
  const auto record = slurp(out / "incident.record.txt");
  std::istringstream in(record);
  int outputs = 0;
  for (std::string line; std::getline(in, line);)
  {
    if (line.rfind("output: ", 0) == 0)
    {
      CHECK(fs::exists(line.substr(8)));
      ++outputs;
    }
  }
  CHECK(outputs == 3);
  const auto kv = parse_record(record);
  CHECK(kv.at("grid") == "64x64");
  CHECK(kv.at("mask_crc32").size() == 8);
  const auto img = emfield::io::read_image(out / "incident_magnitude.png");
  CHECK(img.pixels[8 * 64 + 11] == img.pixels[11 * 64 + 8]);  // symmetric about the transmitter
  CHECK(fs::directory_iterator(out) != fs::directory_iterator());
  for (const auto &e : fs::directory_iterator(out))
  {
    CHECK(e.path().extension() != ".partial");
  }
}

TEST_CASE("missing mask fails without partial outputs")
{
  TempDir dir;
  const auto manifest = variant(dir, "broken.manifest", {{"mask_path", "nowhere.png"}});
  const auto out = dir / "never";
  const Run r = run("incident " + manifest.string() + " --out " + out.string());
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(out));
  const Run s = run("solve " + manifest.string() + " --out " + out.string());
  CHECK(s.code == 2);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("validation failures exit with code 1")
{
  TempDir dir;
  const auto out = (dir / "o").string();
  const auto inside = variant(dir, "tx.manifest", {{"tx_row", "25"}, {"tx_col", "25"}});
  CHECK(run("solve " + inside.string() + " --out " + out).code == 1);
  CHECK_FALSE(fs::exists(dir / "o"));
  const auto manifest = (kData / "synthetic64.manifest").string();
  CHECK(run("reconstruct " + manifest + " --out " + out + " --lambda-vie 0").code == 1);
  CHECK(run("solve " + manifest + " --out " + out + " --tol 2").code == 1);
  CHECK(run("baseline " + manifest + " --out " + out + " --model cost231").code == 1);
  CHECK(run("solve --out " + out).code == 1);
  CHECK(run("frobnicate").code == 1);
}

TEST_CASE("free-space solve reproduces the incident file byte for byte")
{
  TempDir dir;
  const auto manifest = variant(dir, "vacuum.manifest", {{"eps_r", "1"}, {"sigma_s_per_m", "0"}});
  REQUIRE(run("incident " + manifest.string() + " --out " + (dir / "a").string()).code == 0);
  REQUIRE(run("solve " + manifest.string() + " --out " + (dir / "b").string()).code == 0);
  const auto inc = slurp(dir / "a" / "incident.emfg");
  CHECK(inc.size() == 20 + 64 * 64 * 8 + 4);
  CHECK(inc == slurp(dir / "b" / "total.emfg"));
  CHECK(parse_record(slurp(dir / "b" / "solve.record.txt")).at("solve_iterations") == "0");
}

TEST_CASE("solve is deterministic and its field satisfies the VIE")
{
  TempDir dir;
  const auto manifest = (kData / "synthetic64.manifest").string();
  REQUIRE(run("solve " + manifest + " --out " + (dir / "a").string()).code == 0);
  REQUIRE(run("solve " + manifest + " --out " + (dir / "b").string()).code == 0);
  CHECK(slurp(dir / "a" / "total.emfg") == slurp(dir / "b" / "total.emfg"));
  CHECK(slurp(dir / "a" / "pathloss.emfg") == slurp(dir / "b" / "pathloss.emfg"));
  const auto kv = parse_record(slurp(dir / "a" / "solve.record.txt"));
  CHECK(kv.at("solve_converged") == "true");
  CHECK(kv.at("tol") == "1e-08");
  CHECK(std::stod(kv.at("solve_final_residual")) <= 1e-8);

  const Run loss = run("loss " + manifest + " " + (dir / "a" / "total.emfg").string());
  REQUIRE(loss.code == 0);
  const auto lk = parse_record(loss.out);
  CHECK(lk.at("beta") == "0.10000000000000001");
  CHECK(lk.at("lambda_pde") == "0.5");
  // float32 storage limits how small the residual can be
  CHECK(std::stod(lk.at("loss_vie")) < 1e-10);
  const Run inc_loss = run("loss " + manifest + " " + (dir / "a" / "total.emfg").string() + " --pde-sign 1");
  CHECK(parse_record(inc_loss.out).at("pde_sign") == "1");
}

TEST_CASE("metrics of a map against itself")
{
  const auto truth = (kData / "truth.png").string();
  const Run r = run("metrics " + truth + " " + truth);
  REQUIRE(r.code == 0);
  const auto kv = parse_record(r.out);
  CHECK(kv.at("nmse") == "0");
  CHECK(kv.at("nmse_db") == "-inf");
  CHECK(kv.at("ssim") == "1");
  CHECK(kv.at("ssim_mode") == "global");
  CHECK(run("metrics " + truth + " " + truth + " --ssim-mode windowed").code == 0);
  CHECK(run("metrics " + truth + " /nonexistent.png").code == 2);
}

TEST_CASE("reconstruct writes the field and a loss history")
{
  TempDir dir;
  const auto manifest = (kData / "synthetic64.manifest").string();
  const auto out = dir / "rec";
  REQUIRE(run("reconstruct " + manifest + " --out " + out.string() + " --lambda-pde 0 --lambda-vie 1 --max-iters 40").code == 0);
  for (const char *f : {"reconstructed.emfg", "loss_history.txt", "pathloss.emfg", "pathloss.png", "reconstruct.record.txt"})
  {
    CHECK(fs::exists(out / f));
  }
  std::ifstream hist(out / "loss_history.txt");
  std::string header;
  std::getline(hist, header);
  CHECK(header.rfind("#", 0) == 0);
  int lines = 0;
  double prev = 1e300;
  for (std::string line; std::getline(hist, line); ++lines)
  {
    std::istringstream ls(line);
    int it;
    double pde, vie, composite;
    ls >> it >> pde >> vie >> composite;
    CHECK(it == lines);
    CHECK(composite <= prev);
    prev = composite;
  }
  CHECK(lines == 41);
  const auto kv = parse_record(slurp(out / "reconstruct.record.txt"));
  CHECK(kv.at("lambda_pde") == "0");
  CHECK(kv.at("pde_sign") == "-1");
  CHECK(kv.at("reconstruct_iterations") == "40");
}

TEST_CASE("baseline maps")
{
  TempDir dir;
  const auto manifest = (kData / "synthetic64.manifest").string();
  REQUIRE(run("baseline " + manifest + " --out " + (dir / "ld").string() + " --n 3 --pl0 20 --d0 2").code == 0);
  REQUIRE(run("baseline " + manifest + " --out " + (dir / "fs").string() + " --model free-space --colormap viridis").code == 0);
  const auto db = emfield::io::array_from_portable(emfield::io::load_grid(dir / "ld" / "baseline_db.emfg"));
  CHECK(db(8, 8) == doctest::Approx(20.0));
  CHECK(db(8, 28) == doctest::Approx(20.0 + 30.0).epsilon(1e-6));
  CHECK(emfield::io::read_image(dir / "fs" / "baseline.png").channels == 3);
  const auto kv = parse_record(slurp(dir / "ld" / "baseline.record.txt"));
  CHECK(kv.count("nmse_db_vs_truth") == 1);
}

TEST_CASE("batch mode processes every manifest in a directory")
{
  TempDir dir;
  const auto scenes = dir / "scenes";
  fs::create_directories(scenes);
  TempDir staging;
  for (const char *name : {"a", "b", "c"})
  {
    const auto m = variant(staging, std::string(name) + ".manifest",
                           {{"tx_col", std::to_string(3 + 2 * (name[0] - 'a'))}, {"mask_path", (kData / "mask.png").string()},
                            {"truth_path", ""}});
    fs::copy_file(m, scenes / m.filename());
  }
  const auto out = dir / "out";
  ::setenv("EMFIELD_THREADS", "2", 1);
  const Run r = run("solve --manifest-dir " + scenes.string() + " --out " + out.string() + " --tol 1e-6");
  CHECK(r.code == 0);
  for (const char *name : {"a", "b", "c"})
  {
    CHECK(fs::exists(out / name / "total.emfg"));
  }
  CHECK(slurp(out / "a" / "total.emfg") != slurp(out / "b" / "total.emfg"));

  // one bad scene: the others still finish, the exit code reports the failure
  std::ofstream(scenes / "d.manifest") << "height = 64\n";
  const Run bad = run("incident --manifest-dir " + scenes.string() + " --out " + (dir / "out2").string());
  CHECK(bad.code == 1);
  CHECK(fs::exists(dir / "out2" / "c" / "incident.emfg"));
  CHECK_FALSE(fs::exists(dir / "out2" / "d"));
}
