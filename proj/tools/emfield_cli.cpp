// emfield: scene -> incident field -> forward solve / reconstruction ->
// path-loss map -> metrics, plus the oracle self-test.
//
// Exit codes: 0 success, 1 validation error, 2 IO error, 3 numerical
// breakdown, 4 self-test failure.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "emfield/dataset_io.hpp"
#include "emfield/exposure_map.hpp"
#include "emfield/greens_operator.hpp"
#include "emfield/metrics.hpp"
#include "emfield/physics_losses.hpp"
#include "emfield/reconstructor.hpp"
#include "emfield/selftest.hpp"
#include "emfield/vie_solver.hpp"
#include "run_record.hpp"

namespace fs = std::filesystem;
using namespace emfield;
using emfield::cli::OutputSet;
using emfield::cli::RunRecord;
using emfield::cli::Stopwatch;

namespace
{

enum ExitCode
{
  kOk = 0,
  kValidation = 1,
  kIo = 2,
  kBreakdown = 3,
  kSelfTestFailed = 4,
};

struct CommonOptions
{
  std::string manifest;
  std::string manifest_dir;
  std::string out;
  std::string colormap = "grayscale";
  double ref_db = 0.0;
};

struct SolveFlags
{
  double tol = 1e-8;
  int max_iter = 2000;
};

struct ReconstructFlags
{
  LossWeights weights;
  int max_iters = 5000;
  double step_init = 1.0;
  double grad_tol = 1e-8;
  double loss_tol = 1e-12;
  bool free_space_pde = false;
};

struct LossFlags
{
  std::string manifest;
  std::string field;
  LossWeights weights;
  bool free_space_pde = false;
};

struct MetricsFlags
{
  std::string pred;
  std::string truth;
  std::string ssim_mode = "global";
  double c1 = 1e-4;
  double c2 = 9e-4;
};

struct BaselineFlags
{
  std::string model = "log-distance";
  double exponent = 2.0;
  double pl0_db = 40.0;
  double d0 = 1.0;
};

struct SelfTestFlags
{
  int size = 12;
  std::uint64_t seed = 7;
};

io::Colormap parse_colormap(const std::string &name)
{
  if (name == "grayscale")
  {
    return io::Colormap::grayscale;
  }
  if (name == "viridis")
  {
    return io::Colormap::viridis;
  }
  throw ValidationError("unknown colormap '" + name + "'");
}

PathLossConfig pathloss_config(const io::SceneManifest &m, double ref_db)
{
  PathLossConfig cfg;
  cfg.window = m.window;
  cfg.floor_db = m.window.min_db;
  cfg.ref_db = ref_db;
  cfg.normalize = true;
  return cfg;
}

void record_inputs(RunRecord &rec, const io::LoadedScene &loaded)
{
  const auto &m = loaded.manifest;
  rec.add("manifest", m.source.string());
  rec.add_crc("manifest_crc32", io::file_crc32(m.source));
  rec.add("mask_path", m.mask_path.string());
  rec.add_crc("mask_crc32", io::file_crc32(m.mask_path));
  if (m.truth_path)
  {
    rec.add("truth_path", m.truth_path->string());
    rec.add_crc("truth_crc32", io::file_crc32(*m.truth_path));
  }
  const auto &g = loaded.scene.grid;
  rec.add("grid", std::to_string(g.rows()) + "x" + std::to_string(g.cols()));
  rec.add("pixel_length_m", g.pixel_length());
  rec.add("frequency_hz", g.frequency());
  rec.add("wavenumber_rad_per_m", g.wavenumber());
  rec.add("sampling_ratio_k0h", g.sampling_ratio());
  rec.add("tx", std::to_string(loaded.scene.tx_row) + "," + std::to_string(loaded.scene.tx_col));
  rec.add("eps_r", loaded.scene.building_material.relative_permittivity);
  rec.add("sigma_s_per_m", loaded.scene.building_material.conductivity);
  rec.add("norm_min_db", m.window.min_db);
  rec.add("norm_max_db", m.window.max_db);
}

void finish(OutputSet &outputs, RunRecord &rec, const std::string &record_name, const Stopwatch &clock)
{
  const auto record_path = outputs.stage(record_name);
  for (const auto &p : outputs.final_paths())
  {
    rec.add("output", p.string());
  }
  rec.add("wall_time_s", clock.seconds());
  rec.write(record_path);
  outputs.commit();
}

void write_pathloss(OutputSet &outputs, RunRecord &rec, const ComplexFieldd &field,
                    const io::LoadedScene &loaded, const CommonOptions &common)
{
  const PathLossConfig cfg = pathloss_config(loaded.manifest, common.ref_db);
  rec.add("ref_db", cfg.ref_db);
  rec.add("floor_db", cfg.floor_db);
  rec.add("colormap", common.colormap);
  const RealMapd map = field_to_pathloss(field, cfg);
  io::save_grid(outputs.stage("pathloss.emfg"), io::to_portable(map));
  io::export_heatmap(map, outputs.stage("pathloss.png"), parse_colormap(common.colormap));
}

// ---------------------------------------------------------------------------

void cmd_incident(const fs::path &manifest, const fs::path &out, const CommonOptions &common)
{
  Stopwatch clock;
  const auto loaded = io::load_scene(manifest);
  const auto colormap = parse_colormap(common.colormap);
  RunRecord rec("incident");
  record_inputs(rec, loaded);
  const ComplexFieldd inc = incident_field(loaded.scene);
  OutputSet outputs(out);
  io::save_grid(outputs.stage("incident.emfg"), io::to_portable(inc));
  const RealMapd mag = field_to_pathloss(inc, pathloss_config(loaded.manifest, common.ref_db));
  io::export_heatmap(mag, outputs.stage("incident_magnitude.png"), colormap);
  rec.add("ref_db", common.ref_db);
  rec.add("colormap", common.colormap);
  finish(outputs, rec, "incident.record.txt", clock);
}

void cmd_solve(const fs::path &manifest, const fs::path &out, const CommonOptions &common,
               const SolveFlags &flags)
{
  Stopwatch clock;
  const auto loaded = io::load_scene(manifest);
  parse_colormap(common.colormap);
  RunRecord rec("solve");
  record_inputs(rec, loaded);
  SolveOptions opts;
  opts.tol = flags.tol;
  opts.max_iter = flags.max_iter;
  opts.validate();
  rec.add("tol", opts.tol);
  rec.add("max_iter", opts.max_iter);

  const WKerneld kernel(loaded.scene.grid);
  const auto chi = contrast_from_materials(loaded.scene);
  const auto inc = incident_field(loaded.scene);
  const auto [total, report] = solve_forward(kernel, chi, inc, opts);
  rec.add("solve_iterations", report.iterations);
  rec.add("solve_final_residual", report.final_residual);
  rec.add("solve_converged", report.converged ? "true" : "false");
  rec.add("solve_restarts", report.restarts);
  rec.add("solve_wall_time_s", report.wall_time);
  rec.add("solve_sampling_ratio", report.sampling_ratio);

  OutputSet outputs(out);
  io::save_grid(outputs.stage("total.emfg"), io::to_portable(total));
  write_pathloss(outputs, rec, total, loaded, common);
  finish(outputs, rec, "solve.record.txt", clock);
  if (!report.converged)
  {
    std::cerr << "warning: solver stopped at relative residual " << report.final_residual
              << " (tol " << opts.tol << ")\n";
  }
}

void cmd_reconstruct(const fs::path &manifest, const fs::path &out, const CommonOptions &common,
                     const ReconstructFlags &flags)
{
  Stopwatch clock;
  const auto loaded = io::load_scene(manifest);
  parse_colormap(common.colormap);
  RunRecord rec("reconstruct");
  record_inputs(rec, loaded);
  flags.weights.validate();
  OptimizerConfig cfg;
  cfg.max_iters = flags.max_iters;
  cfg.step_init = flags.step_init;
  cfg.grad_tol = flags.grad_tol;
  cfg.loss_tol = flags.loss_tol;
  cfg.validate();
  rec.add("lambda_pde", flags.weights.lambda_pde);
  rec.add("lambda_vie", flags.weights.lambda_vie);
  rec.add("beta", flags.weights.beta);
  rec.add("pde_sign", flags.weights.pde_sign);
  rec.add("pde_region", flags.free_space_pde ? "free-space" : "full-grid");
  rec.add("max_iters", cfg.max_iters);
  rec.add("step_init", cfg.step_init);
  rec.add("grad_tol", cfg.grad_tol);
  rec.add("loss_tol", cfg.loss_tol);

  const WKerneld kernel(loaded.scene.grid);
  const auto chi = contrast_from_materials(loaded.scene);
  const auto inc = incident_field(loaded.scene);
  const MaskArray free_space = (loaded.scene.building_mask == 0).cast<std::uint8_t>();
  const auto [field, report] = reconstruct_field(kernel, chi, inc, flags.weights, cfg,
                                                 flags.free_space_pde ? &free_space : nullptr);
  rec.add("reconstruct_iterations", report.iterations);
  rec.add("reconstruct_converged", report.converged ? "true" : "false");
  rec.add("reconstruct_final_grad_norm", report.final_grad_norm);
  rec.add("reconstruct_final_composite", report.loss_history.back().composite);
  rec.add("vie_relative_residual", forward_residual(kernel, chi, field, inc));

  OutputSet outputs(out);
  io::save_grid(outputs.stage("reconstructed.emfg"), io::to_portable(field));
  {
    std::ofstream hist(outputs.stage("loss_history.txt"));
    hist << "# iteration pde vie composite\n";
    hist.precision(17);
    for (std::size_t i = 0; i < report.loss_history.size(); ++i)
    {
      const auto &b = report.loss_history[i];
      hist << i << ' ' << b.pde << ' ' << b.vie << ' ' << b.composite << '\n';
    }
    if (!hist)
    {
      throw IoError("cannot write loss history");
    }
  }
  write_pathloss(outputs, rec, field, loaded, common);
  finish(outputs, rec, "reconstruct.record.txt", clock);
}

void cmd_loss(const LossFlags &flags)
{
  Stopwatch clock;
  const auto loaded = io::load_scene(flags.manifest);
  RunRecord rec("loss");
  record_inputs(rec, loaded);
  rec.add("field", flags.field);
  rec.add_crc("field_crc32", io::file_crc32(flags.field));
  rec.add("lambda_pde", flags.weights.lambda_pde);
  rec.add("lambda_vie", flags.weights.lambda_vie);
  rec.add("beta", flags.weights.beta);
  rec.add("pde_sign", flags.weights.pde_sign);
  rec.add("pde_region", flags.free_space_pde ? "free-space" : "full-grid");
  const auto field = io::field_from_portable(io::load_grid(flags.field), loaded.scene.grid);
  const WKerneld kernel(loaded.scene.grid);
  const auto chi = contrast_from_materials(loaded.scene);
  const auto inc = incident_field(loaded.scene);
  const MaskArray free_space = (loaded.scene.building_mask == 0).cast<std::uint8_t>();
  const auto b = loss_composite(kernel, chi, field, inc, flags.weights,
                                static_cast<const RealMapd *>(nullptr),
                                static_cast<const RealMapd *>(nullptr),
                                flags.free_space_pde ? &free_space : nullptr);
  rec.add("loss_pde", b.pde);
  rec.add("loss_vie", b.vie);
  rec.add("loss_composite", b.composite);
  rec.add("wall_time_s", clock.seconds());
  std::cout << rec.str();
}

GridArray<double> load_map_any(const fs::path &path)
{
  std::ifstream probe(path, std::ios::binary);
  if (!probe)
  {
    throw IoError("cannot open " + path.string());
  }
  char magic[8] = {};
  probe.read(magic, 8);
  if (probe.gcount() == 8 && std::equal(magic, magic + 8, io::kGridMagic))
  {
    return io::array_from_portable(io::load_grid(path));
  }
  return io::image_to_gray(io::read_image(path), io::LumaReduction::reject).cast<double>() / 255.0;
}

void cmd_metrics(const MetricsFlags &flags)
{
  Stopwatch clock;
  SsimMode mode;
  if (flags.ssim_mode == "global")
  {
    mode = SsimMode::global;
  }
  else if (flags.ssim_mode == "windowed")
  {
    mode = SsimMode::windowed;
  }
  else
  {
    throw ValidationError("unknown SSIM mode '" + flags.ssim_mode + "'");
  }
  const auto pred = load_map_any(flags.pred);
  const auto truth = load_map_any(flags.truth);
  const MetricsReport m = evaluate_metrics(pred, truth, mode, {flags.c1, flags.c2});
  RunRecord rec("metrics");
  rec.add("pred", flags.pred);
  rec.add_crc("pred_crc32", io::file_crc32(flags.pred));
  rec.add("truth", flags.truth);
  rec.add_crc("truth_crc32", io::file_crc32(flags.truth));
  rec.add("ssim_c1", flags.c1);
  rec.add("ssim_c2", flags.c2);
  rec.add("nmse", m.nmse);
  rec.add("nmse_db", m.nmse_db);
  rec.add("rmse", m.rmse);
  rec.add("mae", m.mae);
  rec.add("ssim", m.ssim);
  rec.add("ssim_mode", flags.ssim_mode);
  rec.add("wall_time_s", clock.seconds());
  std::cout << rec.str();
}

void cmd_baseline(const fs::path &manifest, const fs::path &out, const CommonOptions &common,
                  const BaselineFlags &flags)
{
  Stopwatch clock;
  const auto loaded = io::load_scene(manifest);
  const auto colormap = parse_colormap(common.colormap);
  RunRecord rec("baseline");
  record_inputs(rec, loaded);
  rec.add("model", flags.model);
  RealMapd db;
  if (flags.model == "free-space")
  {
    db = baseline_free_space(loaded.scene);
  }
  else if (flags.model == "log-distance")
  {
    rec.add("exponent", flags.exponent);
    rec.add("pl0_db", flags.pl0_db);
    rec.add("d0_m", flags.d0);
    db = baseline_log_distance(loaded.scene, flags.exponent, flags.d0, flags.pl0_db);
  }
  else
  {
    throw ValidationError("unknown baseline model '" + flags.model + "'");
  }
  // path loss is a positive attenuation; the normalized map is its negation
  // (a gain) through the manifest window, comparable to ground-truth images
  const RealMapd norm = normalize_db(db, loaded.manifest.window, true);
  OutputSet outputs(out);
  io::save_grid(outputs.stage("baseline_db.emfg"), io::to_portable(db));
  io::save_grid(outputs.stage("baseline.emfg"), io::to_portable(norm));
  io::export_heatmap(norm, outputs.stage("baseline.png"), colormap);
  if (loaded.truth)
  {
    const MetricsReport m = evaluate_metrics(norm, *loaded.truth);
    rec.add("nmse_db_vs_truth", m.nmse_db);
    rec.add("rmse_vs_truth", m.rmse);
  }
  finish(outputs, rec, "baseline.record.txt", clock);
}

int cmd_selftest(const SelfTestFlags &flags)
{
  const auto checks = run_selftest(flags.size, flags.seed);
  bool ok = true;
  for (const auto &c : checks)
  {
    std::printf("%-40s %s  value=%.3e  bound=%.1e\n", c.name.c_str(), c.passed ? "PASS" : "FAIL",
                c.value, c.threshold);
    ok = ok && c.passed;
  }
  std::printf("selftest size=%d seed=%llu: %s\n", flags.size,
              static_cast<unsigned long long>(flags.seed), ok ? "PASS" : "FAIL");
  return ok ? kOk : kSelfTestFailed;
}

// ---------------------------------------------------------------------------

int exit_code_for(const std::exception_ptr &e)
{
  try
  {
    std::rethrow_exception(e);
  }
  catch (const ValidationError &ex)
  {
    std::cerr << "validation error: " << ex.what() << "\n";
    return kValidation;
  }
  catch (const IoError &ex)
  {
    std::cerr << "io error: " << ex.what() << "\n";
    return kIo;
  }
  catch (const NumericalBreakdown &ex)
  {
    std::cerr << "numerical breakdown: " << ex.what() << "\n";
    return kBreakdown;
  }
  catch (const std::exception &ex)
  {
    std::cerr << "error: " << ex.what() << "\n";
    return kIo;
  }
}

unsigned worker_count()
{
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("EMFIELD_THREADS"))
  {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1)
    {
      n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
  }
  return n;
}

/// Runs `job(manifest, out)` on one manifest, or on every *.manifest in
/// common.manifest_dir with outputs under out/<stem>/.
int dispatch(const CommonOptions &common,
             const std::function<void(const fs::path &, const fs::path &)> &job)
{
  if (common.out.empty())
  {
    throw ValidationError("--out is required");
  }
  if (common.manifest.empty() == common.manifest_dir.empty())
  {
    throw ValidationError("give exactly one of a manifest path or --manifest-dir");
  }
  if (!common.manifest.empty())
  {
    job(common.manifest, common.out);
    return kOk;
  }
  if (!fs::is_directory(common.manifest_dir))
  {
    throw IoError("manifest directory not found: " + common.manifest_dir);
  }
  std::vector<fs::path> manifests;
  for (const auto &entry : fs::directory_iterator(common.manifest_dir))
  {
    if (entry.is_regular_file() && entry.path().extension() == ".manifest")
    {
      manifests.push_back(entry.path());
    }
  }
  std::sort(manifests.begin(), manifests.end());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  int worst = kOk;
  auto worker = [&] {
    for (std::size_t i = next++; i < manifests.size(); i = next++)
    {
      const auto &m = manifests[i];
      try
      {
        job(m, fs::path(common.out) / m.stem());
      }
      catch (...)
      {
        std::lock_guard lock(mu);
        std::cerr << m.string() << ": ";
        worst = std::max(worst, exit_code_for(std::current_exception()));
      }
    }
  };
  std::vector<std::jthread> pool;
  const unsigned n = std::min<std::size_t>(worker_count(), std::max<std::size_t>(manifests.size(), 1));
  for (unsigned t = 0; t < n; ++t)
  {
    pool.emplace_back(worker);
  }
  pool.clear();
  std::cout << "processed " << manifests.size() << " manifests\n";
  return worst;
}

void add_common(CLI::App *cmd, CommonOptions &common)
{
  cmd->add_option("manifest", common.manifest, "Scene manifest");
  cmd->add_option("--manifest-dir", common.manifest_dir,
                  "Process every *.manifest in this directory (outputs in OUT/<stem>)");
  cmd->add_option("--out", common.out, "Output directory")->required();
  cmd->add_option("--colormap", common.colormap, "Heatmap colormap: grayscale | viridis")
      ->capture_default_str();
  cmd->add_option("--ref-db", common.ref_db, "Level of the 0 dB reference magnitude")
      ->capture_default_str();
}

void add_weights(CLI::App *cmd, LossWeights &w, bool &free_space)
{
  cmd->add_option("--lambda-pde", w.lambda_pde, "Weight of the Helmholtz residual loss")
      ->capture_default_str();
  cmd->add_option("--lambda-vie", w.lambda_vie, "Weight of the VIE residual loss")
      ->capture_default_str();
  cmd->add_option("--beta", w.beta, "Effective Helmholtz parameter (pixel units)")
      ->capture_default_str();
  cmd->add_option("--pde-sign", w.pde_sign, "-1: lap E - beta E, +1: lap E + beta E")
      ->capture_default_str();
  cmd->add_flag("--free-space-pde", free_space, "Evaluate the PDE residual outside buildings only");
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"emfield: physics core for EMF exposure mapping"};
  app.require_subcommand(1);

  CommonOptions common;
  SolveFlags solve_flags;
  ReconstructFlags recon_flags;
  LossFlags loss_flags;
  MetricsFlags metrics_flags;
  BaselineFlags baseline_flags;
  SelfTestFlags selftest_flags;

  auto *incident = app.add_subcommand("incident", "Write the incident field and its heatmap");
  add_common(incident, common);

  auto *solve = app.add_subcommand("solve", "Solve the VIE for the total field");
  add_common(solve, common);
  solve->add_option("--tol", solve_flags.tol, "Relative residual tolerance")->capture_default_str();
  solve->add_option("--max-iter", solve_flags.max_iter, "Iteration cap")->capture_default_str();

  auto *recon = app.add_subcommand("reconstruct", "Recover the field by physics-loss descent");
  add_common(recon, common);
  add_weights(recon, recon_flags.weights, recon_flags.free_space_pde);
  recon->add_option("--max-iters", recon_flags.max_iters, "Iteration cap")->capture_default_str();
  recon->add_option("--step-init", recon_flags.step_init, "First trial step")->capture_default_str();
  recon->add_option("--grad-tol", recon_flags.grad_tol, "Gradient norm tolerance")->capture_default_str();
  recon->add_option("--loss-tol", recon_flags.loss_tol, "Relative decrease tolerance")->capture_default_str();

  auto *loss = app.add_subcommand("loss", "Evaluate the physics losses of a stored field");
  loss->add_option("manifest", loss_flags.manifest, "Scene manifest")->required();
  loss->add_option("field", loss_flags.field, "c64 PortableGrid field")->required();
  add_weights(loss, loss_flags.weights, loss_flags.free_space_pde);

  auto *metrics = app.add_subcommand("metrics", "Compare a predicted map with ground truth");
  metrics->add_option("pred", metrics_flags.pred, "Predicted map (f32 PortableGrid or 8-bit image)")->required();
  metrics->add_option("truth", metrics_flags.truth, "Ground-truth map")->required();
  metrics->add_option("--ssim-mode", metrics_flags.ssim_mode, "global | windowed")->capture_default_str();
  metrics->add_option("--c1", metrics_flags.c1, "SSIM C1")->capture_default_str();
  metrics->add_option("--c2", metrics_flags.c2, "SSIM C2")->capture_default_str();

  auto *baseline = app.add_subcommand("baseline", "Distance-only empirical path-loss map");
  add_common(baseline, common);
  baseline->add_option("--model", baseline_flags.model, "free-space | log-distance")->capture_default_str();
  baseline->add_option("--n", baseline_flags.exponent, "Path-loss exponent")->capture_default_str();
  baseline->add_option("--pl0", baseline_flags.pl0_db, "Loss at d0 in dB")->capture_default_str();
  baseline->add_option("--d0", baseline_flags.d0, "Reference distance in m")->capture_default_str();

  auto *selftest = app.add_subcommand("selftest", "Run the oracle checks on random instances");
  selftest->add_option("--size", selftest_flags.size, "Grid side")->capture_default_str();
  selftest->add_option("--seed", selftest_flags.seed, "RNG seed")->capture_default_str();

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try
  {
    if (incident->parsed())
    {
      return dispatch(common, [&](const fs::path &m, const fs::path &o) { cmd_incident(m, o, common); });
    }
    if (solve->parsed())
    {
      return dispatch(common,
                      [&](const fs::path &m, const fs::path &o) { cmd_solve(m, o, common, solve_flags); });
    }
    if (recon->parsed())
    {
      return dispatch(common, [&](const fs::path &m, const fs::path &o) {
        cmd_reconstruct(m, o, common, recon_flags);
      });
    }
    if (loss->parsed())
    {
      cmd_loss(loss_flags);
      return kOk;
    }
    if (metrics->parsed())
    {
      cmd_metrics(metrics_flags);
      return kOk;
    }
    if (baseline->parsed())
    {
      return dispatch(common, [&](const fs::path &m, const fs::path &o) {
        cmd_baseline(m, o, common, baseline_flags);
      });
    }
    if (selftest->parsed())
    {
      return cmd_selftest(selftest_flags);
    }
  }
  catch (...)
  {
    return exit_code_for(std::current_exception());
  }
  return kOk;
}
