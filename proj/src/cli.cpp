#include "mir/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mir/imaging.hpp"
#include "mir/io.hpp"
#include "mir/metrics.hpp"
#include "mir/train.hpp"
#include "mir/uncertainty.hpp"

namespace fs = std::filesystem;

namespace mir::cli {

namespace {

u64 derived_seed(u64 seed, i64 index) {
  return seed + 0x9e3779b97f4a7c15ull * (u64)(index + 1);
}

std::string numbered(const std::string& dir, const std::string& prefix, i64 index) {
  return (fs::path(dir) / strfmt("%s_%03lld.mmir", prefix.c_str(), (long long)index)).string();
}

Tensor<float> read_plane(const std::string& path) {
  Tensor<float> t = io::read_tensor(path);
  if (t.ndim() != 2) {
    throw DataError(strfmt("%s: expected a 2-D image, got %s", path.c_str(),
                           shape_str(t.shape()).c_str()));
  }
  return t;
}

struct PhantomArgs {
  std::string kind = "random";
  i64 count = 1;
  i64 size = 64;
  u64 seed = 0;
  std::string out;
};

int run_phantom(const PhantomArgs& a) {
  const imaging::PhantomKind kind = a.kind == "shepp" ? imaging::PhantomKind::kSheppLogan
                                                      : imaging::PhantomKind::kRandomEllipses;
  fs::create_directories(a.out);
  for (i64 i = 0; i < a.count; ++i) {
    const Tensor<float> img =
        imaging::make_phantom(kind, a.size, a.size, derived_seed(a.seed, i));
    io::write_tensor(numbered(a.out, "phantom", i), img);
  }
  std::printf("wrote %lld phantom(s) to %s\n", (long long)a.count, a.out.c_str());
  return 0;
}

struct SimulateMriArgs {
  i64 af = 8;
  double acs = 0.04;
  double sigma = 0.0;
  u64 seed = 0;
  std::string in, out;
};

int run_simulate_mri(const SimulateMriArgs& a) {
  const std::vector<std::string> files = io::list_tensors(a.in);
  if (files.empty()) throw UsageError(strfmt("%s: no .mmir inputs", a.in.c_str()));
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const Tensor<float> plane = read_plane(files[i]);
    const i64 h = plane.dim(0), w = plane.dim(1);
    Tensor<float> x = Tensor<float>::zeros({h, w, 2});
    for (i64 k = 0; k < h * w; ++k) x.data()[k * 2] = plane.data()[k];
    x = imaging::normalize_magnitude(x);
    const u64 seed = derived_seed(a.seed, (i64)i);
    const imaging::MriSamplingSpec spec = imaging::make_cartesian_mask(w, a.af, a.acs, seed);
    const Tensor<float> y =
        imaging::mri_forward(x, spec, a.sigma, StreamKey{seed, fnv1a("measurement-noise"), 0, 0});
    const Tensor<float> xu = imaging::normalize_magnitude(imaging::mri_zero_fill(y, spec));
    io::write_tensor(numbered(a.out, "x", (i64)i), x);
    io::write_tensor(numbered(a.out, "xu", (i64)i), xu);
    io::write_tensor(numbered(a.out, "y", (i64)i), y);
  }
  std::printf("simulated %zu MRI acquisition(s) at af=%lld into %s\n", files.size(),
              (long long)a.af, a.out.c_str());
  return 0;
}

struct SimulateCtArgs {
  i64 views = 15;
  i64 detectors = 0;
  double sigma = 0.0;
  u64 seed = 0;
  std::string in, out;
};

int run_simulate_ct(const SimulateCtArgs& a) {
  const std::vector<std::string> files = io::list_tensors(a.in);
  if (files.empty()) throw UsageError(strfmt("%s: no .mmir inputs", a.in.c_str()));
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const Tensor<float> plane = read_plane(files[i]);
    if (plane.dim(0) != plane.dim(1)) {
      throw DataError(strfmt("%s: CT simulation needs square images", files[i].c_str()));
    }
    imaging::CtGeometry geom = imaging::desk_ct_geometry(plane.dim(0), a.views);
    if (a.detectors > 0) {
      geom.detector_pitch *= (double)geom.n_detectors / (double)a.detectors;
      geom.n_detectors = a.detectors;
    }
    const u64 seed = derived_seed(a.seed, (i64)i);
    const Tensor<float> x = imaging::normalize_minmax(plane);
    const Tensor<float> y =
        imaging::radon_measure(x, geom, a.sigma, StreamKey{seed, fnv1a("measurement-noise"), 0, 0});
    const Tensor<float> xu = imaging::normalize_minmax(imaging::fbp(y, geom));
    io::write_tensor(numbered(a.out, "x", (i64)i), x);
    io::write_tensor(numbered(a.out, "xu", (i64)i), xu);
    io::write_tensor(numbered(a.out, "y", (i64)i), y);
  }
  std::printf("simulated %zu CT acquisition(s) at %lld views into %s\n", files.size(),
              (long long)a.views, a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string config, out;
};

int run_train(const TrainArgs& a) {
  io::Config file = io::parse_config_file(a.config);
  train::TrainConfig cfg = train::config_from(file);
  cfg.out_dir = a.out;
  std::printf("%s\n", train::describe_weights(cfg.weights).c_str());
  const train::TrainResult result = train::train(cfg);
  if (result.abort_step >= 0) {
    std::fprintf(stderr, "training aborted at step %lld on a non-finite loss; last state in %s\n",
                 (long long)result.abort_step,
                 (fs::path(a.out) / strfmt("abort-step-%lld", (long long)result.abort_step))
                     .string()
                     .c_str());
    return 2;
  }
  std::printf("input PSNR %.3f dB, final PSNR %.3f dB, best PSNR %.3f dB\n",
              result.input_val_psnr, result.final_val_psnr, result.best_val_psnr);
  std::printf("checkpoints and log.csv in %s\n", a.out.c_str());
  return 0;
}

Tensor<float> channelize(const Tensor<float>& t, i64 want, const std::string& path) {
  if (want == 2) {
    if (t.ndim() == 3 && t.dim(2) == 2) return t;
    throw DataError(strfmt("%s: checkpoint expects [h, w, 2] pairs, got %s", path.c_str(),
                           shape_str(t.shape()).c_str()));
  }
  if (t.ndim() == 2) return Tensor<float>::from({t.dim(0), t.dim(1), 1}, t.vec());
  if (t.ndim() == 3 && t.dim(2) == 1) return t;
  throw DataError(strfmt("%s: checkpoint expects single-channel images, got %s", path.c_str(),
                         shape_str(t.shape()).c_str()));
}

struct ReconstructArgs {
  std::string ckpt, in, out;
  bool eval_mask = false;
  u64 seed = 0;
};

int run_reconstruct(const ReconstructArgs& a) {
  auto [params, cfg] = io::load_checkpoint(a.ckpt);
  cfg.eval_mask = a.eval_mask;
  std::vector<std::string> files = io::list_tensors(a.in, "xu_");
  if (files.empty()) files = io::list_tensors(a.in);
  if (files.empty()) throw UsageError(strfmt("%s: no .mmir inputs", a.in.c_str()));
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const Tensor<float> input = channelize(io::read_tensor(files[i]), cfg.in_channels, files[i]);
    blocks::ForwardCtx ctx;
    ctx.seed = a.seed;
    ctx.sample = (u64)i;
    ctx.mc = a.eval_mask;
    Tensor<float> xhat = net::forward(input, params, cfg, ctx);
    if (cfg.in_channels == 1) {
      xhat = Tensor<float>::from({xhat.dim(0), xhat.dim(1)}, xhat.vec());
    }
    io::write_tensor(numbered(a.out, "xhat", (i64)i), xhat);
  }
  std::printf("reconstructed %zu image(s) into %s\n", files.size(), a.out.c_str());
  return 0;
}

struct UncertaintyArgs {
  std::string ckpt, in, out;
  i64 passes = 32;
  u64 seed = 0;
};

int run_uncertainty(const UncertaintyArgs& a) {
  auto [params, cfg] = io::load_checkpoint(a.ckpt);
  cfg.eval_mask = true;
  const Tensor<float> input = channelize(io::read_tensor(a.in), cfg.in_channels, a.in);
  const uncertainty::UncertaintyMap map =
      uncertainty::mc_uncertainty(input, params, cfg, a.passes, a.seed);
  fs::create_directories(a.out);
  io::write_tensor((fs::path(a.out) / "mean.mmir").string(), map.mean);
  io::write_tensor((fs::path(a.out) / "std.mmir").string(), map.stddev);
  std::printf("%lld-pass uncertainty maps in %s\n", (long long)a.passes, a.out.c_str());
  return 0;
}

struct EvalArgs {
  std::string pred, ref, report;
};

int run_eval(const EvalArgs& a) {
  std::vector<std::string> pred_files = io::list_tensors(a.pred, "xhat_");
  if (pred_files.empty()) pred_files = io::list_tensors(a.pred, "xu_");
  if (pred_files.empty()) pred_files = io::list_tensors(a.pred);
  std::vector<std::string> ref_files = io::list_tensors(a.ref, "x_");
  if (ref_files.empty()) ref_files = io::list_tensors(a.ref);
  if (pred_files.empty()) throw UsageError(strfmt("%s: no .mmir predictions", a.pred.c_str()));
  if (pred_files.size() != ref_files.size()) {
    throw DataError(strfmt("eval: %zu predictions vs %zu references", pred_files.size(),
                           ref_files.size()));
  }
  std::vector<Tensor<float>> pred, ref;
  for (std::size_t i = 0; i < pred_files.size(); ++i) {
    pred.push_back(io::read_tensor(pred_files[i]));
    ref.push_back(io::read_tensor(ref_files[i]));
  }
  const metrics::MetricsReport report = metrics::compute_metrics(pred, ref);
  std::string text = "index,psnr,ssim\n";
  for (std::size_t i = 0; i < report.psnr.size(); ++i) {
    text += strfmt("%zu,%.6f,%.6f\n", i, report.psnr[i], report.ssim[i]);
  }
  text += strfmt("mean,%.6f,%.6f\n", report.psnr_mean, report.ssim_mean);
  text += strfmt("std,%.6f,%.6f\n", report.psnr_std, report.ssim_std);
  {
    std::FILE* f = std::fopen(a.report.c_str(), "w");
    if (!f) throw DataError(strfmt("cannot write %s", a.report.c_str()));
    std::fputs(text.c_str(), f);
    std::fclose(f);
  }
  std::printf("PSNR %.3f +/- %.3f dB, SSIM %.4f +/- %.4f over %zu image(s)\n", report.psnr_mean,
              report.psnr_std, report.ssim_mean, report.ssim_std, report.psnr.size());
  return 0;
}

struct ExportArgs {
  std::string in, out;
};

int run_export(const ExportArgs& a) {
  io::write_pgm(a.out, io::read_tensor(a.in));
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Desk-scale self-verifying MRI/CT reconstruction toolkit"};
  app.require_subcommand(1);

  PhantomArgs ph;
  CLI::App* phantom = app.add_subcommand("phantom", "Generate a phantom dataset");
  phantom->add_option("--kind", ph.kind, "Phantom family")
      ->check(CLI::IsMember({"random", "shepp"}));
  phantom->add_option("--count", ph.count, "Number of images")->check(CLI::PositiveNumber);
  phantom->add_option("--size", ph.size, "Square image extent")->check(CLI::PositiveNumber);
  phantom->add_option("--seed", ph.seed, "Random seed");
  phantom->add_option("--out", ph.out, "Output directory")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "Degrade phantoms into measurements");
  simulate->require_subcommand(1);

  SimulateMriArgs sm;
  CLI::App* sim_mri = simulate->add_subcommand("mri", "Cartesian k-space undersampling");
  sim_mri->add_option("--af", sm.af, "Acceleration factor (1, 4, 8, 16)");
  sim_mri->add_option("--acs", sm.acs, "Center-line fraction");
  sim_mri->add_option("--sigma", sm.sigma, "Measurement noise std");
  sim_mri->add_option("--seed", sm.seed, "Random seed");
  sim_mri->add_option("--in", sm.in, "Phantom directory")->required();
  sim_mri->add_option("--out", sm.out, "Output directory")->required();

  SimulateCtArgs sc;
  CLI::App* sim_ct = simulate->add_subcommand("ct", "Sparse-view fan-beam acquisition");
  sim_ct->add_option("--views", sc.views, "Projection views")->check(CLI::PositiveNumber);
  sim_ct->add_option("--detectors", sc.detectors, "Detector count (0 = geometry default)");
  sim_ct->add_option("--sigma", sc.sigma, "Measurement noise std");
  sim_ct->add_option("--seed", sc.seed, "Random seed");
  sim_ct->add_option("--in", sc.in, "Phantom directory")->required();
  sim_ct->add_option("--out", sc.out, "Output directory")->required();

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Run the optimization loop");
  train_cmd->add_option("--config", tr.config, "key = value configuration file")->required();
  train_cmd->add_option("--out", tr.out, "Run directory for checkpoints and logs")->required();

  ReconstructArgs rc;
  CLI::App* reconstruct = app.add_subcommand("reconstruct", "Apply a trained model");
  reconstruct->add_option("--ckpt", rc.ckpt, "Checkpoint directory")->required();
  reconstruct->add_option("--in", rc.in, "Directory of degraded inputs")->required();
  reconstruct->add_option("--out", rc.out, "Output directory")->required();
  reconstruct->add_flag("--eval-mask", rc.eval_mask, "Keep scan masking active at inference");
  reconstruct->add_option("--seed", rc.seed, "Mask stream seed (with --eval-mask)");

  UncertaintyArgs un;
  CLI::App* uncertain = app.add_subcommand("uncertainty", "Monte Carlo uncertainty maps");
  uncertain->add_option("--ckpt", un.ckpt, "Checkpoint directory")->required();
  uncertain->add_option("--in", un.in, "Degraded input .mmir file")->required();
  uncertain->add_option("--out", un.out, "Output directory")->required();
  uncertain->add_option("--passes", un.passes, "Stochastic passes")->check(CLI::PositiveNumber);
  uncertain->add_option("--seed", un.seed, "Mask stream seed");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score predictions against references");
  eval_cmd->add_option("--pred", ev.pred, "Prediction directory")->required();
  eval_cmd->add_option("--ref", ev.ref, "Reference directory")->required();
  eval_cmd->add_option("--report", ev.report, "CSV report path")->required();

  ExportArgs ex;
  CLI::App* export_cmd = app.add_subcommand("export-pgm", "Export a tensor as an 8-bit graymap");
  export_cmd->add_option("--in", ex.in, "Input .mmir file")->required();
  export_cmd->add_option("--out", ex.out, "Output .pgm path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }

  try {
    if (phantom->parsed()) return run_phantom(ph);
    if (sim_mri->parsed()) return run_simulate_mri(sm);
    if (sim_ct->parsed()) return run_simulate_ct(sc);
    if (train_cmd->parsed()) return run_train(tr);
    if (reconstruct->parsed()) return run_reconstruct(rc);
    if (uncertain->parsed()) return run_uncertainty(un);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (export_cmd->parsed()) return run_export(ex);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace mir::cli
