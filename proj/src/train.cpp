#include "mir/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

#include "mir/metrics.hpp"
#include "mir/ops.hpp"

namespace fs = std::filesystem;

namespace mir::train {

void TrainConfig::validate() const {
  if (steps < 0 || batch < 1) throw ShapeError("train: steps must be >= 0 and batch >= 1");
  if (val_count < 1 || phantom_count <= val_count) {
    throw ShapeError("train: need phantom_count > val_count >= 1");
  }
  if (phantom_size < 16 || !is_pow2(phantom_size)) {
    throw ShapeError("train: phantom_size must be a power of two >= 16");
  }
  if (crop < 8 || crop > phantom_size) throw ShapeError("train: crop must lie in [8, phantom_size]");
  if (crop % net.patch || phantom_size % net.patch) {
    throw ShapeError("train: crop and phantom_size must be divisible by the patch size");
  }
  if (gan && crop % 8) throw ShapeError("train: adversarial mode needs crop divisible by 8");
  if (modality == losses::Modality::kMri && !is_pow2(crop)) {
    throw ShapeError("train: MRI crops must be powers of two for the transform loss");
  }
  const i64 want = modality == losses::Modality::kMri ? 2 : 1;
  if (net.in_channels != want) {
    throw ShapeError(strfmt("train: modality needs %lld input channels, config says %lld",
                            (long long)want, (long long)net.in_channels));
  }
  if (views < 1 || transform_views < 1) throw ShapeError("train: view counts must be positive");
  if (log_every < 1) throw ShapeError("train: log_every must be >= 1");
  weights.validate();
  net.validate();
}

namespace {

u64 sample_seed(u64 seed, i64 index) {
  return seed + 0x9e3779b97f4a7c15ull * (u64)(index + 1);
}

Tensor<float> with_channel(const Tensor<float>& plane) {
  return Tensor<float>::from({plane.dim(0), plane.dim(1), 1}, plane.vec());
}

Tensor<float> crop3(const Tensor<float>& t, i64 ci, i64 cj, i64 size) {
  const i64 w = t.dim(1), c = t.dim(2);
  Tensor<float> out = Tensor<float>::zeros({size, size, c});
  for (i64 i = 0; i < size; ++i) {
    for (i64 j = 0; j < size; ++j) {
      for (i64 k = 0; k < c; ++k) {
        out.data()[(i * size + j) * c + k] = t.data()[((ci + i) * w + (cj + j)) * c + k];
      }
    }
  }
  return out;
}

imaging::CtGeometry sparse_geometry(const TrainConfig& cfg) {
  imaging::CtGeometry geom = imaging::desk_ct_geometry(cfg.phantom_size, cfg.views);
  if (cfg.detectors > 0) {
    geom.detector_pitch *= (double)geom.n_detectors / (double)cfg.detectors;
    geom.n_detectors = cfg.detectors;
  }
  return geom;
}

}  // namespace

Sample make_sample(const TrainConfig& cfg, i64 index) {
  const i64 s = cfg.phantom_size;
  const u64 seed = sample_seed(cfg.seed, index);
  Tensor<float> phantom = imaging::make_phantom(imaging::PhantomKind::kRandomEllipses, s, s, seed);
  Sample out;
  if (cfg.modality == losses::Modality::kMri) {
    Tensor<float> x = Tensor<float>::zeros({s, s, 2});
    for (i64 i = 0; i < s * s; ++i) x.data()[i * 2] = phantom.data()[i];
    x = imaging::normalize_magnitude(x);
    const imaging::MriSamplingSpec spec = imaging::make_cartesian_mask(s, cfg.af, cfg.acs, seed);
    const Tensor<float> y =
        imaging::mri_forward(x, spec, cfg.sigma, StreamKey{seed, fnv1a("measurement-noise"), 0, 0});
    out.x = x;
    out.x_u = imaging::normalize_magnitude(imaging::mri_zero_fill(y, spec));
  } else {
    Tensor<float> x = imaging::normalize_minmax(phantom);
    const imaging::CtGeometry geom = sparse_geometry(cfg);
    const Tensor<float> y =
        imaging::radon_measure(x, geom, cfg.sigma, StreamKey{seed, fnv1a("measurement-noise"), 0, 0});
    out.x = with_channel(x);
    out.x_u = with_channel(imaging::normalize_minmax(imaging::fbp(y, geom)));
  }
  return out;
}

TrainConfig config_from(io::Config& cfg) {
  TrainConfig out;
  const std::string modality = cfg.get_str("modality", "mri");
  if (modality == "mri") {
    out.modality = losses::Modality::kMri;
  } else if (modality == "ct") {
    out.modality = losses::Modality::kCt;
  } else {
    throw UsageError(strfmt("config: modality '%s' must be mri or ct", modality.c_str()));
  }
  out.steps = cfg.get_i64("steps", out.steps);
  out.batch = cfg.get_i64("batch", out.batch);
  out.adam.lr = cfg.get_f64("lr", out.adam.lr);
  out.adam.beta1 = cfg.get_f64("beta1", out.adam.beta1);
  out.adam.beta2 = cfg.get_f64("beta2", out.adam.beta2);
  out.adam.eps = cfg.get_f64("eps", out.adam.eps);
  out.crop = cfg.get_i64("crop", out.crop);
  out.gan = cfg.get_bool("gan", out.gan);
  out.seed = cfg.get_u64("seed", out.seed);
  out.phantom_count = cfg.get_i64("phantom_count", out.phantom_count);
  out.phantom_size = cfg.get_i64("phantom_size", out.phantom_size);
  out.val_count = cfg.get_i64("val_count", out.val_count);
  out.af = cfg.get_i64("af", out.af);
  out.acs = cfg.get_f64("acs", out.acs);
  out.sigma = cfg.get_f64("sigma", out.sigma);
  out.views = cfg.get_i64("views", out.views);
  out.transform_views = cfg.get_i64("transform_views", out.transform_views);
  out.detectors = cfg.get_i64("detectors", out.detectors);
  out.log_every = cfg.get_i64("log_every", out.log_every);

  out.net.in_channels = out.modality == losses::Modality::kMri ? 2 : 1;
  out.net.patch = cfg.get_i64("patch", out.net.patch);
  out.net.embed = cfg.get_i64("embed", out.net.embed);
  out.net.groups = cfg.get_i64("groups", out.net.groups);
  out.net.blocks_per_group = cfg.get_i64("blocks_per_group", out.net.blocks_per_group);
  out.net.expansion = cfg.get_i64("expansion", out.net.expansion);
  out.net.n_state = cfg.get_i64("n_state", out.net.n_state);
  out.net.per_direction_ssm = cfg.get_bool("per_direction_ssm", out.net.per_direction_ssm);
  out.net.exact_bbar = cfg.get_bool("exact_bbar", out.net.exact_bbar);
  out.net.seed = out.seed;

  out.weights.alpha = cfg.get_f64("alpha", out.weights.alpha);
  out.weights.beta = cfg.get_f64("beta", out.weights.beta);
  out.weights.gamma = cfg.get_f64("gamma", out.weights.gamma);
  out.weights.eta = cfg.get_f64("eta", out.weights.eta);
  out.weights.epsilon = cfg.get_f64("epsilon", out.weights.epsilon);

  const std::vector<std::string> stray = cfg.unused();
  if (!stray.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : stray) msg += " " + k;
    throw UsageError(msg);
  }
  return out;
}

std::string describe_weights(const losses::LossWeights& w) {
  return strfmt("loss weights: alpha=%g beta=%g gamma=%g eta=%g epsilon=%g", w.alpha, w.beta,
                w.gamma, w.eta, w.epsilon);
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const i64 train_count = cfg.phantom_count - cfg.val_count;

  std::vector<Sample> val;
  for (i64 i = train_count; i < cfg.phantom_count; ++i) val.push_back(make_sample(cfg, i));

  net::ModelParams<float> params = net::init_model<float>(cfg.net);
  auto named = net::named_params(params);
  optim::AdamState<float> gen_state;

  losses::PerceptualStack<float> feat = losses::make_perceptual_stack<float>(cfg.net.in_channels);
  losses::TransformContext tctx;
  tctx.modality = cfg.modality;
  if (cfg.modality == losses::Modality::kCt) {
    tctx.geom = imaging::desk_ct_geometry(cfg.crop, cfg.transform_views);
  }

  losses::DiscriminatorParams<float> disc;
  std::vector<std::pair<std::string, Tensor<float>>> disc_named;
  optim::AdamState<float> disc_state;
  if (cfg.gan) {
    disc = losses::make_discriminator<float>(cfg.net.in_channels, cfg.seed);
    disc_named = losses::named_params(disc);
  }

  std::optional<io::CsvLogger> log;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    log.emplace((fs::path(cfg.out_dir) / "log.csv").string());
    std::ofstream settings((fs::path(cfg.out_dir) / "settings.txt").string(), std::ios::trunc);
    settings << describe_weights(cfg.weights) << "\n";
    settings << strfmt("modality = %s\n",
                       cfg.modality == losses::Modality::kMri ? "mri" : "ct");
    settings << strfmt("steps = %lld\nbatch = %lld\nlr = %g\nseed = %llu\n", (long long)cfg.steps,
                       (long long)cfg.batch, cfg.adam.lr, (unsigned long long)cfg.seed);
  }

  auto run_validation = [&](double& psnr_out, double& ssim_out) {
    std::vector<Tensor<float>> pred, ref;
    for (const Sample& s : val) {
      blocks::ForwardCtx ctx;
      ctx.seed = cfg.seed;
      Tensor<float> xhat = net::forward(s.x_u, params, cfg.net, ctx);
      pred.push_back(xhat);
      ref.push_back(s.x);
    }
    const metrics::MetricsReport report = metrics::compute_metrics(pred, ref);
    psnr_out = report.psnr_mean;
    ssim_out = report.ssim_mean;
  };

  TrainResult result;
  {
    std::vector<Tensor<float>> inputs, refs;
    for (const Sample& s : val) {
      inputs.push_back(s.x_u);
      refs.push_back(s.x);
    }
    result.input_val_psnr = metrics::compute_metrics(inputs, refs).psnr_mean;
  }
  result.best_val_psnr = -1.0;

  auto zero_grads = [](std::vector<std::pair<std::string, Tensor<float>>>& list) {
    for (auto& [name, p] : list) p.zero_grad();
  };

  bool aborted = false;
  for (i64 step = 0; step < cfg.steps && !aborted; ++step) {
    CounterRng order(StreamKey{cfg.seed, fnv1a("batch-order"), (u64)step, 0});

    Tape<float> gen_tape;
    TapeScope gen_scope(gen_tape);

    std::vector<Tensor<float>> targets, fakes;
    Tensor<float> base;
    for (i64 slot = 0; slot < cfg.batch; ++slot) {
      const i64 index = order.below(train_count);
      const Sample s = make_sample(cfg, index);
      const i64 span = cfg.phantom_size - cfg.crop + 1;
      const i64 ci = order.below(span), cj = order.below(span);
      Tensor<float> x = crop3(s.x, ci, cj, cfg.crop);
      Tensor<float> xu = crop3(s.x_u, ci, cj, cfg.crop);
      blocks::ForwardCtx ctx;
      ctx.seed = cfg.seed;
      ctx.step = (u64)step;
      ctx.sample = (u64)slot;
      ctx.training = true;
      Tensor<float> xhat = net::forward(xu, params, cfg.net, ctx);
      Tensor<float> term = losses::total_loss(x, xhat, cfg.weights, tctx, feat);
      base = base.defined() ? ops::add(base, term) : term;
      if (cfg.gan) {
        targets.push_back(std::move(x));
        fakes.push_back(xhat);
      }
    }

    Tensor<float> loss;
    if (cfg.gan) {
      Tensor<float> d_total;
      {
        Tape<float> disc_tape;
        TapeScope disc_scope(disc_tape);
        for (i64 slot = 0; slot < cfg.batch; ++slot) {
          Tensor<float> term =
              losses::discriminator_loss(targets[(std::size_t)slot],
                                         ops::detach(fakes[(std::size_t)slot]), disc);
          d_total = d_total.defined() ? ops::add(d_total, term) : term;
        }
        d_total = ops::scale(d_total, 1.0f / (float)cfg.batch);
        if (std::isfinite((double)d_total.item())) {
          zero_grads(disc_named);
          disc_tape.backward(d_total);
          optim::adam_step(disc_named, disc_state, cfg.adam);
        }
      }
      result.d_trace.push_back((double)d_total.item());

      Tensor<float> adv;
      for (i64 slot = 0; slot < cfg.batch; ++slot) {
        Tensor<float> term = losses::generator_adversarial(fakes[(std::size_t)slot], disc);
        adv = adv.defined() ? ops::add(adv, term) : term;
      }
      loss = ops::scale(ops::add(base, ops::scale(adv, (float)cfg.weights.eta)),
                        1.0f / (float)cfg.batch);
    } else {
      loss = ops::scale(base, 1.0f / (float)cfg.batch);
    }

    const double loss_value = (double)loss.item();
    if (!std::isfinite(loss_value)) {
      result.abort_step = step;
      if (!cfg.out_dir.empty()) {
        io::save_checkpoint(
            (fs::path(cfg.out_dir) / strfmt("abort-step-%lld", (long long)step)).string(), params,
            cfg.net);
      }
      aborted = true;
      break;
    }
    result.loss_trace.push_back(loss_value);

    zero_grads(named);
    gen_tape.backward(loss);
    optim::adam_step(named, gen_state, cfg.adam);

    if ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps) {
      double psnr = 0.0, ssim = 0.0;
      run_validation(psnr, ssim);
      if (log) log->row(step + 1, loss_value, psnr, ssim);
      if (psnr > result.best_val_psnr) {
        result.best_val_psnr = psnr;
        if (!cfg.out_dir.empty()) {
          io::save_checkpoint((fs::path(cfg.out_dir) / "best").string(), params, cfg.net);
        }
      }
    }
  }

  run_validation(result.final_val_psnr, result.final_val_ssim);
  if (result.best_val_psnr < result.final_val_psnr) result.best_val_psnr = result.final_val_psnr;
  if (!cfg.out_dir.empty() && !aborted) {
    io::save_checkpoint((fs::path(cfg.out_dir) / "final").string(), params, cfg.net);
  }
  return result;
}

}  // namespace mir::train
