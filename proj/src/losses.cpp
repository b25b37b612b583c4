#include "mir/losses.hpp"

#include <cmath>

#include "mir/ops.hpp"
#include "mir/rng.hpp"

namespace mir::losses {

void LossWeights::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0 || eta < 0) {
    throw ShapeError("loss weights must be nonnegative");
  }
  if (epsilon <= 0) throw ShapeError("charbonnier epsilon must be positive");
}

template <typename T>
Tensor<T> charbonnier(const Tensor<T>& a, const Tensor<T>& b, double epsilon, bool per_pixel) {
  if (a.shape() != b.shape()) {
    throw ShapeError(strfmt("charbonnier: shape mismatch %s vs %s",
                            shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
  }
  Tensor<T> d = ops::sub(a, b);
  Tensor<T> sq = ops::sum(ops::mul(d, d));
  if (per_pixel) sq = ops::scale(sq, (T)(1.0 / (double)a.size()));
  return ops::sqrt(ops::add_scalar(sq, (T)(epsilon * epsilon)));
}

template <typename T>
Tensor<T> transform_loss(const Tensor<T>& x, const Tensor<T>& xhat, const TransformContext& ctx,
                         double epsilon) {
  if (x.shape() != xhat.shape()) throw ShapeError("transform_loss: shape mismatch");
  if (ctx.modality == Modality::kMri) {
    return charbonnier(ops::fft2(x), ops::fft2(xhat), epsilon);
  }
  Tensor<T> a = x, b = xhat;
  if (a.ndim() == 3 && a.dim(2) == 1) {
    a = ops::reshape(a, {a.dim(0), a.dim(1)});
    b = ops::reshape(b, {b.dim(0), b.dim(1)});
  }
  return charbonnier(imaging::radon(a, ctx.geom), imaging::radon(b, ctx.geom), epsilon);
}

namespace {

constexpr i64 kStageWidths[3] = {8, 16, 32};

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, CounterRng& rng) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (i64 i = 0; i < t.size(); ++i) t.data()[i] = (T)rng.uniform(-bound, bound);
  return t;
}

}  // namespace

template <typename T>
PerceptualStack<T> make_perceptual_stack(i64 in_channels) {
  if (in_channels <= 0) throw ShapeError("make_perceptual_stack: channels must be positive");
  PerceptualStack<T> feat;
  feat.in_channels = in_channels;
  i64 cin = in_channels;
  for (int stage = 0; stage < 3; ++stage) {
    const i64 cout = kStageWidths[stage];
    CounterRng rng(StreamKey{0, fnv1a("perceptual-features"), (u64)stage, 0});
    const double bound = 1.0 / std::sqrt(9.0 * (double)cin);
    feat.w.push_back(uniform_tensor<T>({3, 3, cin, cout}, bound, rng));
    feat.b.push_back(Tensor<T>::zeros({cout}));
    cin = cout;
  }
  return feat;
}

template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& x, const Tensor<T>& xhat,
                          const PerceptualStack<T>& feat) {
  if (x.shape() != xhat.shape()) throw ShapeError("perceptual_loss: shape mismatch");
  if (x.ndim() != 3 || x.dim(2) != feat.in_channels) {
    throw ShapeError(strfmt("perceptual_loss: input %s does not carry %lld channels",
                            shape_str(x.shape()).c_str(), (long long)feat.in_channels));
  }
  if (x.dim(0) < 8 || x.dim(1) < 8) throw ShapeError("perceptual_loss: extents must be >= 8");
  Tensor<T> fa = x, fb = xhat, total;
  for (std::size_t stage = 0; stage < feat.w.size(); ++stage) {
    fa = ops::silu(ops::conv2d(fa, feat.w[stage], feat.b[stage], 2, 1, 1));
    fb = ops::silu(ops::conv2d(fb, feat.w[stage], feat.b[stage], 2, 1, 1));
    Tensor<T> term = ops::mean(ops::abs(ops::sub(fa, fb)));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return ops::scale(total, (T)(1.0 / (double)feat.w.size()));
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& x, const Tensor<T>& xhat, const LossWeights& weights,
                     const TransformContext& ctx, const PerceptualStack<T>& feat,
                     const Tensor<T>& adv) {
  weights.validate();
  Tensor<T> total = ops::scale(charbonnier(x, xhat, weights.epsilon), (T)weights.alpha);
  total = ops::add(total, ops::scale(transform_loss(x, xhat, ctx, weights.epsilon),
                                     (T)weights.beta));
  total = ops::add(total, ops::scale(perceptual_loss(x, xhat, feat), (T)weights.gamma));
  if (adv.defined()) total = ops::add(total, ops::scale(adv, (T)weights.eta));
  return total;
}

namespace {

constexpr double kLogitClamp = 20.0;

// mean softplus(-z): cross entropy against the "real" label.
template <typename T>
Tensor<T> bce_to_one(const Tensor<T>& z) {
  return ops::mean(ops::softplus(ops::neg(ops::clamp(z, (T)-kLogitClamp, (T)kLogitClamp))));
}

// mean softplus(z): cross entropy against the "fake" label.
template <typename T>
Tensor<T> bce_to_zero(const Tensor<T>& z) {
  return ops::mean(ops::softplus(ops::clamp(z, (T)-kLogitClamp, (T)kLogitClamp)));
}

}  // namespace

template <typename T>
DiscriminatorParams<T> make_discriminator(i64 in_channels, u64 seed) {
  if (in_channels <= 0) throw ShapeError("make_discriminator: channels must be positive");
  DiscriminatorParams<T> d;
  CounterRng rng(StreamKey{seed, fnv1a("discriminator"), 0, 0});
  auto body = [&rng](Shape shape, i64 fan_in) {
    Tensor<T> t = uniform_tensor<T>(std::move(shape), 1.0 / std::sqrt((double)fan_in), rng);
    t.set_requires_grad(true);
    return t;
  };
  auto zero = [](Shape shape) {
    Tensor<T> t = Tensor<T>::zeros(std::move(shape));
    t.set_requires_grad(true);
    return t;
  };
  d.e1_w = body({3, 3, in_channels, 8}, 9 * in_channels);
  d.e1_b = zero({8});
  d.e2_w = body({3, 3, 8, 16}, 9 * 8);
  d.e2_b = zero({16});
  d.e3_w = body({3, 3, 16, 32}, 9 * 16);
  d.e3_b = zero({32});
  d.g_w = zero({3, 3, 32, 1});
  d.g_b = zero({1});
  d.d1_w = body({3, 3, 32, 64}, 9 * 32);
  d.d1_b = zero({64});
  d.d2_w = body({3, 3, 16, 32}, 9 * 16);
  d.d2_b = zero({32});
  d.d3_w = zero({3, 3, 8, 4});
  d.d3_b = zero({4});
  return d;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> named_params(DiscriminatorParams<T>& d) {
  return {
      {"disc.e1.w", d.e1_w}, {"disc.e1.b", d.e1_b}, {"disc.e2.w", d.e2_w},
      {"disc.e2.b", d.e2_b}, {"disc.e3.w", d.e3_w}, {"disc.e3.b", d.e3_b},
      {"disc.g.w", d.g_w},   {"disc.g.b", d.g_b},   {"disc.d1.w", d.d1_w},
      {"disc.d1.b", d.d1_b}, {"disc.d2.w", d.d2_w}, {"disc.d2.b", d.d2_b},
      {"disc.d3.w", d.d3_w}, {"disc.d3.b", d.d3_b},
  };
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> discriminator_forward(const Tensor<T>& x,
                                                      const DiscriminatorParams<T>& d) {
  if (x.ndim() != 3 || x.dim(2) != d.e1_w.dim(2)) {
    throw ShapeError(strfmt("discriminator: input %s does not carry %lld channels",
                            shape_str(x.shape()).c_str(), (long long)d.e1_w.dim(2)));
  }
  if (x.dim(0) % 8 || x.dim(1) % 8 || x.dim(0) < 8 || x.dim(1) < 8) {
    throw ShapeError("discriminator: extents must be positive multiples of 8");
  }
  Tensor<T> f = ops::silu(ops::conv2d(x, d.e1_w, d.e1_b, 2, 1, 1));
  f = ops::silu(ops::conv2d(f, d.e2_w, d.e2_b, 2, 1, 1));
  f = ops::silu(ops::conv2d(f, d.e3_w, d.e3_b, 2, 1, 1));
  Tensor<T> global = ops::mean(ops::conv2d(f, d.g_w, d.g_b, 1, 1, 1));
  Tensor<T> p = ops::depth_to_space(ops::silu(ops::conv2d(f, d.d1_w, d.d1_b, 1, 1, 1)), 2);
  p = ops::depth_to_space(ops::silu(ops::conv2d(p, d.d2_w, d.d2_b, 1, 1, 1)), 2);
  p = ops::depth_to_space(ops::conv2d(p, d.d3_w, d.d3_b, 1, 1, 1), 2);
  return {global, p};
}

template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& real, const Tensor<T>& fake,
                             const DiscriminatorParams<T>& d) {
  auto [zr_g, zr_p] = discriminator_forward(real, d);
  auto [zf_g, zf_p] = discriminator_forward(fake, d);
  Tensor<T> global = ops::add(bce_to_one(zr_g), bce_to_zero(zf_g));
  Tensor<T> pixel = ops::add(bce_to_one(zr_p), bce_to_zero(zf_p));
  return ops::scale(ops::add(global, pixel), (T)0.25);
}

template <typename T>
Tensor<T> generator_adversarial(const Tensor<T>& fake, const DiscriminatorParams<T>& d) {
  auto [zf_g, zf_p] = discriminator_forward(fake, d);
  return ops::scale(ops::add(bce_to_one(zf_g), bce_to_one(zf_p)), (T)0.5);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> gan_losses(const Tensor<T>& x, const Tensor<T>& xhat,
                                           const DiscriminatorParams<T>& d) {
  return {discriminator_loss(x, ops::detach(xhat), d), generator_adversarial(xhat, d)};
}

#define MIR_INSTANTIATE_LOSSES(T)                                                          \
  template Tensor<T> charbonnier<T>(const Tensor<T>&, const Tensor<T>&, double, bool);     \
  template Tensor<T> transform_loss<T>(const Tensor<T>&, const Tensor<T>&,                 \
                                       const TransformContext&, double);                   \
  template PerceptualStack<T> make_perceptual_stack<T>(i64);                               \
  template Tensor<T> perceptual_loss<T>(const Tensor<T>&, const Tensor<T>&,                \
                                        const PerceptualStack<T>&);                        \
  template Tensor<T> total_loss<T>(const Tensor<T>&, const Tensor<T>&, const LossWeights&, \
                                   const TransformContext&, const PerceptualStack<T>&,     \
                                   const Tensor<T>&);                                      \
  template DiscriminatorParams<T> make_discriminator<T>(i64, u64);                         \
  template std::vector<std::pair<std::string, Tensor<T>>> named_params<T>(                 \
      DiscriminatorParams<T>&);                                                            \
  template std::pair<Tensor<T>, Tensor<T>> discriminator_forward<T>(                       \
      const Tensor<T>&, const DiscriminatorParams<T>&);                                    \
  template Tensor<T> discriminator_loss<T>(const Tensor<T>&, const Tensor<T>&,             \
                                           const DiscriminatorParams<T>&);                 \
  template Tensor<T> generator_adversarial<T>(const Tensor<T>&,                            \
                                              const DiscriminatorParams<T>&);              \
  template std::pair<Tensor<T>, Tensor<T>> gan_losses<T>(const Tensor<T>&, const Tensor<T>&, \
                                                         const DiscriminatorParams<T>&);

MIR_INSTANTIATE_LOSSES(float)
MIR_INSTANTIATE_LOSSES(double)

#undef MIR_INSTANTIATE_LOSSES

}  // namespace mir::losses
