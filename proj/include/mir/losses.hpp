#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mir/imaging.hpp"
#include "mir/tensor.hpp"

namespace mir::losses {

struct LossWeights {
  double alpha = 15.0;    // image-domain term
  double beta = 0.1;      // transform-domain term
  double gamma = 0.0025;  // perceptual term
  double eta = 0.1;       // adversarial term
  double epsilon = 1e-9;

  // Negative weights are rejected; epsilon must be positive so the loss
  // stays differentiable at zero residual.
  void validate() const;
};

enum class Modality { kMri, kCt };

// Selects the measurement transform for the transform-domain term: the full
// orthonormal fft2 for MRI, full-view projections for CT.
struct TransformContext {
  Modality modality = Modality::kMri;
  imaging::CtGeometry geom;  // used only for CT
};

// Per-sample smooth l2 distance sqrt(|a - b|^2 + epsilon^2) over the whole
// tensor; batches average these scalars. Per-pixel variant divides the
// squared residual by the element count before the square root.
template <typename T>
Tensor<T> charbonnier(const Tensor<T>& a, const Tensor<T>& b, double epsilon,
                      bool per_pixel = false);

template <typename T>
Tensor<T> transform_loss(const Tensor<T>& x, const Tensor<T>& xhat, const TransformContext& ctx,
                         double epsilon);

// Frozen random convolutional feature pyramid standing in for a pretrained
// perceptual backbone: three stride-2 3x3 stages of widths 8/16/32 with SiLU,
// always initialized from seed 0.
template <typename T>
struct PerceptualStack {
  std::vector<Tensor<T>> w, b;
  i64 in_channels = 0;
};

template <typename T>
PerceptualStack<T> make_perceptual_stack(i64 in_channels);

// Mean absolute difference of the stage outputs, averaged over stages.
template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& x, const Tensor<T>& xhat,
                          const PerceptualStack<T>& feat);

// alpha * image charbonnier + beta * transform charbonnier + gamma *
// perceptual, plus eta * adv when an adversarial scalar is supplied.
template <typename T>
Tensor<T> total_loss(const Tensor<T>& x, const Tensor<T>& xhat, const LossWeights& weights,
                     const TransformContext& ctx, const PerceptualStack<T>& feat,
                     const Tensor<T>& adv = Tensor<T>());

// Small strided encoder with two judgement heads: a global logit (mean of a
// coarse logit map) and a full-resolution per-pixel logit map decoded by
// subpixel upsampling. Head convolutions start at zero, so an untrained
// discriminator scores exactly ln 2 on both sides.
template <typename T>
struct DiscriminatorParams {
  Tensor<T> e1_w, e1_b, e2_w, e2_b, e3_w, e3_b;
  Tensor<T> g_w, g_b;
  Tensor<T> d1_w, d1_b, d2_w, d2_b, d3_w, d3_b;
};

template <typename T>
DiscriminatorParams<T> make_discriminator(i64 in_channels, u64 seed);

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> named_params(DiscriminatorParams<T>& d);

// (global logit [1], per-pixel logit map [h, w, 1]); extents must be
// divisible by 8.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> discriminator_forward(const Tensor<T>& x,
                                                      const DiscriminatorParams<T>& d);

// Binary cross-entropy through softplus with logits clamped to [-20, 20],
// averaged over both heads. The discriminator side scores real against
// fake; the generator side is the non-saturating fake-to-one objective.
template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& real, const Tensor<T>& fake,
                             const DiscriminatorParams<T>& d);
template <typename T>
Tensor<T> generator_adversarial(const Tensor<T>& fake, const DiscriminatorParams<T>& d);

// Convenience pair (d_loss, g_loss) with the fake detached on the
// discriminator side. Training alternates the two split functions instead so
// each side owns its tape.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> gan_losses(const Tensor<T>& x, const Tensor<T>& xhat,
                                           const DiscriminatorParams<T>& d);

}  // namespace mir::losses
