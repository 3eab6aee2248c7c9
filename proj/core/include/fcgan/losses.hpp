#pragma once

#include <span>

#include "fcgan/autodiff.hpp"

namespace fcgan::losses {

/// Probabilities are clamped to at least this value before every log.
inline constexpr double kProbabilityFloor = 1e-7;

/// Loss values of one training step, in nats. Totals are plain sums.
struct LossBreakdown {
    double source_d = 0.0;
    double source_g = 0.0;
    double class_d = 0.0;
    double class_g = 0.0;
    double total_d = 0.0;
    double total_g = 0.0;
};

LossBreakdown total_losses(double source_d, double source_g, double class_d, double class_g);

// Differentiable forms. All losses are batch means.

/// mean(-log p_real) + mean(-log(1 - p_fake)). With `real_target` < 1 the
/// real term becomes the cross-entropy against that smoothed target.
Var source_loss_d(const Var& p_real, const Var& p_fake, double real_target = 1.0);
/// mean(-log p_fake): D should call the fakes real.
Var source_loss_g(const Var& p_fake);

/// mean(-log probs_real[i, label_i]) + mean(-log probs_fake[i, N]) where
/// the last column N is the fake class.
Var class_loss_d_fcgan(const Var& probs_real, std::span<const int> labels, const Var& probs_fake);
/// mean(-log probs_fake[i, intended_i]).
Var class_loss_g_fcgan(const Var& probs_fake, std::span<const int> intended);

struct AcganClassLoss {
    Var d_term;  // real and fake halves, each at its (intended) real label
    Var g_term;  // fake half only
};

/// mean(-log probs_fake[i, intended_i]) for an N-wide (AC-GAN) head.
Var class_loss_g_acgan(const Var& probs_fake, std::span<const int> intended);

/// N-way auxiliary classifier losses of the AC-GAN baseline.
AcganClassLoss class_loss_acgan(const Var& probs_real, std::span<const int> labels, const Var& probs_fake,
                                std::span<const int> fake_labels);

// Tensor conveniences evaluated on a private tape.
double source_loss_d(const Tensor& p_real, const Tensor& p_fake);
double source_loss_g(const Tensor& p_fake);
double class_loss_d_fcgan(const Tensor& probs_real, std::span<const int> labels, const Tensor& probs_fake);
double class_loss_g_fcgan(const Tensor& probs_fake, std::span<const int> intended);
std::pair<double, double> class_loss_acgan(const Tensor& probs_real, std::span<const int> labels,
                                           const Tensor& probs_fake, std::span<const int> fake_labels);

}  // namespace fcgan::losses
