#include "fcgan/losses.hpp"

#include <stdexcept>
#include <string>

namespace fcgan::losses {

namespace {

Var neg_log(const Var& p) { return ops::neg(ops::log(ops::maximum(p, kProbabilityFloor))); }

Var one_minus(const Var& p) { return ops::add_scalar(ops::neg(p), 1.0); }

void check_labels(std::span<const int> labels, std::size_t limit, std::size_t rows, const char* what) {
    if (labels.size() != rows) {
        throw std::invalid_argument(std::string(what) + ": " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(rows) + " rows");
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= limit) {
            throw std::out_of_range(std::string(what) + ": label " + std::to_string(l) + " outside [0," +
                                    std::to_string(limit) + ")");
        }
    }
}

void check_probs(const Var& probs, const char* what) {
    if (probs.shape().size() != 2) {
        throw std::invalid_argument(std::string(what) + ": expected [b,k] probabilities, got " +
                                    shape_string(probs.shape()));
    }
}

}  // namespace

LossBreakdown total_losses(double source_d, double source_g, double class_d, double class_g) {
    return {source_d, source_g, class_d, class_g, source_d + class_d, source_g + class_g};
}

Var source_loss_d(const Var& p_real, const Var& p_fake, double real_target) {
    if (real_target <= 0.0 || real_target > 1.0) throw std::invalid_argument("source_loss_d: real target outside (0,1]");
    Var real_term = ops::mean(neg_log(p_real));
    if (real_target < 1.0) {
        real_term = ops::add(ops::scale(real_term, real_target),
                             ops::scale(ops::mean(neg_log(one_minus(p_real))), 1.0 - real_target));
    }
    return ops::add(real_term, ops::mean(neg_log(one_minus(p_fake))));
}

Var source_loss_g(const Var& p_fake) { return ops::mean(neg_log(p_fake)); }

Var class_loss_d_fcgan(const Var& probs_real, std::span<const int> labels, const Var& probs_fake) {
    check_probs(probs_real, "class_loss_d_fcgan");
    check_probs(probs_fake, "class_loss_d_fcgan");
    const std::size_t width = probs_real.shape()[1];
    if (width < 2 || probs_fake.shape()[1] != width) throw std::invalid_argument("class_loss_d_fcgan: head width mismatch");
    check_labels(labels, width - 1, probs_real.shape()[0], "class_loss_d_fcgan");
    std::vector<int> fake_class(probs_fake.shape()[0], static_cast<int>(width - 1));
    return ops::add(ops::mean(neg_log(ops::pick(probs_real, labels))),
                    ops::mean(neg_log(ops::pick(probs_fake, fake_class))));
}

Var class_loss_g_fcgan(const Var& probs_fake, std::span<const int> intended) {
    check_probs(probs_fake, "class_loss_g_fcgan");
    check_labels(intended, probs_fake.shape()[1] - 1, probs_fake.shape()[0], "class_loss_g_fcgan");
    return ops::mean(neg_log(ops::pick(probs_fake, intended)));
}

Var class_loss_g_acgan(const Var& probs_fake, std::span<const int> intended) {
    check_probs(probs_fake, "class_loss_g_acgan");
    check_labels(intended, probs_fake.shape()[1], probs_fake.shape()[0], "class_loss_g_acgan");
    return ops::mean(neg_log(ops::pick(probs_fake, intended)));
}

AcganClassLoss class_loss_acgan(const Var& probs_real, std::span<const int> labels, const Var& probs_fake,
                                std::span<const int> fake_labels) {
    check_probs(probs_real, "class_loss_acgan");
    check_probs(probs_fake, "class_loss_acgan");
    const std::size_t width = probs_real.shape()[1];
    if (probs_fake.shape()[1] != width) throw std::invalid_argument("class_loss_acgan: head width mismatch");
    check_labels(labels, width, probs_real.shape()[0], "class_loss_acgan");
    check_labels(fake_labels, width, probs_fake.shape()[0], "class_loss_acgan");
    Var fake_term = class_loss_g_acgan(probs_fake, fake_labels);
    return {ops::add(ops::mean(neg_log(ops::pick(probs_real, labels))), fake_term), fake_term};
}

double source_loss_d(const Tensor& p_real, const Tensor& p_fake) {
    Tape tape;
    return source_loss_d(tape.constant(p_real), tape.constant(p_fake)).value().item();
}

double source_loss_g(const Tensor& p_fake) {
    Tape tape;
    return source_loss_g(tape.constant(p_fake)).value().item();
}

double class_loss_d_fcgan(const Tensor& probs_real, std::span<const int> labels, const Tensor& probs_fake) {
    Tape tape;
    return class_loss_d_fcgan(tape.constant(probs_real), labels, tape.constant(probs_fake)).value().item();
}

double class_loss_g_fcgan(const Tensor& probs_fake, std::span<const int> intended) {
    Tape tape;
    return class_loss_g_fcgan(tape.constant(probs_fake), intended).value().item();
}

std::pair<double, double> class_loss_acgan(const Tensor& probs_real, std::span<const int> labels,
                                           const Tensor& probs_fake, std::span<const int> fake_labels) {
    Tape tape;
    auto r = class_loss_acgan(tape.constant(probs_real), labels, tape.constant(probs_fake), fake_labels);
    return {r.d_term.value().item(), r.g_term.value().item()};
}

}  // namespace fcgan::losses
