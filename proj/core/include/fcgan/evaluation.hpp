#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "fcgan/classifier.hpp"
#include "fcgan/data.hpp"
#include "fcgan/image.hpp"
#include "fcgan/models.hpp"
#include "fcgan/training.hpp"

namespace fcgan::eval {

/// Equilibrium of the source game: D(x) = D(G(z)) = 1/2.
struct ConvergenceOptions {
    double target_g = 0.693;
    double target_d = 1.386;
    double band_g = 0.1;
    double band_d = 0.2;
    std::size_t window = 1;  // trailing epochs averaged
    std::size_t dwell = 3;   // consecutive in-band epochs required
};

struct ConvergenceReport {
    std::optional<std::size_t> convergence_epoch;
    ConvergenceOptions options;
    std::vector<EpochSourceLoss> smoothed;
};

/// First epoch whose smoothed source losses enter the band and stay there
/// for `dwell` epochs. Throws std::invalid_argument on an empty history.
ConvergenceReport convergence_epoch(std::span<const EpochSourceLoss> epochs, const ConvergenceOptions& options = {});

struct ParzenResult {
    double sigma = 0.0;
    double mean_log_likelihood = 0.0;  // nats per sample
    double standard_error = 0.0;
    std::size_t generated_count = 0;
    std::size_t test_count = 0;
};

/// Mean log density of `test` rows under an isotropic Gaussian mixture
/// centered at `generated` rows. Inputs are [n, ...] and flattened per row.
ParzenResult parzen_log_likelihood(const Tensor& test, const Tensor& generated, double sigma);

/// Grid value maximizing the mean validation log-likelihood; ties keep the
/// smaller sigma.
double parzen_fit_sigma(const Tensor& generated, const Tensor& validation, std::span<const double> sigma_grid);

/// Mean log-likelihood for every sigma in the grid, in grid order.
std::vector<double> parzen_grid_scores(const Tensor& generated, const Tensor& validation,
                                       std::span<const double> sigma_grid);

/// `points` values spaced evenly in log between lo and hi inclusive.
std::vector<double> log_sigma_grid(double lo = 0.01, double hi = 1.0, std::size_t points = 20);

/// exp(E_x KL(p(y|x) || p(y))) over rows of class probabilities [n, N].
double classifier_score(const Tensor& probabilities);
double classifier_score(const Classifier& scorer, const Tensor& samples);

/// Fraction of samples the scorer assigns to their intended label.
double conditional_accuracy(const Classifier& scorer, const Tensor& samples, std::span<const int> intended);

/// Samples with labels cycling 0..N-1, `per_class` of each, from fresh noise.
data::Dataset generate_labeled(Generator& generator, std::size_t per_class, std::uint64_t seed);

/// Column c holds class c; each of `rows` rows uses fresh noise.
Image sample_grid(Generator& generator, std::size_t rows, std::uint64_t seed);

/// Toy analogue of the grid: `rows` points per class written as x,y,label.
void write_sample_scatter(Generator& generator, std::size_t rows, std::uint64_t seed,
                          const std::filesystem::path& path);

}  // namespace fcgan::eval
