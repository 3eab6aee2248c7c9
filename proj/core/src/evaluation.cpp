#include "fcgan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "blas.hpp"

namespace fcgan::eval {

ConvergenceReport convergence_epoch(std::span<const EpochSourceLoss> epochs, const ConvergenceOptions& options) {
    if (epochs.empty()) throw std::invalid_argument("convergence_epoch: empty loss history");
    if (options.window == 0 || options.dwell == 0) throw std::invalid_argument("convergence_epoch: window and dwell must be positive");
    ConvergenceReport report;
    report.options = options;
    report.smoothed.reserve(epochs.size());
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const std::size_t first = i + 1 >= options.window ? i + 1 - options.window : 0;
        EpochSourceLoss s{epochs[i].epoch, 0.0, 0.0};
        for (std::size_t j = first; j <= i; ++j) {
            s.source_g += epochs[j].source_g;
            s.source_d += epochs[j].source_d;
        }
        const double n = static_cast<double>(i + 1 - first);
        s.source_g /= n;
        s.source_d /= n;
        report.smoothed.push_back(s);
    }
    auto in_band = [&](const EpochSourceLoss& s) {
        return std::abs(s.source_g - options.target_g) < options.band_g &&
               std::abs(s.source_d - options.target_d) < options.band_d;
    };
    std::size_t run = 0;
    for (std::size_t i = 0; i < report.smoothed.size(); ++i) {
        run = in_band(report.smoothed[i]) ? run + 1 : 0;
        if (run == options.dwell) {
            report.convergence_epoch = report.smoothed[i + 1 - options.dwell].epoch;
            break;
        }
    }
    return report;
}

namespace {

std::size_t row_width(const Tensor& t) { return t.size() / t.dim(0); }

/// Squared distances between rows [a0, a0+rows) of `a` and every row of `b`.
void squared_distances(const Tensor& a, std::size_t a0, std::size_t rows, const Tensor& b, std::vector<double>& out) {
    const std::size_t d = row_width(a);
    const std::size_t k = b.dim(0);
    out.assign(rows * k, 0.0);
    const double* pa = a.raw() + a0 * d;
    const double* pb = b.raw();
    if (d <= 16) {
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = pa[i * d + c] - pb[j * d + c];
                    s += diff * diff;
                }
                out[i * k + j] = s;
            }
        }
        return;
    }
    // |x|^2 + |g|^2 - 2 x.g; cancellation may leave tiny negatives.
    detail::gemm(false, true, rows, k, d, -2.0, pa, d, pb, d, 0.0, out.data(), k);
    std::vector<double> nb(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t c = 0; c < d; ++c) nb[j] += pb[j * d + c] * pb[j * d + c];
    }
    for (std::size_t i = 0; i < rows; ++i) {
        double na = 0.0;
        for (std::size_t c = 0; c < d; ++c) na += pa[i * d + c] * pa[i * d + c];
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = std::max(0.0, out[i * k + j] + na + nb[j]);
    }
}

void check_parzen_inputs(const Tensor& test, const Tensor& generated) {
    if (test.rank() == 0 || generated.rank() == 0) throw std::invalid_argument("parzen: inputs need a sample axis");
    if (row_width(test) != row_width(generated)) {
        throw std::invalid_argument("parzen: sample dimension " + std::to_string(row_width(test)) + " vs " +
                                    std::to_string(row_width(generated)));
    }
}

/// Per-row log-likelihoods of `test` for every sigma, laid out [sigma][row].
std::vector<std::vector<double>> parzen_rows(const Tensor& test, const Tensor& generated, std::span<const double> sigmas) {
    check_parzen_inputs(test, generated);
    for (double s : sigmas) {
        if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("parzen: sigma must be positive");
    }
    const std::size_t n = test.dim(0);
    const std::size_t k = generated.dim(0);
    const double d = static_cast<double>(row_width(test));
    const double log_k = std::log(static_cast<double>(k));
    std::vector<std::vector<double>> out(sigmas.size(), std::vector<double>(n));
    constexpr std::size_t kChunk = 256;
    std::vector<double> dist;
    for (std::size_t a0 = 0; a0 < n; a0 += kChunk) {
        const std::size_t rows = std::min(kChunk, n - a0);
        squared_distances(test, a0, rows, generated, dist);
        for (std::size_t i = 0; i < rows; ++i) {
            const double* di = dist.data() + i * k;
            const double dmin = *std::min_element(di, di + k);
            for (std::size_t s = 0; s < sigmas.size(); ++s) {
                const double inv = 1.0 / (2.0 * sigmas[s] * sigmas[s]);
                double acc = 0.0;
                for (std::size_t j = 0; j < k; ++j) acc += std::exp(-(di[j] - dmin) * inv);
                const double log_norm = 0.5 * d * std::log(2.0 * std::numbers::pi * sigmas[s] * sigmas[s]);
                out[s][a0 + i] = -dmin * inv + std::log(acc) - log_k - log_norm;
            }
        }
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

ParzenResult parzen_log_likelihood(const Tensor& test, const Tensor& generated, double sigma) {
    const double grid[] = {sigma};
    const std::vector<double> rows = std::move(parzen_rows(test, generated, grid).front());
    ParzenResult r;
    r.sigma = sigma;
    r.generated_count = generated.dim(0);
    r.test_count = test.dim(0);
    r.mean_log_likelihood = mean_of(rows);
    if (rows.size() > 1) {
        double ss = 0.0;
        for (double x : rows) ss += (x - r.mean_log_likelihood) * (x - r.mean_log_likelihood);
        const double n = static_cast<double>(rows.size());
        r.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return r;
}

std::vector<double> parzen_grid_scores(const Tensor& generated, const Tensor& validation,
                                       std::span<const double> sigma_grid) {
    if (sigma_grid.empty()) throw std::invalid_argument("parzen: empty sigma grid");
    std::vector<double> scores;
    for (const auto& rows : parzen_rows(validation, generated, sigma_grid)) scores.push_back(mean_of(rows));
    return scores;
}

double parzen_fit_sigma(const Tensor& generated, const Tensor& validation, std::span<const double> sigma_grid) {
    const std::vector<double> scores = parzen_grid_scores(generated, validation, sigma_grid);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best] || (scores[i] == scores[best] && sigma_grid[i] < sigma_grid[best])) best = i;
    }
    return sigma_grid[best];
}

std::vector<double> log_sigma_grid(double lo, double hi, std::size_t points) {
    if (!(lo > 0.0) || !(hi >= lo) || points == 0) throw std::invalid_argument("log_sigma_grid: need 0 < lo <= hi and points > 0");
    if (points == 1) return {lo};
    std::vector<double> grid(points);
    const double step = std::log(hi / lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) grid[i] = lo * std::exp(step * static_cast<double>(i));
    grid.back() = hi;
    return grid;
}

double classifier_score(const Tensor& probabilities) {
    if (probabilities.rank() != 2) throw std::invalid_argument("classifier_score: expected [n, N] probabilities");
    const std::size_t n = probabilities.dim(0);
    const std::size_t classes = probabilities.dim(1);
    const double* p = probabilities.raw();
    std::vector<double> marginal(classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < classes; ++c) marginal[c] += p[i * classes + c];
    }
    for (double& m : marginal) m /= static_cast<double>(n);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < classes; ++c) {
            const double v = p[i * classes + c];
            if (v > 0.0) kl += v * (std::log(v) - std::log(marginal[c]));
        }
    }
    kl /= static_cast<double>(n);
    // The mean KL is a mutual information in [0, ln N]; rounding can step just outside.
    kl = std::clamp(kl, 0.0, std::log(static_cast<double>(classes)));
    return std::exp(kl);
}

double classifier_score(const Classifier& scorer, const Tensor& samples) {
    return classifier_score(scorer.predict_proba(samples));
}

double conditional_accuracy(const Classifier& scorer, const Tensor& samples, std::span<const int> intended) {
    return scorer.accuracy(samples, intended);
}

data::Dataset generate_labeled(Generator& generator, std::size_t per_class, std::uint64_t seed) {
    const GeneratorSpec& spec = generator.spec();
    const std::size_t total = per_class * spec.num_classes;
    if (total == 0) throw std::invalid_argument("generate_labeled: nothing to generate");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    const std::size_t width = shape_size(spec.sample_shape);
    std::vector<double> values;
    values.reserve(total * width);
    std::vector<int> labels(total);
    for (std::size_t i = 0; i < total; ++i) labels[i] = static_cast<int>(i % spec.num_classes);
    constexpr std::size_t kChunk = 200;
    for (std::size_t b0 = 0; b0 < total; b0 += kChunk) {
        const std::size_t rows = std::min(kChunk, total - b0);
        std::vector<double> z(rows * spec.noise_dim);
        for (double& v : z) v = uniform(rng);
        LatentInput in{Tensor({rows, spec.noise_dim}, std::move(z)),
                       std::vector<int>(labels.begin() + static_cast<std::ptrdiff_t>(b0),
                                        labels.begin() + static_cast<std::ptrdiff_t>(b0 + rows))};
        const Tensor out = generator.generate(in);
        values.insert(values.end(), out.raw(), out.raw() + out.size());
    }
    Shape shape{total};
    shape.insert(shape.end(), spec.sample_shape.begin(), spec.sample_shape.end());
    return data::Dataset{Tensor(std::move(shape), std::move(values)), std::move(labels), spec.num_classes};
}

Image sample_grid(Generator& generator, std::size_t rows, std::uint64_t seed) {
    const GeneratorSpec& spec = generator.spec();
    if (spec.sample_shape.size() != 3) throw std::invalid_argument("sample_grid: generator does not produce images");
    const std::size_t ch = spec.sample_shape[0], h = spec.sample_shape[1], w = spec.sample_shape[2];
    const std::size_t cols = spec.num_classes;
    // generate_labeled cycles labels, so sample r*cols + c has label c.
    const data::Dataset samples = generate_labeled(generator, rows, seed);
    Image img;
    img.width = cols * w;
    img.height = rows * h;
    img.channels = ch;
    img.pixels.resize(img.width * img.height * ch);
    const double* v = samples.inputs.raw();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double* s = v + (r * cols + c) * ch * h * w;
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    for (std::size_t k = 0; k < ch; ++k) {
                        const std::size_t py = r * h + y, px = c * w + x;
                        img.pixels[(py * img.width + px) * ch + k] = data::unit_to_pixel(s[(k * h + y) * w + x]);
                    }
                }
            }
        }
    }
    return img;
}

void write_sample_scatter(Generator& generator, std::size_t rows, std::uint64_t seed,
                          const std::filesystem::path& path) {
    if (generator.spec().sample_shape != Shape{2}) throw std::invalid_argument("sample scatter needs 2-d samples");
    data::write_toy_csv(generate_labeled(generator, rows, seed), path);
}

}  // namespace fcgan::eval
