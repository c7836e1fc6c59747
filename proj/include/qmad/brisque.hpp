#pragma once

// BRISQUE: blind/referenceless spatial quality from natural scene statistics.
//
// Pipeline per scale: MSCN coefficients -> GGD fit of the coefficients and AGGD fits
// of the four neighbour products (H, V, D1, D2) -> 18 features. The image is then
// box-downsampled by 2 and the same 18 features are taken again. An RBF SVR over
// min-max scaled features maps the 36-vector to a score (lower is better).

#include "qmad/error.hpp"
#include "qmad/image.hpp"
#include "qmad/parallel.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace qmad::brisque {

inline constexpr std::size_t kFeatureCount = 36;
inline constexpr std::size_t kFeaturesPerScale = 18;

struct Config {
    int window_radius = 3;                 ///< 7x7 Gaussian window
    double gaussian_sigma = 7.0 / 6.0;
    double stability_constant = 1.0 / 255.0; ///< 1 on the 0-255 scale
    int scales = 2;

    void validate() const
    {
        if (window_radius < 1) throw Error(ErrorKind::InvalidArgument, "window_radius must be >= 1");
        if (!(gaussian_sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "gaussian_sigma must be > 0");
        if (!(stability_constant > 0.0)) throw Error(ErrorKind::InvalidArgument, "stability constant must be > 0");
        if (scales != 2) throw Error(ErrorKind::InvalidArgument, "scales is fixed at 2");
    }

    std::size_t window() const noexcept { return static_cast<std::size_t>(2 * window_radius + 1); }
};

/// Row-major real-valued field (MSCN coefficients, pairwise products).
struct Field {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;

    Field() = default;
    Field(std::size_t w, std::size_t h)
        : width(w)
        , height(h)
        , values(w * h, 0.0)
    {
    }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values[r * width + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values[r * width + c]; }
};

namespace detail {

/// Half-sample symmetric reflection: ... b a | a b c ... c b | b ...
inline std::size_t reflect(std::ptrdiff_t i, std::size_t n) noexcept
{
    const auto len = static_cast<std::ptrdiff_t>(n);
    while (i < 0 || i >= len) {
        if (i < 0) i = -i - 1;
        if (i >= len) i = 2 * len - i - 1;
    }
    return static_cast<std::size_t>(i);
}

inline std::vector<double> gaussian_kernel(const Config& cfg)
{
    std::vector<double> k(cfg.window());
    double sum = 0.0;
    for (int i = -cfg.window_radius; i <= cfg.window_radius; ++i) {
        const double w = std::exp(-(i * i) / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma));
        k[static_cast<std::size_t>(i + cfg.window_radius)] = w;
        sum += w;
    }
    for (auto& w : k) w /= sum;
    return k;
}

/// Separable correlation: columns (vertical pass) then rows, reflect boundaries.
inline Field blur(const Field& in, std::span<const double> kernel)
{
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    Field tmp(in.width, in.height);
    for (std::size_t r = 0; r < in.height; ++r)
        for (std::size_t c = 0; c < in.width; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       in(reflect(static_cast<std::ptrdiff_t>(r) + k, in.height), c);
            tmp(r, c) = acc;
        }
    Field out(in.width, in.height);
    for (std::size_t r = 0; r < in.height; ++r)
        for (std::size_t c = 0; c < in.width; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp(r, reflect(static_cast<std::ptrdiff_t>(c) + k, in.width));
            out(r, c) = acc;
        }
    return out;
}

/// Per-pixel (max - min) over the reflected square window, via separable passes.
inline Field window_range(const Field& in, std::ptrdiff_t radius)
{
    Field lo(in.width, in.height), hi(in.width, in.height);
    for (std::size_t r = 0; r < in.height; ++r)
        for (std::size_t c = 0; c < in.width; ++c) {
            double a = in(r, c), b = a;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                const double v = in(reflect(static_cast<std::ptrdiff_t>(r) + k, in.height), c);
                a = std::min(a, v);
                b = std::max(b, v);
            }
            lo(r, c) = a;
            hi(r, c) = b;
        }
    Field out(in.width, in.height);
    for (std::size_t r = 0; r < in.height; ++r)
        for (std::size_t c = 0; c < in.width; ++c) {
            double a = lo(r, c), b = hi(r, c);
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                const auto cc = reflect(static_cast<std::ptrdiff_t>(c) + k, in.width);
                a = std::min(a, lo(r, cc));
                b = std::max(b, hi(r, cc));
            }
            out(r, c) = b - a;
        }
    return out;
}

} // namespace detail

/// Mean-subtracted contrast-normalized coefficients:
/// (I - mu) / (sigma + C), with mu and sigma^2 = E[I^2] - mu^2 from the Gaussian window.
inline Field mscn(const GrayImage& image, const Config& cfg = {})
{
    cfg.validate();
    if (image.width() < cfg.window() || image.height() < cfg.window())
        throw Error(ErrorKind::ImageTooSmall, std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                                                  " is smaller than the " + std::to_string(cfg.window()) +
                                                  "-pixel window");
    // Moments are taken about one pixel's value; MSCN is shift invariant and a
    // constant image then yields exact zeros.
    const double origin = image.pixels().front();
    Field centered(image.width(), image.height());
    Field squared(image.width(), image.height());
    for (std::size_t i = 0; i < centered.values.size(); ++i) {
        const double v = image.pixels()[i] - origin;
        centered.values[i] = v;
        squared.values[i] = v * v;
    }
    const auto kernel = detail::gaussian_kernel(cfg);
    const Field mu = detail::blur(centered, kernel);
    const Field mu2 = detail::blur(squared, kernel);
    // A flat window has mu = I and sigma = 0 exactly; the filtered sums would leave
    // rounding residue whose sign then leaks into the paired-product fits.
    const Field range = detail::window_range(centered, cfg.window_radius);
    Field out(image.width(), image.height());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        if (range.values[i] == 0.0) continue;
        const double m = mu.values[i];
        const double sigma = std::sqrt(std::max(0.0, mu2.values[i] - m * m));
        out.values[i] = (centered.values[i] - m) / (sigma + cfg.stability_constant);
    }
    return out;
}

/// Products of each coefficient with its right (H), lower (V), lower-right (D1)
/// and lower-left (D2) neighbour. Fields shrink by one along each paired axis.
struct PairedProducts {
    Field horizontal;
    Field vertical;
    Field main_diagonal;
    Field anti_diagonal;
};

inline PairedProducts paired_products(const Field& c)
{
    if (c.width < 2 || c.height < 2) throw Error(ErrorKind::ImageTooSmall, "paired products need a 2x2 field");
    PairedProducts p{Field(c.width - 1, c.height), Field(c.width, c.height - 1), Field(c.width - 1, c.height - 1),
                     Field(c.width - 1, c.height - 1)};
    for (std::size_t r = 0; r < c.height; ++r)
        for (std::size_t j = 0; j + 1 < c.width; ++j) p.horizontal(r, j) = c(r, j) * c(r, j + 1);
    for (std::size_t r = 0; r + 1 < c.height; ++r)
        for (std::size_t j = 0; j < c.width; ++j) p.vertical(r, j) = c(r, j) * c(r + 1, j);
    for (std::size_t r = 0; r + 1 < c.height; ++r)
        for (std::size_t j = 0; j + 1 < c.width; ++j) {
            p.main_diagonal(r, j) = c(r, j) * c(r + 1, j + 1);
            p.anti_diagonal(r, j) = c(r, j + 1) * c(r + 1, j);
        }
    return p;
}

/// Shape-parameter grid [0.2, 10] in steps of 0.001 with its gamma-function ratios.
class ShapeGrid {
public:
    static const ShapeGrid& instance()
    {
        static const ShapeGrid grid;
        return grid;
    }

    std::span<const double> shapes() const noexcept { return shapes_; }
    /// Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2, the GGD ratio E[x^2] / E[|x|]^2.
    std::span<const double> ggd_ratio() const noexcept { return ggd_ratio_; }
    /// Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)), its reciprocal as used by the AGGD match.
    std::span<const double> aggd_ratio() const noexcept { return aggd_ratio_; }

    static constexpr double kMin = 0.2;
    static constexpr double kMax = 10.0;
    static constexpr double kStep = 0.001;

private:
    ShapeGrid()
    {
        const auto n = static_cast<std::size_t>(std::lround((kMax - kMin) / kStep)) + 1;
        shapes_.resize(n);
        ggd_ratio_.resize(n);
        aggd_ratio_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = kMin + kStep * static_cast<double>(i);
            shapes_[i] = a;
            const double g1 = std::tgamma(1.0 / a);
            const double g2 = std::tgamma(2.0 / a);
            const double g3 = std::tgamma(3.0 / a);
            ggd_ratio_[i] = g1 * g3 / (g2 * g2);
            aggd_ratio_[i] = (g2 * g2) / (g1 * g3);
        }
    }

    std::vector<double> shapes_;
    std::vector<double> ggd_ratio_;
    std::vector<double> aggd_ratio_;
};

struct GgdFit {
    double shape = ShapeGrid::kMax; ///< alpha
    double variance = 0.0;          ///< sigma^2 = E[x^2]
    bool degenerate = false;
};

/// Moment-matching GGD fit. All-zero input returns the sentinel (alpha = 10, sigma^2 = 0)
/// flagged degenerate.
inline GgdFit fit_ggd(std::span<const double> samples)
{
    if (samples.size() < 2) throw Error(ErrorKind::InvalidArgument, "fit_ggd needs at least 2 samples");
    double sum_sq = 0.0;
    double sum_abs = 0.0;
    for (double x : samples) {
        sum_sq += x * x;
        sum_abs += std::abs(x);
    }
    const auto n = static_cast<double>(samples.size());
    const double second = sum_sq / n;
    const double first_abs = sum_abs / n;
    if (first_abs == 0.0) return {ShapeGrid::kMax, 0.0, true};
    const double rho = second / (first_abs * first_abs);

    const auto& grid = ShapeGrid::instance();
    const auto ratio = grid.ggd_ratio();
    std::size_t best = 0;
    double best_diff = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        const double d = std::abs(rho - ratio[i]);
        if (d < best_diff) {
            best_diff = d;
            best = i;
        }
    }
    return {grid.shapes()[best], second, false};
}

struct AggdFit {
    double shape = ShapeGrid::kMax; ///< nu
    double mean = 0.0;              ///< eta
    double left_variance = 0.0;
    double right_variance = 0.0;
    bool degenerate = false;
};

/// Asymmetric GGD fit. A side without samples contributes a zero moment.
inline AggdFit fit_aggd(std::span<const double> samples)
{
    if (samples.size() < 2) throw Error(ErrorKind::InvalidArgument, "fit_aggd needs at least 2 samples");
    double left_sq = 0.0, right_sq = 0.0, sum_sq = 0.0, sum_abs = 0.0;
    std::size_t left_n = 0, right_n = 0;
    for (double x : samples) {
        if (x < 0.0) {
            left_sq += x * x;
            ++left_n;
        } else if (x > 0.0) {
            right_sq += x * x;
            ++right_n;
        }
        sum_sq += x * x;
        sum_abs += std::abs(x);
    }
    if (sum_abs == 0.0) return {ShapeGrid::kMax, 0.0, 0.0, 0.0, true};

    const auto n = static_cast<double>(samples.size());
    const double left_std = left_n ? std::sqrt(left_sq / static_cast<double>(left_n)) : 0.0;
    const double right_std = right_n ? std::sqrt(right_sq / static_cast<double>(right_n)) : 0.0;
    // The normalization factor is symmetric in gamma <-> 1/gamma, so a missing right
    // side can use the flipped ratio.
    const double gamma_hat = right_std > 0.0 ? left_std / right_std : 0.0;
    const double mean_abs = sum_abs / n;
    const double r_hat = mean_abs * mean_abs / (sum_sq / n);
    const double g2 = gamma_hat * gamma_hat;
    const double r_norm = r_hat * (g2 * gamma_hat + 1.0) * (gamma_hat + 1.0) / ((g2 + 1.0) * (g2 + 1.0));

    const auto& grid = ShapeGrid::instance();
    const auto ratio = grid.aggd_ratio();
    std::size_t best = 0;
    double best_diff = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        const double d = (ratio[i] - r_norm) * (ratio[i] - r_norm);
        if (d < best_diff) {
            best_diff = d;
            best = i;
        }
    }
    const double nu = grid.shapes()[best];
    const double g_1 = std::tgamma(1.0 / nu);
    const double g_2 = std::tgamma(2.0 / nu);
    const double g_3 = std::tgamma(3.0 / nu);
    // Scale parameters beta = std * sqrt(Gamma(1/nu) / Gamma(3/nu)).
    const double eta = (right_std - left_std) * (g_2 / g_1) * std::sqrt(g_1 / g_3);
    return {nu, eta, left_std * left_std, right_std * right_std, false};
}

/// 36 features: per scale [alpha, sigma^2, then (nu, eta, sigma_l^2, sigma_r^2) for H, V, D1, D2].
struct Features {
    std::array<double, kFeatureCount> values{};
    int degenerate_fits = 0; ///< number of fits that hit the all-zero sentinel
};

/// 2x2 box average; odd trailing rows/columns are dropped.
inline GrayImage downsample_box(const GrayImage& image)
{
    const std::size_t w = image.width() / 2;
    const std::size_t h = image.height() / 2;
    if (w == 0 || h == 0) throw Error(ErrorKind::ImageTooSmall, "cannot halve a 1-pixel dimension");
    std::vector<double> px(w * h);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            px[r * w + c] = (image(2 * r, 2 * c) + image(2 * r, 2 * c + 1) + image(2 * r + 1, 2 * c) +
                             image(2 * r + 1, 2 * c + 1)) /
                            4.0;
    return GrayImage(w, h, std::move(px));
}

namespace detail {

inline void scale_features(const GrayImage& image, const Config& cfg, std::span<double, kFeaturesPerScale> out,
                           int& degenerate)
{
    const Field coeffs = mscn(image, cfg);
    const auto ggd = fit_ggd(coeffs.values);
    degenerate += ggd.degenerate;
    out[0] = ggd.shape;
    out[1] = ggd.variance;
    const auto products = paired_products(coeffs);
    std::size_t k = 2;
    for (const Field* f : {&products.horizontal, &products.vertical, &products.main_diagonal, &products.anti_diagonal}) {
        const auto fit = fit_aggd(f->values);
        degenerate += fit.degenerate;
        out[k++] = fit.shape;
        out[k++] = fit.mean;
        out[k++] = fit.left_variance;
        out[k++] = fit.right_variance;
    }
}

} // namespace detail

inline Features features(const GrayImage& image, const Config& cfg = {})
{
    cfg.validate();
    const auto min_side = 2 * cfg.window();
    if (image.width() < min_side || image.height() < min_side)
        throw Error(ErrorKind::ImageTooSmall, "BRISQUE needs at least " + std::to_string(min_side) + " pixels per side");
    Features f;
    std::span<double, kFeatureCount> all(f.values);
    detail::scale_features(image, cfg, all.first<kFeaturesPerScale>(), f.degenerate_fits);
    detail::scale_features(downsample_box(image), cfg, all.last<kFeaturesPerScale>(), f.degenerate_fits);
    return f;
}

/// RBF epsilon-SVR over features scaled to [-1, 1] by per-feature (min, max) ranges.
///
/// Text format (blank lines and '#' comments ignored):
///   qmad-svr 1
///   features 36
///   gamma <g>
///   bias <b>
///   ranges
///   <min> <max>                  x features
///   support_vectors <n>
///   <coef> <v_1> ... <v_36>      x n
struct SvrModel {
    double gamma = 0.0;
    double bias = 0.0;
    std::vector<std::array<double, 2>> ranges;
    std::vector<double> coefficients;
    std::vector<std::vector<double>> support_vectors;

    void validate() const
    {
        if (ranges.size() != kFeatureCount)
            throw Error(ErrorKind::ModelMismatch, "model has " + std::to_string(ranges.size()) + " scaling ranges, expected 36");
        for (const auto& [lo, hi] : ranges)
            if (!(lo < hi)) throw Error(ErrorKind::ModelMismatch, "scaling range min must be < max");
        if (!(gamma > 0.0)) throw Error(ErrorKind::ModelMismatch, "gamma must be positive");
        if (support_vectors.empty() || support_vectors.size() != coefficients.size())
            throw Error(ErrorKind::ModelMismatch, "support vector / coefficient count mismatch");
        for (const auto& sv : support_vectors)
            if (sv.size() != kFeatureCount) throw Error(ErrorKind::ModelMismatch, "support vector dimension is not 36");
    }
};

inline SvrModel read_svr_model(std::istream& in, const std::string& source = "<model>")
{
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        lines.push_back(line);
    }
    std::size_t pos = 0;
    auto fail = [&](const std::string& msg) -> void {
        throw Error(ErrorKind::ParseError, source + ": " + msg);
    };
    auto next = [&]() -> std::istringstream {
        if (pos >= lines.size()) fail("unexpected end of model file");
        return std::istringstream(lines[pos++]);
    };
    auto keyed = [&](const char* key) {
        auto ls = next();
        std::string k;
        ls >> k;
        if (k != key) fail(std::string("expected '") + key + "', got '" + k + "'");
        return ls;
    };

    SvrModel m;
    {
        auto ls = keyed("qmad-svr");
        int version = 0;
        if (!(ls >> version) || version != 1) fail("unsupported model version");
    }
    std::size_t dims = 0;
    if (!(keyed("features") >> dims)) fail("bad feature count");
    if (dims != kFeatureCount) throw Error(ErrorKind::ModelMismatch, source + ": model expects " + std::to_string(dims) + " features");
    if (!(keyed("gamma") >> m.gamma)) fail("bad gamma");
    if (!(keyed("bias") >> m.bias)) fail("bad bias");
    keyed("ranges");
    for (std::size_t i = 0; i < dims; ++i) {
        auto ls = next();
        std::array<double, 2> r{};
        if (!(ls >> r[0] >> r[1])) fail("bad range line");
        m.ranges.push_back(r);
    }
    std::size_t n = 0;
    if (!(keyed("support_vectors") >> n) || n == 0) fail("bad support vector count");
    for (std::size_t i = 0; i < n; ++i) {
        auto ls = next();
        double coef = 0.0;
        if (!(ls >> coef)) fail("bad support vector line");
        std::vector<double> sv(dims);
        for (auto& v : sv)
            if (!(ls >> v)) fail("support vector line " + std::to_string(i) + " is short");
        m.coefficients.push_back(coef);
        m.support_vectors.push_back(std::move(sv));
    }
    m.validate();
    return m;
}

inline SvrModel load_svr_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return read_svr_model(in, path.string());
}

inline void write_svr_model(std::ostream& out, const SvrModel& m)
{
    m.validate();
    out.precision(17);
    out << "qmad-svr 1\nfeatures " << kFeatureCount << "\ngamma " << m.gamma << "\nbias " << m.bias << "\nranges\n";
    for (const auto& [lo, hi] : m.ranges) out << lo << ' ' << hi << '\n';
    out << "support_vectors " << m.support_vectors.size() << '\n';
    for (std::size_t i = 0; i < m.support_vectors.size(); ++i) {
        out << m.coefficients[i];
        for (double v : m.support_vectors[i]) out << ' ' << v;
        out << '\n';
    }
}

inline double score_features(std::span<const double> feats, const SvrModel& model)
{
    if (feats.size() != kFeatureCount || model.ranges.size() != kFeatureCount)
        throw Error(ErrorKind::ModelMismatch, "feature/model dimensionality mismatch");
    std::array<double, kFeatureCount> x{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const auto [lo, hi] = model.ranges[i];
        x[i] = -1.0 + 2.0 * (feats[i] - lo) / (hi - lo);
    }
    double acc = model.bias;
    for (std::size_t s = 0; s < model.support_vectors.size(); ++s) {
        const auto& sv = model.support_vectors[s];
        if (sv.size() != kFeatureCount) throw Error(ErrorKind::ModelMismatch, "support vector dimension is not 36");
        double d2 = 0.0;
        for (std::size_t i = 0; i < kFeatureCount; ++i) d2 += (sv[i] - x[i]) * (sv[i] - x[i]);
        acc += model.coefficients[s] * std::exp(-model.gamma * d2);
    }
    return acc;
}

/// Raw BRISQUE score; lower means better quality.
inline double score(const GrayImage& image, const SvrModel& model, const Config& cfg = {})
{
    return score_features(features(image, cfg).values, model);
}

/// Scores many images; result i belongs to image i regardless of thread count.
inline std::vector<double> score_batch(std::span<const GrayImage> images, const SvrModel& model,
                                       const Config& cfg = {}, std::size_t threads = 1)
{
    std::vector<double> out(images.size());
    parallel_for(images.size(), threads, [&](std::size_t i) { out[i] = score(images[i], model, cfg); });
    return out;
}

} // namespace qmad::brisque
