#include "ggr/texture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ggr/csv.hpp"
#include "ggr/stats.hpp"

namespace ggr {

const char* glcm_angle_name(GlcmAngle a) {
    switch (a) {
        case GlcmAngle::deg0: return "0";
        case GlcmAngle::deg45: return "45";
        case GlcmAngle::deg90: return "90";
        case GlcmAngle::deg135: return "135";
    }
    return "?";
}

Matrix log_kernel_raw(double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("log_kernel_raw: sigma must be > 0");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    const int size = 2 * radius + 1;
    const double s2 = sigma * sigma;
    const double s4 = s2 * s2;
    Matrix taps(size, size);
    for (int y = -radius; y <= radius; ++y)
        for (int x = -radius; x <= radius; ++x) {
            const double r2 = static_cast<double>(x) * x + static_cast<double>(y) * y;
            taps(y + radius, x + radius) = -(1.0 / (std::numbers::pi * s4)) *
                                           (1.0 - r2 / (2.0 * s2)) * std::exp(-r2 / (2.0 * s2));
        }
    return taps;
}

LogKernel log_kernel(double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("log_kernel: sigma must be >= 0");
    LogKernel k;
    k.sigma = sigma;
    if (sigma == 0.0) return k;  // identity band

    k.taps = log_kernel_raw(sigma);
    // DC correction: truncation leaves a residual mean; remove it so constant
    // images map to exactly zero. The last tap absorbs the rounding residue,
    // which makes the row-major tap sum exactly 0.0.
    double sum = 0.0;
    for (double v : k.taps) sum += v;
    const double bias = sum / static_cast<double>(k.taps.size());
    for (double& v : k.taps) v -= bias;
    double partial = 0.0;
    for (size_t i = 0; i + 1 < k.taps.size(); ++i) partial += k.taps.data()[i];
    k.taps.data()[k.taps.size() - 1] = -partial;
    return k;
}

Matrix apply_log(const Matrix& image, const LogKernel& kernel) {
    if (image.rows() < 1 || image.cols() < 1) throw std::invalid_argument("apply_log: empty image");
    if (kernel.is_identity()) return image;
    const int radius = (kernel.taps.rows() - 1) / 2;
    const int rows = image.rows(), cols = image.cols();
    auto reflect = [](int i, int n) {
        // reflect without repeating the border sample (..., 2, 1, 0, 1, 2, ...)
        if (n == 1) return 0;
        const int period = 2 * (n - 1);
        i = std::abs(i) % period;
        return i < n ? i : period - i;
    };
    Matrix out(rows, cols);
    const int size = 2 * radius + 1;
    for (int r = 0; r < rows; ++r) {
        const bool row_interior = r >= radius && r + radius < rows;
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            if (row_interior && c >= radius && c + radius < cols) {
                for (int dy = 0; dy < size; ++dy) {
                    const double* imrow = &image(r + dy - radius, c - radius);
                    const double* krow = &kernel.taps(dy, 0);
                    for (int dx = 0; dx < size; ++dx) acc += imrow[dx] * krow[dx];
                }
            } else {
                for (int dy = -radius; dy <= radius; ++dy) {
                    const int rr = reflect(r + dy, rows);
                    for (int dx = -radius; dx <= radius; ++dx) {
                        const int cc = reflect(c + dx, cols);
                        acc += image(rr, cc) * kernel.taps(dy + radius, dx + radius);
                    }
                }
            }
            out(r, c) = acc;
        }
    }
    return out;
}

namespace {

struct Offset {
    int dr, dc;
};

Offset angle_offset(GlcmAngle a) {
    switch (a) {
        case GlcmAngle::deg0: return {0, 1};
        case GlcmAngle::deg45: return {-1, 1};
        case GlcmAngle::deg90: return {-1, 0};
        case GlcmAngle::deg135: return {-1, -1};
    }
    return {0, 1};
}

}  // namespace

GlcmMatrix compute_glcm(const Matrix& image, const MaskImage& mask, GlcmAngle angle, int levels,
                        int distance) {
    if (levels < 2) throw std::invalid_argument("compute_glcm: levels must be >= 2");
    if (distance < 1) throw std::invalid_argument("compute_glcm: distance must be >= 1");
    if (image.rows() != mask.rows() || image.cols() != mask.cols())
        throw std::invalid_argument("compute_glcm: image/mask dims differ");

    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (int r = 0; r < image.rows(); ++r)
        for (int c = 0; c < image.cols(); ++c)
            if (mask(r, c)) {
                const double v = image(r, c);
                if (!any) {
                    lo = hi = v;
                    any = true;
                } else {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }

    GlcmMatrix out;
    out.levels = levels;
    out.angle = angle;
    out.distance = distance;
    out.p = Matrix(levels, levels, 0.0);

    auto quantize = [&](double v) {
        if (hi <= lo) return 0;
        const int bin = static_cast<int>((v - lo) / (hi - lo) * levels);
        return std::min(bin, levels - 1);
    };

    const Offset off = angle_offset(angle);
    long pairs = 0;
    if (any) {
        for (int r = 0; r < image.rows(); ++r)
            for (int c = 0; c < image.cols(); ++c) {
                if (!mask(r, c)) continue;
                const int r2 = r + off.dr * distance, c2 = c + off.dc * distance;
                if (r2 < 0 || r2 >= image.rows() || c2 < 0 || c2 >= image.cols()) continue;
                if (!mask(r2, c2)) continue;
                out.p(quantize(image(r, c)), quantize(image(r2, c2))) += 1.0;
                ++pairs;
            }
    }
    if (pairs == 0) {
        out.degenerate = true;
        const double u = 1.0 / (static_cast<double>(levels) * levels);
        for (double& v : out.p) v = u;
        return out;
    }
    // symmetrize, then normalize
    for (int i = 0; i < levels; ++i)
        for (int j = i + 1; j < levels; ++j) {
            const double s = out.p(i, j) + out.p(j, i);
            out.p(i, j) = s;
            out.p(j, i) = s;
        }
    for (int i = 0; i < levels; ++i) out.p(i, i) *= 2.0;
    const double total = 2.0 * static_cast<double>(pairs);
    for (double& v : out.p) v /= total;
    return out;
}

GlcmFeatures glcm_features(const GlcmMatrix& glcm) {
    const int L = glcm.levels;
    const Matrix& p = glcm.p;
    GlcmFeatures f{0.0, 0.0, 0.0, 0.0, 0.0};
    std::vector<double> mrow(L, 0.0);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) mrow[i] += p(i, j);

    double mu_i = 0.0, mu_j = 0.0;
    for (int i = 0; i < L; ++i) mu_i += i * mrow[i];
    mu_j = mu_i;  // symmetric P: identical marginals
    double var_i = 0.0;
    for (int i = 0; i < L; ++i) var_i += (i - mu_i) * (i - mu_i) * mrow[i];
    const double var_j = var_i;

    double cov = 0.0;
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) {
            const double v = p(i, j);
            if (v <= 0.0) continue;
            f.contrast += static_cast<double>(i - j) * (i - j) * v;
            f.entropy -= v * std::log(v);
            f.homogeneity += v / (1.0 + std::abs(i - j));
            f.energy += v * v;
            cov += (i - mu_i) * (j - mu_j) * v;
        }
    const double denom = std::sqrt(var_i * var_j);
    f.correlation = denom > 0.0 ? cov / denom : 0.0;
    return f;
}

std::array<double, 10> first_order_features(const Matrix& image, const MaskImage& mask) {
    std::vector<double> vals;
    vals.reserve(image.size());
    for (int r = 0; r < image.rows(); ++r)
        for (int c = 0; c < image.cols(); ++c)
            if (mask(r, c)) vals.push_back(image(r, c));
    if (vals.size() < 2)
        throw std::invalid_argument("first_order_features: need >= 2 in-mask pixels");
    std::sort(vals.begin(), vals.end());

    std::array<double, 10> out{};
    out[0] = stats::mean(vals);
    out[1] = stats::sd_population(vals);
    const double percentiles[3] = {10.0, 25.0, 50.0};
    for (int k = 0; k < 3; ++k) {
        const double q = stats::percentile_sorted(vals, percentiles[k]);
        const auto end = std::upper_bound(vals.begin(), vals.end(), q);
        const std::span<const double> sub(vals.data(), static_cast<size_t>(end - vals.begin()));
        if (sub.empty()) {
            out[2 + 2 * k] = 0.0;
            out[3 + 2 * k] = 0.0;
        } else {
            out[2 + 2 * k] = stats::mean(sub);
            out[3 + 2 * k] = sub.size() < 2 ? 0.0 : stats::sd_population(sub);
        }
    }
    out[8] = stats::excess_kurtosis(vals);
    out[9] = stats::skewness(vals);
    return out;
}

namespace {

std::string sigma_tag(double sigma) {
    // 0, 1, 1.5, 2, 2.5 -> "0", "1", "1.5", "2", "2.5"
    char buf[16];
    if (sigma == static_cast<long>(sigma))
        std::snprintf(buf, sizeof(buf), "%ld", static_cast<long>(sigma));
    else
        std::snprintf(buf, sizeof(buf), "%.1f", sigma);
    return buf;
}

constexpr const char* kGlcmFeatureNames[5] = {"contrast", "entropy", "correlation", "homogeneity",
                                              "energy"};
constexpr const char* kFirstOrderNames[10] = {"mean",     "sd",      "p10_mean", "p10_sd",
                                              "p25_mean", "p25_sd",  "p50_mean", "p50_sd",
                                              "kurtosis", "skewness"};

std::array<double, 10> percentile_value_features(const Matrix& image, const MaskImage& mask) {
    // Alternative reading: report the percentile values themselves in the
    // mean slots and 0 in the SD slots.
    std::vector<double> vals;
    for (int r = 0; r < image.rows(); ++r)
        for (int c = 0; c < image.cols(); ++c)
            if (mask(r, c)) vals.push_back(image(r, c));
    if (vals.size() < 2)
        throw std::invalid_argument("first_order_features: need >= 2 in-mask pixels");
    std::sort(vals.begin(), vals.end());
    std::array<double, 10> out{};
    out[0] = stats::mean(vals);
    out[1] = stats::sd_population(vals);
    const double percentiles[3] = {10.0, 25.0, 50.0};
    for (int k = 0; k < 3; ++k) {
        out[2 + 2 * k] = stats::percentile_sorted(vals, percentiles[k]);
        out[3 + 2 * k] = 0.0;
    }
    out[8] = stats::excess_kurtosis(vals);
    out[9] = stats::skewness(vals);
    return out;
}

}  // namespace

std::vector<std::string> handcrafted_feature_names() {
    std::vector<std::string> names;
    names.reserve(kHandcraftedCount);
    for (int s = 0; s < 3; ++s)
        for (double sigma : kLogSigmas) {
            const std::string prefix = "s" + std::to_string(s) + "_sig" + sigma_tag(sigma) + "_";
            for (GlcmAngle a : kGlcmAngles)
                for (const char* f : kGlcmFeatureNames)
                    names.push_back(prefix + "glcm_a" + glcm_angle_name(a) + "_" + f);
            for (const char* f : kFirstOrderNames) names.push_back(prefix + "fo_" + f);
        }
    return names;
}

FeatureVector extract_handcrafted(const SlabImage& slab, const SlabMask& mask,
                                  const TextureConfig& config) {
    FeatureVector out;
    out.names = handcrafted_feature_names();
    out.values.reserve(kHandcraftedCount);

    std::array<LogKernel, 5> kernels;
    for (size_t b = 0; b < kLogSigmas.size(); ++b) kernels[b] = log_kernel(kLogSigmas[b]);

    for (int s = 0; s < 3; ++s) {
        const Matrix& channel = slab.channels[s];
        const MaskImage& chmask = mask.channels[s];
        for (size_t b = 0; b < kLogSigmas.size(); ++b) {
            const Matrix band = apply_log(channel, kernels[b]);
            for (GlcmAngle a : kGlcmAngles) {
                const GlcmMatrix g =
                    compute_glcm(band, chmask, a, config.glcm_levels, config.glcm_distance);
                const GlcmFeatures f = glcm_features(g);
                out.values.push_back(f.contrast);
                out.values.push_back(f.entropy);
                out.values.push_back(f.correlation);
                out.values.push_back(f.homogeneity);
                out.values.push_back(f.energy);
            }
            const auto fo = config.percentile_values ? percentile_value_features(band, chmask)
                                                     : first_order_features(band, chmask);
            out.values.insert(out.values.end(), fo.begin(), fo.end());
        }
    }
    return out;
}

FeatureVector extract_handcrafted(const Slab& slab, const TextureConfig& config) {
    return extract_handcrafted(slab.image, slab.mask, config);
}

DeepFeatureTable load_deep_features(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() < 2)
        throw std::runtime_error("deep-feature CSV needs patient_id plus >= 1 column: " +
                                 path.string());
    DeepFeatureTable out;
    out.dim = static_cast<int>(csv.header.size()) - 1;
    for (size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        if (static_cast<int>(row.size()) != out.dim + 1)
            throw std::runtime_error("ragged deep-feature row " + std::to_string(r + 2) + " in " +
                                     path.string());
        out.patient_ids.push_back(row[0]);
        std::vector<double> v(out.dim);
        for (int d = 0; d < out.dim; ++d)
            v[d] = parse_double(row[d + 1], "deep-feature CSV " + path.string());
        out.values.push_back(std::move(v));
    }
    return out;
}

}  // namespace ggr
