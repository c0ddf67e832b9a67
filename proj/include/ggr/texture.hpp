#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "ggr/array.hpp"
#include "ggr/preprocess.hpp"

namespace ggr {

// Sampled Laplacian-of-Gaussian kernel. sigma == 0 denotes the identity
// band (no filtering). For sigma > 0 the taps are sampled on an integer
// grid of radius ceil(3*sigma) and DC-corrected to an exactly zero sum.
struct LogKernel {
    double sigma = 0.0;
    Matrix taps;  // empty for the identity band

    bool is_identity() const { return sigma == 0.0; }
};

LogKernel log_kernel(double sigma);
Matrix log_kernel_raw(double sigma);  // sampled taps before DC correction

// 2-D convolution with reflect padding; identity kernels return the input.
Matrix apply_log(const Matrix& image, const LogKernel& kernel);

enum class GlcmAngle { deg0, deg45, deg90, deg135 };
constexpr std::array<GlcmAngle, 4> kGlcmAngles{GlcmAngle::deg0, GlcmAngle::deg45, GlcmAngle::deg90,
                                               GlcmAngle::deg135};
const char* glcm_angle_name(GlcmAngle a);

struct GlcmMatrix {
    int levels = 0;
    GlcmAngle angle = GlcmAngle::deg0;
    int distance = 1;
    bool degenerate = false;  // no valid pair; P left uniform
    Matrix p;                 // levels x levels, symmetric, sums to 1
};

// Gray values are quantized to `levels` equal-width bins over the in-mask
// min-max of this band; pairs require both endpoints in-mask; counts are
// symmetrized and normalized.
GlcmMatrix compute_glcm(const Matrix& image, const MaskImage& mask, GlcmAngle angle, int levels,
                        int distance = 1);

struct GlcmFeatures {
    double contrast, entropy, correlation, homogeneity, energy;
};

GlcmFeatures glcm_features(const GlcmMatrix& glcm);

// mean, SD, then mean/SD of the lower-tail sub-sample at the 10th, 25th and
// 50th percentile, excess kurtosis, skewness. Population SD throughout.
std::array<double, 10> first_order_features(const Matrix& image, const MaskImage& mask);

struct FeatureVector {
    std::vector<std::string> names;
    std::vector<double> values;
};

struct TextureConfig {
    int glcm_levels = 32;
    int glcm_distance = 1;
    // When true the six percentile stats are the percentile values
    // themselves (an alternative reading of "percentiles mean/SD").
    bool percentile_values = false;
};

constexpr std::array<double, 5> kLogSigmas{0.0, 1.0, 1.5, 2.0, 2.5};
constexpr int kHandcraftedCount = 450;  // 3 slices x 5 bands x (20 GLCM + 10 first-order)

std::vector<std::string> handcrafted_feature_names();
FeatureVector extract_handcrafted(const SlabImage& slab, const SlabMask& mask,
                                  const TextureConfig& config = {});
FeatureVector extract_handcrafted(const Slab& slab, const TextureConfig& config = {});

// Deep-feature CSV ingestion: header row, patient id + D value columns.
struct DeepFeatureTable {
    std::vector<std::string> patient_ids;
    int dim = 0;
    std::vector<std::vector<double>> values;
};

DeepFeatureTable load_deep_features(const std::filesystem::path& path);

}  // namespace ggr
