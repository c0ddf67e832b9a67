#pragma once

#include <array>
#include <filesystem>

#include "ggr/array.hpp"
#include "ggr/cohort.hpp"

namespace ggr {

// Three 224x224 gray channels (values kept as reals in [0,255] for the
// downstream filter bank) plus their source slice indices.
struct SlabImage {
    std::array<Matrix, 3> channels;
    std::array<int, 3> source_slices{};
};

// Per-channel binary mask resized with the same box as the slab.
struct SlabMask {
    std::array<MaskImage, 3> channels;
};

struct Slab {
    SlabImage image;
    SlabMask mask;
};

constexpr int kSlabSize = 224;

// Clamp HU to [-1000, 400] and map linearly to [0,255], rounding to
// nearest with ties away from zero.
double window_hu(double hu);
Grid3<double> window_and_normalize(const CtVolume& volume);

// Index of the largest-area mask slice (lowest index wins ties) and its
// neighbours; boundary slices are duplicated.
std::array<int, 3> select_slab(const TumorMask& mask);

// Bilinear resize with corner-aligned sampling.
Matrix resize_bilinear(const Matrix& src, int out_rows, int out_cols);

struct CropBox {
    int r0, r1, c0, c1;  // inclusive
    int height() const { return r1 - r0 + 1; }
    int width() const { return c1 - c0 + 1; }
};

// Tight bounding box of the nonzero pixels of one mask slice.
CropBox mask_bounding_box(const Grid3<uint8_t>& mask, int slice);

// Mask each selected slice, crop all three with the bounding box of the
// largest-area slice's mask, and resize to 224x224. Returns the resized
// binary mask alongside (bilinear, thresholded at 0.5).
Slab mask_crop_resize(const Grid3<double>& normalized, const TumorMask& mask,
                      const std::array<int, 3>& slices);

Slab preprocess_patient(const CtVolume& volume, const TumorMask& mask);

// Slab file formats GGRSLB / GGRSLM, see docs/formats.md.
void save_slab(const Slab& slab, const std::filesystem::path& image_path,
               const std::filesystem::path& mask_path);
Slab load_slab(const std::filesystem::path& image_path, const std::filesystem::path& mask_path);

}  // namespace ggr
