#include "ggr/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ggr/csv.hpp"

namespace ggr {

double window_hu(double hu) {
    const double clamped = std::clamp(hu, -1000.0, 400.0);
    return std::round((clamped + 1000.0) * 255.0 / 1400.0);
}

Grid3<double> window_and_normalize(const CtVolume& volume) {
    const auto& v = volume.voxels;
    Grid3<double> out(v.slices(), v.rows(), v.cols());
    for (size_t i = 0; i < v.size(); ++i) out.data()[i] = window_hu(v.data()[i]);
    return out;
}

std::array<int, 3> select_slab(const TumorMask& mask) {
    const auto& m = mask.voxels;
    if (m.empty() || mask.nonzero_count() == 0)
        throw std::invalid_argument("select_slab: empty mask");
    int best = 0;
    long best_area = -1;
    for (int s = 0; s < m.slices(); ++s) {
        long area = 0;
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) area += m(s, r, c);
        if (area > best_area) {  // strict: ties keep the lowest index
            best_area = area;
            best = s;
        }
    }
    const int last = m.slices() - 1;
    return {std::max(best - 1, 0), best, std::min(best + 1, last)};
}

Matrix resize_bilinear(const Matrix& src, int out_rows, int out_cols) {
    if (src.rows() < 1 || src.cols() < 1) throw std::invalid_argument("resize_bilinear: empty source");
    Matrix out(out_rows, out_cols);
    const double sr = out_rows > 1 ? static_cast<double>(src.rows() - 1) / (out_rows - 1) : 0.0;
    const double sc = out_cols > 1 ? static_cast<double>(src.cols() - 1) / (out_cols - 1) : 0.0;
    for (int r = 0; r < out_rows; ++r) {
        const double fr = r * sr;
        const int r0 = std::min(static_cast<int>(fr), src.rows() - 1);
        const int r1 = std::min(r0 + 1, src.rows() - 1);
        const double wr = fr - r0;
        for (int c = 0; c < out_cols; ++c) {
            const double fc = c * sc;
            const int c0 = std::min(static_cast<int>(fc), src.cols() - 1);
            const int c1 = std::min(c0 + 1, src.cols() - 1);
            const double wc = fc - c0;
            out(r, c) = (1.0 - wr) * ((1.0 - wc) * src(r0, c0) + wc * src(r0, c1)) +
                        wr * ((1.0 - wc) * src(r1, c0) + wc * src(r1, c1));
        }
    }
    return out;
}

CropBox mask_bounding_box(const Grid3<uint8_t>& m, int slice) {
    CropBox b{m.rows(), -1, m.cols(), -1};
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            if (m(slice, r, c)) {
                b.r0 = std::min(b.r0, r);
                b.r1 = std::max(b.r1, r);
                b.c0 = std::min(b.c0, c);
                b.c1 = std::max(b.c1, c);
            }
    if (b.r1 < 0) throw std::invalid_argument("mask_crop_resize: empty mask on center slice");
    return b;
}

Slab mask_crop_resize(const Grid3<double>& normalized, const TumorMask& mask,
                      const std::array<int, 3>& slices) {
    const auto& m = mask.voxels;
    if (m.slices() != normalized.slices() || m.rows() != normalized.rows() ||
        m.cols() != normalized.cols())
        throw std::invalid_argument("mask_crop_resize: mask/volume dims differ");
    for (int idx : slices)
        if (idx < 0 || idx >= normalized.slices())
            throw std::invalid_argument("mask_crop_resize: slice index out of range");

    const CropBox box = mask_bounding_box(m, slices[1]);
    const int h = box.height(), w = box.width();

    Slab out;
    out.image.source_slices = slices;
    for (int ch = 0; ch < 3; ++ch) {
        const int s = slices[ch];
        Matrix crop(h, w), mcrop(h, w);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const uint8_t inside = m(s, box.r0 + r, box.c0 + c);
                crop(r, c) = inside ? normalized(s, box.r0 + r, box.c0 + c) : 0.0;
                mcrop(r, c) = inside;
            }
        out.image.channels[ch] = resize_bilinear(crop, kSlabSize, kSlabSize);
        const Matrix mres = resize_bilinear(mcrop, kSlabSize, kSlabSize);
        MaskImage mbin(kSlabSize, kSlabSize);
        int count = 0;
        for (int r = 0; r < kSlabSize; ++r)
            for (int c = 0; c < kSlabSize; ++c) {
                mbin(r, c) = mres(r, c) >= 0.5 ? 1 : 0;
                count += mbin(r, c);
            }
        out.mask.channels[ch] = mbin;
        // A neighbour slice can hold almost no tumor inside the center-slice
        // box; such channels duplicate the center channel, extending the
        // boundary-duplication rule. The center channel itself (ch == 1) is
        // never empty because the box is derived from its mask.
        if (count < 2 && ch != 1) out.image.channels[ch] = Matrix();  // mark for fixup
    }
    for (int ch : {0, 2})
        if (out.image.channels[ch].empty()) {
            out.image.channels[ch] = out.image.channels[1];
            out.mask.channels[ch] = out.mask.channels[1];
            out.image.source_slices[ch] = out.image.source_slices[1];
        }
    return out;
}

Slab preprocess_patient(const CtVolume& volume, const TumorMask& mask) {
    const auto normalized = window_and_normalize(volume);
    return mask_crop_resize(normalized, mask, select_slab(mask));
}

void save_slab(const Slab& slab, const std::filesystem::path& image_path,
               const std::filesystem::path& mask_path) {
    {
        std::ofstream out(image_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write slab: " + image_path.string());
        out << "GGRSLB v1 " << kSlabSize << ' ' << kSlabSize << " 3 " << slab.image.source_slices[0]
            << ' ' << slab.image.source_slices[1] << ' ' << slab.image.source_slices[2] << '\n';
        for (const auto& ch : slab.image.channels)
            out.write(reinterpret_cast<const char*>(ch.data()),
                      static_cast<std::streamsize>(ch.size() * sizeof(double)));
        if (!out) throw std::runtime_error("write failed: " + image_path.string());
    }
    {
        std::ofstream out(mask_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write slab mask: " + mask_path.string());
        out << "GGRSLM v1 " << kSlabSize << ' ' << kSlabSize << " 3\n";
        for (const auto& ch : slab.mask.channels)
            out.write(reinterpret_cast<const char*>(ch.data()),
                      static_cast<std::streamsize>(ch.size()));
        if (!out) throw std::runtime_error("write failed: " + mask_path.string());
    }
}

Slab load_slab(const std::filesystem::path& image_path, const std::filesystem::path& mask_path) {
    Slab slab;
    {
        std::ifstream in(image_path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open slab: " + image_path.string());
        std::string line;
        std::getline(in, line);
        std::istringstream hdr(line);
        std::string magic, version;
        int rows = 0, cols = 0, chans = 0;
        hdr >> magic >> version >> rows >> cols >> chans >> slab.image.source_slices[0] >>
            slab.image.source_slices[1] >> slab.image.source_slices[2];
        if (hdr.fail() || magic != "GGRSLB" || version != "v1" || rows != kSlabSize ||
            cols != kSlabSize || chans != 3)
            throw std::runtime_error("malformed GGRSLB header: " + image_path.string());
        for (auto& ch : slab.image.channels) {
            ch = Matrix(rows, cols);
            in.read(reinterpret_cast<char*>(ch.data()),
                    static_cast<std::streamsize>(ch.size() * sizeof(double)));
        }
        if (!in) throw std::runtime_error("GGRSLB payload truncated: " + image_path.string());
    }
    {
        std::ifstream in(mask_path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open slab mask: " + mask_path.string());
        std::string line;
        std::getline(in, line);
        std::istringstream hdr(line);
        std::string magic, version;
        int rows = 0, cols = 0, chans = 0;
        hdr >> magic >> version >> rows >> cols >> chans;
        if (hdr.fail() || magic != "GGRSLM" || version != "v1" || rows != kSlabSize ||
            cols != kSlabSize || chans != 3)
            throw std::runtime_error("malformed GGRSLM header: " + mask_path.string());
        for (auto& ch : slab.mask.channels) {
            ch = MaskImage(rows, cols);
            in.read(reinterpret_cast<char*>(ch.data()), static_cast<std::streamsize>(ch.size()));
        }
        if (!in) throw std::runtime_error("GGRSLM payload truncated: " + mask_path.string());
    }
    return slab;
}

}  // namespace ggr
