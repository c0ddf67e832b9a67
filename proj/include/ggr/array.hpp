#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ggr {

// Dense row-major 2-D grid. Used both for images and for numeric matrices.
template <typename T>
class Grid2 {
public:
    Grid2() = default;
    Grid2(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Grid2: negative dims");
        v_.assign(static_cast<size_t>(rows) * cols, fill);
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    T& operator()(int r, int c) { return v_[static_cast<size_t>(r) * cols_ + c]; }
    const T& operator()(int r, int c) const { return v_[static_cast<size_t>(r) * cols_ + c]; }

    T* data() { return v_.data(); }
    const T* data() const { return v_.data(); }
    auto begin() { return v_.begin(); }
    auto end() { return v_.end(); }
    auto begin() const { return v_.begin(); }
    auto end() const { return v_.end(); }

    bool operator==(const Grid2& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_; }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<T> v_;
};

// Dense 3-D grid, slice-major (slices x rows x cols).
template <typename T>
class Grid3 {
public:
    Grid3() = default;
    Grid3(int slices, int rows, int cols, T fill = T{})
        : slices_(slices), rows_(rows), cols_(cols) {
        if (slices <= 0 || rows <= 0 || cols <= 0) throw std::invalid_argument("Grid3: dims must be positive");
        v_.assign(static_cast<size_t>(slices) * rows * cols, fill);
    }

    int slices() const { return slices_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    T& operator()(int s, int r, int c) {
        return v_[(static_cast<size_t>(s) * rows_ + r) * cols_ + c];
    }
    const T& operator()(int s, int r, int c) const {
        return v_[(static_cast<size_t>(s) * rows_ + r) * cols_ + c];
    }

    Grid2<T> slice(int s) const {
        Grid2<T> out(rows_, cols_);
        for (int r = 0; r < rows_; ++r)
            for (int c = 0; c < cols_; ++c) out(r, c) = (*this)(s, r, c);
        return out;
    }

    T* data() { return v_.data(); }
    const T* data() const { return v_.data(); }
    auto begin() const { return v_.begin(); }
    auto end() const { return v_.end(); }

    bool operator==(const Grid3& o) const {
        return slices_ == o.slices_ && rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_;
    }

private:
    int slices_ = 0, rows_ = 0, cols_ = 0;
    std::vector<T> v_;
};

using Matrix = Grid2<double>;
using MaskImage = Grid2<uint8_t>;

}  // namespace ggr
