#pragma once

#include "finflow/core/check.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace finflow {

// Dense row-major tensor of doubles, shape (channels, rows, cols).
// Scalars are (1,1,1); point lists are (1, n, 2); fields are (1, h, w);
// stacked net activations are (c, h, w).
//
// Storage is shared copy-on-write: copies are O(1), and raw() detaches
// before handing out a mutable pointer. Ops treat tensors as immutable
// after construction.
struct Shape {
    int c = 1, h = 1, w = 1;

    std::size_t count() const { return std::size_t(c) * h * w; }
    std::size_t plane() const { return std::size_t(h) * w; }
    bool operator==(const Shape& o) const { return c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const {
        return "(" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

class Tensor {
public:
    Tensor() = default;

    static Tensor uninit(Shape s) {
        Tensor t;
        t.shape_ = s;
        t.data_ = std::make_shared<std::vector<double>>(s.count());
        return t;
    }
    static Tensor zeros(Shape s) { return uninit(s); } // vector zero-initializes
    static Tensor full(Shape s, double v) {
        Tensor t = uninit(s);
        std::fill(t.data_->begin(), t.data_->end(), v);
        return t;
    }
    static Tensor scalar(double v) { return full({1, 1, 1}, v); }
    static Tensor from(Shape s, std::vector<double> v) {
        check(v.size() == s.count(), "Tensor::from: size mismatch for shape " + s.str());
        Tensor t;
        t.shape_ = s;
        t.data_ = std::make_shared<std::vector<double>>(std::move(v));
        return t;
    }

    bool defined() const { return data_ != nullptr; }
    const Shape& shape() const { return shape_; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return defined() ? shape_.count() : 0; }

    const double* data() const { return data_->data(); }
    const double* plane(int ch) const { return data_->data() + std::size_t(ch) * shape_.plane(); }

    // mutable access; detaches from shared storage first
    double* raw() {
        check(defined(), "Tensor::raw on undefined tensor");
        if (data_.use_count() > 1) data_ = std::make_shared<std::vector<double>>(*data_);
        return data_->data();
    }

    double at(int ch, int j, int i) const {
        return (*data_)[std::size_t(ch) * shape_.plane() + std::size_t(j) * shape_.w + i];
    }
    double scalar_value() const {
        check(size() == 1, "scalar_value on tensor of shape " + shape_.str());
        return (*data_)[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    Shape shape_{};
    std::shared_ptr<std::vector<double>> data_;
};

} // namespace finflow
