#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace asac {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration problems get their own type so the CLI can map them to a
/// distinct exit code.
struct ConfigError : Error {
    using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

/// Dense row-major array of doubles; the only value type the tape operates on.
struct RealArray {
    Shape shape;
    std::vector<double> data;

    RealArray() = default;
    RealArray(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != shape_numel(shape))
            throw Error("RealArray: data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
    }

    static RealArray zeros(Shape s) {
        std::size_t n = shape_numel(s);
        return RealArray(std::move(s), std::vector<double>(n, 0.0));
    }
    static RealArray full(Shape s, double v) {
        std::size_t n = shape_numel(s);
        return RealArray(std::move(s), std::vector<double>(n, v));
    }
    static RealArray scalar(double v) { return RealArray(Shape{1}, {v}); }
    static RealArray vec(std::vector<double> v) {
        Shape s{v.size()};
        return RealArray(std::move(s), std::move(v));
    }
    static RealArray identity(std::size_t n) {
        RealArray a = zeros({n, n});
        for (std::size_t i = 0; i < n; ++i) a.data[i * n + i] = 1.0;
        return a;
    }

    std::size_t size() const { return data.size(); }
    bool is_scalar() const { return data.size() == 1; }
    bool is_vector() const { return shape.size() == 1; }
    bool is_matrix() const { return shape.size() == 2; }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
};

inline bool all_finite(const RealArray& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline void require_finite(const RealArray& a, const std::string& what) {
    if (!all_finite(a)) throw Error(what + ": non-finite entry");
}

inline bool same_shape(const RealArray& a, const RealArray& b) { return a.shape == b.shape; }

}  // namespace asac
