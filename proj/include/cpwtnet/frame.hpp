#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpwtnet {

// Error categories map onto CLI exit codes (2 config, 3 data, 4 numeric).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-major grayscale grid. Intensity frames hold values in [0, 255];
/// intermediate results (Laplacian responses, gradients) reuse the type
/// without the range restriction.
class Frame {
public:
    Frame() = default;
    Frame(std::size_t width, std::size_t height, double fill = 0.0);
    Frame(std::size_t width, std::size_t height, std::vector<double> pixels);

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t size() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    double& at(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }
    double at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }

    /// Replicate-padded access for signed coordinates.
    double clamped(long row, long col) const;

    const std::vector<double>& pixels() const { return pixels_; }
    std::vector<double>& pixels() { return pixels_; }

    bool same_shape(const Frame& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    bool operator==(const Frame& other) const = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> pixels_;
};

/// Throws DataError unless every pixel is finite and within [0, 255].
void require_intensity_range(const Frame& frame, const std::string& context);

}  // namespace cpwtnet
