#include "cpwtnet/frame.hpp"

#include <algorithm>
#include <cmath>

namespace cpwtnet {

Frame::Frame(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), pixels_(width * height, fill) {}

Frame::Frame(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != width_ * height_) {
        throw DataError("frame pixel count " + std::to_string(pixels_.size()) +
                        " does not match " + std::to_string(width_) + "x" +
                        std::to_string(height_));
    }
}

double Frame::clamped(long row, long col) const {
    const long r = std::clamp(row, 0L, static_cast<long>(height_) - 1);
    const long c = std::clamp(col, 0L, static_cast<long>(width_) - 1);
    return pixels_[static_cast<std::size_t>(r) * width_ + static_cast<std::size_t>(c)];
}

void require_intensity_range(const Frame& frame, const std::string& context) {
    for (double v : frame.pixels()) {
        if (!std::isfinite(v) || v < 0.0 || v > 255.0) {
            throw DataError(context + ": pixel value out of [0, 255]");
        }
    }
}

}  // namespace cpwtnet
