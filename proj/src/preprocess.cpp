#include "cpwtnet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cpwtnet::preprocess {

LaplacianMask LaplacianMask::from_values(std::span<const double> values) {
    if (values.size() != 9) {
        throw ConfigError("Laplacian mask needs nine values, got " + std::to_string(values.size()));
    }
    LaplacianMask mask;
    std::copy(values.begin(), values.end(), mask.weights.begin());
    const double sum = std::accumulate(mask.weights.begin(), mask.weights.end(), 0.0);
    if (std::abs(sum) > 1e-9) {
        throw ConfigError("Laplacian mask entries must sum to zero");
    }
    return mask;
}

std::array<double, 8> Cell3::boundary() const {
    return {values[0], values[1], values[2], values[3],
            values[5], values[6], values[7], values[8]};
}

Cell3 cell_at(const Frame& frame, std::size_t row, std::size_t col) {
    Cell3 cell;
    std::size_t k = 0;
    for (std::size_t r = row - 1; r <= row + 1; ++r) {
        for (std::size_t c = col - 1; c <= col + 1; ++c) {
            cell.values[k++] = frame.at(r, c);
        }
    }
    return cell;
}

namespace {

void require_min_size(const Frame& frame, const char* op) {
    if (frame.width() < 3 || frame.height() < 3) {
        throw DataError(std::string(op) + ": frame smaller than the 3x3 mask");
    }
}

}  // namespace

Frame laplacian_transform(const Frame& frame, const LaplacianMask& mask) {
    require_min_size(frame, "laplacian_transform");
    Frame out = frame;
    for (std::size_t r = 1; r + 1 < frame.height(); ++r) {
        for (std::size_t c = 1; c + 1 < frame.width(); ++c) {
            const Cell3 cell = cell_at(frame, r, c);
            double acc = 0.0;
            for (std::size_t k = 0; k < 9; ++k) acc += mask.weights[k] * cell.values[k];
            out.at(r, c) = acc;
        }
    }
    return out;
}

double boundary_mean(const Cell3& cell) {
    const auto ring = cell.boundary();
    return std::accumulate(ring.begin(), ring.end(), 0.0) / 8.0;
}

bool is_noisy(double pixel, const Cell3& cell) {
    const auto ring = cell.boundary();
    const auto [lo, hi] = std::minmax_element(ring.begin(), ring.end());
    return pixel < *lo || pixel > *hi;
}

Frame ca_filter(const Frame& frame, const LaplacianMask& mask) {
    require_min_size(frame, "ca_filter");
    const Frame response = laplacian_transform(frame, mask);
    Frame out = frame;
    for (std::size_t r = 1; r + 1 < frame.height(); ++r) {
        for (std::size_t c = 1; c + 1 < frame.width(); ++c) {
            const Cell3 original = cell_at(frame, r, c);
            if (!is_noisy(original.center(), original)) continue;
            const Cell3 lap = cell_at(response, r, c);
            const double ring_level = boundary_mean(original);
            const double disagreement = std::abs(boundary_mean(lap) - lap.center());
            if (disagreement > ring_level) {
                out.at(r, c) = ring_level;
            }
        }
    }
    for (double& v : out.pixels()) v = std::clamp(v, 0.0, 255.0);
    return out;
}

}  // namespace cpwtnet::preprocess
