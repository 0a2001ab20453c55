#pragma once

#include <array>
#include <span>

#include "cpwtnet/frame.hpp"

namespace cpwtnet::preprocess {

/// 3x3 correlation kernel, row-major. Entries must sum to zero.
struct LaplacianMask {
    std::array<double, 9> weights{0, 1, 0, 1, -4, 1, 0, 1, 0};

    static LaplacianMask from_values(std::span<const double> values);
};

/// 3x3 neighbourhood in row-major order; index 4 is the centre.
struct Cell3 {
    std::array<double, 9> values{};

    double center() const { return values[4]; }
    /// The eight ring values, row-major with the centre skipped.
    std::array<double, 8> boundary() const;
};

/// Window centred at (row, col). Only interior pixels are valid centres.
Cell3 cell_at(const Frame& frame, std::size_t row, std::size_t col);

/// Interior pixels become the correlation with the mask; border pixels are
/// copied from the input. Responses are not clamped.
Frame laplacian_transform(const Frame& frame, const LaplacianMask& mask = {});

/// Mean of the eight ring pixels (L = 8 for the 3x3 mask).
double boundary_mean(const Cell3& cell);

/// Impulse test: the pixel lies strictly outside [min, max] of the ring.
bool is_noisy(double pixel, const Cell3& cell);

/// One cellular-automaton pass. An interior pixel is replaced by the mean of
/// its original ring when it is an impulse (is_noisy on the original lattice)
/// and the Laplacian response disagrees with its ring by more than that ring
/// mean, |mean(ring_L) - centre_L| > mean(ring_I). Every decision reads the
/// unfiltered lattice; borders are copied; output is clamped to [0, 255].
Frame ca_filter(const Frame& frame, const LaplacianMask& mask = {});

}  // namespace cpwtnet::preprocess
