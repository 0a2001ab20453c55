#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cpwtnet/frame.hpp"

// Convolved Pattern of Wavelet Transform texture descriptor.
//
//   frame -> 5x5 smoothing -> gradient field -> four 45-degree orientation
//   accumulators over a 5x5 window -> two strongest accumulators per pixel
//   -> 8-bit ring code -> one Haar approximation level -> 256-bin histogram
namespace cpwtnet::cpwt {

inline constexpr std::size_t kBins = 256;
inline constexpr std::size_t kOrientations = 4;
inline constexpr std::array<double, kOrientations> kBinUpperDegrees{-45.0, 0.0, 45.0, 90.0};
inline constexpr long kWindowHalf = 2;  // N1 = N2 = 2

/// 5x5 correlation kernel, row-major, entries summing to one.
struct ConvolutionMask5 {
    std::array<double, 25> weights{};

    /// Outer product of [1, 4, 6, 4, 1] / 16 with itself.
    static ConvolutionMask5 binomial();
    static ConvolutionMask5 from_values(std::span<const double> values);
};

struct GradientField {
    Frame magnitude;
    Frame orientation;  // degrees in (-90, 90]
};

struct OrientationMaps {
    // Index k accumulates orientations in (kBinUpperDegrees[k] - 45, kBinUpperDegrees[k]].
    std::array<Frame, kOrientations> maps;
};

struct ProgressionMaps {
    Frame first;   // largest accumulator value
    Frame second;  // second largest
};

struct PatternImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> codes;

    PatternImage() = default;
    PatternImage(std::size_t w, std::size_t h) : width(w), height(h), codes(w * h, 0) {}

    std::uint8_t& at(std::size_t row, std::size_t col) { return codes[row * width + col]; }
    std::uint8_t at(std::size_t row, std::size_t col) const { return codes[row * width + col]; }

    Frame to_frame() const;
    static PatternImage from_frame(const Frame& frame);

    bool operator==(const PatternImage&) const = default;
};

struct FeatureVector {
    std::array<double, kBins> bins{};
    bool normalized = false;
};

struct Config {
    ConvolutionMask5 mask = ConvolutionMask5::binomial();
};

struct Extraction {
    FeatureVector feature;
    PatternImage pattern;
};

/// Correlation with replicate padding; output has the input size.
Frame convolve5(const Frame& frame, const ConvolutionMask5& mask);

/// Degrees of atan(gx / gy); 0 when both vanish, +90 when only gy vanishes.
double orientation_degrees(double gx, double gy);

/// Index into kBinUpperDegrees for an orientation in (-90, 90].
std::size_t orientation_bin(double degrees);

/// Central differences inside, one-sided differences on the border rows and
/// columns. x runs along columns, y along rows.
GradientField gradient(const Frame& convolved);

/// Per pixel and per bin, the sum of magnitudes in the 5x5 window (truncated
/// at borders) whose orientation falls in that bin.
OrientationMaps quantize_orientations(const GradientField& field);

/// Largest and second largest of the four accumulators at every pixel.
ProgressionMaps top_two(const OrientationMaps& maps);

/// Ring neighbours are scanned row-major, (-1,-1) first, neighbour i setting
/// bit i. A bit is set when the neighbour's difference magnitude from the
/// centre, |C(n_i) - C(centre)|, lies in (second, first]. The two-pixel
/// border stays 0.
PatternImage encode(const Frame& convolved, const ProgressionMaps& progression);

/// One separable Haar level with h = (1/2, 1/2), rows then columns, keeping
/// the approximation band. Odd edges replicate the last sample.
Frame haar_reduce(const Frame& image);
Frame haar_reduce(const PatternImage& pattern);

/// 256 bins over values rounded to the nearest integer.
FeatureVector histogram(const Frame& reduced, bool normalize);

/// Full descriptor; the frame must be at least 9x9.
Extraction extract(const Frame& frame, const Config& config = {});

}  // namespace cpwtnet::cpwt
