#include "cpwtnet/cpwt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace cpwtnet::cpwt {

ConvolutionMask5 ConvolutionMask5::binomial() {
    static constexpr std::array<double, 5> taps{1, 4, 6, 4, 1};
    ConvolutionMask5 mask;
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t c = 0; c < 5; ++c) {
            mask.weights[r * 5 + c] = taps[r] * taps[c] / 256.0;
        }
    }
    return mask;
}

ConvolutionMask5 ConvolutionMask5::from_values(std::span<const double> values) {
    if (values.size() != 25) {
        throw ConfigError("convolution mask needs 25 values, got " + std::to_string(values.size()));
    }
    ConvolutionMask5 mask;
    std::copy(values.begin(), values.end(), mask.weights.begin());
    const double sum = std::accumulate(mask.weights.begin(), mask.weights.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("convolution mask entries must sum to one");
    }
    return mask;
}

Frame PatternImage::to_frame() const {
    Frame frame(width, height);
    std::transform(codes.begin(), codes.end(), frame.pixels().begin(),
                   [](std::uint8_t v) { return static_cast<double>(v); });
    return frame;
}

PatternImage PatternImage::from_frame(const Frame& frame) {
    PatternImage pattern(frame.width(), frame.height());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const double v = frame.pixels()[i];
        if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
            throw DataError("pattern code is not an integer in [0, 255]");
        }
        pattern.codes[i] = static_cast<std::uint8_t>(v);
    }
    return pattern;
}

Frame convolve5(const Frame& frame, const ConvolutionMask5& mask) {
    if (frame.width() < 5 || frame.height() < 5) {
        throw DataError("convolve5: frame smaller than 5x5");
    }
    Frame out(frame.width(), frame.height());
    for (std::size_t r = 0; r < frame.height(); ++r) {
        for (std::size_t c = 0; c < frame.width(); ++c) {
            double acc = 0.0;
            for (long dr = -2; dr <= 2; ++dr) {
                for (long dc = -2; dc <= 2; ++dc) {
                    const double w = mask.weights[static_cast<std::size_t>((dr + 2) * 5 + dc + 2)];
                    acc += w * frame.clamped(static_cast<long>(r) + dr, static_cast<long>(c) + dc);
                }
            }
            out.at(r, c) = acc;
        }
    }
    return out;
}

double orientation_degrees(double gx, double gy) {
    if (gy == 0.0) {
        return gx == 0.0 ? 0.0 : 90.0;
    }
    const double ratio = gx / gy;
    // Diagonals land exactly on a bin edge; keep them off the rounding noise of atan.
    if (ratio == 1.0) return 45.0;
    if (ratio == -1.0) return -45.0;
    return std::atan(ratio) * 180.0 / std::numbers::pi;
}

std::size_t orientation_bin(double degrees) {
    for (std::size_t k = 0; k + 1 < kOrientations; ++k) {
        if (degrees <= kBinUpperDegrees[k]) return k;
    }
    return kOrientations - 1;
}

GradientField gradient(const Frame& convolved) {
    const std::size_t w = convolved.width();
    const std::size_t h = convolved.height();
    if (w < 3 || h < 3) {
        throw DataError("gradient: frame smaller than 3x3");
    }
    GradientField field{Frame(w, h), Frame(w, h)};
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double gx;
            if (c == 0) {
                gx = convolved.at(r, 1) - convolved.at(r, 0);
            } else if (c + 1 == w) {
                gx = convolved.at(r, c) - convolved.at(r, c - 1);
            } else {
                gx = (convolved.at(r, c + 1) - convolved.at(r, c - 1)) / 2.0;
            }
            double gy;
            if (r == 0) {
                gy = convolved.at(1, c) - convolved.at(0, c);
            } else if (r + 1 == h) {
                gy = convolved.at(r, c) - convolved.at(r - 1, c);
            } else {
                gy = (convolved.at(r + 1, c) - convolved.at(r - 1, c)) / 2.0;
            }
            field.magnitude.at(r, c) = std::sqrt(gx * gx + gy * gy);
            field.orientation.at(r, c) = orientation_degrees(gx, gy);
        }
    }
    return field;
}

OrientationMaps quantize_orientations(const GradientField& field) {
    const std::size_t w = field.magnitude.width();
    const std::size_t h = field.magnitude.height();
    if (!field.magnitude.same_shape(field.orientation)) {
        throw DataError("quantize_orientations: magnitude and orientation shapes differ");
    }
    // Split magnitudes by bin, then box-sum each bin map.
    std::array<Frame, kOrientations> binned;
    for (auto& m : binned) m = Frame(w, h);
    for (std::size_t i = 0; i < field.magnitude.size(); ++i) {
        const std::size_t k = orientation_bin(field.orientation.pixels()[i]);
        binned[k].pixels()[i] = field.magnitude.pixels()[i];
    }
    OrientationMaps out;
    for (std::size_t k = 0; k < kOrientations; ++k) {
        out.maps[k] = Frame(w, h);
        for (long r = 0; r < static_cast<long>(h); ++r) {
            for (long c = 0; c < static_cast<long>(w); ++c) {
                double acc = 0.0;
                for (long y = std::max(0L, r - kWindowHalf);
                     y <= std::min<long>(static_cast<long>(h) - 1, r + kWindowHalf); ++y) {
                    for (long x = std::max(0L, c - kWindowHalf);
                         x <= std::min<long>(static_cast<long>(w) - 1, c + kWindowHalf); ++x) {
                        acc += binned[k].at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                    }
                }
                out.maps[k].at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
            }
        }
    }
    return out;
}

ProgressionMaps top_two(const OrientationMaps& maps) {
    const Frame& ref = maps.maps[0];
    ProgressionMaps out{Frame(ref.width(), ref.height()), Frame(ref.width(), ref.height())};
    for (std::size_t i = 0; i < ref.size(); ++i) {
        double first = maps.maps[0].pixels()[i];
        double second = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < kOrientations; ++k) {
            const double v = maps.maps[k].pixels()[i];
            if (v > first) {
                second = first;
                first = v;
            } else if (v > second) {
                second = v;
            }
        }
        out.first.pixels()[i] = first;
        out.second.pixels()[i] = second;
    }
    return out;
}

PatternImage encode(const Frame& convolved, const ProgressionMaps& progression) {
    if (!convolved.same_shape(progression.first) || !convolved.same_shape(progression.second)) {
        throw DataError("encode: convolved frame and progression maps differ in shape");
    }
    const std::size_t w = convolved.width();
    const std::size_t h = convolved.height();
    PatternImage pattern(w, h);
    if (w < 5 || h < 5) return pattern;
    for (std::size_t r = 2; r + 2 < h; ++r) {
        for (std::size_t c = 2; c + 2 < w; ++c) {
            const double centre = convolved.at(r, c);
            const double upper = progression.first.at(r, c);
            const double lower = progression.second.at(r, c);
            unsigned code = 0;
            unsigned bit = 0;
            for (std::size_t y = r - 1; y <= r + 1; ++y) {
                for (std::size_t x = c - 1; x <= c + 1; ++x) {
                    if (y == r && x == c) continue;
                    const double diff = std::abs(convolved.at(y, x) - centre);
                    if (lower < diff && diff <= upper) code |= 1u << bit;
                    ++bit;
                }
            }
            pattern.at(r, c) = static_cast<std::uint8_t>(code);
        }
    }
    return pattern;
}

Frame haar_reduce(const Frame& image) {
    const std::size_t w = image.width();
    const std::size_t h = image.height();
    if (w < 2 || h < 2) {
        throw DataError("haar_reduce: image smaller than 2x2");
    }
    const std::size_t ow = (w + 1) / 2;
    const std::size_t oh = (h + 1) / 2;
    // Row pass: W(n) = sum_k X(k) h(2n - k) with h = (1/2, 1/2).
    Frame rows(ow, h);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t n = 0; n < ow; ++n) {
            const std::size_t k0 = 2 * n;
            const std::size_t k1 = std::min(2 * n + 1, w - 1);
            rows.at(r, n) = 0.5 * image.at(r, k0) + 0.5 * image.at(r, k1);
        }
    }
    Frame out(ow, oh);
    for (std::size_t n = 0; n < oh; ++n) {
        const std::size_t k0 = 2 * n;
        const std::size_t k1 = std::min(2 * n + 1, h - 1);
        for (std::size_t c = 0; c < ow; ++c) {
            out.at(n, c) = 0.5 * rows.at(k0, c) + 0.5 * rows.at(k1, c);
        }
    }
    return out;
}

Frame haar_reduce(const PatternImage& pattern) { return haar_reduce(pattern.to_frame()); }

FeatureVector histogram(const Frame& reduced, bool normalize) {
    FeatureVector feature;
    for (double v : reduced.pixels()) {
        const double bin = std::round(v);
        if (!(bin >= 0.0 && bin <= 255.0)) {
            throw DataError("histogram: value outside [0, 255]");
        }
        feature.bins[static_cast<std::size_t>(bin)] += 1.0;
    }
    if (normalize && !reduced.empty()) {
        const double total = static_cast<double>(reduced.size());
        for (double& b : feature.bins) b /= total;
        feature.normalized = true;
    }
    return feature;
}

Extraction extract(const Frame& frame, const Config& config) {
    if (frame.width() < 9 || frame.height() < 9) {
        throw DataError("extract: frame smaller than 9x9");
    }
    const Frame convolved = convolve5(frame, config.mask);
    const ProgressionMaps progression = top_two(quantize_orientations(gradient(convolved)));
    Extraction result;
    result.pattern = encode(convolved, progression);
    result.feature = histogram(haar_reduce(result.pattern), true);
    return result;
}

}  // namespace cpwtnet::cpwt
