#include "cpwtnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cpwtnet/frameio.hpp"

namespace cpwtnet::synthetic {

Frame ramp(std::size_t width, std::size_t height) {
    Frame frame(width, height);
    const double step = width > 1 ? 255.0 / static_cast<double>(width - 1) : 0.0;
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) frame.at(r, c) = step * static_cast<double>(c);
    }
    return frame;
}

Frame add_impulse_noise(const Frame& clean, double density, Rng& rng) {
    Frame noisy = clean;
    for (double& v : noisy.pixels()) {
        if (rng.uniform() < density) v = rng.uniform() < 0.5 ? 0.0 : 255.0;
    }
    return noisy;
}

const std::vector<std::string>& texture_classes() {
    static const std::vector<std::string> names{"checker", "stripes_000", "stripes_045",
                                                "stripes_090", "stripes_135"};
    return names;
}

Frame texture_frame(std::size_t class_index, std::size_t size, double period, double phase_x,
                    double phase_y, double amplitude, double mean) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Frame frame(size, size);
    for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t c = 0; c < size; ++c) {
            const double x = static_cast<double>(c);
            const double y = static_cast<double>(r);
            double wave = 0.0;
            switch (class_index) {
                case 0:
                    wave = std::sin(two_pi * x / period + phase_x) * std::sin(two_pi * y / period + phase_y);
                    break;
                case 1: wave = std::sin(two_pi * y / period + phase_x); break;
                case 2: wave = std::sin(two_pi * (x + y) / (period * std::numbers::sqrt2) + phase_x); break;
                case 3: wave = std::sin(two_pi * x / period + phase_x); break;
                case 4: wave = std::sin(two_pi * (x - y) / (period * std::numbers::sqrt2) + phase_x); break;
                default: throw DataError("unknown texture class index");
            }
            frame.at(r, c) = std::clamp(std::round(mean + amplitude * wave), 0.0, 255.0);
        }
    }
    return frame;
}

void write_texture_dataset(const std::filesystem::path& root, const TextureDatasetSpec& spec) {
    Rng rng(spec.seed);
    const auto& classes = texture_classes();
    char name[64];
    for (std::size_t k = 0; k < classes.size(); ++k) {
        for (std::size_t v = 0; v < spec.videos_per_class; ++v) {
            const double period = rng.uniform(spec.period_min, spec.period_max);
            const double phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double drift = rng.uniform(0.1, 0.5);
            const double amplitude = rng.uniform(50.0, 90.0);
            const double mean = rng.uniform(100.0, 150.0);
            std::snprintf(name, sizeof name, "video_%03zu", v);
            const auto video_dir = root / classes[k] / name;
            for (std::size_t f = 0; f < spec.frames_per_video; ++f) {
                const double t = static_cast<double>(f) * drift;
                Frame frame = texture_frame(k, spec.size, period, phase_x + t, phase_y + t, amplitude, mean);
                frame = add_impulse_noise(frame, spec.impulse_density, rng);
                std::snprintf(name, sizeof name, "frame_%05zu.pgm", f);
                frameio::save_pgm(frame, video_dir / name);
            }
        }
    }
}

}  // namespace cpwtnet::synthetic
