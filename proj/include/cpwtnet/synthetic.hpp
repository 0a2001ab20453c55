#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cpwtnet/frame.hpp"
#include "cpwtnet/rng.hpp"

// Generated fixtures: texture videos for end-to-end runs and impulse-noise
// helpers for filter checks.
namespace cpwtnet::synthetic {

/// Horizontal ramp from 0 at the left column to 255 at the right one.
Frame ramp(std::size_t width, std::size_t height);

/// Salt-and-pepper corruption: each pixel independently becomes 0 or 255
/// (equal odds) with probability `density`.
Frame add_impulse_noise(const Frame& clean, double density, Rng& rng);

struct TextureDatasetSpec {
    std::size_t videos_per_class = 20;
    std::size_t frames_per_video = 10;
    std::size_t size = 64;
    double impulse_density = 0.02;
    double period_min = 7.0;
    double period_max = 13.0;
    std::uint64_t seed = 1;
};

/// Class directory names of the texture dataset, in label order.
const std::vector<std::string>& texture_classes();

/// One frame of the given class. Each video draws its own period, phase,
/// drift, contrast and brightness; frames advance the phase by the drift.
Frame texture_frame(std::size_t class_index, std::size_t size, double period, double phase_x,
                    double phase_y, double amplitude, double mean);

/// Writes root/<class>/video_NNN/frame_NNNNN.pgm for all five classes.
void write_texture_dataset(const std::filesystem::path& root, const TextureDatasetSpec& spec);

}  // namespace cpwtnet::synthetic
