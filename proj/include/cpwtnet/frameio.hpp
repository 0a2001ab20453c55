#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpwtnet/frame.hpp"

namespace cpwtnet::frameio {

namespace fs = std::filesystem;

/// Decodes an 8-bit PGM (P2/P5) or an 8-bit gray / RGB / RGBA / palette PNG.
/// Color is reduced with luma weights 0.299, 0.587, 0.114.
Frame load_frame(const fs::path& path);

/// Writes a binary P5 PGM; values are rounded and clamped to [0, 255].
void save_pgm(const Frame& frame, const fs::path& path);

double luma(double r, double g, double b);

enum class Split { Unassigned, Train, Test };

struct Video {
    std::size_t label = 0;
    std::string id;  // "<class>/<video directory>"
    std::vector<fs::path> frames;
    Split split = Split::Unassigned;
};

struct DatasetManifest {
    std::vector<std::string> classes;
    std::vector<Video> videos;

    std::size_t class_count() const { return classes.size(); }
};

/// Walks root/<class>/<video>/<frame>. Classes, videos and frames are sorted
/// lexicographically so the result is independent of directory order.
DatasetManifest scan_dataset(const fs::path& root);

/// Per-class video-level split. Train count per class is
/// round(fraction * n), kept within [1, n - 1] when n >= 2.
DatasetManifest split_dataset(DatasetManifest manifest, double train_fraction,
                              std::uint64_t seed);

nlohmann::json to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& doc);

void save_manifest(const DatasetManifest& manifest, const fs::path& path);
DatasetManifest load_manifest(const fs::path& path);

const char* split_name(Split split);

}  // namespace cpwtnet::frameio
