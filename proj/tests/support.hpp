#pragma once

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cpwtnet/frame.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("cpwtnet_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline void write_bytes(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << bytes;
}

inline std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string pgm_bytes(std::size_t w, std::size_t h, const std::vector<unsigned char>& px) {
    std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.append(px.begin(), px.end());
    return out;
}

// 8-bit PNG of the given libpng colour type (GRAY, RGB, RGBA, ...).
inline void write_png(const fs::path& path, std::size_t w, std::size_t h, int color_type,
                      const std::vector<unsigned char>& px) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = px.size() / h;
    for (std::size_t r = 0; r < h; ++r) {
        png_write_row(png, const_cast<png_bytep>(px.data() + r * stride));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline cpwtnet::Frame random_frame(std::size_t w, std::size_t h, double lo, double hi, std::mt19937_64& gen,
                                   bool integral = true) {
    std::uniform_real_distribution<double> dist(lo, hi);
    cpwtnet::Frame f(w, h);
    for (double& v : f.pixels()) {
        v = dist(gen);
        if (integral) v = std::floor(v);
    }
    return f;
}

}  // namespace testing
