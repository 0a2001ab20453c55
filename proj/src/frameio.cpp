#include "cpwtnet/frameio.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>

#include "cpwtnet/rng.hpp"

namespace cpwtnet::frameio {

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open frame file: " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// PGM header tokens are whitespace separated and may be interleaved with
// '#' comments.
class PgmHeaderReader {
public:
    PgmHeaderReader(const std::vector<unsigned char>& bytes, const fs::path& path)
        : bytes_(bytes), path_(path) {}

    long next_int() {
        skip_space_and_comments();
        long value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            ++pos_;
            if (++digits > 9) {
                throw DataError("malformed PGM header: " + path_.string());
            }
        }
        if (digits == 0) {
            throw DataError("truncated or malformed PGM header: " + path_.string());
        }
        return value;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& bytes_;
    const fs::path& path_;
    std::size_t pos_ = 2;
};

Frame decode_pgm(const std::vector<unsigned char>& bytes, const fs::path& path) {
    const bool binary = bytes[1] == '5';
    PgmHeaderReader header(bytes, path);
    const long width = header.next_int();
    const long height = header.next_int();
    const long maxval = header.next_int();
    if (width <= 0 || height <= 0) {
        throw DataError("zero-sized image: " + path.string());
    }
    if (maxval <= 0 || maxval > 255) {
        throw DataError("unsupported PGM bit depth (maxval " + std::to_string(maxval) +
                        "): " + path.string());
    }
    const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<double> pixels(count);
    const double scale = 255.0 / static_cast<double>(maxval);
    if (binary) {
        header.advance(1);  // single whitespace byte after maxval
        if (bytes.size() < header.pos() + count) {
            throw DataError("truncated PGM pixel data: " + path.string());
        }
        for (std::size_t i = 0; i < count; ++i) {
            pixels[i] = bytes[header.pos() + i] * scale;
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const long v = header.next_int();
            if (v > maxval) {
                throw DataError("PGM sample exceeds maxval: " + path.string());
            }
            pixels[i] = static_cast<double>(v) * scale;
        }
    }
    return Frame(static_cast<std::size_t>(width), static_cast<std::size_t>(height),
                 std::move(pixels));
}

struct PngReadState {
    const std::vector<unsigned char>* bytes;
    std::size_t offset;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->offset + length > state->bytes->size()) {
        png_error(png, "unexpected end of PNG data");
    }
    std::copy_n(state->bytes->data() + state->offset, length, out);
    state->offset += length;
}

// libpng prints to stderr by default; keep the text for the exception instead.
void png_capture_error(png_structp png, png_const_charp message) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    *text = message;
    png_longjmp(png, 1);
}

void png_ignore_warning(png_structp, png_const_charp) {}

Frame decode_png(const std::vector<unsigned char>& bytes, const fs::path& path) {
    std::string error_text;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_text, png_capture_error,
                                             png_ignore_warning);
    if (png == nullptr) {
        throw DataError("libpng initialisation failed");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng initialisation failed");
    }
    // Declared before setjmp so longjmp never skips a destructor.
    std::vector<unsigned char> buffer;
    std::vector<png_bytep> rows;
    PngReadState state{&bytes, 0};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("PNG decode error: " + path.string() + ": " + error_text);
    }
    png_set_read_fn(png, &state, png_read_from_memory);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (depth == 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG bit depth 16: " + path.string());
    }
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const std::size_t channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    buffer.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = buffer.data() + r * stride;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    if (width == 0 || height == 0) {
        throw DataError("zero-sized image: " + path.string());
    }
    Frame frame(width, height);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const unsigned char* px = rows[r] + c * channels;
            frame.at(r, c) = channels >= 3 ? luma(px[0], px[1], px[2]) : px[0];
        }
    }
    return frame;
}

bool is_frame_file(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return ext == ".pgm" || ext == ".png";
}

std::vector<fs::path> sorted_subdirectories(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

Frame load_frame(const fs::path& path) {
    if (!fs::exists(path)) {
        throw DataError("frame file does not exist: " + path.string());
    }
    const auto bytes = read_bytes(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2')) {
        return decode_pgm(bytes, path);
    }
    static constexpr unsigned char kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::equal(bytes.begin(), bytes.begin() + 8, kPngMagic)) {
        return decode_png(bytes, path);
    }
    throw DataError("unsupported image format: " + path.string());
}

void save_pgm(const Frame& frame, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
    std::string data(frame.size(), '\0');
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const double v = std::clamp(std::round(frame.pixels()[i]), 0.0, 255.0);
        data[i] = static_cast<char>(static_cast<unsigned char>(v));
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

DatasetManifest scan_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) {
        throw DataError("dataset root is not a directory: " + root.string());
    }
    DatasetManifest manifest;
    for (const auto& class_dir : sorted_subdirectories(root)) {
        const std::string class_name = class_dir.filename().string();
        const std::size_t label = manifest.classes.size();
        const auto video_dirs = sorted_subdirectories(class_dir);
        if (video_dirs.empty()) {
            throw DataError("class directory has no videos: " + class_dir.string());
        }
        manifest.classes.push_back(class_name);
        for (const auto& video_dir : video_dirs) {
            Video video;
            video.label = label;
            video.id = class_name + "/" + video_dir.filename().string();
            for (const auto& entry : fs::directory_iterator(video_dir)) {
                if (entry.is_regular_file() && is_frame_file(entry.path())) {
                    video.frames.push_back(entry.path());
                }
            }
            if (video.frames.empty()) {
                throw DataError("video has no frames: " + video_dir.string());
            }
            std::sort(video.frames.begin(), video.frames.end());
            manifest.videos.push_back(std::move(video));
        }
    }
    if (manifest.classes.empty()) {
        throw DataError("dataset root has no class directories: " + root.string());
    }
    return manifest;
}

DatasetManifest split_dataset(DatasetManifest manifest, double train_fraction,
                              std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train fraction must lie in (0, 1)");
    }
    std::vector<std::vector<std::size_t>> by_class(manifest.class_count());
    for (std::size_t i = 0; i < manifest.videos.size(); ++i) {
        const auto label = manifest.videos[i].label;
        if (label >= by_class.size()) {
            throw DataError("video label out of range: " + manifest.videos[i].id);
        }
        by_class[label].push_back(i);
    }
    Rng rng(seed);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.empty()) {
            throw DataError("class has no videos: " + manifest.classes[c]);
        }
        rng.shuffle(members);
        const std::size_t n = members.size();
        auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
        if (n >= 2) {
            n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        } else {
            n_train = 1;
        }
        for (std::size_t k = 0; k < n; ++k) {
            manifest.videos[members[k]].split = k < n_train ? Split::Train : Split::Test;
        }
    }
    return manifest;
}

const char* split_name(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        case Split::Unassigned: break;
    }
    return "unassigned";
}

nlohmann::json to_json(const DatasetManifest& manifest) {
    nlohmann::json videos = nlohmann::json::array();
    for (const auto& video : manifest.videos) {
        nlohmann::json frames = nlohmann::json::array();
        for (const auto& f : video.frames) frames.push_back(f.generic_string());
        videos.push_back({{"class", video.label},
                          {"id", video.id},
                          {"frames", std::move(frames)},
                          {"split", split_name(video.split)}});
    }
    return {{"classes", manifest.classes}, {"videos", std::move(videos)}};
}

DatasetManifest manifest_from_json(const nlohmann::json& doc) {
    DatasetManifest manifest;
    try {
        manifest.classes = doc.at("classes").get<std::vector<std::string>>();
        for (const auto& v : doc.at("videos")) {
            Video video;
            video.label = v.at("class").get<std::size_t>();
            video.id = v.at("id").get<std::string>();
            for (const auto& f : v.at("frames")) video.frames.emplace_back(f.get<std::string>());
            const auto split = v.at("split").get<std::string>();
            video.split = split == "train" ? Split::Train
                          : split == "test" ? Split::Test
                                            : Split::Unassigned;
            if (video.label >= manifest.classes.size() || video.frames.empty()) {
                throw DataError("invalid manifest entry: " + video.id);
            }
            manifest.videos.push_back(std::move(video));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json(manifest).dump(2) << '\n';
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing manifest artifact: " + path.string());
    try {
        return manifest_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("malformed manifest " + path.string() + ": " + e.what());
    }
}

}  // namespace cpwtnet::frameio
