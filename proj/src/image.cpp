#include "image.hpp"

#include "error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace segedit {

ImageBuffer::ImageBuffer(int width, int height, double fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) * 3, fill) {
    if (width < 0 || height < 0)
        fail(ErrorCode::InvalidArgument, "negative image dimensions");
}

ImageBuffer ImageBuffer::from_data(int width, int height, std::vector<double> data) {
    ImageBuffer img;
    if (width < 0 || height < 0 || data.size() != static_cast<std::size_t>(width) * height * 3)
        fail(ErrorCode::DimensionMismatch, "image data length does not match width * height * 3");
    for (double v : data)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            fail(ErrorCode::OutOfRange, "image value outside [0, 1]");
    img.width_ = width;
    img.height_ = height;
    img.data_ = std::move(data);
    return img;
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0),
      count_(fill ? bits_.size() : 0) {}

BinaryMask BinaryMask::from_bits(int width, int height, std::vector<std::uint8_t> bits) {
    if (bits.size() != static_cast<std::size_t>(width) * height)
        fail(ErrorCode::DimensionMismatch, "mask length does not match width * height");
    BinaryMask m;
    m.width_ = width;
    m.height_ = height;
    for (auto& b : bits) {
        b = b ? 1 : 0;
        m.count_ += b;
    }
    m.bits_ = std::move(bits);
    return m;
}

void BinaryMask::set(std::size_t i, bool value) {
    const std::uint8_t v = value ? 1 : 0;
    if (bits_[i] != v) {
        count_ = value ? count_ + 1 : count_ - 1;
        bits_[i] = v;
    }
}

void BinaryMask::set(int x, int y, bool value) {
    set(static_cast<std::size_t>(y) * width_ + x, value);
}

namespace {

void require_same(const BinaryMask& a, const BinaryMask& b) {
    if (a.width() != b.width() || a.height() != b.height())
        fail(ErrorCode::DimensionMismatch, "mask dimensions differ");
}

} // namespace

bool BinaryMask::subset_of(const BinaryMask& other) const {
    require_same(*this, other);
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i] && !other.bits_[i])
            return false;
    return true;
}

BinaryMask BinaryMask::operator|(const BinaryMask& other) const {
    require_same(*this, other);
    std::vector<std::uint8_t> out(bits_.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = bits_[i] | other.bits_[i];
    return from_bits(width_, height_, std::move(out));
}

BinaryMask BinaryMask::operator&(const BinaryMask& other) const {
    require_same(*this, other);
    std::vector<std::uint8_t> out(bits_.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = bits_[i] & other.bits_[i];
    return from_bits(width_, height_, std::move(out));
}

BinaryMask BinaryMask::operator~() const {
    std::vector<std::uint8_t> out(bits_.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = bits_[i] ? 0 : 1;
    return from_bits(width_, height_, std::move(out));
}

LabelMap LabelMap::from_labels(int width, int height, std::vector<std::uint8_t> labels) {
    if (width < 0 || height < 0 || labels.size() != static_cast<std::size_t>(width) * height)
        fail(ErrorCode::DimensionMismatch, "label data length does not match width * height");
    std::vector<bool> seen(256, false);
    int max_label = 0;
    for (auto l : labels) {
        seen[l] = true;
        max_label = std::max<int>(max_label, l);
    }
    for (int k = 1; k <= max_label; ++k)
        if (!seen[k])
            fail(ErrorCode::InvalidLabels,
                 "non-contiguous labels: label " + std::to_string(k) + " missing below maximum " +
                     std::to_string(max_label));
    LabelMap m;
    m.width_ = width;
    m.height_ = height;
    m.segment_count_ = max_label;
    m.labels_ = std::move(labels);
    return m;
}

// --- PNG -------------------------------------------------------------------

namespace {

struct PngReader {
    png_image image{};

    PngReader() {
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngReader() { png_image_free(&image); }
    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;

    void begin(std::span<const std::uint8_t> bytes) {
        if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
            fail(ErrorCode::Io, std::string("unreadable PNG: ") + image.message);
    }

    std::vector<std::uint8_t> finish(png_uint_32 format) {
        image.format = format;
        std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
        if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr))
            fail(ErrorCode::Io, std::string("PNG decode failed: ") + image.message);
        return pixels;
    }
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<std::uint8_t> encode_png(int width, int height, png_uint_32 format,
                                     const std::vector<std::uint8_t>& pixels) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, pixels.data(), 0, nullptr))
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr))
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    out.resize(size);
    return out;
}

} // namespace

ImageBuffer decode_image(std::span<const std::uint8_t> png) {
    PngReader r;
    r.begin(png);
    if (r.image.format & PNG_FORMAT_FLAG_LINEAR)
        fail(ErrorCode::UnsupportedFormat, "unsupported bit depth: only 8-bit PNG is accepted");
    if (r.image.format & PNG_FORMAT_FLAG_ALPHA)
        fail(ErrorCode::UnsupportedFormat, "PNG with alpha channel is not supported");
    const int w = static_cast<int>(r.image.width);
    const int h = static_cast<int>(r.image.height);
    auto pixels = r.finish(PNG_FORMAT_RGB);
    ImageBuffer img(w, h);
    auto data = img.data();
    for (std::size_t i = 0; i < pixels.size(); ++i)
        data[i] = pixels[i] / 255.0;
    return img;
}

ImageBuffer load_image(const std::filesystem::path& path) {
    return decode_image(read_file(path));
}

std::uint8_t quantize_channel(double v) {
    if (!(v > 0.0))
        return 0;
    if (v >= 1.0)
        return 255;
    return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

ImageBuffer quantize(const ImageBuffer& img) {
    ImageBuffer out = img;
    for (double& v : out.data())
        v = quantize_channel(v) / 255.0;
    return out;
}

std::vector<std::uint8_t> encode_image(const ImageBuffer& img) {
    std::vector<std::uint8_t> pixels(img.data().size());
    std::ranges::transform(img.data(), pixels.begin(), quantize_channel);
    return encode_png(img.width(), img.height(), PNG_FORMAT_RGB, pixels);
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
    write_file(path, encode_image(img));
}

LabelMap decode_label_map(std::span<const std::uint8_t> png) {
    PngReader r;
    r.begin(png);
    const auto fmt = r.image.format;
    if (fmt & PNG_FORMAT_FLAG_LINEAR)
        fail(ErrorCode::UnsupportedFormat, "unsupported bit depth: label maps must be 8-bit");
    if (fmt & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA | PNG_FORMAT_FLAG_COLORMAP))
        fail(ErrorCode::UnsupportedFormat, "label maps must be plain 8-bit grayscale PNG");
    const int w = static_cast<int>(r.image.width);
    const int h = static_cast<int>(r.image.height);
    return LabelMap::from_labels(w, h, r.finish(PNG_FORMAT_GRAY));
}

LabelMap load_label_map(const std::filesystem::path& path, std::pair<int, int> expected_dims) {
    LabelMap labels = decode_label_map(read_file(path));
    if (labels.width() != expected_dims.first || labels.height() != expected_dims.second)
        fail(ErrorCode::DimensionMismatch,
             "label map is " + std::to_string(labels.width()) + "x" + std::to_string(labels.height()) +
                 ", expected " + std::to_string(expected_dims.first) + "x" +
                 std::to_string(expected_dims.second));
    return labels;
}

std::vector<std::uint8_t> encode_label_map(const LabelMap& labels) {
    return encode_png(labels.width(), labels.height(), PNG_FORMAT_GRAY,
                      {labels.labels().begin(), labels.labels().end()});
}

void save_label_map(const LabelMap& labels, const std::filesystem::path& path) {
    write_file(path, encode_label_map(labels));
}

// --- masks -----------------------------------------------------------------

BinaryMask mask_of(const LabelMap& labels, int segment) {
    if (segment < 1 || segment > labels.segment_count())
        fail(ErrorCode::OutOfRange, "segment id " + std::to_string(segment) + " outside 1.." +
                                        std::to_string(labels.segment_count()));
    std::vector<std::uint8_t> bits(labels.size());
    for (std::size_t i = 0; i < bits.size(); ++i)
        bits[i] = labels.at(i) == segment;
    return BinaryMask::from_bits(labels.width(), labels.height(), std::move(bits));
}

BinaryMask unlabeled_mask(const LabelMap& labels) {
    std::vector<std::uint8_t> bits(labels.size());
    for (std::size_t i = 0; i < bits.size(); ++i)
        bits[i] = labels.at(i) == 0;
    return BinaryMask::from_bits(labels.width(), labels.height(), std::move(bits));
}

BinaryMask full_mask(int width, int height) {
    return BinaryMask(width, height, true);
}

namespace {

std::vector<std::pair<int, int>> disk_offsets(int radius) {
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius)
                offsets.emplace_back(dx, dy);
    return offsets;
}

} // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) {
    if (radius < 0)
        fail(ErrorCode::InvalidArgument, "dilation radius must be >= 0");
    if (radius == 0)
        return mask;
    const auto offsets = disk_offsets(radius);
    const int w = mask.width(), h = mask.height();
    std::vector<std::uint8_t> out(mask.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y))
                continue;
            for (auto [dx, dy] : offsets) {
                const int nx = x + dx, ny = y + dy;
                if (mask.contains(nx, ny))
                    out[static_cast<std::size_t>(ny) * w + nx] = 1;
            }
        }
    return BinaryMask::from_bits(w, h, std::move(out));
}

BinaryMask erode(const BinaryMask& mask, int radius) {
    // Pixels beyond the frame count as outside.
    if (radius < 0)
        fail(ErrorCode::InvalidArgument, "erosion radius must be >= 0");
    if (radius == 0)
        return mask;
    const auto offsets = disk_offsets(radius);
    const int w = mask.width(), h = mask.height();
    std::vector<std::uint8_t> out(mask.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y))
                continue;
            bool keep = true;
            for (auto [dx, dy] : offsets) {
                const int nx = x + dx, ny = y + dy;
                if (!mask.contains(nx, ny) || !mask.at(nx, ny)) {
                    keep = false;
                    break;
                }
            }
            out[static_cast<std::size_t>(y) * w + x] = keep;
        }
    return BinaryMask::from_bits(w, h, std::move(out));
}

namespace {

constexpr int kN4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

} // namespace

BinaryMask outer_boundary(const BinaryMask& mask) {
    const int w = mask.width(), h = mask.height();
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (mask.at(x, y))
                continue;
            for (auto [dx, dy] : kN4)
                if (mask.contains(x + dx, y + dy) && mask.at(x + dx, y + dy)) {
                    out.set(x, y, true);
                    break;
                }
        }
    return out;
}

BinaryMask inner_boundary(const BinaryMask& mask) {
    const int w = mask.width(), h = mask.height();
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y))
                continue;
            for (auto [dx, dy] : kN4)
                if (!mask.contains(x + dx, y + dy) || !mask.at(x + dx, y + dy)) {
                    out.set(x, y, true);
                    break;
                }
        }
    return out;
}

ImageBuffer compose(std::span<const Piece> pieces, const LabelMap& labels, const ImageBuffer& original) {
    if (original.width() != labels.width() || original.height() != labels.height())
        fail(ErrorCode::DimensionMismatch, "original image and label map dimensions differ");
    const int n = labels.segment_count();
    std::vector<const ImageBuffer*> by_id(n + 1, nullptr);
    for (const auto& [id, img] : pieces) {
        if (id < 1 || id > n)
            fail(ErrorCode::OutOfRange, "piece for unknown segment id " + std::to_string(id));
        if (by_id[id])
            fail(ErrorCode::InvalidArgument, "duplicate piece for segment " + std::to_string(id));
        if (!img.same_size(original))
            fail(ErrorCode::DimensionMismatch, "piece " + std::to_string(id) + " has wrong dimensions");
        by_id[id] = &img;
    }
    for (int k = 1; k <= n; ++k)
        if (!by_id[k])
            fail(ErrorCode::InvalidArgument, "missing piece for segment " + std::to_string(k));

    ImageBuffer out = original;
    auto dst = out.data();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int k = labels.at(i);
        if (k == 0)
            continue;
        auto src = by_id[k]->data();
        for (int c = 0; c < 3; ++c)
            dst[i * 3 + c] = src[i * 3 + c];
    }
    return out;
}

double mean_squared_error(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_size(b))
        fail(ErrorCode::DimensionMismatch, "image dimensions differ");
    if (a.empty())
        return 0.0;
    double sum = 0.0;
    auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = da[i] - db[i];
        sum += d * d;
    }
    return sum / static_cast<double>(da.size());
}

} // namespace segedit
