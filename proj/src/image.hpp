#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace segedit {

// H x W x 3 image, row-major, interleaved RGB, values in [0, 1].
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, double fill = 0.0);

    // Throws DimensionMismatch on a wrong length and OutOfRange on values
    // that are non-finite or outside [0, 1].
    static ImageBuffer from_data(int width, int height, std::vector<double> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const noexcept { return data_.empty(); }

    double at(int x, int y, int c) const { return data_[index(x, y, c)]; }
    double& at(int x, int y, int c) { return data_[index(x, y, c)]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
    }

    bool same_size(const ImageBuffer& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);
    static BinaryMask from_bits(int width, int height, std::vector<std::uint8_t> bits);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }
    std::size_t pixel_count() const noexcept { return count_; }

    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    bool at(std::size_t i) const { return bits_[i] != 0; }
    void set(int x, int y, bool value);
    void set(std::size_t i, bool value);

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    // Set algebra; operands must have equal dimensions.
    bool subset_of(const BinaryMask& other) const;
    BinaryMask operator|(const BinaryMask& other) const;
    BinaryMask operator&(const BinaryMask& other) const;
    BinaryMask operator~() const;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
    std::size_t count_ = 0;
};

// Per-pixel segment labels 0..n. Label 0 marks pixels that are never
// projected and are copied back from the original image.
class LabelMap {
public:
    LabelMap() = default;

    // Validates contiguity: every label 1..max must occur at least once.
    static LabelMap from_labels(int width, int height, std::vector<std::uint8_t> labels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int segment_count() const noexcept { return segment_count_; }
    std::size_t size() const noexcept { return labels_.size(); }

    int at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    int at(std::size_t i) const { return labels_[i]; }
    std::span<const std::uint8_t> labels() const noexcept { return labels_; }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int segment_count_ = 0;
    std::vector<std::uint8_t> labels_;
};

// PNG boundary. Bytes map to v / 255 on load; on save values are clamped
// to [0, 1] and rounded half-up from v * 255.
ImageBuffer load_image(const std::filesystem::path& path);
void save_image(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer decode_image(std::span<const std::uint8_t> png);
std::vector<std::uint8_t> encode_image(const ImageBuffer& img);

LabelMap load_label_map(const std::filesystem::path& path, std::pair<int, int> expected_dims);
LabelMap decode_label_map(std::span<const std::uint8_t> png);
void save_label_map(const LabelMap& labels, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_label_map(const LabelMap& labels);

std::uint8_t quantize_channel(double v);
// Snap every value onto the 8-bit grid exactly as a save/load round trip would.
ImageBuffer quantize(const ImageBuffer& img);

BinaryMask mask_of(const LabelMap& labels, int segment);
BinaryMask unlabeled_mask(const LabelMap& labels);
BinaryMask full_mask(int width, int height);

// Euclidean disk dilation: p is set iff some source pixel lies within
// distance <= radius.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);

// Pixels outside the mask that have a 4-neighbour inside it.
BinaryMask outer_boundary(const BinaryMask& mask);
// Pixels inside the mask that have a 4-neighbour outside it (or lie on the frame).
BinaryMask inner_boundary(const BinaryMask& mask);

using Piece = std::pair<int, ImageBuffer>;

// Hard-cut composition: label k takes the piece with id k, label 0 takes
// the original pixel.
ImageBuffer compose(std::span<const Piece> pieces, const LabelMap& labels, const ImageBuffer& original);

// Mean squared difference over all pixels and channels.
double mean_squared_error(const ImageBuffer& a, const ImageBuffer& b);

} // namespace segedit
