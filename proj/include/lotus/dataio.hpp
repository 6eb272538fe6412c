#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lotus/common.hpp"

namespace lotus {

enum class Split { Train, Eval };

// Images as [N, channels, H, W] row-major pixels scaled to [0,1].
// blob_patch carries the synthetic generator's blob location per image
// (-1 when unknown), used by attention-quality tests.
struct ImageDataset {
    int channels = 0;
    int height = 0;
    int width = 0;
    Split split = Split::Train;
    std::vector<float> pixels;
    std::vector<int> labels;
    std::vector<int> blob_patch;

    int size() const { return static_cast<int>(labels.size()); }
    int image_numel() const { return channels * height * width; }
    const float* image(int i) const { return pixels.data() + static_cast<size_t>(i) * image_numel(); }
};

// CIFAR-10 binary format: records of 3073 bytes (label byte + 3x1024 pixel
// planes, row-major 32x32). Train reads data_batch_1..5.bin (those present),
// eval reads test_batch.bin. limit > 0 truncates from the front.
ImageDataset load_cifar10(const std::string& dir, int64_t limit, Split split);

// Noise-plus-blob classification task: each image is clipped Gaussian noise
// with one all-ones patch; the quadrant of the patch grid holding the blob is
// the class (4 classes, round-robin balanced).
ImageDataset gen_synthetic(int n, int image_size, int patch_size, int channels, int num_classes,
                           double noise_sigma, uint64_t seed);

ImageDataset dataset_subset(const ImageDataset& ds, const std::vector<int>& indices);

// Seeded-shuffle front slice of at least one image.
ImageDataset dataset_fraction(const ImageDataset& ds, double fraction, uint64_t seed);

// ---- checkpoints ----

enum class BlobDtype : uint8_t { F32 = 0, F64 = 1, U8 = 2 };

struct TensorBlob {
    BlobDtype dtype = BlobDtype::F32;
    std::vector<uint32_t> dims;
    std::vector<uint8_t> bytes;

    size_t elem_size() const { return dtype == BlobDtype::F64 ? 8 : dtype == BlobDtype::F32 ? 4 : 1; }
    uint64_t elem_count() const {
        uint64_t n = 1;
        for (uint32_t d : dims) n *= d;
        return dims.empty() ? 0 : n;
    }
};

// Binary layout ("LOTS"): magic, u32 version=1, u32 tensor_count, then per
// tensor u16 name length + name + u8 dtype + u8 ndim + ndim x u32 dims + raw
// little-endian data; trailing u32 CRC32 of all preceding bytes.
struct Checkpoint {
    uint32_t version = 1;
    std::vector<std::pair<std::string, TensorBlob>> tensors;

    const TensorBlob* find(const std::string& name) const {
        for (const auto& [n, b] : tensors)
            if (n == name) return &b;
        return nullptr;
    }
    void add(const std::string& name, TensorBlob blob) { tensors.emplace_back(name, std::move(blob)); }
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Config echo (JSON text, seed included) rides along as a U8 tensor.
void checkpoint_set_config(Checkpoint& ck, const std::string& config_json);
std::string checkpoint_config(const Checkpoint& ck);

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0);

// ---- metrics ----

struct MetricsRow {
    std::string experiment;
    int epoch = 0;
    std::string split;
    double sparsity = 0.0;
    double drop_fraction = 0.0;
    double loss = 0.0;
    double accuracy = 0.0;
    double wall_ms = 0.0;
};

// CSV with the fixed header; floats printed with 6 significant digits; rows
// written in the given order.
void write_metrics(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics(const std::string& path);

std::string format_g6(double v);

}  // namespace lotus
