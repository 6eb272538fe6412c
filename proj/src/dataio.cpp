#include "lotus/dataio.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace fs = std::filesystem;

namespace lotus {

namespace {

constexpr size_t kCifarRecord = 3073;  // label byte + 3 * 32 * 32
constexpr int kCifarSide = 32;
constexpr int kCifarChannels = 3;

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open file");
    in.seekg(0, std::ios::end);
    const auto size = static_cast<size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<uint8_t> buf(size);
    if (size > 0) in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!in) throw IoError(path, "read failed");
    return buf;
}

void append_cifar_file(const std::string& path, ImageDataset& ds, int64_t limit) {
    const std::vector<uint8_t> buf = read_file(path);
    if (buf.size() % kCifarRecord != 0)
        throw FormatError(path, (buf.size() / kCifarRecord) * kCifarRecord,
                          "truncated CIFAR-10 record");
    const size_t records = buf.size() / kCifarRecord;
    for (size_t r = 0; r < records; ++r) {
        if (limit > 0 && ds.size() >= limit) return;
        const size_t off = r * kCifarRecord;
        const uint8_t label = buf[off];
        if (label > 9) throw FormatError(path, off, "label byte out of range");
        ds.labels.push_back(label);
        ds.blob_patch.push_back(-1);
        const uint8_t* px = buf.data() + off + 1;
        for (size_t i = 0; i < kCifarRecord - 1; ++i)
            ds.pixels.push_back(static_cast<float>(px[i]) / 255.0f);
    }
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xFF));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

const std::array<uint32_t, 256>& crc_table() {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

}  // namespace

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc) {
    const auto& table = crc_table();
    uint32_t c = crc ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

ImageDataset load_cifar10(const std::string& dir, int64_t limit, Split split) {
    if (!fs::is_directory(dir)) throw IoError(dir, "dataset directory not found");
    ImageDataset ds;
    ds.channels = kCifarChannels;
    ds.height = kCifarSide;
    ds.width = kCifarSide;
    ds.split = split;
    if (split == Split::Train) {
        bool found = false;
        for (int i = 1; i <= 5; ++i) {
            const std::string path = (fs::path(dir) / ("data_batch_" + std::to_string(i) + ".bin")).string();
            if (!fs::exists(path)) continue;
            found = true;
            append_cifar_file(path, ds, limit);
            if (limit > 0 && ds.size() >= limit) break;
        }
        if (!found) throw IoError(dir, "no data_batch_*.bin files in directory");
    } else {
        const std::string path = (fs::path(dir) / "test_batch.bin").string();
        if (!fs::exists(path)) throw IoError(path, "test batch not found");
        append_cifar_file(path, ds, limit);
    }
    return ds;
}

ImageDataset gen_synthetic(int n, int image_size, int patch_size, int channels, int num_classes,
                           double noise_sigma, uint64_t seed) {
    if (n < 1) throw InputError("gen_synthetic: n must be >= 1");
    if (num_classes != 4) throw InputError("gen_synthetic: the quadrant task defines 4 classes");
    if (image_size % patch_size != 0) throw InputError("gen_synthetic: image_size % patch_size != 0");
    const int grid = image_size / patch_size;
    if (grid % 2 != 0) throw InputError("gen_synthetic: patch grid must split into quadrants");

    ImageDataset ds;
    ds.channels = channels;
    ds.height = image_size;
    ds.width = image_size;
    ds.split = Split::Train;
    ds.pixels.resize(static_cast<size_t>(n) * channels * image_size * image_size, 0.0f);

    Rng rng(seed);
    const int half = grid / 2;
    for (int i = 0; i < n; ++i) {
        const int label = i % num_classes;
        ds.labels.push_back(label);
        // quadrant row/col of the patch grid; pick one patch inside it
        const int qr = label / 2, qc = label % 2;
        const int pr = qr * half + static_cast<int>(rng.below(half));
        const int pc = qc * half + static_cast<int>(rng.below(half));
        ds.blob_patch.push_back(pr * grid + pc);

        float* img = ds.pixels.data() + static_cast<size_t>(i) * ds.image_numel();
        if (noise_sigma > 0.0) {
            for (int p = 0; p < ds.image_numel(); ++p) {
                const double v = rng.normal() * noise_sigma;
                img[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
        for (int c = 0; c < channels; ++c)
            for (int y = 0; y < patch_size; ++y)
                for (int x = 0; x < patch_size; ++x) {
                    const int yy = pr * patch_size + y, xx = pc * patch_size + x;
                    img[(static_cast<size_t>(c) * image_size + yy) * image_size + xx] = 1.0f;
                }
    }
    return ds;
}

ImageDataset dataset_subset(const ImageDataset& ds, const std::vector<int>& indices) {
    ImageDataset out;
    out.channels = ds.channels;
    out.height = ds.height;
    out.width = ds.width;
    out.split = ds.split;
    for (int i : indices) {
        if (i < 0 || i >= ds.size()) throw InputError("dataset_subset: index out of range");
        out.labels.push_back(ds.labels[i]);
        out.blob_patch.push_back(ds.blob_patch.empty() ? -1 : ds.blob_patch[i]);
        const float* img = ds.image(i);
        out.pixels.insert(out.pixels.end(), img, img + ds.image_numel());
    }
    return out;
}

ImageDataset dataset_fraction(const ImageDataset& ds, double fraction, uint64_t seed) {
    if (ds.size() == 0) throw UsageError("dataset_fraction: empty dataset");
    if (fraction <= 0.0 || fraction > 1.0) throw InputError("dataset_fraction: fraction must be in (0,1]");
    std::vector<int> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const int64_t count = std::max<int64_t>(1, floor_count(fraction, ds.size()));
    order.resize(static_cast<size_t>(count));
    return dataset_subset(ds, order);
}

// ---- checkpoints ----

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::vector<uint8_t> buf;
    buf.push_back('L');
    buf.push_back('O');
    buf.push_back('T');
    buf.push_back('S');
    put_u32(buf, ck.version);
    put_u32(buf, static_cast<uint32_t>(ck.tensors.size()));
    for (const auto& [name, blob] : ck.tensors) {
        if (name.size() > 0xFFFF) throw UsageError("save_checkpoint: tensor name too long");
        if (blob.dims.size() > 0xFF) throw UsageError("save_checkpoint: too many dims");
        if (blob.bytes.size() != blob.elem_count() * blob.elem_size())
            throw UsageError("save_checkpoint: blob size does not match dims for " + name);
        put_u16(buf, static_cast<uint16_t>(name.size()));
        buf.insert(buf.end(), name.begin(), name.end());
        buf.push_back(static_cast<uint8_t>(blob.dtype));
        buf.push_back(static_cast<uint8_t>(blob.dims.size()));
        for (uint32_t d : blob.dims) put_u32(buf, d);
        buf.insert(buf.end(), blob.bytes.begin(), blob.bytes.end());
    }
    put_u32(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open checkpoint for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError(path, "checkpoint write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::vector<uint8_t> buf = read_file(path);
    if (buf.size() < 16) throw FormatError(path, buf.size(), "file too small for checkpoint header");
    if (std::memcmp(buf.data(), "LOTS", 4) != 0) throw FormatError(path, 0, "bad magic");
    Checkpoint ck;
    ck.version = get_u32(buf.data() + 4);
    if (ck.version != 1) throw FormatError(path, 4, "unsupported checkpoint version");
    const uint32_t stored_crc = get_u32(buf.data() + buf.size() - 4);
    const uint32_t actual_crc = crc32(buf.data(), buf.size() - 4);
    if (stored_crc != actual_crc) throw FormatError(path, buf.size() - 4, "CRC mismatch");

    const uint32_t count = get_u32(buf.data() + 8);
    size_t off = 12;
    const size_t end = buf.size() - 4;
    auto need = [&](size_t bytes) {
        if (off + bytes > end) throw FormatError(path, off, "truncated tensor table");
    };
    for (uint32_t t = 0; t < count; ++t) {
        need(2);
        const uint16_t name_len = get_u16(buf.data() + off);
        off += 2;
        need(name_len);
        std::string name(reinterpret_cast<const char*>(buf.data() + off), name_len);
        off += name_len;
        need(2);
        const uint8_t dtype = buf[off++];
        if (dtype > 2) throw FormatError(path, off - 1, "unknown dtype byte");
        const uint8_t ndim = buf[off++];
        TensorBlob blob;
        blob.dtype = static_cast<BlobDtype>(dtype);
        need(static_cast<size_t>(ndim) * 4);
        for (int d = 0; d < ndim; ++d) {
            blob.dims.push_back(get_u32(buf.data() + off));
            off += 4;
        }
        const uint64_t payload = blob.elem_count() * blob.elem_size();
        need(payload);
        blob.bytes.assign(buf.begin() + static_cast<int64_t>(off),
                          buf.begin() + static_cast<int64_t>(off + payload));
        off += payload;
        ck.add(name, std::move(blob));
    }
    if (off != end) throw FormatError(path, off, "trailing bytes after tensor table");
    return ck;
}

void checkpoint_set_config(Checkpoint& ck, const std::string& config_json) {
    TensorBlob blob;
    blob.dtype = BlobDtype::U8;
    blob.dims = {static_cast<uint32_t>(config_json.size())};
    blob.bytes.assign(config_json.begin(), config_json.end());
    ck.add("__config__", std::move(blob));
}

std::string checkpoint_config(const Checkpoint& ck) {
    const TensorBlob* blob = ck.find("__config__");
    if (!blob) return {};
    return std::string(blob->bytes.begin(), blob->bytes.end());
}

// ---- metrics ----

std::string format_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void write_metrics(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path, "cannot open metrics file for writing");
    out << "experiment,epoch,split,sparsity,drop_fraction,loss,accuracy,wall_ms\n";
    for (const auto& r : rows) {
        out << r.experiment << ',' << r.epoch << ',' << r.split << ',' << format_g6(r.sparsity)
            << ',' << format_g6(r.drop_fraction) << ',' << format_g6(r.loss) << ','
            << format_g6(r.accuracy) << ',' << format_g6(r.wall_ms) << '\n';
    }
    if (!out) throw IoError(path, "metrics write failed");
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open metrics file");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path, 0, "missing CSV header");
    if (line != "experiment,epoch,split,sparsity,drop_fraction,loss,accuracy,wall_ms")
        throw FormatError(path, 0, "unexpected CSV header");
    std::vector<MetricsRow> rows;
    uint64_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            const size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 8) throw FormatError(path, lineno, "expected 8 CSV fields");
        MetricsRow r;
        r.experiment = fields[0];
        r.epoch = std::stoi(fields[1]);
        r.split = fields[2];
        r.sparsity = std::stod(fields[3]);
        r.drop_fraction = std::stod(fields[4]);
        r.loss = std::stod(fields[5]);
        r.accuracy = std::stod(fields[6]);
        r.wall_ms = std::stod(fields[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace lotus
