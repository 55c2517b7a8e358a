#include "lmec/serialization.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lmec {

namespace {

constexpr char kMagic[4] = {'L', 'M', 'E', 'C'};

template <typename T>
T to_little_endian(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::little) {
        return value;
    } else {
        T out;
        auto* src = reinterpret_cast<const unsigned char*>(&value);
        auto* dst = reinterpret_cast<unsigned char*>(&out);
        for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
        return out;
    }
}

template <typename T>
void write_le(std::ofstream& out, T value) {
    const T le = to_little_endian(value);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("tensor file: truncated read");
    return to_little_endian(value);
}

}  // namespace

void save_tensors(const std::string& path, const std::vector<const Matrix*>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_tensors: cannot open " + path);
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kTensorFormatVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Matrix* t : tensors) {
        write_le<std::uint64_t>(out, t->rows());
        write_le<std::uint64_t>(out, t->cols());
    }
    for (const Matrix* t : tensors) {
        for (double v : t->values()) {
            write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    if (!out) throw std::runtime_error("save_tensors: write failed for " + path);
}

std::vector<Matrix> load_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_tensors: cannot open " + path);
    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("load_tensors: " + path + " is not a tensor file (bad magic)");
    }
    const auto version = read_le<std::uint32_t>(in);
    if (version != kTensorFormatVersion) {
        throw std::runtime_error("load_tensors: unsupported version " + std::to_string(version));
    }
    const auto count = read_le<std::uint32_t>(in);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes(count);
    for (auto& [rows, cols] : shapes) {
        rows = read_le<std::uint64_t>(in);
        cols = read_le<std::uint64_t>(in);
    }
    std::vector<Matrix> tensors;
    tensors.reserve(count);
    for (const auto& [rows, cols] : shapes) {
        Matrix m(rows, cols);
        for (double& v : m.values()) {
            v = std::bit_cast<double>(read_le<std::uint64_t>(in));
        }
        tensors.push_back(std::move(m));
    }
    return tensors;
}

void save_block(const std::string& path, const BlockParams& params) {
    save_tensors(path, params.tensors());
}

void load_block_into(const std::string& path, BlockParams& params) {
    const std::vector<Matrix> loaded = load_tensors(path);
    const std::vector<Matrix*> targets = params.tensors();
    if (loaded.size() != targets.size()) {
        throw std::runtime_error("load_block_into: file has " + std::to_string(loaded.size()) +
                                 " tensors, block expects " + std::to_string(targets.size()));
    }
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        if (!loaded[i].same_shape(*targets[i])) {
            throw std::runtime_error("load_block_into: tensor " + std::to_string(i) + " is " +
                                     shape_string(loaded[i]) + ", block expects " +
                                     shape_string(*targets[i]));
        }
    }
    for (std::size_t i = 0; i < loaded.size(); ++i) *targets[i] = loaded[i];
    if (params.attn_spec.pe.kind == PeKind::LmApe) {
        params.attn_spec.pe.table.refresh_weights();
    }
}

}  // namespace lmec
