#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "v2v/errors.hpp"
#include "v2v/matrix.hpp"

namespace v2v {

/// Flat tensor container:
///   magic "V2VTENS1" | u64 seed | u32 tensor count |
///   per tensor: u32 name length, name bytes, u32 rows, u32 cols,
///               rows*cols float32 values
/// All integers and floats little-endian.
namespace detail {

constexpr char kTensorMagic[8] = {'V', '2', 'V', 'T', 'E', 'N', 'S', '1'};

inline void put_u32_le(std::ostream& os, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

inline void put_u64_le(std::ostream& os, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

inline uint64_t get_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

}  // namespace detail

inline void save_tensors(const std::string& path, uint64_t seed,
                         const std::vector<std::pair<std::string, const Matrix*>>& tensors) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
    f.write(detail::kTensorMagic, 8);
    detail::put_u64_le(f, seed);
    detail::put_u32_le(f, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        detail::put_u32_le(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32_le(f, static_cast<uint32_t>(m->rows()));
        detail::put_u32_le(f, static_cast<uint32_t>(m->cols()));
        for (double v : m->data()) {
            const float fv = static_cast<float>(v);
            uint32_t bits;
            std::memcpy(&bits, &fv, 4);
            detail::put_u32_le(f, bits);
        }
    }
    if (!f) fail(ErrorKind::io, "write failed for '" + path + "'");
}

inline void save_tensors(const std::string& path, uint64_t seed,
                         std::vector<std::pair<std::string, Matrix*>> tensors) {
    std::vector<std::pair<std::string, const Matrix*>> view;
    view.reserve(tensors.size());
    for (auto& [name, m] : tensors) view.emplace_back(name, m);
    save_tensors(path, seed, view);
}

struct TensorFile {
    uint64_t seed = 0;
    std::vector<std::pair<std::string, Matrix>> tensors;

    const Matrix* find(const std::string& name) const {
        for (const auto& [n, m] : tensors)
            if (n == name) return &m;
        return nullptr;
    }
};

inline TensorFile load_tensors(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::io, "cannot open '" + path + "' for reading");
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, detail::kTensorMagic, 8) != 0)
        fail(ErrorKind::io, "'" + path + "' is not a tensor file");
    TensorFile out;
    out.seed = detail::get_u64_le(f);
    const uint32_t count = detail::get_u32_le(f);
    for (uint32_t t = 0; t < count; ++t) {
        const uint32_t name_len = detail::get_u32_le(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const uint32_t rows = detail::get_u32_le(f);
        const uint32_t cols = detail::get_u32_le(f);
        Matrix m(static_cast<int>(rows), static_cast<int>(cols));
        for (double& v : m.data()) {
            const uint32_t bits = detail::get_u32_le(f);
            float fv;
            std::memcpy(&fv, &bits, 4);
            v = static_cast<double>(fv);
        }
        if (!f) fail(ErrorKind::io, "'" + path + "' truncated inside tensor '" + name + "'");
        out.tensors.emplace_back(std::move(name), std::move(m));
    }
    return out;
}

/// Fill a model's parameter set from a file, matched by name with shape checks.
inline uint64_t load_tensors_into(const std::string& path,
                                  std::vector<std::pair<std::string, Matrix*>> params) {
    const TensorFile file = load_tensors(path);
    for (auto& [name, dst] : params) {
        const Matrix* src = file.find(name);
        if (!src) fail(ErrorKind::io, "'" + path + "' is missing tensor '" + name + "'");
        if (src->rows() != dst->rows() || src->cols() != dst->cols())
            fail(ErrorKind::dimension, "tensor '" + name + "' has shape " +
                                           std::to_string(src->rows()) + "x" +
                                           std::to_string(src->cols()) + ", model expects " +
                                           std::to_string(dst->rows()) + "x" +
                                           std::to_string(dst->cols()));
        *dst = *src;
    }
    if (file.tensors.size() != params.size())
        fail(ErrorKind::io, "'" + path + "' holds " + std::to_string(file.tensors.size()) +
                                " tensors, model expects " + std::to_string(params.size()));
    return file.seed;
}

}  // namespace v2v
