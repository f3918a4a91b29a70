#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vcprune/matrix.hpp"

namespace vcprune {

enum class DType { f32, u8 };

std::string_view dtype_name(DType dtype);
std::size_t dtype_size(DType dtype);

/// One named tensor: raw little-endian row-major payload bytes.
struct TensorEntry {
    DType dtype = DType::f32;
    std::vector<std::int64_t> shape;
    std::vector<std::uint8_t> bytes;

    std::size_t element_count() const;
    std::size_t rank() const { return shape.size(); }
    bool is_float_matrix() const { return dtype == DType::f32 && shape.size() == 2; }

    friend bool operator==(const TensorEntry&, const TensorEntry&) = default;
};

/// In-memory image of a tensor container.
///
/// On disk: an 8-byte little-endian header length N, N bytes of UTF-8 JSON
/// mapping each name to {"dtype", "shape", "data_offsets": [begin, end]},
/// then the payload. Offsets are relative to the start of the payload. The
/// layout is compatible with the safetensors container for F32/U8 tensors.
/// Names are serialized in sorted order, so saving is deterministic.
class TensorFile {
public:
    static TensorFile load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    const TensorEntry& at(const std::string& name) const;
    void put(const std::string& name, TensorEntry entry);
    std::vector<std::string> names() const;
    std::size_t size() const { return tensors_.size(); }

    /// F32 rank-2 tensor as a WeightMatrix (exact float -> double widening).
    WeightMatrix matrix(const std::string& name) const;
    void put_matrix(const std::string& name, const WeightMatrix& matrix);

    PruneMask mask(const std::string& name) const;
    void put_mask(const std::string& name, const PruneMask& mask);

    std::map<std::string, std::string>& metadata() { return metadata_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

private:
    std::map<std::string, TensorEntry> tensors_;
    std::map<std::string, std::string> metadata_;
};

WeightMatrix read_tensor(const std::filesystem::path& path, const std::string& name);

/// Inserts or replaces `name` in the container at `path`, creating it if
/// needed. Values are stored as 32-bit floats; non-finite values are rejected.
void write_tensor(const std::filesystem::path& path, const std::string& name, const WeightMatrix& matrix);

PruneMask read_mask(const std::filesystem::path& path, const std::string& name);
void write_mask(const std::filesystem::path& path, const std::string& name, const PruneMask& mask);

} // namespace vcprune
