#include "vcprune/tensor_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

namespace vcprune {

using nlohmann::json;

namespace {

constexpr std::uint64_t max_header_bytes = 100u << 20;

void put_u32_le(std::uint8_t* dst, std::uint32_t v)
{
    for (int k = 0; k < 4; ++k) {
        dst[k] = static_cast<std::uint8_t>(v >> (8 * k));
    }
}

std::uint32_t get_u32_le(const std::uint8_t* src)
{
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
        v |= static_cast<std::uint32_t>(src[k]) << (8 * k);
    }
    return v;
}

DType parse_dtype(const std::string& s, const std::string& name)
{
    if (s == "F32") return DType::f32;
    if (s == "U8") return DType::u8;
    throw Error(ErrorKind::dtype_mismatch, "tensor '" + name + "': unsupported dtype " + s);
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path)
{
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw Error(ErrorKind::missing_file, "no such file: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorKind::io, "read failed: " + path.string());
    }
    return bytes;
}

void check_matrix_entry(const TensorEntry& e, const std::string& name, DType want)
{
    if (e.dtype != want) {
        throw Error(ErrorKind::dtype_mismatch, "tensor '" + name + "' has dtype " +
                                                   std::string(dtype_name(e.dtype)) + ", expected " +
                                                   std::string(dtype_name(want)));
    }
    if (e.rank() != 2) {
        throw Error(ErrorKind::rank_mismatch,
                    "tensor '" + name + "' has rank " + std::to_string(e.rank()) + ", expected 2");
    }
}

} // namespace

std::string_view dtype_name(DType dtype)
{
    return dtype == DType::f32 ? "F32" : "U8";
}

std::size_t dtype_size(DType dtype)
{
    return dtype == DType::f32 ? 4 : 1;
}

std::size_t TensorEntry::element_count() const
{
    std::size_t n = 1;
    for (auto d : shape) {
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

TensorFile TensorFile::load(const std::filesystem::path& path)
{
    const auto bytes = read_all(path);
    if (bytes.size() < 8) {
        throw Error(ErrorKind::malformed_file, path.string() + ": truncated header length");
    }
    std::uint64_t header_len = 0;
    for (int k = 0; k < 8; ++k) {
        header_len |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    }
    if (header_len > max_header_bytes || header_len > bytes.size() - 8) {
        throw Error(ErrorKind::malformed_file, path.string() + ": header length exceeds file size");
    }
    const std::string header_text(reinterpret_cast<const char*>(bytes.data() + 8), header_len);
    const std::size_t payload_begin = 8 + header_len;
    const std::size_t payload_size = bytes.size() - payload_begin;

    // Reject duplicate top-level names, which a plain parse would collapse.
    std::set<std::string> seen;
    std::string duplicate;
    json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
        if (depth == 1 && event == json::parse_event_t::key) {
            auto key = parsed.get<std::string>();
            if (!seen.insert(key).second) {
                duplicate = key;
            }
        }
        return true;
    };
    json header;
    try {
        header = json::parse(header_text, cb);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::malformed_file, path.string() + ": bad header: " + e.what());
    }
    if (!duplicate.empty()) {
        throw Error(ErrorKind::malformed_file, path.string() + ": duplicate tensor name '" + duplicate + "'");
    }
    if (!header.is_object()) {
        throw Error(ErrorKind::malformed_file, path.string() + ": header is not an object");
    }

    TensorFile file;
    for (const auto& [name, desc] : header.items()) {
        if (name == "__metadata__") {
            for (const auto& [k, v] : desc.items()) {
                if (v.is_string()) file.metadata_[k] = v.get<std::string>();
            }
            continue;
        }
        try {
            TensorEntry e;
            e.dtype = parse_dtype(desc.at("dtype").get<std::string>(), name);
            e.shape = desc.at("shape").get<std::vector<std::int64_t>>();
            for (auto d : e.shape) {
                if (d < 0) throw Error(ErrorKind::malformed_file, "tensor '" + name + "': negative dimension");
            }
            const auto offsets = desc.at("data_offsets").get<std::vector<std::uint64_t>>();
            if (offsets.size() != 2 || offsets[0] > offsets[1] || offsets[1] > payload_size) {
                throw Error(ErrorKind::malformed_file, "tensor '" + name + "': byte range outside payload");
            }
            const std::size_t expected = e.element_count() * dtype_size(e.dtype);
            if (offsets[1] - offsets[0] != expected) {
                throw Error(ErrorKind::malformed_file, "tensor '" + name + "': byte length does not match shape");
            }
            const auto* begin = bytes.data() + payload_begin + offsets[0];
            e.bytes.assign(begin, begin + expected);
            if (e.dtype == DType::u8 && e.rank() == 2 && name.ends_with(".mask")) {
                for (auto b : e.bytes) {
                    if (b > 1) throw Error(ErrorKind::malformed_file, "mask '" + name + "' holds values other than 0/1");
                }
            }
            file.tensors_.emplace(name, std::move(e));
        } catch (const json::exception& ex) {
            throw Error(ErrorKind::malformed_file, path.string() + ": tensor '" + name + "': " + ex.what());
        }
    }
    return file;
}

void TensorFile::save(const std::filesystem::path& path) const
{
    json header = json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, e] : tensors_) {
        header[name] = {{"dtype", dtype_name(e.dtype)}, {"shape", e.shape}, {"data_offsets", {offset, offset + e.bytes.size()}}};
        offset += e.bytes.size();
    }
    if (!metadata_.empty()) {
        header["__metadata__"] = metadata_;
    }
    std::string text = header.dump();
    // Pad so the payload starts 8-byte aligned.
    while ((text.size() + 8) % 8 != 0) {
        text.push_back(' ');
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
    }
    std::uint8_t len[8];
    for (int k = 0; k < 8; ++k) {
        len[k] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(text.size()) >> (8 * k));
    }
    out.write(reinterpret_cast<const char*>(len), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, e] : tensors_) {
        out.write(reinterpret_cast<const char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
    }
    out.flush();
    if (!out) {
        throw Error(ErrorKind::io, "write failed: " + path.string());
    }
}

const TensorEntry& TensorFile::at(const std::string& name) const
{
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
        throw Error(ErrorKind::missing_name, "no tensor named '" + name + "'");
    }
    return it->second;
}

void TensorFile::put(const std::string& name, TensorEntry entry)
{
    if (name.empty() || name == "__metadata__") {
        throw Error(ErrorKind::invalid_argument, "invalid tensor name '" + name + "'");
    }
    if (entry.bytes.size() != entry.element_count() * dtype_size(entry.dtype)) {
        throw Error(ErrorKind::dimension_mismatch, "tensor '" + name + "': payload size does not match shape");
    }
    tensors_.insert_or_assign(name, std::move(entry));
}

std::vector<std::string> TensorFile::names() const
{
    std::vector<std::string> out;
    out.reserve(tensors_.size());
    for (const auto& [name, e] : tensors_) {
        out.push_back(name);
    }
    return out;
}

WeightMatrix TensorFile::matrix(const std::string& name) const
{
    const auto& e = at(name);
    check_matrix_entry(e, name, DType::f32);
    WeightMatrix m(static_cast<std::size_t>(e.shape[0]), static_cast<std::size_t>(e.shape[1]));
    auto values = m.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
        values[k] = static_cast<double>(std::bit_cast<float>(get_u32_le(e.bytes.data() + 4 * k)));
    }
    return m;
}

void TensorFile::put_matrix(const std::string& name, const WeightMatrix& matrix)
{
    TensorEntry e;
    e.dtype = DType::f32;
    e.shape = {static_cast<std::int64_t>(matrix.rows()), static_cast<std::int64_t>(matrix.cols())};
    e.bytes.resize(matrix.size() * 4);
    auto values = matrix.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
        const float f = static_cast<float>(values[k]);
        if (!std::isfinite(values[k]) || !std::isfinite(f)) {
            throw Error(ErrorKind::non_finite, "tensor '" + name + "' contains a non-finite value");
        }
        put_u32_le(e.bytes.data() + 4 * k, std::bit_cast<std::uint32_t>(f));
    }
    put(name, std::move(e));
}

PruneMask TensorFile::mask(const std::string& name) const
{
    const auto& e = at(name);
    check_matrix_entry(e, name, DType::u8);
    PruneMask m(static_cast<std::size_t>(e.shape[0]), static_cast<std::size_t>(e.shape[1]));
    std::memcpy(m.data(), e.bytes.data(), e.bytes.size());
    return m;
}

void TensorFile::put_mask(const std::string& name, const PruneMask& mask)
{
    TensorEntry e;
    e.dtype = DType::u8;
    e.shape = {static_cast<std::int64_t>(mask.rows()), static_cast<std::int64_t>(mask.cols())};
    e.bytes.assign(mask.data(), mask.data() + mask.size());
    for (auto b : e.bytes) {
        if (b > 1) {
            throw Error(ErrorKind::invalid_argument, "mask '" + name + "' holds values other than 0/1");
        }
    }
    put(name, std::move(e));
}

WeightMatrix read_tensor(const std::filesystem::path& path, const std::string& name)
{
    return TensorFile::load(path).matrix(name);
}

namespace {

TensorFile load_or_empty(const std::filesystem::path& path)
{
    std::error_code ec;
    return std::filesystem::exists(path, ec) ? TensorFile::load(path) : TensorFile{};
}

} // namespace

void write_tensor(const std::filesystem::path& path, const std::string& name, const WeightMatrix& matrix)
{
    auto file = load_or_empty(path);
    file.put_matrix(name, matrix);
    file.save(path);
}

PruneMask read_mask(const std::filesystem::path& path, const std::string& name)
{
    return TensorFile::load(path).mask(name);
}

void write_mask(const std::filesystem::path& path, const std::string& name, const PruneMask& mask)
{
    auto file = load_or_empty(path);
    file.put_mask(name, mask);
    file.save(path);
}

} // namespace vcprune
