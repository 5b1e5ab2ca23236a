#include "ino/array_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ino {

namespace {

static_assert(std::endian::native == std::endian::little,
              "array files are little-endian; big-endian hosts are not supported");

constexpr std::uint32_t kArrayMagic = 0x414f4e49;    // "INOA"
constexpr std::uint32_t kArchiveMagic = 0x434f4e49;  // "INOC"
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::istream& is, const char* what) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error(std::string("truncated ") + what);
    return v;
}

std::uint64_t get_u64(std::istream& is, const char* what) {
    std::uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 8)) throw std::runtime_error(std::string("truncated ") + what);
    return v;
}

void put_shape(std::ostream& os, const std::vector<std::size_t>& shape) {
    put_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put_u64(os, d);
}

std::vector<std::size_t> get_shape(std::istream& is, const std::filesystem::path& path) {
    const std::uint32_t ndim = get_u32(is, "shape header");
    if (ndim > 8) throw std::runtime_error("array file " + path.string() + ": implausible rank");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = get_u64(is, "shape header");
    return shape;
}

void put_entry(std::ostream& os, const ArchiveEntry& e) {
    put_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u32(os, e.is_f64() ? 0u : 1u);
    put_shape(os, e.shape);
    if (e.is_f64()) {
        os.write(reinterpret_cast<const char*>(e.f64.data()),
                 static_cast<std::streamsize>(e.f64.size() * sizeof(double)));
    } else {
        os.write(reinterpret_cast<const char*>(e.i64.data()),
                 static_cast<std::streamsize>(e.i64.size() * sizeof(std::int64_t)));
    }
}

ArchiveEntry get_entry(std::istream& is, const std::filesystem::path& path) {
    ArchiveEntry e;
    const std::uint32_t name_len = get_u32(is, "entry name");
    e.name.resize(name_len);
    if (!is.read(e.name.data(), name_len)) throw std::runtime_error("truncated entry name");
    const std::uint32_t dtype = get_u32(is, "entry dtype");
    e.shape = get_shape(is, path);
    const std::size_t count = shape_product(e.shape);
    if (dtype == 0) {
        e.f64_type = true;
        e.f64.resize(count);
        if (!is.read(reinterpret_cast<char*>(e.f64.data()),
                     static_cast<std::streamsize>(count * sizeof(double)))) {
            throw std::runtime_error("archive " + path.string() + ": truncated payload for '" + e.name + "'");
        }
    } else if (dtype == 1) {
        e.f64_type = false;
        e.i64.resize(count);
        if (!is.read(reinterpret_cast<char*>(e.i64.data()),
                     static_cast<std::streamsize>(count * sizeof(std::int64_t)))) {
            throw std::runtime_error("archive " + path.string() + ": truncated payload for '" + e.name + "'");
        }
    } else {
        throw std::runtime_error("archive " + path.string() + ": unknown dtype for '" + e.name + "'");
    }
    return e;
}

}  // namespace

void write_array(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_array: cannot open " + path.string());
    put_u32(os, kArrayMagic);
    put_u32(os, kVersion);
    put_u32(os, 0);  // dtype f64
    put_shape(os, t.shape());
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write_array: failed writing " + path.string());
}

Tensor read_array(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_array: cannot open " + path.string());
    if (get_u32(is, "magic") != kArrayMagic) throw std::runtime_error("read_array: bad magic in " + path.string());
    const std::uint32_t version = get_u32(is, "version");
    if (version != kVersion) {
        throw std::runtime_error("read_array: unsupported format version " + std::to_string(version) + " in " +
                                 path.string());
    }
    if (get_u32(is, "dtype") != 0) throw std::runtime_error("read_array: not a float64 array: " + path.string());
    auto shape = get_shape(is, path);
    std::vector<double> data(shape_product(shape));
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
        throw std::runtime_error("read_array: truncated payload in " + path.string());
    }
    return Tensor(std::move(shape), std::move(data));
}

ArchiveEntry ArchiveEntry::tensor(std::string name, const Tensor& t) {
    ArchiveEntry e;
    e.name = std::move(name);
    e.shape = t.shape();
    e.f64.assign(t.data(), t.data() + t.size());
    return e;
}

ArchiveEntry ArchiveEntry::ints(std::string name, std::vector<std::int64_t> v) {
    ArchiveEntry e;
    e.name = std::move(name);
    e.shape = {v.size()};
    e.i64 = std::move(v);
    e.f64_type = false;
    return e;
}

Tensor ArchiveEntry::to_tensor() const {
    if (!is_f64()) throw std::runtime_error("archive entry '" + name + "' is not float64");
    return Tensor(shape, f64);
}

void write_archive(const std::filesystem::path& path, const Archive& entries) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_archive: cannot open " + path.string());
    put_u32(os, kArchiveMagic);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const ArchiveEntry& e : entries) put_entry(os, e);
    if (!os) throw std::runtime_error("write_archive: failed writing " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_archive: cannot open " + path.string());
    if (get_u32(is, "magic") != kArchiveMagic) {
        throw std::runtime_error("read_archive: bad magic in " + path.string());
    }
    const std::uint32_t version = get_u32(is, "version");
    if (version != kVersion) {
        throw std::runtime_error("read_archive: unsupported format version " + std::to_string(version));
    }
    const std::uint32_t count = get_u32(is, "entry count");
    Archive entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) entries.push_back(get_entry(is, path));
    return entries;
}

const ArchiveEntry* archive_find(const Archive& archive, const std::string& name) {
    for (const ArchiveEntry& e : archive) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

const ArchiveEntry& archive_get(const Archive& archive, const std::string& name) {
    const ArchiveEntry* e = archive_find(archive, name);
    if (!e) throw std::runtime_error("archive: missing entry '" + name + "'");
    return *e;
}

}  // namespace ino
