#include "tucksum/serialization.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "tensor fixtures are little-endian; big-endian hosts need byte swapping");

namespace tucksum {

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) {
        throw std::runtime_error("load_tensor: truncated header");
    }
    return v;
}

} // namespace

void save_tensor(std::ostream& os, const DenseTensor& t) {
    write_u64(os, static_cast<std::uint64_t>(t.order()));
    for (Index n : t.shape()) {
        write_u64(os, static_cast<std::uint64_t>(n));
    }
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!os) {
        throw std::runtime_error("save_tensor: write failed");
    }
}

DenseTensor load_tensor(std::istream& is) {
    const std::uint64_t order = read_u64(is);
    if (order == 0 || order > 32) {
        throw std::runtime_error("load_tensor: implausible tensor order");
    }
    std::vector<Index> shape(order);
    Index count = 1;
    for (auto& n : shape) {
        n = static_cast<Index>(read_u64(is));
        if (n < 1) {
            throw std::runtime_error("load_tensor: nonpositive dimension");
        }
        count *= n;
    }
    Vector data(count);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) {
        throw std::runtime_error("load_tensor: truncated payload");
    }
    return DenseTensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const DenseTensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("save_tensor: cannot open " + path);
    }
    save_tensor(os, t);
}

DenseTensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("load_tensor: cannot open " + path);
    }
    return load_tensor(is);
}

} // namespace tucksum
