#include "finflow/core/snapshot.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace finflow {

namespace {
constexpr char kMagic[8] = {'F', 'F', 'S', 'N', 'A', 'P', '1', '\n'};

void put_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
}
std::uint32_t get_u32(std::ifstream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}
} // namespace

void save_snapshot(const Tensor& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "cannot open snapshot file for write: " + path);
    f.write(kMagic, 8);
    f.put(0); // dtype f64
    put_u32(f, std::uint32_t(t.c()));
    put_u32(f, std::uint32_t(t.h()));
    put_u32(f, std::uint32_t(t.w()));
    f.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.size() * sizeof(double)));
    check(f.good(), "snapshot write failed: " + path);
}

Tensor load_snapshot(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "cannot open snapshot file: " + path);
    char magic[8];
    f.read(magic, 8);
    check(f.good() && std::memcmp(magic, kMagic, 8) == 0, "bad snapshot magic: " + path);
    int dtype = f.get();
    check(dtype == 0, "unsupported snapshot dtype in " + path);
    Shape s;
    s.c = int(get_u32(f));
    s.h = int(get_u32(f));
    s.w = int(get_u32(f));
    Tensor t = Tensor::uninit(s);
    f.read(reinterpret_cast<char*>(t.raw()), std::streamsize(s.count() * sizeof(double)));
    check(f.good(), "snapshot payload truncated: " + path);
    return t;
}

void save_snapshot_csv(const Tensor& t, const std::string& path) {
    std::ofstream f(path);
    check(f.good(), "cannot open snapshot csv for write: " + path);
    f << "c,j,i,value\n";
    f.precision(17);
    for (int c = 0; c < t.c(); ++c)
        for (int j = 0; j < t.h(); ++j)
            for (int i = 0; i < t.w(); ++i)
                f << c << "," << j << "," << i << "," << t.at(c, j, i) << "\n";
}

} // namespace finflow
