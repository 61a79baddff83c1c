#include "hsclab/field_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "hsclab/error.hpp"

namespace hsclab::io {

namespace {

template <typename T>
void put(std::ostream& out, T value) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    unsigned char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

template <typename T>
T get(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("truncated field dump");
    std::uint64_t bits;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
}

std::size_t entries_per_point(int n, int rank) {
    std::size_t e = 1;
    for (int r = 0; r < rank; ++r) e *= static_cast<std::size_t>(n);
    return rank == 0 ? 1 : 2 * e;
}

}  // namespace

void write_dump(const std::filesystem::path& path, const ComplexGrid& grid, int rank,
                std::span<const double> data) {
    if (data.size() != grid.point_count() * entries_per_point(grid.n(), rank))
        throw DomainError("dump payload size does not match grid and rank");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof kMagic);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(grid.n()));
    for (int s : grid.sizes()) put<std::uint64_t>(out, static_cast<std::uint64_t>(s));
    for (double l : grid.periods()) put<double>(out, l);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(rank));
    for (double v : data) put<double>(out, v);
    if (!out) throw IoError("write failed for " + path.string());

    nlohmann::json meta = {{"magic", std::string(kMagic, sizeof kMagic)},
                           {"n", grid.n()},
                           {"sizes", grid.sizes()},
                           {"periods", grid.periods()},
                           {"rank", rank},
                           {"point_count", grid.point_count()},
                           {"encoding", "little-endian f64"}};
    std::ofstream side(path.string() + ".json");
    side << meta.dump(2) << "\n";
}

FieldDump read_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError(path.string() + " is not an HSCLAB01 field dump");
    const auto n = static_cast<int>(get<std::uint64_t>(in));
    if (n < 1 || n > 16) throw IoError("implausible complex dimension in dump");
    std::vector<int> sizes(2 * n);
    for (auto& s : sizes) s = static_cast<int>(get<std::uint64_t>(in));
    std::vector<double> periods(2 * n);
    for (auto& l : periods) l = get<double>(in);
    const auto rank = static_cast<int>(get<std::uint64_t>(in));
    ComplexGrid grid(n, sizes, periods);
    std::vector<double> data(grid.point_count() * entries_per_point(n, rank));
    for (auto& v : data) v = get<double>(in);
    return {std::move(grid), rank, std::move(data)};
}

void save_scalar(const std::filesystem::path& path, const ScalarField& field) {
    write_dump(path, field.grid(), 0, field.real());
}

ScalarField load_scalar(const std::filesystem::path& path) {
    auto dump = read_dump(path);
    if (dump.rank != 0) throw IoError("expected a rank-0 dump");
    return ScalarField::from_real(dump.grid, dump.data);
}

void save_metric(const std::filesystem::path& path, const HermitianField& g) {
    const int n = g.n();
    std::vector<double> data;
    data.reserve(g.point_count() * 2 * n * n);
    for (std::size_t p = 0; p < g.point_count(); ++p)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const cplx v = g.component(i, j)[p];
                data.push_back(v.real());
                data.push_back(v.imag());
            }
    write_dump(path, g.grid(), 2, data);
}

HermitianMetricField load_metric(const std::filesystem::path& path) {
    auto dump = read_dump(path);
    if (dump.rank != 2) throw IoError("expected a rank-2 metric dump");
    const int n = dump.grid.n();
    HermitianField g(dump.grid, n);
    std::size_t q = 0;
    for (std::size_t p = 0; p < dump.grid.point_count(); ++p)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j, q += 2)
                g.component(i, j)[p] = cplx(dump.data[q], dump.data[q + 1]);
    return HermitianMetricField::validated(std::move(g));
}

}  // namespace hsclab::io
