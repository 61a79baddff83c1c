#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "hsclab/grid.hpp"
#include "hsclab/metric.hpp"

namespace hsclab::io {

/// Binary field dump:
///
///   "HSCLAB01" | n:u64 | sizes:u64[2n] | periods:f64[2n] | rank:u64 | data
///
/// All numbers little-endian. Rank 0 stores one real f64 per point; rank r > 0
/// stores n^r complex entries per point as (re, im) pairs, points in grid
/// order and tensor indices row-major. A JSON sidecar `<path>.json` repeats the
/// header fields.
inline constexpr char kMagic[8] = {'H', 'S', 'C', 'L', 'A', 'B', '0', '1'};

struct FieldDump {
    ComplexGrid grid;
    int rank;
    std::vector<double> data;
};

void write_dump(const std::filesystem::path& path, const ComplexGrid& grid, int rank,
                std::span<const double> data);
FieldDump read_dump(const std::filesystem::path& path);

void save_scalar(const std::filesystem::path& path, const ScalarField& field);
ScalarField load_scalar(const std::filesystem::path& path);

void save_metric(const std::filesystem::path& path, const HermitianField& g);
/// Loads and validates a metric dump.
HermitianMetricField load_metric(const std::filesystem::path& path);

}  // namespace hsclab::io
