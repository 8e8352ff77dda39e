#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amlpf/bench.hpp"
#include "amlpf/filter.hpp"
#include "amlpf/multilevel.hpp"

namespace amlpf {

inline constexpr const char* kVersion = "0.1.0";

// Provenance stamped on every output file. CSV files carry it as leading
// '#' lines; JSON files as a "manifest" object.
struct Manifest {
    std::string config_json;  // resolved configuration, compact
    std::uint64_t seed = 0;
    std::string version = kVersion;

    std::string config_hash() const;  // FNV-1a 64 of config_json, hex
    std::string csv_header() const;
};

// Doubles are written with 17 significant digits for exact round-trip.
std::string format_double(double v);

std::string filter_output_csv(const FilterOutput& out, const Manifest& manifest);
std::string filter_output_json(const FilterOutput& out, const Manifest& manifest);

std::string coupled_output_csv(const CoupledFilterOutput& out, const Manifest& manifest);
std::string coupled_output_json(const CoupledFilterOutput& out, const Manifest& manifest);

// Combined multilevel estimates per (k, phi).
std::string ml_output_csv(const MLOutput& out, const Manifest& manifest);
// Per-level blocks plus the combined block.
std::string ml_output_json(const MLOutput& out, const Manifest& manifest);

std::string bench_records_csv(const std::vector<BenchRecord>& records, const Manifest& manifest);
std::vector<BenchRecord> parse_bench_records_csv(const std::string& text);

// Fits every (model, method, target) group with at least three records.
std::string rates_json(const std::vector<BenchRecord>& records, const Manifest& manifest);

// Columns k, y_1..y_q and, when present, x_1..x_d.
std::string dataset_csv(const Dataset& data, const Manifest& manifest);
Dataset parse_dataset_csv(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace amlpf
