#pragma once

#include "bundlecodec/curves.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace bundlecodec::io {

// Little-endian buffer writer shared by every binary format.
class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void str(const std::string& s); // u32 length + bytes
    void magic(const char m[4]);
    void f64_array(const double* p, std::size_t n);

    const std::vector<std::uint8_t>& buffer() const { return buf_; }
    void save(const std::string& path) const;

private:
    std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian reader; every under-run reports expected vs
// actual byte counts, so truncated or fuzzed inputs fail cleanly.
class Reader {
public:
    static Reader from_file(const std::string& path);
    static Reader from_bytes(std::vector<std::uint8_t> bytes, std::string context = "<memory>");

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string str(std::uint32_t max_len = 1u << 20);
    void expect_magic(const char m[4], const char* format_name);
    void f64_array(double* p, std::size_t n);
    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const;
    std::vector<std::uint8_t> data_;
    std::size_t pos_ = 0;
    std::string context_;
};

// ---- BND1: native bundle dataset -----------------------------------------

void write_bnd(const curves::Dataset& ds, const std::string& path);
curves::Dataset read_bnd(const std::string& path);

// ---- classic tractography import (read-only subset) ----------------------

// 1000-byte header, magic "TRACK", n_scalars == 0 and n_properties == 0
// required; per track an int32 point count then n x 3 float32 coordinates,
// widened to float64. A zero count field means "read until EOF".
std::vector<std::pair<curves::Streamline, std::string>> import_trackvis(const std::string& path);

// ---- balancing and splitting ----------------------------------------------

struct SplitSpec {
    double train_fraction = 0.9;
    std::uint64_t seed = 0;
    bool balance = true;
};

struct Split {
    std::vector<curves::Bundle> train, val;
};

// Down-samples every class to the minimum class count (seeded, without
// replacement), then a seeded per-class shuffle and stratified split, so both
// splits contain every class. Input order does not matter for a fixed seed:
// bundles are sorted by (class, provenance, original index) first.
Split balance_and_split(const std::vector<curves::Bundle>& bundles, const SplitSpec& spec);

// ---- BNL1: latent records ---------------------------------------------------

struct LatentRecord {
    std::uint32_t label = 0;
    std::string provenance;
    std::uint32_t group_size = 0; // S
    std::uint32_t dim = 0;        // d
    std::vector<double> z;        // S x d
    bool has_quantized = false;
    std::vector<double> s; // S x d when present
};

struct LatentFile {
    std::string model_tag;
    std::uint32_t group_size = 0;
    std::uint32_t dim = 0;
    std::vector<LatentRecord> records;
};

void write_latents(const LatentFile& lf, const std::string& path);
LatentFile read_latents(const std::string& path);

} // namespace bundlecodec::io
