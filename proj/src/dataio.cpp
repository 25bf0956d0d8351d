#include "bundlecodec/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bundlecodec::io {

void Writer::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
}

void Writer::magic(const char m[4]) {
    buf_.insert(buf_.end(), reinterpret_cast<const std::uint8_t*>(m),
                reinterpret_cast<const std::uint8_t*>(m) + 4);
}

void Writer::f64_array(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f64(p[i]);
}

void Writer::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("dataio: cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!f) throw std::runtime_error("dataio: short write to " + path);
}

Reader Reader::from_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("dataio: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return from_bytes(std::move(bytes), path);
}

Reader Reader::from_bytes(std::vector<std::uint8_t> bytes, std::string context) {
    Reader r;
    r.data_ = std::move(bytes);
    r.context_ = std::move(context);
    return r;
}

void Reader::need(std::size_t n) const {
    if (pos_ + n > data_.size())
        throw std::runtime_error("dataio: " + context_ + " truncated: need " + std::to_string(n) +
                                 " bytes at offset " + std::to_string(pos_) + ", only " +
                                 std::to_string(data_.size() - pos_) + " available");
}

std::uint8_t Reader::u8() {
    need(1);
    return data_[pos_++];
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t Reader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::str(std::uint32_t max_len) {
    const std::uint32_t len = u32();
    if (len > max_len)
        throw std::runtime_error("dataio: " + context_ + ": string length " + std::to_string(len) +
                                 " exceeds limit " + std::to_string(max_len));
    need(len);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
    pos_ += len;
    return s;
}

void Reader::expect_magic(const char m[4], const char* format_name) {
    need(4);
    if (std::memcmp(data_.data() + pos_, m, 4) != 0)
        throw std::runtime_error("dataio: " + context_ + " is not a " + format_name + " file");
    pos_ += 4;
}

void Reader::f64_array(double* p, std::size_t n) {
    need(8 * n);
    for (std::size_t i = 0; i < n; ++i) p[i] = f64();
}

// ---------------------------------------------------------------------------
// BND1

namespace {
constexpr std::uint32_t kBndVersion = 1;
}

void write_bnd(const curves::Dataset& ds, const std::string& path) {
    for (const curves::Bundle& b : ds.bundles) {
        if (b.size() != static_cast<int>(ds.group_size))
            throw std::invalid_argument("write_bnd: bundle '" + b.provenance + "' has " +
                                        std::to_string(b.size()) + " streamlines, expected " +
                                        std::to_string(ds.group_size));
        if (b.points() != static_cast<int>(ds.point_count))
            throw std::invalid_argument("write_bnd: bundle '" + b.provenance + "' has " +
                                        std::to_string(b.points()) + " points, expected " +
                                        std::to_string(ds.point_count));
    }
    Writer w;
    w.magic("BND1");
    w.u32(kBndVersion);
    w.u32(static_cast<std::uint32_t>(ds.bundles.size()));
    w.u32(ds.group_size);
    w.u32(ds.point_count);
    w.u32(static_cast<std::uint32_t>(ds.label_names.size()));
    for (const auto& [id, name] : ds.label_names) {
        w.u32(id);
        w.str(name);
    }
    for (const curves::Bundle& b : ds.bundles) {
        w.u32(b.label);
        w.str(b.provenance);
        for (const curves::Streamline& s : b.lines)
            for (const curves::Point& p : s.pts) {
                w.f64(p[0]);
                w.f64(p[1]);
                w.f64(p[2]);
            }
    }
    w.save(path);
}

curves::Dataset read_bnd(const std::string& path) {
    Reader r = Reader::from_file(path);
    r.expect_magic("BND1", "BND1");
    const std::uint32_t version = r.u32();
    if (version != kBndVersion)
        throw std::runtime_error("dataio: " + path + ": unsupported BND1 version " +
                                 std::to_string(version));
    curves::Dataset ds;
    const std::uint32_t count = r.u32();
    ds.group_size = r.u32();
    ds.point_count = r.u32();
    if (ds.group_size == 0 || ds.point_count == 0)
        throw std::runtime_error("dataio: " + path + ": zero group size or point count");
    const std::uint32_t labels = r.u32();
    for (std::uint32_t i = 0; i < labels; ++i) {
        const std::uint32_t id = r.u32();
        ds.label_names[id] = r.str();
    }
    ds.bundles.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        curves::Bundle b;
        b.label = r.u32();
        b.provenance = r.str();
        b.lines.resize(ds.group_size);
        for (curves::Streamline& s : b.lines) {
            s.pts.resize(ds.point_count);
            for (curves::Point& p : s.pts) {
                p[0] = r.f64();
                p[1] = r.f64();
                p[2] = r.f64();
            }
        }
        ds.bundles.push_back(std::move(b));
    }
    if (!r.at_end())
        throw std::runtime_error("dataio: " + path + ": " + std::to_string(r.remaining()) +
                                 " trailing bytes after declared payload");
    return ds;
}

// ---------------------------------------------------------------------------
// classic tractography layout (read-only)

namespace {

std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

float lef32(const std::uint8_t* p) { return std::bit_cast<float>(le32(p)); }

} // namespace

std::vector<std::pair<curves::Streamline, std::string>> import_trackvis(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("dataio: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());

    if (bytes.size() < 1000)
        throw std::runtime_error("dataio: " + path + ": header needs 1000 bytes, only " +
                                 std::to_string(bytes.size()) + " available");
    if (std::memcmp(bytes.data(), "TRACK", 5) != 0 || bytes[5] != 0)
        throw std::runtime_error("dataio: " + path + ": bad magic, not a tractography file");
    const std::uint16_t n_scalars = le16(bytes.data() + 36);
    const std::uint16_t n_properties = le16(bytes.data() + 238);
    if (n_scalars != 0 || n_properties != 0)
        throw std::runtime_error("dataio: " + path + ": unsupported format, n_scalars=" +
                                 std::to_string(n_scalars) + " n_properties=" +
                                 std::to_string(n_properties) + " (only 0/0 handled)");
    const std::uint32_t n_count = le32(bytes.data() + 988);
    const std::uint32_t hdr_size = le32(bytes.data() + 996);
    if (hdr_size != 1000)
        throw std::runtime_error("dataio: " + path + ": header size field " +
                                 std::to_string(hdr_size) + " != 1000");

    std::vector<std::pair<curves::Streamline, std::string>> out;
    std::size_t pos = 1000;
    auto need = [&](std::size_t n, const char* what) {
        if (pos + n > bytes.size())
            throw std::runtime_error("dataio: " + path + ": premature EOF reading " + what +
                                     ": need " + std::to_string(n) + " bytes at offset " +
                                     std::to_string(pos) + ", only " +
                                     std::to_string(bytes.size() - pos) + " available");
    };
    // n_count == 0 means the count is unknown; read until EOF
    while (n_count ? out.size() < n_count : pos < bytes.size()) {
        need(4, "track point count");
        const std::uint32_t n = le32(bytes.data() + pos);
        pos += 4;
        if (n == 0 || n > (1u << 24))
            throw std::runtime_error("dataio: " + path + ": implausible track point count " +
                                     std::to_string(n));
        need(static_cast<std::size_t>(n) * 12, "track coordinates");
        curves::Streamline s;
        s.pts.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            s.pts[i][0] = static_cast<double>(lef32(bytes.data() + pos));
            s.pts[i][1] = static_cast<double>(lef32(bytes.data() + pos + 4));
            s.pts[i][2] = static_cast<double>(lef32(bytes.data() + pos + 8));
            pos += 12;
        }
        out.emplace_back(std::move(s), path);
    }
    if (n_count && pos != bytes.size())
        throw std::runtime_error("dataio: " + path + ": " + std::to_string(bytes.size() - pos) +
                                 " trailing bytes after " + std::to_string(n_count) + " tracks");
    return out;
}

// ---------------------------------------------------------------------------
// balance and split

Split balance_and_split(const std::vector<curves::Bundle>& bundles, const SplitSpec& spec) {
    if (bundles.empty()) throw std::invalid_argument("balance_and_split: no bundles");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw std::invalid_argument("balance_and_split: train fraction must be in (0,1)");

    // order-independence: sort indices by (class, provenance, index)
    std::vector<std::size_t> order(bundles.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (bundles[a].label != bundles[b].label) return bundles[a].label < bundles[b].label;
        if (bundles[a].provenance != bundles[b].provenance)
            return bundles[a].provenance < bundles[b].provenance;
        return a < b;
    });

    std::map<std::uint32_t, std::vector<std::size_t>> by_class;
    for (std::size_t i : order) by_class[bundles[i].label].push_back(i);

    std::size_t min_count = bundles.size();
    for (const auto& [label, idx] : by_class) min_count = std::min(min_count, idx.size());
    if (spec.balance && min_count < 2)
        throw std::invalid_argument("balance_and_split: class " +
                                    std::to_string(by_class.begin()->first) +
                                    " leaves fewer than 2 bundles after balancing");

    diff::Rng master(spec.seed);
    Split split;
    for (auto& [label, idx] : by_class) {
        if (idx.size() < 2)
            throw std::invalid_argument("balance_and_split: class " + std::to_string(label) +
                                        " has " + std::to_string(idx.size()) +
                                        " bundles, cannot stratify");
        diff::Rng rng = master.fork(label);
        // one shuffle serves both the without-replacement down-sample (keep
        // the first min_count) and the split order
        for (std::size_t i = idx.size() - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.below(i + 1)]);
        const std::size_t keep = spec.balance ? min_count : idx.size();
        std::size_t train_n = static_cast<std::size_t>(spec.train_fraction * keep);
        train_n = std::clamp<std::size_t>(train_n, 1, keep - 1);
        for (std::size_t i = 0; i < keep; ++i) {
            (i < train_n ? split.train : split.val).push_back(bundles[idx[i]]);
        }
    }
    return split;
}

// ---------------------------------------------------------------------------
// BNL1

namespace {
constexpr std::uint32_t kBnlVersion = 1;
}

void write_latents(const LatentFile& lf, const std::string& path) {
    for (const LatentRecord& r : lf.records) {
        if (r.dim != lf.dim || r.group_size != lf.group_size)
            throw std::invalid_argument("write_latents: record '" + r.provenance +
                                        "' dimensions disagree with file header");
        if (r.z.size() != static_cast<std::size_t>(r.group_size) * r.dim)
            throw std::invalid_argument("write_latents: record '" + r.provenance +
                                        "' latent buffer size mismatch");
        if (r.has_quantized && r.s.size() != r.z.size())
            throw std::invalid_argument("write_latents: record '" + r.provenance +
                                        "' quantized buffer size mismatch");
    }
    Writer w;
    w.magic("BNL1");
    w.u32(kBnlVersion);
    w.str(lf.model_tag);
    w.u32(lf.group_size);
    w.u32(lf.dim);
    w.u32(static_cast<std::uint32_t>(lf.records.size()));
    for (const LatentRecord& r : lf.records) {
        w.u32(r.label);
        w.str(r.provenance);
        w.f64_array(r.z.data(), r.z.size());
        w.u8(r.has_quantized ? 1 : 0);
        if (r.has_quantized) w.f64_array(r.s.data(), r.s.size());
    }
    w.save(path);
}

LatentFile read_latents(const std::string& path) {
    Reader r = Reader::from_file(path);
    r.expect_magic("BNL1", "BNL1");
    const std::uint32_t version = r.u32();
    if (version != kBnlVersion)
        throw std::runtime_error("dataio: " + path + ": unsupported BNL1 version " +
                                 std::to_string(version));
    LatentFile lf;
    lf.model_tag = r.str();
    lf.group_size = r.u32();
    lf.dim = r.u32();
    const std::uint32_t count = r.u32();
    if (lf.group_size == 0 || lf.dim == 0 || lf.group_size > (1u << 20) || lf.dim > (1u << 20))
        throw std::runtime_error("dataio: " + path + ": implausible BNL1 dimensions");
    for (std::uint32_t i = 0; i < count; ++i) {
        LatentRecord rec;
        rec.label = r.u32();
        rec.provenance = r.str();
        rec.group_size = lf.group_size;
        rec.dim = lf.dim;
        rec.z.resize(static_cast<std::size_t>(lf.group_size) * lf.dim);
        r.f64_array(rec.z.data(), rec.z.size());
        rec.has_quantized = r.u8() != 0;
        if (rec.has_quantized) {
            rec.s.resize(rec.z.size());
            r.f64_array(rec.s.data(), rec.s.size());
        }
        lf.records.push_back(std::move(rec));
    }
    if (!r.at_end())
        throw std::runtime_error("dataio: " + path + ": " + std::to_string(r.remaining()) +
                                 " trailing bytes after declared records");
    return lf;
}

} // namespace bundlecodec::io
