// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/io/checkpoint.hpp>

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace splatcp::io {

namespace {

class Writer {
  public:
    void bytes(const char *s, std::size_t n) { buf_.insert(buf_.end(), s, s + n); }
    void u32(std::uint32_t v) {
        for (int b = 0; b < 4; ++b) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    }
    void u64(std::uint64_t v) {
        for (int b = 0; b < 8; ++b) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    }
    void f64s(const std::vector<double> &v) {
        for (double x : v) u64(std::bit_cast<std::uint64_t>(x));
    }
    std::vector<std::uint8_t> finish() {
        u32(crc32(buf_.data(), buf_.size()));
        return std::move(buf_);
    }

  private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
  public:
    Reader(const std::vector<std::uint8_t> &b, const char *what) : b_(b), what_(what) {}

    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw FormatError(std::string(what_) + ": truncated file");
    }
    std::string tag(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char *>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(b_[pos_ + b]) << (8 * b);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(b_[pos_ + b]) << (8 * b);
        pos_ += 8;
        return v;
    }
    std::vector<double> f64s(std::size_t n) {
        if (n > (b_.size() - pos_) / 8) throw FormatError(std::string(what_) + ": array lengths exceed file size");
        std::vector<double> v(n);
        for (double &x : v) x = std::bit_cast<double>(u64());
        return v;
    }
    std::size_t pos() const { return pos_; }

  private:
    const std::vector<std::uint8_t> &b_;
    const char *what_;
    std::size_t pos_ = 0;
};

void check_crc(const std::vector<std::uint8_t> &bytes, const char *what) {
    if (bytes.size() < 4) throw FormatError(std::string(what) + ": file too short");
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int b = 0; b < 4; ++b) stored |= static_cast<std::uint32_t>(bytes[body + b]) << (8 * b);
    if (crc32(bytes.data(), body) != stored) throw FormatError(std::string(what) + ": CRC mismatch");
}

std::uint32_t to_u32(std::size_t v, const char *name) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw FormatError(std::string("checkpoint: ") + name + " does not fit in 32 bits");
    }
    return static_cast<std::uint32_t>(v);
}

} // namespace

std::uint32_t crc32(const std::uint8_t *data, std::size_t n) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = ::crc32(crc, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_checkpoint(const FactorizedAvatarStore &store) {
    store.validate();
    const CPModel &m = store.model;
    Writer w;
    w.bytes("MIGS", 4);
    w.u32(kCheckpointVersion);
    w.u32(to_u32(m.n_params(), "M"));
    w.u32(to_u32(m.n_identities(), "N_i"));
    w.u32(to_u32(m.n_gaussians(), "N_g"));
    w.u32(to_u32(m.rank, "R"));
    w.u32(static_cast<std::uint32_t>(store.layout.id));
    w.u32(store.has_personalization() ? 1u : 0u);
    w.f64s(m.u_params.data);
    w.f64s(m.u_identity.data);
    w.f64s(m.u_gaussian.data);
    for (const Mat &r : store.personalization) w.f64s(r.data);
    return w.finish();
}

FactorizedAvatarStore decode_checkpoint(const std::vector<std::uint8_t> &bytes) {
    check_crc(bytes, "checkpoint");
    Reader r(bytes, "checkpoint");
    if (r.tag(4) != "MIGS") throw FormatError("checkpoint: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::size_t M = r.u32(), Ni = r.u32(), Ng = r.u32(), R = r.u32();
    const std::uint32_t layout_id = r.u32();
    const std::uint32_t flags = r.u32();
    if (layout_id > 2) throw FormatError("checkpoint: unknown layout id " + std::to_string(layout_id));
    if (flags & ~1u) throw FormatError("checkpoint: unknown flag bits");
    if (M == 0 || Ni == 0 || Ng == 0 || R == 0) throw FormatError("checkpoint: zero dimension");

    FactorizedAvatarStore store;
    store.layout = layout_for(static_cast<LayoutId>(layout_id), M);
    if (store.layout.total != M) {
        throw FormatError("checkpoint: M = " + std::to_string(M) + " does not match the layout");
    }
    store.model.rank = R;
    store.model.u_params = Mat(M, R);
    store.model.u_params.data = r.f64s(M * R);
    store.model.u_identity = Mat(Ni, R);
    store.model.u_identity.data = r.f64s(Ni * R);
    store.model.u_gaussian = Mat(Ng, R);
    store.model.u_gaussian.data = r.f64s(Ng * R);
    if (flags & 1u) {
        const std::size_t W = store.layout.residual_block().length;
        for (std::size_t i = 0; i < Ni; ++i) {
            Mat res(Ng, W);
            res.data = r.f64s(Ng * W);
            store.personalization.push_back(std::move(res));
        }
    }
    if (r.pos() + 4 != bytes.size()) throw FormatError("checkpoint: dims inconsistent with file length");
    try {
        store.validate();
    } catch (const std::invalid_argument &e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return store;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

void save_checkpoint(const FactorizedAvatarStore &store, const std::filesystem::path &path) {
    write_file(path, encode_checkpoint(store));
}

FactorizedAvatarStore load_checkpoint(const std::filesystem::path &path) {
    return decode_checkpoint(read_file(path));
}

std::vector<std::uint8_t> encode_tensor(const Tensor3 &t) {
    Writer w;
    w.bytes("TNS3", 4);
    w.u32(kTensorVersion);
    for (std::size_t d : t.dims) w.u64(d);
    w.f64s(t.data);
    return w.finish();
}

Tensor3 decode_tensor(const std::vector<std::uint8_t> &bytes) {
    check_crc(bytes, "tensor");
    Reader r(bytes, "tensor");
    if (r.tag(4) != "TNS3") throw FormatError("tensor: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kTensorVersion) throw FormatError("tensor: unsupported version " + std::to_string(version));
    Dims3 d{};
    for (auto &x : d) x = r.u64();
    if (d[0] == 0 || d[1] == 0 || d[2] == 0) throw FormatError("tensor: zero dimension");
    const std::size_t payload = bytes.size() - r.pos() - 4;
    const std::size_t count = payload / 8;
    if (payload % 8 != 0 || d[0] > count || d[1] > count || d[2] > count || count / d[0] / d[1] != d[2] ||
        count != d[0] * d[1] * d[2]) {
        throw FormatError("tensor: dims inconsistent with file length");
    }
    Tensor3 t(d, r.f64s(d[0] * d[1] * d[2]));
    if (!all_finite(t.data)) throw FormatError("tensor: non-finite entries");
    return t;
}

void save_tensor(const Tensor3 &t, const std::filesystem::path &path) { write_file(path, encode_tensor(t)); }

Tensor3 load_tensor(const std::filesystem::path &path) { return decode_tensor(read_file(path)); }

} // namespace splatcp::io
