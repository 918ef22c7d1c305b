// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/io/checkpoint.hpp>
#include <splatcp/io/netpbm.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace splatcp::io {

namespace {

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::vector<std::uint8_t> encode(const char *magic, int w, int h, const std::vector<double> &values) {
    const std::string header = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + values.size());
    for (double v : values) out.push_back(quantize(v));
    return out;
}

struct Parsed {
    int width = 0;
    int height = 0;
    std::vector<double> values;
};

Parsed decode(const std::vector<std::uint8_t> &b, const char *magic, int channels) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < b.size()) {
            if (b[pos] == '#') {
                while (pos < b.size() && b[pos] != '\n') ++pos;
            } else if (std::isspace(b[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&]() -> long {
        skip_space();
        long v = 0;
        std::size_t start = pos;
        while (pos < b.size() && std::isdigit(b[pos]) && pos - start < 9) v = v * 10 + (b[pos++] - '0');
        if (pos == start) throw FormatError(std::string(magic) + ": malformed header");
        return v;
    };
    if (b.size() < 2 || b[0] != magic[0] || b[1] != magic[1]) {
        throw FormatError(std::string("expected a ") + magic + " file");
    }
    pos = 2;
    const long w = number(), h = number(), maxval = number();
    if (w <= 0 || h <= 0 || maxval != 255) throw FormatError(std::string(magic) + ": need positive size and maxval 255");
    if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError(std::string(magic) + ": malformed header");
    ++pos;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    if (b.size() - pos != n) throw FormatError(std::string(magic) + ": pixel data length mismatch");
    Parsed p{static_cast<int>(w), static_cast<int>(h), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) p.values[i] = b[pos + i] / 255.0;
    return p;
}

} // namespace

std::vector<std::uint8_t> encode_ppm(const Image &img) { return encode("P6", img.width, img.height, img.rgb); }

Image decode_ppm(const std::vector<std::uint8_t> &bytes) {
    Parsed p = decode(bytes, "P6", 3);
    Image img(p.width, p.height);
    img.rgb = std::move(p.values);
    return img;
}

std::vector<std::uint8_t> encode_pgm(const AlphaMask &mask) {
    return encode("P5", mask.width, mask.height, mask.alpha);
}

AlphaMask decode_pgm(const std::vector<std::uint8_t> &bytes) {
    Parsed p = decode(bytes, "P5", 1);
    AlphaMask m(p.width, p.height);
    m.alpha = std::move(p.values);
    return m;
}

void write_ppm(const Image &img, const std::filesystem::path &path) { write_file(path, encode_ppm(img)); }
Image read_ppm(const std::filesystem::path &path) { return decode_ppm(read_file(path)); }
void write_pgm(const AlphaMask &mask, const std::filesystem::path &path) { write_file(path, encode_pgm(mask)); }
AlphaMask read_pgm(const std::filesystem::path &path) { return decode_pgm(read_file(path)); }

} // namespace splatcp::io
