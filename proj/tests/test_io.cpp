// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include "harness.hpp"
#include "test_util.hpp"

#include <splatcp/io/checkpoint.hpp>
#include <splatcp/io/config.hpp>
#include <splatcp/io/dataset_io.hpp>
#include <splatcp/io/metrics_log.hpp>
#include <splatcp/io/netpbm.hpp>

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

using namespace splatcp;
using namespace splatcp::io;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string &name) {
    const fs::path d = fs::temp_directory_path() / ("splatcp_io_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

FactorizedAvatarStore random_store(bool personalized, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    FactorizedAvatarStore s;
    s.layout = layout_2d();
    s.model = CPModel(9, 3, 7, 4);
    s.model.u_params = splatcp::testing::random_mat(9, 4, rng);
    s.model.u_identity = splatcp::testing::random_mat(3, 4, rng);
    s.model.u_gaussian = splatcp::testing::random_mat(7, 4, rng);
    if (personalized) {
        s.enable_personalization();
        for (Mat &r : s.personalization) r = splatcp::testing::random_mat(r.rows, r.cols, rng);
    }
    return s;
}

std::string bytes_to_string(const std::vector<std::uint8_t> &b) { return std::string(b.begin(), b.end()); }

} // namespace

TEST(Crc32, KnownCheckValue) {
    const char *s = "123456789";
    EXPECT_EQ(crc32(reinterpret_cast<const std::uint8_t *>(s), 9), 0xCBF43926u);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
    for (bool pers : {false, true}) {
        const FactorizedAvatarStore s = random_store(pers, 1);
        const auto bytes = encode_checkpoint(s);
        const FactorizedAvatarStore back = decode_checkpoint(bytes);
        EXPECT_TRUE(back == s);
        EXPECT_EQ(encode_checkpoint(back), bytes);
    }
}

TEST(Checkpoint, HeaderLayout) {
    const auto b = encode_checkpoint(random_store(false, 2));
    ASSERT_GE(b.size(), 32u);
    EXPECT_EQ(std::memcmp(b.data(), "MIGS", 4), 0);
    auto u32 = [&](std::size_t off) {
        return std::uint32_t(b[off]) | std::uint32_t(b[off + 1]) << 8 | std::uint32_t(b[off + 2]) << 16 |
               std::uint32_t(b[off + 3]) << 24;
    };
    EXPECT_EQ(u32(4), kCheckpointVersion);
    EXPECT_EQ(u32(8), 9u);
    EXPECT_EQ(u32(12), 3u);
    EXPECT_EQ(u32(16), 7u);
    EXPECT_EQ(u32(20), 4u);
    EXPECT_EQ(u32(24), 0u);
    EXPECT_EQ(u32(28), 0u);
    EXPECT_EQ(b.size(), 32u + 8u * (9 + 3 + 7) * 4 + 4u);
    EXPECT_EQ(u32(b.size() - 4), crc32(b.data(), b.size() - 4));
}

TEST(Checkpoint, DetectsCorruptionAndTruncation) {
    auto b = encode_checkpoint(random_store(true, 3));
    auto flipped = b;
    flipped[40] ^= 0x01;
    EXPECT_THROW(decode_checkpoint(flipped), FormatError);
    EXPECT_THROW(decode_checkpoint(std::vector<std::uint8_t>(b.begin(), b.end() - 9)), FormatError);
    auto magic = b;
    magic[0] = 'X';
    EXPECT_THROW(decode_checkpoint(magic), FormatError);
    EXPECT_THROW(decode_checkpoint({}), FormatError);
}

TEST(Checkpoint, FileRoundTrip) {
    const fs::path d = scratch_dir("ckpt");
    const FactorizedAvatarStore s = random_store(true, 4);
    save_checkpoint(s, d / "a.ckpt");
    EXPECT_TRUE(load_checkpoint(d / "a.ckpt") == s);
    EXPECT_EQ(read_file(d / "a.ckpt"), encode_checkpoint(s));
    EXPECT_THROW(load_checkpoint(d / "missing.ckpt"), std::exception);
}

TEST(TensorFile, RoundTripAndCrc) {
    std::mt19937_64 rng(5);
    const Tensor3 t = splatcp::testing::random_tensor({3, 4, 5}, rng);
    const auto b = encode_tensor(t);
    EXPECT_EQ(std::memcmp(b.data(), "TNS3", 4), 0);
    EXPECT_EQ(b.size(), 4u + 4u + 24u + 8u * 60u + 4u);
    EXPECT_TRUE(decode_tensor(b) == t);
    auto bad = b;
    bad[50] ^= 0x80;
    EXPECT_THROW(decode_tensor(bad), FormatError);
}

TEST(Netpbm, PpmExactBytes) {
    Image img(2, 1);
    img.rgb = {0.0, 1.0, 0.5, -3.0, 2.0, 0.2};
    const std::string expect = std::string("P6\n2 1\n255\n") + char(0) + char(255) + char(128) + char(0) + char(255) +
                               char(51);
    EXPECT_EQ(bytes_to_string(encode_ppm(img)), expect);
}

TEST(Netpbm, RoundingRuleAtHalfSteps) {
    AlphaMask m(4, 1);
    // 0.5/255 rounds up, just below it rounds down.
    m.alpha = {0.5 / 255.0, 0.49 / 255.0, 254.5 / 255.0, 1.0 - 1e-9};
    const auto b = encode_pgm(m);
    const std::string header = "P5\n4 1\n255\n";
    ASSERT_EQ(b.size(), header.size() + 4);
    EXPECT_EQ(b[header.size() + 0], 1);
    EXPECT_EQ(b[header.size() + 1], 0);
    EXPECT_EQ(b[header.size() + 2], 255);
    EXPECT_EQ(b[header.size() + 3], 255);
}

TEST(Netpbm, DecodeRoundTripAndRejectsGarbage) {
    Image img(3, 2);
    for (std::size_t k = 0; k < img.rgb.size(); ++k) img.rgb[k] = static_cast<double>(k * 13) / 255.0;
    const Image back = decode_ppm(encode_ppm(img));
    EXPECT_EQ(encode_ppm(back), encode_ppm(img));
    EXPECT_EQ(back.width, 3);
    EXPECT_EQ(back.height, 2);
    const std::string commented = "P5\n# comment\n1 1\n255\n\x07";
    EXPECT_EQ(decode_pgm(std::vector<std::uint8_t>(commented.begin(), commented.end())).alpha[0], 7.0 / 255.0);
    const std::string bad = "P3\n1 1\n255\n0 0 0";
    EXPECT_THROW(decode_ppm(std::vector<std::uint8_t>(bad.begin(), bad.end())), FormatError);
    const std::string shortdata = "P6\n2 2\n255\nabc";
    EXPECT_THROW(decode_ppm(std::vector<std::uint8_t>(shortdata.begin(), shortdata.end())), FormatError);
}

TEST(Config, ParsesSectionsAndComments) {
    const RunConfig c = parse_config("# header\n[run]\nseed = 7   # trailing\nmode = per_identity:2\n"
                                     "[data]\nidentities = 3\ngaussians = 10\n"
                                     "[model]\nrank = 5\n[train]\niterations = 40\nlr_scale = 0.25\n"
                                     "[loss]\nisocov = 3.5\n");
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.train.mode, MaskMode::PerIdentity);
    EXPECT_EQ(c.train.mode_identity, 2u);
    EXPECT_EQ(c.data.identities, 3u);
    EXPECT_EQ(c.data.gaussians, 10u);
    EXPECT_EQ(c.rank, 5u);
    EXPECT_EQ(c.train.iterations, 40u);
    EXPECT_EQ(c.train.rates.scale, 0.25);
    EXPECT_EQ(c.train.weights.isocov, 3.5);
    EXPECT_EQ(c.data.image_size, DatasetSpec{}.image_size);
}

TEST(Config, RejectsBadInput) {
    auto throws_with = [](const std::string &text, const std::string &needle) {
        try {
            parse_config(text);
        } catch (const ConfigError &e) {
            const std::string msg = e.what();
            EXPECT_NE(msg.find(needle), std::string::npos) << msg;
            EXPECT_EQ(msg.find('\n'), std::string::npos) << msg;
            return;
        }
        ADD_FAILURE() << "no error for: " << text;
    };
    throws_with("[run]\nsed = 1\n", "line 2");
    throws_with("[nope]\n", "unknown section");
    throws_with("seed = 1\n", "before any section");
    throws_with("[run]\nseed = 1\nseed = 2\n", "duplicate");
    throws_with("[model]\nrank = 0\n", "outside");
    throws_with("[data]\nimage_size = abc\n", "line 2");
    throws_with("[loss]\nl1 = nan\n", "finite");
    throws_with("[run]\nmode = per_identity:9\n", "out of range");
    throws_with("[run]\nmode = sometimes\n", "mode");
    throws_with("[run]\nseed\n", "key = value");
}

TEST(Config, TextRoundTrip) {
    RunConfig c;
    c.seed = 99;
    c.rank = 7;
    c.train.rates.factors = {1e-3, 1e-5, true};
    c.train.weights.mask = 0.3;
    c.data.heldout_angle_max = 0.8;
    c.train.mode = MaskMode::PerIdentity;
    c.train.mode_identity = 1;
    const std::string text = to_text(c);
    const RunConfig back = parse_config(text);
    EXPECT_EQ(to_text(back), text);
    EXPECT_EQ(back.train.rates.factors.final, 1e-5);
    EXPECT_EQ(mode_to_string(MaskMode::Full, 0), "full");
    EXPECT_EQ(mode_to_string(MaskMode::PerIdentity, 3), "per_identity:3");
}

TEST(PoseFile, RoundTripWithAndWithoutRoot) {
    const fs::path d = scratch_dir("pose");
    std::vector<Pose> poses(2);
    poses[0].angles = {0.1, -0.2, 1.0 / 3.0};
    poses[1].angles = {0.0, 0.5, -0.7};
    poses[1].root_translation = {0.25, -1.0 / 7.0};
    write_pose_file(poses, d / "p.txt");
    const auto back = read_pose_file(d / "p.txt", 3);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(back[k].angles, poses[k].angles);
        EXPECT_EQ(back[k].root_translation, poses[k].root_translation);
    }
    std::ofstream(d / "bad.txt") << "# angles\n0.1 0.2\n";
    EXPECT_THROW(read_pose_file(d / "bad.txt", 3), FormatError);
    std::ofstream(d / "junk.txt") << "0.1 x 0.3\n";
    EXPECT_THROW(read_pose_file(d / "junk.txt", 3), FormatError);
}

TEST(DatasetIo, SaveLoadReproducesFramesAndGroundTruth) {
    const fs::path d = scratch_dir("ds");
    const SyntheticDataset ds = splatcp::testing::tiny_dataset(2, 6);
    save_dataset(ds, d);
    EXPECT_TRUE(fs::exists(d / "manifest.cfg"));
    EXPECT_TRUE(fs::exists(d / "ground_truth.ckpt"));
    const SyntheticDataset back = load_dataset(d);
    ASSERT_EQ(back.identities.size(), 2u);
    EXPECT_EQ(back.seed, ds.seed);
    EXPECT_TRUE(back.scene.viewport == ds.scene.viewport);
    for (std::size_t i = 0; i < 2; ++i) {
        ASSERT_EQ(back.identities[i].train.size(), ds.identities[i].train.size());
        for (std::size_t f = 0; f < ds.identities[i].train.size(); ++f) {
            const Frame &a = ds.identities[i].train[f], &b = back.identities[i].train[f];
            EXPECT_EQ(a.pose.angles, b.pose.angles);
            // Frames come back quantized to 8 bits.
            EXPECT_EQ(encode_ppm(a.target), encode_ppm(b.target));
            EXPECT_EQ(encode_pgm(a.target_mask), encode_pgm(b.target_mask));
        }
    }
}

TEST(MetricsLog, CsvRowsAndFormatting) {
    std::vector<HistoryEntry> h(5);
    for (std::size_t k = 0; k < 5; ++k) {
        h[k].iteration = k;
        h[k].loss = 0.1 * static_cast<double>(k);
    }
    const std::string csv = history_csv(h, 2);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,identity,frame,loss,l1,mask,isopos,isocov,psnr");
    std::size_t rows = 0;
    for (char c : csv) rows += c == '\n';
    EXPECT_EQ(rows, 1u + 3u); // iterations 0, 2, 4
    EXPECT_NE(csv.find("\n2,0,0,0.20000000000000001,"), std::string::npos) << csv;
    EXPECT_THROW(history_csv(h, 0), std::invalid_argument);
}
