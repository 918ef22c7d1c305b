// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/dataset.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace splatcp;

namespace {

DatasetSpec small_spec() {
    DatasetSpec s;
    s.identities = 3;
    s.gaussians = 32;
    s.image_size = 24;
    s.train_poses = 3;
    s.heldout_poses = 2;
    return s;
}

bool frames_equal(const std::vector<Frame> &a, const std::vector<Frame> &b) {
    if (a.size() != b.size()) return false;
    for (std::size_t f = 0; f < a.size(); ++f) {
        if (a[f].pose.angles != b[f].pose.angles || a[f].pose.root_translation != b[f].pose.root_translation ||
            !(a[f].target == b[f].target) || !(a[f].target_mask == b[f].target_mask)) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST(Dataset, SameSeedIsBitIdentical) {
    const SyntheticDataset a = generate_dataset(small_spec(), 5), b = generate_dataset(small_spec(), 5);
    ASSERT_EQ(a.identities.size(), b.identities.size());
    for (std::size_t i = 0; i < a.identities.size(); ++i) {
        EXPECT_EQ(a.identities[i].ground_truth, b.identities[i].ground_truth);
        EXPECT_TRUE(frames_equal(a.identities[i].train, b.identities[i].train));
        EXPECT_TRUE(frames_equal(a.identities[i].held_out, b.identities[i].held_out));
    }
    const SyntheticDataset c = generate_dataset(small_spec(), 6);
    EXPECT_FALSE(c.identities[0].ground_truth == a.identities[0].ground_truth);
}

TEST(Dataset, ShapesFollowDatasetSpec) {
    const DatasetSpec s = small_spec();
    const SyntheticDataset ds = generate_dataset(s, 1);
    EXPECT_EQ(ds.scene.skeleton.size(), s.bones);
    EXPECT_EQ(ds.scene.viewport.width, s.image_size);
    ASSERT_EQ(ds.identities.size(), s.identities);
    for (const IdentityData &id : ds.identities) {
        EXPECT_EQ(id.ground_truth.size(), s.gaussians);
        EXPECT_EQ(id.train.size(), s.train_poses);
        EXPECT_EQ(id.held_out.size(), s.heldout_poses);
        for (const Frame &f : id.train) {
            EXPECT_EQ(f.pose.angles.size(), s.bones);
            EXPECT_EQ(f.target.width, s.image_size);
        }
    }
}

TEST(Dataset, HeldOutAnglesLieOutsideTrainingBand) {
    DatasetSpec s = small_spec();
    s.train_poses = 20;
    s.heldout_poses = 20;
    const SyntheticDataset ds = generate_dataset(s, 2);
    for (const IdentityData &id : ds.identities) {
        for (const Frame &f : id.train)
            for (double a : f.pose.angles) EXPECT_LE(std::abs(a), s.train_angle_max);
        for (const Frame &f : id.held_out)
            for (double a : f.pose.angles) {
                EXPECT_GE(std::abs(a), s.heldout_angle_min);
                EXPECT_LE(std::abs(a), s.heldout_angle_max);
                EXPECT_GT(std::abs(a), s.train_angle_max);
            }
    }
}

TEST(Dataset, TargetsAreSelfRendered) {
    const SyntheticDataset ds = generate_dataset(small_spec(), 3);
    const IdentityData &id = ds.identities[1];
    const Frame again = render_frame(id.ground_truth, ds.scene, id.held_out[1].pose);
    EXPECT_EQ(again.target, id.held_out[1].target);
    EXPECT_EQ(again.target_mask, id.held_out[1].target_mask);
    double coverage = 0.0;
    for (double a : id.train[0].target_mask.alpha) coverage += a;
    EXPECT_GT(coverage, 10.0); // the figure is visible
}

TEST(Dataset, IdentitiesDiffer) {
    const SyntheticDataset ds = generate_dataset(small_spec(), 4);
    for (std::size_t i = 1; i < ds.identities.size(); ++i) {
        EXPECT_NE(ds.identities[i].ground_truth.color, ds.identities[0].ground_truth.color);
        EXPECT_NE(ds.identities[i].ground_truth.position, ds.identities[0].ground_truth.position);
    }
}

TEST(Dataset, SingleIdentityWorks) {
    DatasetSpec s = small_spec();
    s.identities = 1;
    EXPECT_EQ(generate_dataset(s, 9).identities.size(), 1u);
}

TEST(Dataset, RejectsInvalidDatasetSpec) {
    DatasetSpec s = small_spec();
    s.bones = 0;
    EXPECT_THROW(generate_dataset(s, 1), std::invalid_argument);
    s = small_spec();
    s.heldout_angle_min = s.train_angle_max;
    EXPECT_THROW(generate_dataset(s, 1), std::invalid_argument);
    s = small_spec();
    s.identities = 0;
    EXPECT_THROW(generate_dataset(s, 1), std::invalid_argument);
}

TEST(Dataset, SeedGaussiansJitterFirstIdentity) {
    const SyntheticDataset ds = generate_dataset(small_spec(), 7);
    const GaussianSet seed = seed_gaussians(ds, 1, 0.02, 0.06);
    const GaussianSet &gt = ds.identities[0].ground_truth;
    ASSERT_EQ(seed.size(), gt.size());
    for (std::size_t g = 0; g < seed.size(); ++g) {
        EXPECT_LE(std::abs(seed.position[g][0] - gt.position[g][0]), 0.02);
        EXPECT_LE(std::abs(seed.position[g][1] - gt.position[g][1]), 0.02);
        EXPECT_EQ(seed.scale[g], (Vec2{0.06, 0.06}));
        EXPECT_EQ(seed.opacity[g], 0.5);
    }
}

TEST(Dataset, TakeIdentitiesSplits) {
    const SyntheticDataset ds = generate_dataset(small_spec(), 8);
    std::vector<IdentityData> rest;
    const SyntheticDataset head = take_identities(ds, 2, &rest);
    EXPECT_EQ(head.identities.size(), 2u);
    ASSERT_EQ(rest.size(), 1u);
    EXPECT_EQ(rest[0].ground_truth, ds.identities[2].ground_truth);
}
