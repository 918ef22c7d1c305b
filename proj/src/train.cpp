// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/train.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace splatcp {

namespace {

struct Schedule {
    std::vector<std::size_t> identities;          // identities visited round-robin
    std::vector<const std::vector<Frame> *> frames; // frames per visited identity
};

TrainMask mask_for(const FactorizedAvatarStore &store, const TrainConfig &cfg) {
    if (cfg.custom_mask) return *cfg.custom_mask;
    return make_mask(store, cfg.mode, cfg.mode_identity);
}

TrainMask freeze_cp(TrainMask m) {
    std::fill(m.params.begin(), m.params.end(), 0);
    std::fill(m.identity_rows.begin(), m.identity_rows.end(), 0);
    std::fill(m.gaussian.begin(), m.gaussian.end(), 0);
    return m;
}

TrainResult run(const FactorizedAvatarStore &initial, const Scene &scene, const Schedule &sched,
                const TrainConfig &cfg) {
    TrainResult res;
    res.store = initial;
    res.store.validate();
    cfg.weights.validate();
    if (sched.identities.empty() || cfg.iterations == 0) return res;

    FactorizedAvatarStore &store = res.store;
    const TrainMask mask = mask_for(store, cfg);
    const TrainMask warm_mask = freeze_cp(mask);
    StoreOptimizer opt(store, cfg.rates, cfg.iterations);
    std::vector<KnnCache> knn(store.n_identities());

    const std::size_t n_sched = sched.identities.size();
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const std::size_t slot = it % n_sched;
        const std::size_t id = sched.identities[slot];
        const auto &frames = *sched.frames[slot];
        const std::size_t f = (it / n_sched) % frames.size();
        const Frame &frame = frames[f];

        const Mat raw = raw_slice(store, id);
        const GaussianSet canonical = activate(raw, store.layout);
        const auto &edges = knn[id].edges(canonical.position);
        FrameGradient fg = frame_gradient(store, id, scene, frame, edges, cfg.weights);

        if (!std::isfinite(fg.loss.total)) {
            std::ostringstream os;
            os << "non-finite loss at iteration " << it << " (identity " << id << ", frame " << f
               << "): l1=" << fg.loss.l1 << " mask=" << fg.loss.mask << " isopos=" << fg.loss.isopos
               << " isocov=" << fg.loss.isocov;
            throw TrainingError(os.str());
        }

        HistoryEntry h;
        h.iteration = it;
        h.identity = id;
        h.frame = f;
        h.loss = fg.loss.total;
        h.l1 = fg.loss.l1;
        h.mask = fg.loss.mask;
        h.isopos = fg.loss.isopos;
        h.isocov = fg.loss.isocov;
        h.psnr = psnr(fg.render, frame.target);
        res.history.push_back(h);

        StoreGrads grads;
        grads.factors = backward_slice(store.model, id, fg.grad_raw);
        if (store.has_personalization()) {
            const Block blk = store.layout.residual_block();
            grads.residual.assign(store.n_identities(), Mat());
            for (std::size_t j = 0; j < store.n_identities(); ++j) {
                grads.residual[j] = Mat(store.n_gaussians(), blk.length);
            }
            Mat &gr = grads.residual[id];
            for (std::size_t g = 0; g < gr.rows; ++g)
                for (std::size_t c = 0; c < blk.length; ++c) gr(g, c) = fg.grad_raw(g, blk.offset + c);
        }
        res.skipped_gradients += opt.step(store, grads, it < cfg.warmup ? warm_mask : mask);
    }
    return res;
}

} // namespace

FrameGradient frame_gradient(const FactorizedAvatarStore &store, std::size_t identity, const Scene &scene,
                             const Frame &frame, const std::vector<Edge> &edges, const LossWeights &weights) {
    const Mat raw = raw_slice(store, identity);
    const GaussianSet canonical = activate(raw, store.layout);
    const BoneTransforms bt = forward_kinematics(scene.skeleton, frame.pose);
    const GaussianSet observed = lbs_apply(canonical, bt, scene.skeleton);
    RenderResult rr = render(observed, scene.viewport);

    FrameGradient out;
    out.loss = total_loss(rr.image, rr.mask, frame.target, frame.target_mask, {&canonical, &observed, &edges},
                          weights);
    GaussianGrads g_obs = render_backward(observed, scene.viewport, out.loss.grad_image, out.loss.grad_mask);
    g_obs += out.loss.grad_observed;
    GaussianGrads g_can = lbs_backward(canonical, bt, scene.skeleton, g_obs);
    g_can += out.loss.grad_canonical;
    out.grad_raw = activation_backward(raw, g_can, store.layout);
    out.render = std::move(rr.image);
    return out;
}

TrainResult train(const FactorizedAvatarStore &store, const SyntheticDataset &ds, const TrainConfig &cfg) {
    if (store.n_identities() != ds.identities.size()) {
        throw std::invalid_argument("train: store has " + std::to_string(store.n_identities()) +
                                    " identities, dataset has " + std::to_string(ds.identities.size()));
    }
    Schedule sched;
    for (std::size_t i = 0; i < ds.identities.size(); ++i) {
        if (ds.identities[i].train.empty()) continue;
        sched.identities.push_back(i);
        sched.frames.push_back(&ds.identities[i].train);
    }
    return run(store, ds.scene, sched, cfg);
}

TrainResult fit_novel_identity(const FactorizedAvatarStore &store, const Scene &scene,
                               const std::vector<Frame> &frames, const TrainConfig &cfg) {
    const FactorizedAvatarStore extended = add_identity(store);
    const std::size_t id = extended.n_identities() - 1;
    TrainConfig c = cfg;
    c.custom_mask = make_mask(extended, MaskMode::NovelIdentity, id);
    Schedule sched;
    if (!frames.empty()) {
        sched.identities.push_back(id);
        sched.frames.push_back(&frames);
    }
    return run(extended, scene, sched, c);
}

TrainResult personalize(const FactorizedAvatarStore &store, std::size_t identity, const Scene &scene,
                        const std::vector<Frame> &frames, const TrainConfig &cfg) {
    if (identity >= store.n_identities()) throw std::invalid_argument("personalize: identity out of range");
    FactorizedAvatarStore s = store;
    s.enable_personalization();
    TrainConfig c = cfg;
    c.custom_mask = make_mask(s, MaskMode::Personalization, identity);
    Schedule sched;
    if (!frames.empty()) {
        sched.identities.push_back(identity);
        sched.frames.push_back(&frames);
    }
    return run(s, scene, sched, c);
}

Image render_identity(const FactorizedAvatarStore &store, std::size_t identity, const Scene &scene, const Pose &pose) {
    const GaussianSet canonical = slice_identity(store, identity);
    const BoneTransforms bt = forward_kinematics(scene.skeleton, pose);
    return render(lbs_apply(canonical, bt, scene.skeleton), scene.viewport).image;
}

Metrics evaluate_frames(const FactorizedAvatarStore &store, std::size_t identity, const Scene &scene,
                        const std::vector<Frame> &frames) {
    Metrics m;
    if (frames.empty()) return m;
    const GaussianSet canonical = slice_identity(store, identity);
    double total = 0.0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const BoneTransforms bt = forward_kinematics(scene.skeleton, frames[f].pose);
        const Image img = render(lbs_apply(canonical, bt, scene.skeleton), scene.viewport).image;
        const double e = mse(img, frames[f].target);
        m.frames.push_back({identity, f, psnr_from_mse(e), e});
        total += e;
    }
    m.mse = total / static_cast<double>(frames.size());
    m.psnr = psnr_from_mse(m.mse);
    return m;
}

Metrics evaluate(const FactorizedAvatarStore &store, const SyntheticDataset &ds, Split split) {
    if (store.n_identities() < ds.identities.size()) {
        throw std::invalid_argument("evaluate: store has fewer identities than the dataset");
    }
    Metrics out;
    double total = 0.0;
    for (std::size_t i = 0; i < ds.identities.size(); ++i) {
        const auto &frames = split == Split::Train ? ds.identities[i].train : ds.identities[i].held_out;
        Metrics m = evaluate_frames(store, i, ds.scene, frames);
        for (const auto &fm : m.frames) {
            out.frames.push_back(fm);
            total += fm.mse;
        }
    }
    if (!out.frames.empty()) {
        out.mse = total / static_cast<double>(out.frames.size());
        out.psnr = psnr_from_mse(out.mse);
    }
    return out;
}

} // namespace splatcp
