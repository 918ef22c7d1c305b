// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/optim.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splatcp {

double LrSchedule::at(std::size_t step, std::size_t max_steps) const {
    if (!decay || initial == 0.0) return initial;
    const double frac = max_steps == 0 ? 1.0
                                       : std::min(1.0, static_cast<double>(step) / static_cast<double>(max_steps));
    return initial * std::pow(final / initial, frac);
}

void LearningRates::validate() const {
    const double all[] = {position.initial, position.final, factors.initial, factors.final,
                          scale, rotation, appearance, opacity};
    for (double v : all) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("learning rates must be finite and >= 0");
    }
    if ((position.decay && position.initial > 0.0 && !(position.final > 0.0)) ||
        (factors.decay && factors.initial > 0.0 && !(factors.final > 0.0))) {
        throw std::invalid_argument("decayed learning rates need a positive final rate");
    }
}

std::size_t adam_update(std::span<double> params, std::span<const double> grads,
                        std::span<const std::uint8_t> mask, std::span<const double> lr, AdamMoments &state,
                        std::size_t t, const AdamParams &hp) {
    const std::size_t n = params.size();
    if (grads.size() != n || mask.size() != n || lr.size() != n || state.m.size() != n || state.v.size() != n) {
        throw std::invalid_argument("adam_update: parameter, gradient, mask and state sizes differ");
    }
    if (t == 0) throw std::invalid_argument("adam_update: step counter is 1-based");
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        const double g = grads[i];
        if (!std::isfinite(g)) {
            ++skipped;
            continue;
        }
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr[i] * mhat / (std::sqrt(vhat) + hp.eps);
    }
    return skipped;
}

StoreOptimizer::StoreOptimizer(const FactorizedAvatarStore &store, LearningRates rates, std::size_t max_steps,
                               AdamParams hp)
    : rates_(rates), max_steps_(max_steps), hp_(hp), params_(store.model.u_params.data.size()),
      identity_(store.model.u_identity.data.size()), gaussian_(store.model.u_gaussian.data.size()) {
    rates_.validate();
    for (const Mat &r : store.personalization) residual_.emplace_back(r.data.size());
}

double StoreOptimizer::params_row_rate(const ParamLayout &layout, std::size_t p) const {
    auto in = [p](const Block &b) { return p >= b.offset && p < b.end(); };
    if (in(layout.position)) return rates_.position.at(step_, max_steps_);
    if (in(layout.scale_log)) return rates_.scale;
    if (in(layout.rotation)) return rates_.rotation;
    if (in(layout.appearance)) return rates_.appearance;
    return rates_.opacity;
}

std::size_t StoreOptimizer::step(FactorizedAvatarStore &store, const StoreGrads &grads, const TrainMask &mask) {
    CPModel &m = store.model;
    const std::size_t R = m.rank;
    if (grads.factors.g_params.data.size() != m.u_params.data.size() ||
        grads.factors.g_identity.data.size() != m.u_identity.data.size() ||
        grads.factors.g_gaussian.data.size() != m.u_gaussian.data.size() ||
        params_.m.size() != m.u_params.data.size() || identity_.m.size() != m.u_identity.data.size()) {
        throw std::invalid_argument("StoreOptimizer: gradient or state shapes do not match the store");
    }
    const std::size_t t = step_ + 1;
    std::size_t skipped = 0;

    std::vector<double> lr(m.u_params.data.size());
    for (std::size_t p = 0; p < m.n_params(); ++p) {
        const double rate = params_row_rate(store.layout, p);
        std::fill(lr.begin() + static_cast<std::ptrdiff_t>(p * R), lr.begin() + static_cast<std::ptrdiff_t>((p + 1) * R), rate);
    }
    skipped += adam_update(m.u_params.data, grads.factors.g_params.data, mask.params, lr, params_, t, hp_);

    const double factor_rate = rates_.factors.at(step_, max_steps_);
    lr.assign(m.u_identity.data.size(), factor_rate);
    skipped += adam_update(m.u_identity.data, grads.factors.g_identity.data, mask.identity_rows, lr, identity_, t, hp_);
    lr.assign(m.u_gaussian.data.size(), factor_rate);
    skipped += adam_update(m.u_gaussian.data, grads.factors.g_gaussian.data, mask.gaussian, lr, gaussian_, t, hp_);

    if (!grads.residual.empty() && store.has_personalization()) {
        const Block blk = store.layout.residual_block();
        for (std::size_t i = 0; i < store.personalization.size() && i < grads.residual.size(); ++i) {
            if (i >= mask.residual.size() || !mask.residual[i]) continue;
            Mat &res = store.personalization[i];
            lr.assign(res.data.size(), 0.0);
            for (std::size_t g = 0; g < res.rows; ++g) {
                for (std::size_t c = 0; c < res.cols; ++c) {
                    const bool is_opacity = blk.offset + c >= store.layout.opacity_logit.offset;
                    lr[g * res.cols + c] = is_opacity ? rates_.opacity : rates_.appearance;
                }
            }
            const std::vector<std::uint8_t> on(res.data.size(), 1);
            skipped += adam_update(res.data, grads.residual[i].data, on, lr, residual_[i], t, hp_);
        }
    }
    ++step_;
    skipped_ += skipped;
    return skipped;
}

} // namespace splatcp
