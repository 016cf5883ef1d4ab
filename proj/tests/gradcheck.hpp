#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ddw/afno.hpp"
#include "ddw/trainer.hpp"

namespace testutil {

struct GroupCheck {
    std::string name;
    double max_rel_err = 0;
    std::size_t checked = 0;
};

/// Central finite differences against the reverse-mode gradient, per
/// parameter group. Large groups are subsampled deterministically.
inline std::vector<GroupCheck> gradient_check(ddw::afno::ModelState<double>& state,
                                              const std::vector<const double*>& inputs,
                                              const std::vector<const double*>& targets,
                                              const std::vector<double>& lat_w,
                                              double step = 1e-5,
                                              std::size_t max_per_group = 64,
                                              unsigned seed = 12345) {
    using namespace ddw;
    afno::Network<double> net(state.cfg);

    auto grads = afno::ModelState<double>::zeros(state.cfg);
    trainer::batch_loss_and_grads(net, state, inputs, targets, lat_w, grads);

    auto batch_loss = [&]() {
        double total = 0;
        std::vector<double> out(static_cast<std::size_t>(state.cfg.out_channels) *
                                state.cfg.n_lat * state.cfg.n_lon);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            net.forward(state, inputs[i], out.data());
            total += net.loss(out.data(), targets[i], lat_w);
        }
        return total / static_cast<double>(inputs.size());
    };

    std::vector<GroupCheck> results;
    auto sgroups = state.groups();
    auto ggroups = grads.groups();
    std::mt19937 rng(seed);
    for (std::size_t gi = 0; gi < sgroups.size(); ++gi) {
        auto& sg = sgroups[gi];
        GroupCheck gc;
        gc.name = sg.name;

        std::vector<std::size_t> idx(sg.size);
        for (std::size_t i = 0; i < sg.size; ++i) idx[i] = i;
        if (sg.size > max_per_group) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(max_per_group);
        }

        for (std::size_t i : idx) {
            const double orig = sg.data[i];
            sg.data[i] = orig + step;
            const double lp = batch_loss();
            sg.data[i] = orig - step;
            const double lm = batch_loss();
            sg.data[i] = orig;

            const double fd = (lp - lm) / (2 * step);
            const double an = ggroups[gi].data[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            gc.max_rel_err = std::max(gc.max_rel_err, std::abs(fd - an) / denom);
            ++gc.checked;
        }
        results.push_back(gc);
    }
    return results;
}

} // namespace testutil
