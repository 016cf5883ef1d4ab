#include "ddw/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace ddw {
namespace rollout {

StepFn model_step(afno::Network<float>& net, const afno::ModelState<float>& state,
                  std::vector<float> static_norm) {
    const auto cfg = net.config();
    const std::size_t cells = static_cast<std::size_t>(cfg.n_lat) * cfg.n_lon;
    const int dyn_in = cfg.in_channels - (static_norm.empty() ? 0 : 1);
    if (!static_norm.empty() && static_norm.size() != cells)
        throw ShapeMismatch("static field size does not match grid");

    auto input = std::make_shared<std::vector<float>>(static_cast<std::size_t>(cfg.in_channels) * cells);
    return [&net, &state, static_norm = std::move(static_norm), input, cells, dyn_in,
            cfg](const std::vector<float>& x, std::vector<float>& out) {
        if (x.size() != static_cast<std::size_t>(dyn_in) * cells)
            throw ShapeMismatch("rollout state has wrong channel count");
        std::copy(x.begin(), x.end(), input->begin());
        if (!static_norm.empty())
            std::copy(static_norm.begin(), static_norm.end(),
                      input->begin() + static_cast<std::size_t>(dyn_in) * cells);
        out.resize(static_cast<std::size_t>(cfg.out_channels) * cells);
        net.forward(state, input->data(), out.data());
    };
}

Trajectory autoregress(const StepFn& step, const std::vector<float>& init_physical,
                       const trainer::NormStats& norm, std::size_t cells, int max_lead) {
    if (max_lead < 1) throw ShapeMismatch("max_lead must be >= 1");
    if (init_physical.size() != static_cast<std::size_t>(norm.n_channels()) * cells)
        throw ShapeMismatch("initial state size does not match normalization stats");

    Trajectory traj;
    traj.max_lead = max_lead;

    std::vector<float> x(init_physical.size());
    norm.normalize(init_physical.data(), x.data(), cells);

    std::vector<float> next;
    for (int t = 1; t <= max_lead; ++t) {
        step(x, next);
        for (float v : next)
            if (!std::isfinite(v))
                throw NumericError("non-finite forecast state at lead " + std::to_string(t));
        x = next;
        std::vector<float> physical(x.size());
        norm.denormalize(x.data(), physical.data(), cells);
        traj.lead_fields.push_back(std::move(physical));
    }
    return traj;
}

std::vector<Trajectory> run_schedule(const StepFn& step, const HourlyArchive& analysis,
                                     const trainer::NormStats& norm,
                                     const std::vector<int>& init_days, int max_lead) {
    if (analysis.step_hours != 24)
        throw ShapeMismatch("rollout needs a daily analysis shard");
    const std::size_t cells = analysis.spec.cells();
    const std::size_t frame = analysis.frame_size();

    std::vector<Trajectory> out;
    for (int d : init_days) {
        if (d < 0 || d >= analysis.n_time)
            throw IndexOutOfRange("init day " + std::to_string(d) + " outside analysis shard");
        std::vector<float> init(analysis.values.begin() + static_cast<std::size_t>(d) * frame,
                                analysis.values.begin() + static_cast<std::size_t>(d + 1) * frame);
        Trajectory traj = autoregress(step, init, norm, cells, max_lead);
        traj.init_day = d;
        traj.verified_leads = std::min(max_lead, analysis.n_time - 1 - d);
        traj.truncated = traj.verified_leads < max_lead;
        out.push_back(std::move(traj));
    }
    return out;
}

std::string trajectory_filename(int year, int init_day) {
    return "fc_" + std::to_string(year) + "_" + std::to_string(init_day) + ".grd";
}

void write_trajectory(const Trajectory& traj, const HourlyArchive& analysis, int year,
                      const std::string& out_dir) {
    HourlyArchive a;
    a.spec = analysis.spec;
    a.catalog = analysis.catalog;
    a.step_hours = 24;
    a.start_epoch_hours = analysis.start_epoch_hours + 24LL * (traj.init_day + 1);
    a.n_time = static_cast<int>(traj.lead_fields.size());
    a.values.reserve(a.n_time * a.frame_size());
    for (const auto& f : traj.lead_fields)
        a.values.insert(a.values.end(), f.begin(), f.end());
    write_archive(a, out_dir + "/" + trajectory_filename(year, traj.init_day));
}

} // namespace rollout
} // namespace ddw
