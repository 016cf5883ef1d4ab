#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ddw/afno.hpp"
#include "ddw/grid.hpp"
#include "ddw/trainer.hpp"

namespace ddw {
namespace rollout {

/// One-day step in normalized space: maps the dynamic-channel state to the
/// next day's dynamic-channel state (any static channels are the closure's
/// business).
using StepFn = std::function<void(const std::vector<float>& x_norm, std::vector<float>& out_norm)>;

/// Wraps a trained network: re-appends the normalized static channel every
/// step. `static_norm` may be empty when the model has no static input.
StepFn model_step(afno::Network<float>& net, const afno::ModelState<float>& state,
                  std::vector<float> static_norm);

struct Trajectory {
    int init_day = 0;
    int max_lead = 0;
    int verified_leads = 0;                 // leads with verification data available
    bool truncated = false;
    std::vector<std::vector<float>> lead_fields; // physical units, [lead-1] = day init+lead
};

/// Iterates the one-day map from a physical initial state; all intermediate
/// states stay normalized, outputs are denormalized per lead.
Trajectory autoregress(const StepFn& step, const std::vector<float>& init_physical,
                       const trainer::NormStats& norm, std::size_t cells, int max_lead);

/// One trajectory per scheduled init day, initialized from the lag0 analysis
/// shard. Trajectories whose verification window extends past the shard are
/// truncated-flagged, not dropped.
std::vector<Trajectory> run_schedule(const StepFn& step, const HourlyArchive& analysis,
                                     const trainer::NormStats& norm,
                                     const std::vector<int>& init_days, int max_lead);

/// Persists one trajectory as a GRD1 file (time axis = lead days).
void write_trajectory(const Trajectory& traj, const HourlyArchive& analysis, int year,
                      const std::string& out_dir);
std::string trajectory_filename(int year, int init_day);

} // namespace rollout
} // namespace ddw
