#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddw/afno.hpp"
#include "ddw/grid.hpp"
#include "ddw/slidewin.hpp"

namespace ddw {
namespace trainer {

/// Per-channel z-score statistics, 64-bit, computed over training samples
/// only.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;

    int n_channels() const { return static_cast<int>(mean.size()); }
    void normalize(const float* physical, float* normalized, std::size_t cells) const;
    void denormalize(const float* normalized, float* physical, std::size_t cells) const;
};

/// Unbiased per-channel mean/std over frames [t_begin, t_end) of a shard.
/// Throws on a zero-variance channel.
NormStats compute_norm_stats(const HourlyArchive& shard, int t_begin, int t_end);

void write_norm_stats(const NormStats& stats, const std::string& path);
NormStats read_norm_stats(const std::string& path);

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int batch_size = 8;
    int max_steps = 500;
    LrSchedule lr_schedule = LrSchedule::Cosine;
    std::uint64_t seed = 0;
    int checkpoint_every = 100;

    void validate() const;
};

/// Latitude-weighted MSE over normalized channels; weights carry grid mean 1.
double weighted_loss(const std::vector<float>& pred, const std::vector<float>& target,
                     const GridSpec& spec, int n_channels, const std::vector<double>& lat_w);

/// Training inputs: one daily shard per lag stream plus the pair manifest
/// that references them. A shard's time index equals its day index.
struct Dataset {
    std::map<int, const HourlyArchive*> shards;
    slidewin::PairManifest manifest;
};

/// Mean loss and mean parameter gradients over a batch. Inputs/targets are
/// normalized fields; reduction order is fixed so results are reproducible.
template <class R>
R batch_loss_and_grads(afno::Network<R>& net, const afno::ModelState<R>& state,
                       const std::vector<const R*>& inputs, const std::vector<const R*>& targets,
                       const std::vector<R>& lat_weights, afno::ModelState<R>& grads);

/// Adam with optional cosine decay over ModelState parameter groups.
template <class R>
class AdamOptimizer {
public:
    AdamOptimizer(const afno::ModelConfig& cfg, const TrainConfig& tc);
    void step(afno::ModelState<R>& state, afno::ModelState<R>& grads);

private:
    TrainConfig tc_;
    afno::ModelState<R> m_, v_;
    long long t_ = 0;
};

struct TrainResult {
    afno::ModelState<float> state;      // final parameters
    afno::ModelState<float> best_state; // best validation loss (== state without validation)
    NormStats norm;                     // dynamic-channel stats from the training split
    double static_mean = 0, static_std = 1;
    std::vector<std::pair<int, double>> loss_trace;
    std::vector<std::pair<int, double>> val_trace;
};

/// Train a next-day model on the manifest. `static_field` (orography) is
/// z-scored with its own statistics and appended after the dynamic channels.
/// `model_cfg.in_channels`/`out_channels` are filled from the data when 0.
TrainResult train(const Dataset& data, const Dataset* validation,
                  const HourlyArchive* static_field, afno::ModelConfig model_cfg,
                  const TrainConfig& tc);

void write_loss_trace(const std::vector<std::pair<int, double>>& trace, const std::string& path);

} // namespace trainer
} // namespace ddw
