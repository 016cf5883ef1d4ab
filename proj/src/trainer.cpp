#include "ddw/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "ddw/scorecard.hpp"

namespace ddw {
namespace trainer {

void NormStats::normalize(const float* physical, float* normalized, std::size_t cells) const {
    for (int c = 0; c < n_channels(); ++c) {
        const double mu = mean[c], sd = stddev[c];
        const float* src = physical + c * cells;
        float* dst = normalized + c * cells;
        for (std::size_t i = 0; i < cells; ++i)
            dst[i] = static_cast<float>((src[i] - mu) / sd);
    }
}

void NormStats::denormalize(const float* normalized, float* physical, std::size_t cells) const {
    for (int c = 0; c < n_channels(); ++c) {
        const double mu = mean[c], sd = stddev[c];
        const float* src = normalized + c * cells;
        float* dst = physical + c * cells;
        for (std::size_t i = 0; i < cells; ++i)
            dst[i] = static_cast<float>(src[i] * sd + mu);
    }
}

NormStats compute_norm_stats(const HourlyArchive& shard, int t_begin, int t_end) {
    if (t_begin < 0 || t_end > shard.n_time || t_end - t_begin < 2)
        throw ShapeMismatch("norm stats need at least 2 samples");
    const int C = shard.catalog.size();
    const std::size_t cells = shard.spec.cells();
    const double n = static_cast<double>(t_end - t_begin) * cells;

    NormStats s;
    s.mean.assign(C, 0.0);
    s.stddev.assign(C, 0.0);
    // two-pass for accuracy
    for (int t = t_begin; t < t_end; ++t)
        for (int c = 0; c < C; ++c) {
            const float* f = shard.frame(t, c);
            double acc = 0;
            for (std::size_t i = 0; i < cells; ++i) acc += f[i];
            s.mean[c] += acc;
        }
    for (auto& m : s.mean) m /= n;
    for (int t = t_begin; t < t_end; ++t)
        for (int c = 0; c < C; ++c) {
            const float* f = shard.frame(t, c);
            double acc = 0;
            for (std::size_t i = 0; i < cells; ++i) {
                const double d = f[i] - s.mean[c];
                acc += d * d;
            }
            s.stddev[c] += acc;
        }
    for (int c = 0; c < C; ++c) {
        s.stddev[c] = std::sqrt(s.stddev[c] / (n - 1));
        if (!(s.stddev[c] > 0))
            throw NumericError("zero-variance channel: " + shard.catalog.entries[c].key());
    }
    return s;
}

void write_norm_stats(const NormStats& stats, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    char buf[96];
    for (int c = 0; c < stats.n_channels(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g\t%.17g\n", stats.mean[c], stats.stddev[c]);
        out << buf;
    }
    if (!out) throw IoError("write failure: " + path);
}

NormStats read_norm_stats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    NormStats s;
    double m, sd;
    while (in >> m >> sd) {
        s.mean.push_back(m);
        s.stddev.push_back(sd);
    }
    return s;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ShapeMismatch("batch_size must be >= 1");
    if (max_steps < 1) throw ShapeMismatch("max_steps must be >= 1");
    if (learning_rate <= 0) throw ShapeMismatch("learning_rate must be positive");
    if (checkpoint_every < 1) throw ShapeMismatch("checkpoint_every must be >= 1");
}

double weighted_loss(const std::vector<float>& pred, const std::vector<float>& target,
                     const GridSpec& spec, int n_channels, const std::vector<double>& lat_w) {
    if (pred.size() != target.size() ||
        pred.size() != static_cast<std::size_t>(n_channels) * spec.cells())
        throw ShapeMismatch("weighted_loss shape mismatch");
    double acc = 0;
    for (int c = 0; c < n_channels; ++c)
        for (int j = 0; j < spec.n_lat; ++j) {
            const std::size_t off = (static_cast<std::size_t>(c) * spec.n_lat + j) * spec.n_lon;
            for (int k = 0; k < spec.n_lon; ++k) {
                const double d = static_cast<double>(pred[off + k]) - target[off + k];
                acc += lat_w[j] * d * d;
            }
        }
    return acc / (static_cast<double>(n_channels) * spec.cells());
}

template <class R>
R batch_loss_and_grads(afno::Network<R>& net, const afno::ModelState<R>& state,
                       const std::vector<const R*>& inputs, const std::vector<const R*>& targets,
                       const std::vector<R>& lat_weights, afno::ModelState<R>& grads) {
    if (inputs.empty() || inputs.size() != targets.size())
        throw ShapeMismatch("batch must be non-empty with matched inputs/targets");
    R total = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        total += net.loss_and_grad(state, inputs[i], targets[i], lat_weights, grads);
    const R inv = static_cast<R>(1) / static_cast<R>(inputs.size());
    for (auto& g : grads.groups())
        for (std::size_t i = 0; i < g.size; ++i) g.data[i] *= inv;
    return total * inv;
}

template <class R>
AdamOptimizer<R>::AdamOptimizer(const afno::ModelConfig& cfg, const TrainConfig& tc)
    : tc_(tc), m_(afno::ModelState<R>::zeros(cfg)), v_(afno::ModelState<R>::zeros(cfg)) {
    tc.validate();
}

template <class R>
void AdamOptimizer<R>::step(afno::ModelState<R>& state, afno::ModelState<R>& grads) {
    double lr = tc_.learning_rate;
    if (tc_.lr_schedule == LrSchedule::Cosine)
        lr *= 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(t_) / tc_.max_steps));
    ++t_;
    const double b1 = tc_.adam_beta1, b2 = tc_.adam_beta2, eps = tc_.adam_epsilon;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));

    auto sg = state.groups();
    auto gg = grads.groups();
    auto mg = m_.groups();
    auto vg = v_.groups();
    for (std::size_t k = 0; k < sg.size(); ++k) {
        for (std::size_t i = 0; i < sg[k].size; ++i) {
            const double g = gg[k].data[i];
            if (!std::isfinite(g))
                throw NumericError("non-finite gradient in group " + gg[k].name);
            const double m = b1 * mg[k].data[i] + (1 - b1) * g;
            const double v = b2 * vg[k].data[i] + (1 - b2) * g * g;
            mg[k].data[i] = static_cast<R>(m);
            vg[k].data[i] = static_cast<R>(v);
            sg[k].data[i] -= static_cast<R>(lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
        }
    }
}

namespace {

struct SampleAssembler {
    const trainer::NormStats* norm;
    std::vector<float> static_norm; // [cells], empty when no static field
    const GridSpec* spec;
    int dyn_channels;

    // input buffer [dyn (+1 static)][H][W], normalized
    void input(const HourlyArchive& shard, int day, std::vector<float>& buf) const {
        const std::size_t cells = spec->cells();
        buf.resize((dyn_channels + (static_norm.empty() ? 0 : 1)) * cells);
        norm->normalize(shard.values.data() + static_cast<std::size_t>(day) * shard.frame_size(),
                        buf.data(), cells);
        if (!static_norm.empty())
            std::copy(static_norm.begin(), static_norm.end(),
                      buf.data() + static_cast<std::size_t>(dyn_channels) * cells);
    }
    void target(const HourlyArchive& shard, int day, std::vector<float>& buf) const {
        const std::size_t cells = spec->cells();
        buf.resize(static_cast<std::size_t>(dyn_channels) * cells);
        norm->normalize(shard.values.data() + static_cast<std::size_t>(day) * shard.frame_size(),
                        buf.data(), cells);
    }
};

double evaluate_mean_loss(afno::Network<float>& net, const afno::ModelState<float>& state,
                          const Dataset& data, const SampleAssembler& asmb,
                          const std::vector<float>& lat_w) {
    double total = 0;
    std::vector<float> in, tgt, out;
    out.resize(static_cast<std::size_t>(net.config().out_channels) * net.config().n_lat *
               net.config().n_lon);
    for (const auto& e : data.manifest.entries) {
        const auto& shard = *data.shards.at(e.lag_hours);
        asmb.input(shard, e.input_day, in);
        asmb.target(shard, e.target_day, tgt);
        net.forward(state, in.data(), out.data());
        total += net.loss(out.data(), tgt.data(), lat_w);
    }
    return total / static_cast<double>(data.manifest.entries.size());
}

} // namespace

TrainResult train(const Dataset& data, const Dataset* validation,
                  const HourlyArchive* static_field, afno::ModelConfig model_cfg,
                  const TrainConfig& tc) {
    tc.validate();
    if (data.manifest.entries.empty()) throw ShapeMismatch("empty training manifest");
    for (const auto& e : data.manifest.entries) {
        const auto it = data.shards.find(e.lag_hours);
        if (it == data.shards.end())
            throw ShapeMismatch("manifest references missing lag shard " + std::to_string(e.lag_hours));
        if (e.input_day >= it->second->n_time || e.target_day >= it->second->n_time)
            throw ShapeMismatch("manifest references day beyond shard");
    }

    const HourlyArchive& ref = *data.shards.begin()->second;
    const int dyn = ref.catalog.size();
    if (model_cfg.out_channels == 0) model_cfg.out_channels = dyn;
    if (model_cfg.in_channels == 0) model_cfg.in_channels = dyn + (static_field ? 1 : 0);
    if (model_cfg.n_lat == 0) model_cfg.n_lat = ref.spec.n_lat;
    if (model_cfg.n_lon == 0) model_cfg.n_lon = ref.spec.n_lon;
    model_cfg.validate();

    TrainResult res;
    // normalization statistics from the lag0 training stream when present,
    // otherwise from the first shard
    const HourlyArchive& stat_shard =
        data.shards.count(0) ? *data.shards.at(0) : ref;
    res.norm = compute_norm_stats(stat_shard, 0, stat_shard.n_time);

    SampleAssembler asmb;
    asmb.norm = &res.norm;
    asmb.spec = &ref.spec;
    asmb.dyn_channels = dyn;
    if (static_field) {
        if (static_field->catalog.size() != 1 || static_field->n_time != 1)
            throw ShapeMismatch("static field must be a single-time single-variable archive");
        const std::size_t cells = ref.spec.cells();
        double mu = 0;
        for (std::size_t i = 0; i < cells; ++i) mu += static_field->values[i];
        mu /= static_cast<double>(cells);
        double var = 0;
        for (std::size_t i = 0; i < cells; ++i) {
            const double d = static_field->values[i] - mu;
            var += d * d;
        }
        double sd = std::sqrt(var / (static_cast<double>(cells) - 1));
        if (!(sd > 0)) sd = 1.0; // flat orography normalizes to zero
        res.static_mean = mu;
        res.static_std = sd;
        asmb.static_norm.resize(cells);
        for (std::size_t i = 0; i < cells; ++i)
            asmb.static_norm[i] = static_cast<float>((static_field->values[i] - mu) / sd);
    }

    const auto lat_w_d = scorecard::lat_weights(ref.spec);
    std::vector<float> lat_w(lat_w_d.begin(), lat_w_d.end());

    afno::Network<float> net(model_cfg);
    auto state = afno::ModelState<float>::init(model_cfg, tc.seed);
    AdamOptimizer<float> opt(model_cfg, tc);

    std::mt19937_64 rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(data.manifest.entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size(); // forces a shuffle at step 0

    std::vector<std::vector<float>> in_bufs(tc.batch_size), tgt_bufs(tc.batch_size);
    double best_val = std::numeric_limits<double>::infinity();
    res.best_state = state;

    for (int step = 0; step < tc.max_steps; ++step) {
        std::vector<const float*> inputs, targets;
        for (int b = 0; b < tc.batch_size; ++b) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const auto& e = data.manifest.entries[order[cursor++]];
            const auto& shard = *data.shards.at(e.lag_hours);
            asmb.input(shard, e.input_day, in_bufs[b]);
            asmb.target(shard, e.target_day, tgt_bufs[b]);
            inputs.push_back(in_bufs[b].data());
            targets.push_back(tgt_bufs[b].data());
        }

        auto grads = afno::ModelState<float>::zeros(model_cfg);
        const double l = batch_loss_and_grads(net, state, inputs, targets, lat_w, grads);
        if (!std::isfinite(l))
            throw NumericError("non-finite loss at step " + std::to_string(step));
        res.loss_trace.emplace_back(step, l);
        opt.step(state, grads);

        if (validation && ((step + 1) % tc.checkpoint_every == 0 || step + 1 == tc.max_steps)) {
            const double vl = evaluate_mean_loss(net, state, *validation, asmb, lat_w);
            res.val_trace.emplace_back(step, vl);
            if (vl < best_val) {
                best_val = vl;
                res.best_state = state;
            }
        }
    }

    res.state = state;
    if (!validation) res.best_state = state;
    return res;
}

void write_loss_trace(const std::vector<std::pair<int, double>>& trace, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    char buf[64];
    for (const auto& [step, loss] : trace) {
        std::snprintf(buf, sizeof(buf), "%d\t%.9g\n", step, loss);
        out << buf;
    }
    if (!out) throw IoError("write failure: " + path);
}

template float batch_loss_and_grads<float>(afno::Network<float>&, const afno::ModelState<float>&,
                                           const std::vector<const float*>&,
                                           const std::vector<const float*>&,
                                           const std::vector<float>&, afno::ModelState<float>&);
template double batch_loss_and_grads<double>(afno::Network<double>&, const afno::ModelState<double>&,
                                             const std::vector<const double*>&,
                                             const std::vector<const double*>&,
                                             const std::vector<double>&, afno::ModelState<double>&);
template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

} // namespace trainer
} // namespace ddw
