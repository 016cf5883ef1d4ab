// ddw: desk-scale data-driven weather workbench.
//
// Subcommands: synth, augment, train, infer, eval, compare. Every command
// writes a manifest into --out before doing work, never mutates its inputs,
// and is deterministic for a fixed seed in single-threaded mode.
//
// Exit codes: 0 success, 2 config/usage, 3 data inconsistency, 4 numerical
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddw/calendar.hpp"
#include "ddw/rollout.hpp"
#include "ddw/scorecard.hpp"
#include "ddw/slidewin.hpp"
#include "ddw/synthgen.hpp"
#include "ddw/trainer.hpp"

namespace fs = std::filesystem;
using namespace ddw;

namespace {

struct GlobalOpts {
    int threads = 1;
};

void write_manifest(const std::string& out_dir, const std::string& run,
                    const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& fields) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "manifest.txt", std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + out_dir);
    out << "run=" << run << "\n";
    out << "command=" << command << "\n";
    for (const auto& [k, v] : fields) out << k << "=" << v << "\n";
    out << "out=" << out_dir << "\n";
}

std::string shard_name(int lag) { return "shard_lag" + std::to_string(lag) + ".grd"; }

// (year, 0-based day of year) of an epoch-hour timestamp
std::pair<int, int> epoch_to_date(std::int64_t epoch_hours) {
    using namespace std::chrono;
    const sys_days d(days(epoch_hours / 24));
    const year_month_day ymd(d);
    const sys_days jan1(year_month_day(ymd.year(), January, day(1)));
    return {static_cast<int>(ymd.year()), static_cast<int>((d - jan1).count())};
}

trainer::NormStats load_norm(const std::string& path) { return trainer::read_norm_stats(path); }

// ---------------------------------------------------------------- synth ----

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              const std::string& run) {
    auto cfg = synthgen::SynthConfig::from_file(config_path);
    write_manifest(out_dir, run, "synth",
                   {{"config", config_path}, {"seed", std::to_string(cfg.seed)}});
    auto archive = synthgen::generate(cfg);
    const std::string path = (fs::path(out_dir) / "archive.grd").string();
    write_archive(archive, path);
    std::printf("synth: %d vars, %d hourly steps (%d days) -> %s\n", cfg.n_vars, archive.n_time,
                cfg.total_days(), path.c_str());
    return 0;
}

// -------------------------------------------------------------- augment ----

int cmd_augment(const std::string& in_path, const std::string& lags_csv, int dt,
                const std::string& out_dir, const std::string& run, int threads) {
    auto lags = slidewin::LagSet::parse(lags_csv);
    write_manifest(out_dir, run, "augment",
                   {{"in", in_path}, {"lags", lags_csv}, {"dt", std::to_string(dt)}});
    auto archive = read_archive(in_path);
    auto aug = slidewin::augment(archive, lags, threads);

    long long total = 0;
    std::size_t cursor = 0;
    for (int lag : lags.lags_hours) {
        const auto& days = aug.days_per_lag.at(lag);
        std::vector<DailySample> stream(aug.samples.begin() + cursor,
                                        aug.samples.begin() + cursor + days.size());
        cursor += days.size();
        auto shard = slidewin::samples_to_shard(archive, stream, lag);
        write_archive(shard, (fs::path(out_dir) / shard_name(lag)).string());
        std::printf("augment: lag %2d -> %zu samples\n", lag, days.size());
        total += static_cast<long long>(days.size());
    }
    auto pairs = slidewin::build_pairs(aug.days_per_lag, dt);
    slidewin::write_pairs_tsv(pairs, (fs::path(out_dir) / "pairs.tsv").string());
    std::printf("augment: %lld samples, %zu pairs (dt=%d), %lld skipped windows\n", total,
                pairs.entries.size(), dt, aug.skipped_windows);
    return 0;
}

// ---------------------------------------------------------------- train ----

int cmd_train(const std::string& data_dir, const std::string& lags_csv,
              const std::string& static_path, const std::string& out_dir,
              const std::string& run, const afno::ModelConfig& model_in,
              const trainer::TrainConfig& tc, int val_days) {
    auto lags = slidewin::LagSet::parse(lags_csv);
    write_manifest(out_dir, run, "train",
                   {{"data", data_dir},
                    {"lags", lags_csv},
                    {"static", static_path.empty() ? "-" : static_path},
                    {"seed", std::to_string(tc.seed)},
                    {"steps", std::to_string(tc.max_steps)}});

    std::map<int, HourlyArchive> shards;
    trainer::Dataset data;
    for (int lag : lags.lags_hours) {
        const auto path = fs::path(data_dir) / shard_name(lag);
        shards[lag] = read_archive(path.string());
        data.shards[lag] = &shards.at(lag);
    }
    auto all_pairs = slidewin::read_pairs_tsv((fs::path(data_dir) / "pairs.tsv").string());
    std::set<int> lagset(lags.lags_hours.begin(), lags.lags_hours.end());
    data.manifest.dt_days = all_pairs.dt_days;
    int max_target = 0;
    for (const auto& e : all_pairs.entries)
        if (lagset.count(e.lag_hours)) {
            data.manifest.entries.push_back(e);
            max_target = std::max(max_target, e.target_day);
        }
    if (data.manifest.entries.empty())
        throw ShapeMismatch("no training pairs for the requested lags in " + data_dir);

    trainer::Dataset val;
    if (val_days > 0) {
        val.shards = data.shards;
        val.manifest.dt_days = data.manifest.dt_days;
        std::vector<slidewin::PairEntry> keep;
        for (const auto& e : data.manifest.entries)
            (e.target_day > max_target - val_days ? val.manifest.entries : keep).push_back(e);
        data.manifest.entries = std::move(keep);
        if (data.manifest.entries.empty())
            throw ShapeMismatch("validation split leaves no training pairs");
    }

    HourlyArchive static_field;
    const HourlyArchive* static_ptr = nullptr;
    if (!static_path.empty()) {
        static_field = read_archive(static_path);
        static_ptr = &static_field;
    }

    auto result = trainer::train(data, val_days > 0 ? &val : nullptr, static_ptr, model_in, tc);

    afno::write_checkpoint(result.best_state, (fs::path(out_dir) / "model.afn").string());
    trainer::write_norm_stats(result.norm, (fs::path(out_dir) / "norm.tsv").string());
    trainer::write_loss_trace(result.loss_trace, (fs::path(out_dir) / "loss.txt").string());
    if (!result.val_trace.empty())
        trainer::write_loss_trace(result.val_trace, (fs::path(out_dir) / "val_loss.txt").string());
    if (static_ptr) {
        std::ofstream s(fs::path(out_dir) / "static_norm.tsv", std::ios::trunc);
        char buf[80];
        std::snprintf(buf, sizeof(buf), "%.17g\t%.17g\n", result.static_mean, result.static_std);
        s << buf;
    }
    std::printf("train: %zu pairs, %d steps, final loss %.6g -> %s\n",
                data.manifest.entries.size(), tc.max_steps, result.loss_trace.back().second,
                (fs::path(out_dir) / "model.afn").string().c_str());
    return 0;
}

// ---------------------------------------------------------------- infer ----

int cmd_infer(const std::string& model_path, const std::string& norm_path,
              const std::string& analysis_path, const std::string& static_path,
              const std::string& static_norm_path, const std::string& init_csv, int every,
              int max_lead, const std::string& out_dir, const std::string& run) {
    write_manifest(out_dir, run, "infer",
                   {{"model", model_path},
                    {"norm", norm_path},
                    {"analysis", analysis_path},
                    {"max_lead", std::to_string(max_lead)}});

    auto state = afno::read_checkpoint(model_path);
    auto norm = load_norm(norm_path);
    auto analysis = read_archive(analysis_path);
    if (analysis.step_hours != 24)
        throw ShapeMismatch("analysis must be a daily shard (step_hours=24)");
    if (norm.n_channels() != analysis.catalog.size())
        throw ShapeMismatch("normalization channel count does not match the analysis shard");

    std::vector<float> static_norm;
    if (!static_path.empty()) {
        auto sf = read_archive(static_path);
        if (sf.spec != analysis.spec || sf.catalog.size() != 1 || sf.n_time != 1)
            throw ShapeMismatch("static field must be a single-variable single-time grid");
        std::ifstream sn(static_norm_path);
        double mean = 0, sd = 1;
        if (!(sn >> mean >> sd)) throw IoError("cannot read static norm: " + static_norm_path);
        static_norm.resize(sf.spec.cells());
        for (std::size_t i = 0; i < static_norm.size(); ++i)
            static_norm[i] = static_cast<float>((sf.values[i] - mean) / sd);
    }

    std::vector<int> init_days;
    if (!init_csv.empty()) {
        std::stringstream ss(init_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) init_days.push_back(std::stoi(tok));
    } else {
        for (int d = 0; d < analysis.n_time - 1; d += every) init_days.push_back(d);
    }
    for (int d : init_days)
        if (d < 0 || d >= analysis.n_time)
            throw IndexOutOfRange("init day " + std::to_string(d) + " outside the analysis shard");

    afno::Network<float> net(state.cfg);
    auto step = rollout::model_step(net, state, static_norm);
    auto trajs = rollout::run_schedule(step, analysis, norm, init_days, max_lead);

    const int year = epoch_to_date(analysis.start_epoch_hours).first;
    int truncated = 0;
    for (const auto& t : trajs) {
        rollout::write_trajectory(t, analysis, year, out_dir);
        truncated += t.truncated ? 1 : 0;
    }
    std::printf("infer: %zu trajectories (max lead %d, %d truncated) -> %s\n", trajs.size(),
                max_lead, truncated, out_dir.c_str());
    return 0;
}

// ----------------------------------------------------------------- eval ----

int cmd_eval(const std::string& forecast_dir, const std::string& analysis_path,
             const std::string& out_dir, const std::string& run, bool reference_paper) {
    write_manifest(out_dir, run, "eval",
                   {{"forecasts", forecast_dir}, {"analysis", analysis_path}});

    auto analysis = read_archive(analysis_path);
    if (analysis.step_hours != 24)
        throw ShapeMismatch("analysis must be a daily shard (step_hours=24)");
    const auto [first_year, day0] = epoch_to_date(analysis.start_epoch_hours);
    if (day0 != 0) throw ShapeMismatch("analysis shard must start on Jan 1");

    // The shard either follows the real calendar (leap-aware synthetic or
    // reanalysis data) or is built from idealized 365-day years; detect which
    // from its length and build the climatology accordingly.
    bool real_calendar = false;
    int last_year = first_year;
    {
        long long acc = 0;
        for (int y = first_year; acc < analysis.n_time; ++y) {
            acc += calendar::days_in_year(y);
            if (acc == analysis.n_time) {
                real_calendar = true;
                last_year = y;
            }
        }
    }
    scorecard::Climatology clim;
    if (real_calendar) {
        clim = scorecard::build_climatology(analysis, first_year, last_year);
    } else {
        if (analysis.n_time % 365 != 0)
            throw ShapeMismatch("analysis shard covers neither whole calendar years "
                                "nor whole idealized 365-day years");
        clim.spec = analysis.spec;
        clim.catalog = analysis.catalog;
        clim.first_year = first_year;
        clim.last_year = first_year + analysis.n_time / 365 - 1;
        clim.n_days = 365;
        const std::size_t frame = analysis.frame_size();
        std::vector<double> sum(365 * frame, 0.0);
        const int n_years = analysis.n_time / 365;
        for (int t = 0; t < analysis.n_time; ++t) {
            const float* src = analysis.values.data() + static_cast<std::size_t>(t) * frame;
            double* dst = sum.data() + static_cast<std::size_t>(t % 365) * frame;
            for (std::size_t i = 0; i < frame; ++i) dst[i] += src[i];
        }
        clim.values.resize(sum.size());
        for (std::size_t i = 0; i < sum.size(); ++i)
            clim.values[i] = static_cast<float>(sum[i] / n_years);
    }
    auto weights = scorecard::lat_weights(analysis.spec);

    // collect forecast trajectory files, ordered by name for determinism
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(forecast_dir))
        if (e.path().extension() == ".grd" &&
            e.path().filename().string().rfind("fc_", 0) == 0)
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no fc_*.grd trajectories in " + forecast_dir);

    // (variable, lead) -> accumulated weighted MSE and ACC over cases
    struct Cell {
        double mse_sum = 0, acc_sum = 0;
        int n = 0;
    };
    std::map<std::pair<std::string, int>, Cell> cells;

    for (const auto& path : files) {
        auto fc = read_archive(path.string());
        if (fc.spec != analysis.spec || fc.catalog != analysis.catalog)
            throw ShapeMismatch("forecast grid/catalog mismatch: " + path.string());
        // lead-1 valid time is encoded in the file's start epoch
        const long long lead1_day =
            (fc.start_epoch_hours - analysis.start_epoch_hours) / 24;
        for (int lead = 1; lead <= fc.n_time; ++lead) {
            const long long vday = lead1_day + (lead - 1);
            if (vday >= analysis.n_time) break; // truncated trajectory
            const int doy =
                real_calendar
                    ? epoch_to_date(analysis.start_epoch_hours + 24 * vday).second
                    : static_cast<int>(vday % 365);
            for (int v = 0; v < fc.catalog.size(); ++v) {
                const float* f = fc.frame(lead - 1, v);
                const float* o = analysis.frame(static_cast<int>(vday), v);
                auto& cell = cells[{fc.catalog.entries[v].key(), lead}];
                cell.mse_sum += scorecard::weighted_mse(f, o, analysis.spec, weights);
                cell.acc_sum += scorecard::acc(f, o, clim.slice(doy, v), analysis.spec, weights);
                cell.n += 1;
            }
        }
    }

    scorecard::ScoreTable table;
    table.run = run;
    for (const auto& [key, cell] : cells)
        table.rows.push_back({key.first, key.second, std::sqrt(cell.mse_sum / cell.n),
                              cell.acc_sum / cell.n, cell.n});
    const std::string scores_path = (fs::path(out_dir) / "scores.csv").string();
    scorecard::write_scores_csv(table, scores_path);
    std::printf("eval: %zu trajectories, %zu score rows -> %s\n", files.size(),
                table.rows.size(), scores_path.c_str());
    if (reference_paper) std::fputs(scorecard::format_reference_table().c_str(), stdout);
    return 0;
}

// -------------------------------------------------------------- compare ----

int cmd_compare(const std::string& a_path, const std::string& b_path,
                const std::string& out_dir, const std::string& run) {
    write_manifest(out_dir, run, "compare", {{"a", a_path}, {"b", b_path}});
    auto a = scorecard::read_scores_csv(a_path);
    auto b = scorecard::read_scores_csv(b_path);
    auto rows = scorecard::compare(a, b);
    const std::string path = (fs::path(out_dir) / "compare.csv").string();
    scorecard::write_compare_csv(rows, a.run, b.run, path);
    std::printf("compare: %zu overlapping rows -> %s\n", rows.size(), path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale data-driven weather workbench"};
    app.require_subcommand(1);
    GlobalOpts g;
    app.add_option("--threads", g.threads, "global worker cap")->check(CLI::PositiveNumber);

    std::string run = "run", out_dir;

    auto* synth = app.add_subcommand("synth", "generate a synthetic hourly archive");
    std::string synth_config;
    synth->add_option("--config", synth_config, "synth config file")->required();
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--run", run, "run name");

    auto* augment = app.add_subcommand("augment", "lagged daily-mean shards + pair manifest");
    std::string aug_in, aug_lags = "0";
    int aug_dt = 1;
    augment->add_option("--in", aug_in, "hourly GRD1 archive")->required();
    augment->add_option("--lags", aug_lags, "comma-separated lags from {0,6,12,18}");
    augment->add_option("--dt", aug_dt, "pair step in days")->check(CLI::PositiveNumber);
    augment->add_option("--out", out_dir, "output directory")->required();
    augment->add_option("--run", run, "run name");

    auto* train = app.add_subcommand("train", "train the forecast model");
    std::string train_data, train_lags = "0", train_static, lr_schedule = "cosine",
                spectral = "relu";
    afno::ModelConfig mc;
    mc.embed_dim = 32;
    mc.n_blocks = 2;
    mc.n_freq_blocks = 4;
    trainer::TrainConfig tc;
    int val_days = 0;
    train->add_option("--data", train_data, "augment output directory")->required();
    train->add_option("--lags", train_lags, "lag streams to train on");
    train->add_option("--static", train_static, "static field GRD1 (e.g. orography)");
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--run", run, "run name");
    train->add_option("--embed", mc.embed_dim, "embedding dimension");
    train->add_option("--blocks", mc.n_blocks, "transformer blocks");
    train->add_option("--freq-blocks", mc.n_freq_blocks, "spectral block-diagonal count");
    train->add_option("--mlp-ratio", mc.mlp_ratio, "channel MLP expansion");
    train->add_option("--lambda", mc.softshrink_lambda, "spectral soft shrinkage");
    train->add_option("--spectral", spectral, "spectral activation: relu|identity");
    train->add_option("--lr", tc.learning_rate, "peak learning rate");
    train->add_option("--batch", tc.batch_size, "batch size");
    train->add_option("--steps", tc.max_steps, "optimizer steps");
    train->add_option("--schedule", lr_schedule, "lr schedule: cosine|constant");
    train->add_option("--seed", tc.seed, "training seed");
    train->add_option("--checkpoint-every", tc.checkpoint_every, "validation cadence");
    train->add_option("--val-days", val_days, "hold out pairs targeting the last N days");

    auto* infer = app.add_subcommand("infer", "autoregressive multi-day forecasts");
    std::string inf_model, inf_norm, inf_analysis, inf_static, inf_static_norm, inf_inits;
    int inf_every = 7, inf_max_lead = 7;
    infer->add_option("--model", inf_model, "AFN1 checkpoint")->required();
    infer->add_option("--norm", inf_norm, "normalization stats tsv")->required();
    infer->add_option("--analysis", inf_analysis, "lag0 daily shard")->required();
    infer->add_option("--static", inf_static, "static field GRD1");
    infer->add_option("--static-norm", inf_static_norm, "static field stats tsv");
    infer->add_option("--init-days", inf_inits, "explicit comma-separated init days");
    infer->add_option("--every", inf_every, "init-day stride when --init-days is absent")
        ->check(CLI::PositiveNumber);
    infer->add_option("--max-lead", inf_max_lead, "forecast horizon in days")
        ->check(CLI::PositiveNumber);
    infer->add_option("--out", out_dir, "output directory")->required();
    infer->add_option("--run", run, "run name");

    auto* eval = app.add_subcommand("eval", "score forecasts against the analysis");
    std::string ev_forecasts, ev_analysis, ev_reference;
    eval->add_option("--forecasts", ev_forecasts, "directory of fc_*.grd")->required();
    eval->add_option("--analysis", ev_analysis, "verifying daily shard")->required();
    eval->add_option("--reference", ev_reference, "'paper' appends the published table");
    eval->add_option("--out", out_dir, "output directory")->required();
    eval->add_option("--run", run, "run name");

    auto* compare = app.add_subcommand("compare", "delta two scores.csv files");
    std::string cmp_a, cmp_b;
    compare->add_option("--a", cmp_a, "scores.csv of run A")->required();
    compare->add_option("--b", cmp_b, "scores.csv of run B")->required();
    compare->add_option("--out", out_dir, "output directory")->required();
    compare->add_option("--run", run, "run name");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(synth_config, out_dir, run);
        if (*augment) return cmd_augment(aug_in, aug_lags, aug_dt, out_dir, run, g.threads);
        if (*train) {
            if (lr_schedule == "constant") tc.lr_schedule = trainer::LrSchedule::Constant;
            else if (lr_schedule != "cosine") throw IoError("unknown schedule: " + lr_schedule);
            if (spectral == "identity")
                mc.spectral_activation = afno::SpectralActivation::Identity;
            else if (spectral != "relu") throw IoError("unknown spectral activation: " + spectral);
            return cmd_train(train_data, train_lags, train_static, out_dir, run, mc, tc,
                             val_days);
        }
        if (*infer)
            return cmd_infer(inf_model, inf_norm, inf_analysis, inf_static, inf_static_norm,
                             inf_inits, inf_every, inf_max_lead, out_dir, run);
        if (*eval) {
            if (!ev_reference.empty() && ev_reference != "paper")
                throw IoError("unknown reference source: " + ev_reference);
            return cmd_eval(ev_forecasts, ev_analysis, out_dir, run, ev_reference == "paper");
        }
        if (*compare) return cmd_compare(cmp_a, cmp_b, out_dir, run);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const ZeroAnomalyNorm& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const IoError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "data inconsistency: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
