#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "occuforge/cli.hpp"
#include "occuforge/error.hpp"

namespace occuforge::cli {

using models::HybridModel;
using models::RecurrentKind;

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    return out;
}

bool wanted(const RunConfig& config, const std::string& id) {
    return config.chargers.empty() ||
           std::find(config.chargers.begin(), config.chargers.end(), id) != config.chargers.end();
}

void check_requested(const RunConfig& config, std::span<const OccupancySeries> series) {
    for (const auto& id : config.chargers) {
        const bool found = std::any_of(series.begin(), series.end(),
                                       [&](const OccupancySeries& s) { return s.charger_id() == id; });
        if (!found) throw ConfigError(fmt::format("charger '{}' not found in the input", id));
    }
}

std::vector<PreparedCharger> prepare_all(std::span<const OccupancySeries> series, double fraction) {
    std::vector<PreparedCharger> out;
    for (const auto& s : series) out.push_back(prepare_charger(s, fraction));
    return out;
}

nn::TrainHyperparams hyperparams_for(const RunConfig& config, std::uint64_t seed) {
    nn::TrainHyperparams hp = config.train;
    // Separate stream from weight initialisation.
    hp.seed = seed + 0x9e3779b97f4a7c15ULL;
    return hp;
}

RecurrentKind kind_of(const std::string& method) { return method == "gru" ? RecurrentKind::gru : RecurrentKind::lstm; }

models::RecurrentBaseline train_baseline(const RunConfig& config, RecurrentKind kind,
                                         std::span<const PreparedCharger> data, int k, std::uint64_t seed) {
    const int frames = config.baseline_frames;
    std::vector<nn::Batch> parts;
    for (const auto& d : data) {
        const auto train = d.full.slice(0, d.n_train);
        const auto kk = static_cast<std::size_t>(k);
        if (train.size() < static_cast<std::size_t>(frames) + kk) {
            throw Error(fmt::format("training split of {} is too short for k = {}", d.full.charger_id(), k));
        }
        parts.push_back(models::build_frame_batch(train, d.profiles, static_cast<std::size_t>(frames),
                                                  train.size() - kk, frames, k));
    }
    const nn::Batch batch = nn::concatenate(parts);
    auto model = models::build_baseline_recurrent(
        kind, config.baseline_config(kind, k, data.front().full.slots_per_day()), seed);
    nn::train(model, batch, hyperparams_for(config, seed));
    return model;
}

/// Looks up precomputed thresholded windows by step.
eval::RollingResult evaluate_probabilities(const nn::Matrix& probs, double threshold, const PreparedCharger& d,
                                           int k) {
    const eval::WindowPredictor predictor = [&](std::size_t t) {
        const auto col = static_cast<Eigen::Index>(t - d.n_train);
        std::vector<std::uint8_t> out(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = probs(i, col) >= threshold ? 1 : 0;
        return out;
    };
    return eval::rolling_evaluate(predictor, d.full, d.n_train, k);
}

void check_test_windows(const PreparedCharger& d, int k) {
    if (d.n_train + static_cast<std::size_t>(k) > d.full.size()) {
        throw Error(fmt::format("test split of {} has no complete {}-step window", d.full.charger_id(), k));
    }
}

}  // namespace

IngestOutcome ingest_sessions(const RunConfig& config) {
    std::ifstream in(config.sessions_csv);
    if (!in) throw ConfigError(fmt::format("cannot open {}", config.sessions_csv.string()));
    auto parsed = ingest::parse_sessions(in, config.columns);

    IngestOutcome outcome;
    outcome.rejected = std::move(parsed.rejected);
    outcome.sessions_parsed = parsed.sessions.size();

    // Outlier statistics are per charger class.
    std::map<ingest::ChargerClass, std::vector<ingest::ChargingSession>> by_class;
    for (auto& s : parsed.sessions) {
        if (config.charger_class && s.charger_class != *config.charger_class) continue;
        if (!wanted(config, s.charger_id)) continue;
        by_class[s.charger_class].push_back(std::move(s));
    }
    std::vector<ingest::ChargingSession> kept;
    for (auto& [cls, sessions] : by_class) {
        outcome.sessions_selected += sessions.size();
        if (config.remove_outliers) {
            auto split = ingest::remove_outliers(sessions);
            outcome.outliers_removed += split.removed.size();
            kept.insert(kept.end(), split.kept.begin(), split.kept.end());
        } else {
            kept.insert(kept.end(), sessions.begin(), sessions.end());
        }
    }
    if (kept.empty()) throw Error("no sessions left after filtering");
    outcome.outlier_fraction =
        static_cast<double>(outcome.outliers_removed) / static_cast<double>(outcome.sessions_selected);

    std::vector<std::string> ids;
    for (const auto& s : kept) ids.push_back(s.charger_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    const auto range = ingest::covering_range(kept);
    for (const auto& id : ids) outcome.series.push_back(ingest::discretize(kept, id, range, config.delta_minutes));
    return outcome;
}

std::vector<OccupancySeries> load_series(const RunConfig& config) {
    std::vector<OccupancySeries> series;
    if (!config.occupancy_csv.empty()) {
        std::ifstream in(config.occupancy_csv);
        if (!in) throw ConfigError(fmt::format("cannot open {}", config.occupancy_csv.string()));
        for (auto& s : ingest::read_occupancy_csv(in, config.delta_minutes)) {
            if (wanted(config, s.charger_id())) series.push_back(std::move(s));
        }
        std::sort(series.begin(), series.end(),
                  [](const OccupancySeries& a, const OccupancySeries& b) { return a.charger_id() < b.charger_id(); });
    } else {
        series = ingest_sessions(config).series;
    }
    check_requested(config, series);
    if (series.empty()) throw Error("no charger series to work on");
    return series;
}

PreparedCharger prepare_charger(const OccupancySeries& series, double split_fraction) {
    auto split = ingest::split_train_test(series, split_fraction);
    PreparedCharger d;
    d.full = series;
    d.n_train = split.train.size();
    d.profiles = features::day_type_profile(split.train);
    return d;
}

std::uint64_t run_seed(std::uint64_t base, int run) { return base + static_cast<std::uint64_t>(run); }

HybridModel train_hybrid(const RunConfig& config, std::span<const PreparedCharger> data, int k, std::uint64_t seed,
                         nn::TrainResult* result) {
    if (data.empty()) throw Error("no training data");
    std::vector<nn::Batch> parts;
    for (const auto& d : data) {
        const auto train = d.full.slice(0, d.n_train);
        parts.push_back(models::to_batch(features::build_dataset(train, d.profiles, config.m, k)));
    }
    const nn::Batch batch = nn::concatenate(parts);
    auto model = HybridModel::initialized(config.hybrid_config(k, data.front().full.slots_per_day()), seed);
    auto r = nn::train(model, batch, hyperparams_for(config, seed));
    if (result) *result = std::move(r);
    return model;
}

eval::RollingResult evaluate_hybrid(const HybridModel& model, const PreparedCharger& d) {
    const int k = model.config().k;
    check_test_windows(d, k);
    std::vector<features::Sample> samples;
    for (std::size_t t = d.n_train; t + static_cast<std::size_t>(k) <= d.full.size(); ++t) {
        samples.push_back(features::build_sample(d.full, d.profiles, t, model.config().m, k));
    }
    const nn::Matrix probs = model.predict(models::to_batch(samples));
    return evaluate_probabilities(probs, model.config().threshold, d, k);
}

std::vector<eval::RollingResult> run_method(const RunConfig& config, const std::string& method,
                                            std::span<const PreparedCharger> data, int k, std::uint64_t seed) {
    std::vector<eval::RollingResult> out;
    if (method == "hybrid") {
        if (config.pooled) {
            const auto model = train_hybrid(config, data, k, seed);
            for (const auto& d : data) out.push_back(evaluate_hybrid(model, d));
        } else {
            for (const auto& d : data) out.push_back(evaluate_hybrid(train_hybrid(config, std::span(&d, 1), k, seed), d));
        }
    } else if (method == "lstm" || method == "gru") {
        const auto kind = kind_of(method);
        auto score = [&](const models::RecurrentBaseline& model, const PreparedCharger& d) {
            check_test_windows(d, k);
            const auto batch = models::build_frame_batch(d.full, d.profiles, d.n_train,
                                                         d.full.size() - static_cast<std::size_t>(k),
                                                         config.baseline_frames, k);
            return evaluate_probabilities(model.predict(batch), config.threshold, d, k);
        };
        if (config.pooled) {
            const auto model = train_baseline(config, kind, data, k, seed);
            for (const auto& d : data) out.push_back(score(model, d));
        } else {
            for (const auto& d : data) out.push_back(score(train_baseline(config, kind, std::span(&d, 1), k, seed), d));
        }
    } else if (method == "logistic") {
        auto fit = [&](std::span<const PreparedCharger> part) {
            std::vector<models::Model1Features> x;
            std::vector<std::uint8_t> y;
            for (const auto& d : part) {
                for (std::size_t t = 3; t < d.n_train; ++t) {
                    x.push_back(models::model1_features(d.full, t));
                    y.push_back(d.full[t]);
                }
            }
            return models::logistic_fit(x, y, {config.logistic_steps, config.logistic_learning_rate, seed});
        };
        auto score = [&](const models::LogisticModel& model, const PreparedCharger& d) {
            check_test_windows(d, k);
            const models::SingleStepClassifier clf = [&](const models::Model1Features& f) {
                return models::logistic_predict(model, f);
            };
            const eval::WindowPredictor predictor = [&](std::size_t t) {
                return models::walk_forward_predict(clf, d.full, t, k, config.threshold);
            };
            return eval::rolling_evaluate(predictor, d.full, d.n_train, k);
        };
        if (config.pooled) {
            const auto model = fit(data);
            for (const auto& d : data) out.push_back(score(model, d));
        } else {
            for (const auto& d : data) out.push_back(score(fit(std::span(&d, 1)), d));
        }
    } else {
        throw ConfigError(fmt::format("unknown method '{}'", method));
    }
    return out;
}

eval::EvalReport evaluate_all(const RunConfig& config, std::span<const OccupancySeries> series) {
    const auto data = prepare_all(series, config.split_fraction);
    eval::EvalReport report;
    for (const auto& method : config.methods) {
        const std::size_t first = report.entries.size();
        for (const auto& d : data) {
            for (int k : config.k_list) {
                eval::EvalEntry e;
                e.method = method;
                e.charger_id = d.full.charger_id();
                e.k = k;
                report.entries.push_back(std::move(e));
            }
        }
        for (std::size_t ki = 0; ki < config.k_list.size(); ++ki) {
            const int k = config.k_list[ki];
            for (int run = 0; run < config.runs; ++run) {
                const auto results = run_method(config, method, data, k, run_seed(config.seed, run));
                for (std::size_t c = 0; c < data.size(); ++c) {
                    auto& e = report.entries[first + c * config.k_list.size() + ki];
                    e.runs.push_back({run, results[c].mean_accuracy, results[c].mean_f1, results[c].windows});
                }
            }
        }
    }
    return report;
}

void write_eval_outputs(const RunConfig& config, const eval::EvalReport& report) {
    for (const auto& method : config.methods) {
        auto out = open_out(config.output_dir / fmt::format("report_{}.csv", method));
        eval::write_report_csv(out, report, method);
    }
    auto summary = open_out(config.output_dir / "summary.txt");
    eval::write_summary(summary, report);
}

std::vector<eval::SweepRow> run_sweep(const RunConfig& config, std::span<const OccupancySeries> series,
                                      const std::string& param, std::span<const std::string> grid) {
    // Validate every grid value before spending time on training.
    std::vector<RunConfig> variants;
    for (const auto& value : grid) {
        RunConfig c = config;
        set_config_value(c, param, value);
        c.validate();
        variants.push_back(std::move(c));
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < grid.size(); ++i) index.emplace(grid[i], i);

    const eval::SweepTrial trial = [&](const std::string& value, int run) {
        const RunConfig& c = variants[index.at(value)];
        const auto data = prepare_all(series, c.split_fraction);
        const auto results = run_method(c, "hybrid", data, c.sweep_k, run_seed(c.seed, run));
        double sum = 0.0;
        for (const auto& r : results) sum += r.mean_accuracy;
        return sum / static_cast<double>(results.size());
    };
    return eval::sensitivity_sweep(grid, config.runs, trial);
}

void cmd_ingest(const RunConfig& config, std::ostream& log) {
    if (config.sessions_csv.empty()) throw ConfigError("ingest needs sessions_csv");
    const auto outcome = ingest_sessions(config);
    {
        auto out = open_out(config.output_dir / "occupancy.csv");
        ingest::write_occupancy_csv(out, outcome.series);
    }
    {
        auto out = open_out(config.output_dir / "rejects.txt");
        ingest::write_reject_report(out, outcome.rejected);
    }
    for (const auto& s : outcome.series) {
        const auto d = prepare_charger(s, config.split_fraction);
        auto out = open_out(config.output_dir / "profiles" / fmt::format("{}.csv", s.charger_id()));
        features::write_profiles_csv(out, d.profiles);
    }
    auto summary = open_out(config.output_dir / "ingest_summary.txt");
    const std::string text = fmt::format(
        "sessions parsed: {}\nrows rejected: {}\nsessions selected: {}\noutliers removed: {} ({:.4f}%)\n"
        "chargers: {}\nslots per charger: {}\n",
        outcome.sessions_parsed, outcome.rejected.size(), outcome.sessions_selected, outcome.outliers_removed,
        100.0 * outcome.outlier_fraction, outcome.series.size(), outcome.series.front().size());
    summary << text;
    log << text;
}

void cmd_train(const RunConfig& config, const std::string& charger_id, int k, std::ostream& log) {
    if (k < 1) throw ConfigError("k must be >= 1");
    RunConfig c = config;
    c.chargers = {charger_id};
    const auto series = load_series(c);
    const auto data = prepare_charger(series.front(), c.split_fraction);
    nn::TrainResult result;
    const auto model = train_hybrid(c, std::span(&data, 1), k, c.seed, &result);
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        fmt::print(log, "epoch {:>3}  loss {:.6f}\n", e + 1, result.epoch_loss[e]);
    }
    const auto path = c.output_dir / "models" / fmt::format("{}_k{}.ocf", charger_id, k);
    fs::create_directories(path.parent_path());
    save_model(path, model, data.profiles);
    const auto score = evaluate_hybrid(model, data);
    fmt::print(log, "test accuracy {:.4f}  f1 {:.4f}  windows {}\nsaved {}\n", score.mean_accuracy, score.mean_f1,
               score.windows, path.string());
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
    const auto series = load_series(config);
    const auto report = evaluate_all(config, series);
    write_eval_outputs(config, report);
    eval::write_summary(log, report);
}

void cmd_predict(const fs::path& model_path, const fs::path& occupancy_csv, Timestamp at, std::ostream& out) {
    const auto saved = load_model(model_path);
    const int delta = 1440 / saved.profiles.slots_per_day();
    std::ifstream in(occupancy_csv);
    if (!in) throw ConfigError(fmt::format("cannot open {}", occupancy_csv.string()));
    const auto all = ingest::read_occupancy_csv(in, delta);
    const auto it = std::find_if(all.begin(), all.end(), [&](const OccupancySeries& s) {
        return s.charger_id() == saved.profiles.charger_id;
    });
    if (it == all.end()) throw Error(fmt::format("charger '{}' not in {}", saved.profiles.charger_id, occupancy_csv.string()));

    const auto offset = (at - it->slot_start(0)).count();
    const long step = delta * 60L;
    if (offset < 0 || offset % step != 0) {
        throw Error(fmt::format("{} is not a slot start of the observed series", format_timestamp(at)));
    }
    const auto t = static_cast<std::size_t>(offset / step);
    if (t > it->size()) throw Error("forecast start lies beyond the observed history");

    const auto sample = features::build_inference_sample(*it, saved.profiles, t, saved.model.config().m);
    const auto probs = models::hybrid_forward(saved.model, sample, false);
    out << "timestamp_slot_start,probability,state\n";
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const Timestamp ts = at + std::chrono::seconds(step * static_cast<long>(i));
        fmt::print(out, "{},{:.6f},{}\n", format_timestamp(ts), probs[i],
                   probs[i] >= saved.model.config().threshold ? 1 : 0);
    }
}

void cmd_sweep(const RunConfig& config, const std::string& param, std::span<const std::string> grid,
               std::ostream& log) {
    const auto series = load_series(config);
    const auto rows = run_sweep(config, series, param, grid);
    auto out = open_out(config.output_dir / fmt::format("sweep_{}.csv", param));
    eval::write_sweep_csv(out, param, rows);
    fmt::print(log, "{:<12} {:>10}\n", param, "accuracy");
    for (const auto& r : rows) fmt::print(log, "{:<12} {:>10.4f}\n", r.value, r.mean_accuracy);
}

void cmd_synth(const SynthSpec& spec, const fs::path& out_csv, std::ostream& log) {
    const auto series = synth_generate(spec);
    auto out = open_out(out_csv);
    ingest::write_occupancy_csv(out, std::span(&series, 1));
    std::size_t busy = 0;
    for (auto s : series.states()) busy += s;
    fmt::print(log, "wrote {} slots for {} ({:.4f} occupied) to {}\n", series.size(), series.charger_id(),
               static_cast<double>(busy) / static_cast<double>(series.size()), out_csv.string());
}

}  // namespace occuforge::cli
