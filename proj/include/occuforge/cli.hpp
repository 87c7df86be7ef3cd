#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "occuforge/eval.hpp"
#include "occuforge/features.hpp"
#include "occuforge/ingest.hpp"
#include "occuforge/models.hpp"
#include "occuforge/nn.hpp"

namespace occuforge::cli {

namespace fs = std::filesystem;
using features::DayTypeProfiles;
using ingest::OccupancySeries;

// ---------------------------------------------------------------------------
// Run configuration: `key = value` lines, `#` starts a comment.

struct RunConfig {
    fs::path sessions_csv;   // raw sessions; ingested in memory when occupancy_csv is unset
    fs::path occupancy_csv;  // pre-discretised series (e.g. synth output)
    fs::path output_dir = "occuforge-out";

    int delta_minutes = 10;
    double split_fraction = 0.7;
    int m = 12;
    std::vector<int> k_list{1, 3, 6, 12, 24, 36};

    int lstm_hidden = 36;
    std::vector<int> branch_layers{64, 32, 16};
    int branch_depth = 0;  // 0 keeps every entry of branch_layers
    int post_lstm = 16;
    int merge = 32;
    double threshold = 0.5;

    nn::TrainHyperparams train;
    std::uint64_t seed = 1;
    int runs = 10;

    ingest::ColumnMap columns;
    std::optional<ingest::ChargerClass> charger_class = ingest::ChargerClass::rapid;  // nullopt: every class
    std::vector<std::string> chargers;  // empty: every charger of the class
    bool remove_outliers = true;
    bool pooled = false;

    std::vector<std::string> methods{"hybrid"};  // hybrid, lstm, gru, logistic
    int baseline_frames = 3;
    int baseline_hidden = 36;
    int baseline_dense = 32;
    int logistic_steps = 2000;
    double logistic_learning_rate = 0.5;
    int sweep_k = 6;

    models::HybridConfig hybrid_config(int k, int slots_per_day) const;
    models::RecurrentBaselineConfig baseline_config(models::RecurrentKind kind, int k, int slots_per_day) const;
    void validate() const;
};

/// Applies one key. Unknown keys and malformed values throw ConfigError.
/// Relative paths are resolved against `base_dir`.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value,
                      const fs::path& base_dir = {});

RunConfig parse_run_config(std::istream& in, const fs::path& base_dir = {});

/// Parses and validates; referenced input files must exist.
RunConfig load_run_config(const fs::path& path);

std::vector<int> parse_int_list(std::string_view text);
std::vector<std::string> split_list(std::string_view text);

// ---------------------------------------------------------------------------
// Synthetic occupancy: a two-state Markov chain per day type, optionally
// overridden by a fixed per-slot schedule.

struct DayTypeChain {
    double p01 = 0.1;  // P(free -> occupied)
    double p10 = 0.1;  // P(occupied -> free)
    std::vector<std::optional<std::uint8_t>> schedule;  // empty, or one entry per slot of day
};

struct SynthSpec {
    std::string charger_id = "SYN01";
    Date start_date = std::chrono::sys_days{std::chrono::year{2024} / 1 / 1};  // a Monday
    int days = 28;
    int delta_minutes = 10;
    DayTypeChain weekday;
    DayTypeChain weekend;
    std::uint8_t initial_state = 0;  // state before the first slot
    std::uint64_t seed = 1;

    void validate() const;
};

/// One uniform draw per slot, consumed even where the schedule decides, so a
/// schedule change never shifts the random stream of other slots.
OccupancySeries synth_generate(const SynthSpec& spec);

/// Schedule syntax: comma-separated `first-last:state` with inclusive 0-based
/// slot numbers, e.g. `0-47:0,48-96:1,97-143:0`. Unlisted slots stay Markov.
std::vector<std::optional<std::uint8_t>> parse_schedule(std::string_view text, int slots_per_day);

SynthSpec parse_synth_spec(std::istream& in);
SynthSpec load_synth_spec(const fs::path& path);

// ---------------------------------------------------------------------------
// Model container

inline constexpr int kModelFormatVersion = 1;

struct SavedModel {
    models::HybridModel model;
    DayTypeProfiles profiles;
};

/// Text header, little-endian float32 payload, `crc32 <hex>` trailer over
/// everything before it. Profiles are kept in full precision in the header.
void save_model(std::ostream& out, const models::HybridModel& model, const DayTypeProfiles& profiles);
void save_model(const fs::path& path, const models::HybridModel& model, const DayTypeProfiles& profiles);

/// Throws VersionError, ChecksumError or FormatError.
SavedModel load_model(std::istream& in);
SavedModel load_model(const fs::path& path);

// ---------------------------------------------------------------------------
// Pipeline

struct IngestOutcome {
    std::vector<OccupancySeries> series;  // sorted by charger id
    std::vector<ingest::RejectedRow> rejected;
    std::size_t sessions_parsed = 0;
    std::size_t sessions_selected = 0;  // after the charger class / id filter
    std::size_t outliers_removed = 0;
    double outlier_fraction = 0.0;
};

IngestOutcome ingest_sessions(const RunConfig& config);

/// occupancy_csv when set, otherwise an in-memory ingest; filtered to
/// `config.chargers` when that is non-empty.
std::vector<OccupancySeries> load_series(const RunConfig& config);

/// A charger's full series with its split point and training profiles.
struct PreparedCharger {
    OccupancySeries full;
    std::size_t n_train = 0;
    DayTypeProfiles profiles;
};

PreparedCharger prepare_charger(const OccupancySeries& series, double split_fraction);

/// Seed of repeated run `run`.
std::uint64_t run_seed(std::uint64_t base, int run);

models::HybridModel train_hybrid(const RunConfig& config, std::span<const PreparedCharger> data, int k,
                                 std::uint64_t seed, nn::TrainResult* result = nullptr);

/// Rolling evaluation of every test window; history may reach into the training split.
eval::RollingResult evaluate_hybrid(const models::HybridModel& model, const PreparedCharger& data);

/// Trains `method` on the training split(s) and scores each charger's test split.
std::vector<eval::RollingResult> run_method(const RunConfig& config, const std::string& method,
                                            std::span<const PreparedCharger> data, int k, std::uint64_t seed);

eval::EvalReport evaluate_all(const RunConfig& config, std::span<const OccupancySeries> series);

/// report_<method>.csv per method and summary.txt under config.output_dir.
void write_eval_outputs(const RunConfig& config, const eval::EvalReport& report);

/// Hybrid model at k = config.sweep_k; each trial's accuracy is averaged over chargers.
std::vector<eval::SweepRow> run_sweep(const RunConfig& config, std::span<const OccupancySeries> series,
                                      const std::string& param, std::span<const std::string> grid);

// ---------------------------------------------------------------------------
// Commands; each writes progress to `log`.

void cmd_ingest(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, const std::string& charger_id, int k, std::ostream& log);
void cmd_evaluate(const RunConfig& config, std::ostream& log);
void cmd_predict(const fs::path& model_path, const fs::path& occupancy_csv, Timestamp at, std::ostream& out);
void cmd_sweep(const RunConfig& config, const std::string& param, std::span<const std::string> grid,
               std::ostream& log);
void cmd_synth(const SynthSpec& spec, const fs::path& out_csv, std::ostream& log);

}  // namespace occuforge::cli
