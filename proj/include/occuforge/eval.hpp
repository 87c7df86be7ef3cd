#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "occuforge/ingest.hpp"

namespace occuforge::eval {

using ingest::OccupancySeries;

struct WindowScore {
    double mae = 0.0;
    double accuracy = 1.0;
    int tp = 0;
    int fp = 0;
    int fn = 0;
    int tn = 0;
    double f1 = 0.0;
};

/// (1/k) * sum |pred - obs|.
double window_mae(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> obs);

/// TP / (TP + (FN + FP) / 2), or 0 when that denominator is 0.
double f1_score(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> obs);

WindowScore score_window(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> obs);

/// Predicts states t..t+k-1 of the evaluated series, given everything before t.
using WindowPredictor = std::function<std::vector<std::uint8_t>(std::size_t t)>;

struct RollingResult {
    double mean_accuracy = 0.0;
    double mean_f1 = 0.0;
    std::size_t windows = 0;
};

/// Scores every window start t in [first_target, len - k] at stride 1 and
/// averages. Typically `series` is the full train+test series and
/// first_target the train length, so early test windows read their history
/// from the tail of the training split: windows = test_len - k + 1.
RollingResult rolling_evaluate(const WindowPredictor& predictor, const OccupancySeries& series,
                               std::size_t first_target, int k);

struct RunScore {
    int run = 0;
    double accuracy = 0.0;
    double f1 = 0.0;
    std::size_t windows = 0;
};

/// Results of R repeated runs for one (method, charger, horizon).
struct EvalEntry {
    std::string method;
    std::string charger_id;
    int k = 1;
    std::vector<RunScore> runs;

    double mean_accuracy() const;
    double mean_f1() const;
};

struct EvalReport {
    std::vector<EvalEntry> entries;
};

/// Rows `charger,k,run,accuracy,f1` for the entries of one method.
void write_report_csv(std::ostream& out, const EvalReport& report, const std::string& method);

/// Human-readable tables in the layout of the usual accuracy/F1 comparison:
/// one block per metric, methods (averaged over chargers) and then chargers
/// as rows, horizons as columns.
void write_summary(std::ostream& out, const EvalReport& report);

struct SweepRow {
    std::string value;
    double mean_accuracy = 0.0;
    std::vector<double> run_accuracies;
};

/// Called once per (grid value, run); returns that run's mean test accuracy.
using SweepTrial = std::function<double(const std::string& value, int run)>;

/// Grid order is preserved; each row holds the mean over `runs` trials.
std::vector<SweepRow> sensitivity_sweep(std::span<const std::string> grid, int runs, const SweepTrial& trial);

void write_sweep_csv(std::ostream& out, const std::string& parameter, std::span<const SweepRow> rows);

}  // namespace occuforge::eval
