#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "occuforge/error.hpp"
#include "occuforge/eval.hpp"

namespace occuforge::eval {

RollingResult rolling_evaluate(const WindowPredictor& predictor, const OccupancySeries& series,
                               std::size_t first_target, int k) {
    if (k < 1) throw Error("horizon k must be positive");
    const auto kk = static_cast<std::size_t>(k);
    if (first_target + kk > series.size()) {
        throw Error(fmt::format("no complete {}-step window starts at or after step {}", k, first_target));
    }
    RollingResult r;
    double acc = 0.0;
    double f1 = 0.0;
    std::vector<std::uint8_t> obs(kk);
    for (std::size_t t = first_target; t + kk <= series.size(); ++t) {
        const auto pred = predictor(t);
        if (pred.size() != kk) throw Error(fmt::format("predictor returned {} states for k = {}", pred.size(), k));
        for (std::size_t i = 0; i < kk; ++i) obs[i] = series[t + i];
        const auto s = score_window(pred, obs);
        acc += s.accuracy;
        f1 += s.f1;
        ++r.windows;
    }
    r.mean_accuracy = acc / static_cast<double>(r.windows);
    r.mean_f1 = f1 / static_cast<double>(r.windows);
    return r;
}

namespace {

double mean_of(const std::vector<RunScore>& runs, double RunScore::*field) {
    if (runs.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : runs) s += r.*field;
    return s / static_cast<double>(runs.size());
}

void write_block(std::ostream& out, const EvalReport& report, const std::string& title,
                 double (EvalEntry::*metric)() const) {
    std::set<int> horizons;
    std::vector<std::string> methods;
    std::vector<std::string> chargers;
    for (const auto& e : report.entries) {
        horizons.insert(e.k);
        if (std::find(methods.begin(), methods.end(), e.method) == methods.end()) methods.push_back(e.method);
        if (std::find(chargers.begin(), chargers.end(), e.charger_id) == chargers.end()) {
            chargers.push_back(e.charger_id);
        }
    }

    fmt::print(out, "{}\n{:<24}", title, "");
    for (int k : horizons) fmt::print(out, "{:>9}", fmt::format("k={}", k));
    out << '\n';

    auto row = [&](const std::string& label, auto&& select) {
        fmt::print(out, "{:<24}", label);
        for (int k : horizons) {
            double sum = 0.0;
            int n = 0;
            for (const auto& e : report.entries) {
                if (e.k == k && select(e)) {
                    sum += (e.*metric)();
                    ++n;
                }
            }
            if (n == 0) {
                fmt::print(out, "{:>9}", "-");
            } else {
                fmt::print(out, "{:>9.4f}", sum / n);
            }
        }
        out << '\n';
    };

    for (const auto& m : methods) row(m, [&](const EvalEntry& e) { return e.method == m; });
    for (const auto& m : methods) {
        for (const auto& c : chargers) {
            row(fmt::format("{} {}", m, c), [&](const EvalEntry& e) { return e.method == m && e.charger_id == c; });
        }
    }
}

}  // namespace

double EvalEntry::mean_accuracy() const { return mean_of(runs, &RunScore::accuracy); }

double EvalEntry::mean_f1() const { return mean_of(runs, &RunScore::f1); }

void write_report_csv(std::ostream& out, const EvalReport& report, const std::string& method) {
    out << "charger,k,run,accuracy,f1\n";
    for (const auto& e : report.entries) {
        if (e.method != method) continue;
        for (const auto& r : e.runs) {
            fmt::print(out, "{},{},{},{:.6f},{:.6f}\n", e.charger_id, e.k, r.run, r.accuracy, r.f1);
        }
    }
}

void write_summary(std::ostream& out, const EvalReport& report) {
    write_block(out, report, "Accuracy (mean over runs)", &EvalEntry::mean_accuracy);
    out << '\n';
    write_block(out, report, "F1 score (mean over runs)", &EvalEntry::mean_f1);
}

std::vector<SweepRow> sensitivity_sweep(std::span<const std::string> grid, int runs, const SweepTrial& trial) {
    if (runs < 1) throw ConfigError("sweep needs at least one run per value");
    if (grid.empty()) throw ConfigError("sweep grid is empty");
    std::vector<SweepRow> rows;
    for (const auto& value : grid) {
        SweepRow row;
        row.value = value;
        for (int r = 0; r < runs; ++r) row.run_accuracies.push_back(trial(value, r));
        row.mean_accuracy = std::accumulate(row.run_accuracies.begin(), row.run_accuracies.end(), 0.0) / runs;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::string& parameter, std::span<const SweepRow> rows) {
    out << "parameter,value,run,accuracy\n";
    for (const auto& row : rows) {
        for (std::size_t r = 0; r < row.run_accuracies.size(); ++r) {
            fmt::print(out, "{},{},{},{:.6f}\n", parameter, row.value, r, row.run_accuracies[r]);
        }
    }
}

}  // namespace occuforge::eval
