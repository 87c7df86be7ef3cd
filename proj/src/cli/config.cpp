#include <charconv>
#include <fstream>
#include <istream>

#include <fmt/format.h>

#include "../ingest/csv.hpp"
#include "occuforge/cli.hpp"
#include "occuforge/error.hpp"

namespace occuforge::cli {

using ingest::detail::trim;

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError(fmt::format("{}: cannot parse '{}' as a number", key, text));
    }
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

fs::path resolve(const fs::path& base_dir, std::string_view text) {
    fs::path p{std::string(trim(text))};
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p;
}

ingest::ChargerClass parse_class(std::string_view key, std::string_view text) {
    const auto c = ingest::parse_charger_class(trim(text));
    if (!c) throw ConfigError(fmt::format("{}: unknown charger class '{}'", key, text));
    return *c;
}

}  // namespace

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    if (trim(text).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        out.emplace_back(trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    for (const auto& item : split_list(text)) out.push_back(parse_number<int>("list", item));
    return out;
}

void set_config_value(RunConfig& c, std::string_view key, std::string_view value, const fs::path& base_dir) {
    const std::string v(trim(value));
    if (key == "sessions_csv") c.sessions_csv = resolve(base_dir, v);
    else if (key == "occupancy_csv") c.occupancy_csv = resolve(base_dir, v);
    else if (key == "output_dir") c.output_dir = resolve(base_dir, v);
    else if (key == "delta_minutes") c.delta_minutes = parse_number<int>(key, v);
    else if (key == "split_fraction") c.split_fraction = parse_number<double>(key, v);
    else if (key == "m") c.m = parse_number<int>(key, v);
    else if (key == "k_list") c.k_list = parse_int_list(v);
    else if (key == "lstm_hidden") c.lstm_hidden = parse_number<int>(key, v);
    else if (key == "branch_layers") c.branch_layers = parse_int_list(v);
    else if (key == "branch_depth") c.branch_depth = parse_number<int>(key, v);
    else if (key == "post_lstm") c.post_lstm = parse_number<int>(key, v);
    else if (key == "merge") c.merge = parse_number<int>(key, v);
    else if (key == "threshold") c.threshold = parse_number<double>(key, v);
    else if (key == "learning_rate") c.train.learning_rate = parse_number<double>(key, v);
    else if (key == "batch_size") c.train.batch_size = parse_number<int>(key, v);
    else if (key == "epochs") c.train.epochs = parse_number<int>(key, v);
    else if (key == "dropout") c.train.dropout_rate = parse_number<double>(key, v);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "runs") c.runs = parse_number<int>(key, v);
    else if (key == "charger_class") {
        if (v == "all") c.charger_class.reset();
        else c.charger_class = parse_class(key, v);
    } else if (key == "chargers") c.chargers = split_list(v);
    else if (key == "remove_outliers") c.remove_outliers = parse_bool(key, v);
    else if (key == "pooled") c.pooled = parse_bool(key, v);
    else if (key == "methods") c.methods = split_list(v);
    else if (key == "baseline_frames") c.baseline_frames = parse_number<int>(key, v);
    else if (key == "baseline_hidden") c.baseline_hidden = parse_number<int>(key, v);
    else if (key == "baseline_dense") c.baseline_dense = parse_number<int>(key, v);
    else if (key == "logistic_steps") c.logistic_steps = parse_number<int>(key, v);
    else if (key == "logistic_learning_rate") c.logistic_learning_rate = parse_number<double>(key, v);
    else if (key == "sweep_k") c.sweep_k = parse_number<int>(key, v);
    else if (key == "column.charger_id") c.columns.charger_id = v;
    else if (key == "column.plug_in") c.columns.plug_in = v;
    else if (key == "column.plug_out") c.columns.plug_out = v;
    else if (key == "column.energy_kwh") c.columns.energy = v;
    else if (key == "column.charger_class") c.columns.charger_class = v;
    else if (key == "column.default_class") c.columns.default_class = parse_class(key, v);
    else throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

RunConfig parse_run_config(std::istream& in, const fs::path& base_dir) {
    RunConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = line;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("line {}: expected 'key = value'", lineno));
        }
        const std::string key(trim(s.substr(0, eq)));
        try {
            set_config_value(c, key, s.substr(eq + 1), base_dir);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("line {}: {}", lineno, e.what()));
        }
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
    RunConfig c = parse_run_config(in, path.parent_path());
    c.validate();
    for (const auto* p : {&c.sessions_csv, &c.occupancy_csv}) {
        if (!p->empty() && !fs::exists(*p)) throw ConfigError(fmt::format("{} does not exist", p->string()));
    }
    return c;
}

void RunConfig::validate() const {
    if (sessions_csv.empty() == occupancy_csv.empty()) {
        throw ConfigError("set exactly one of sessions_csv and occupancy_csv");
    }
    if (delta_minutes < 1 || 1440 % delta_minutes != 0) throw ConfigError("delta_minutes must divide 1440");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split_fraction must lie in (0, 1)");
    if (k_list.empty()) throw ConfigError("k_list is empty");
    for (int k : k_list) {
        if (k < 1) throw ConfigError("every k must be >= 1");
    }
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (branch_depth < 0 || branch_depth > static_cast<int>(branch_layers.size())) {
        throw ConfigError("branch_depth exceeds the number of branch_layers");
    }
    if (methods.empty()) throw ConfigError("methods is empty");
    for (const auto& m : methods) {
        if (m != "hybrid" && m != "lstm" && m != "gru" && m != "logistic") {
            throw ConfigError(fmt::format("unknown method '{}'", m));
        }
    }
    if (logistic_steps < 0 || !(logistic_learning_rate > 0.0)) throw ConfigError("invalid logistic settings");
    if (sweep_k < 1) throw ConfigError("sweep_k must be >= 1");
    train.validate();
    hybrid_config(1, 1440 / delta_minutes).validate();
    baseline_config(models::RecurrentKind::lstm, 1, 1440 / delta_minutes).validate();
}

models::HybridConfig RunConfig::hybrid_config(int k, int slots_per_day) const {
    models::HybridConfig h;
    h.m = m;
    h.k = k;
    h.context_dim = features::context_dim(slots_per_day);
    h.lstm_hidden = lstm_hidden;
    h.branch = branch_layers;
    if (branch_depth > 0) h.branch.resize(static_cast<std::size_t>(branch_depth));
    h.post_lstm = post_lstm;
    h.merge = merge;
    h.threshold = threshold;
    return h;
}

models::RecurrentBaselineConfig RunConfig::baseline_config(models::RecurrentKind kind, int k,
                                                           int slots_per_day) const {
    models::RecurrentBaselineConfig b;
    b.kind = kind;
    b.frames = baseline_frames;
    b.frame_dim = features::context_dim(slots_per_day) + 1;
    b.k = k;
    b.hidden = baseline_hidden;
    b.dense = baseline_dense;
    b.threshold = threshold;
    return b;
}

}  // namespace occuforge::cli
