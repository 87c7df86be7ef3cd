#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <zlib.h>

#include "occuforge/cli.hpp"
#include "occuforge/error.hpp"

namespace occuforge::cli {

namespace {

constexpr std::string_view kMagic = "occuforge-model";
constexpr std::string_view kEndHeader = "end_header\n";

std::uint32_t crc_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; model files stay far below 4 GiB.
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

std::string join(std::span<const double> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += fmt::format("{}", values[i]);
    }
    return out;
}

std::string join(std::span<const int> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(values[i]);
    }
    return out;
}

template <typename T>
T header_number(const std::map<std::string, std::string>& fields, const std::string& key) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw FormatError(fmt::format("model header lacks '{}'", key));
    T value{};
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError(fmt::format("model header field '{}' is malformed", key));
    }
    return value;
}

std::vector<double> header_doubles(const std::map<std::string, std::string>& fields, const std::string& key) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw FormatError(fmt::format("model header lacks '{}'", key));
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || ptr != item.data() + item.size()) {
            throw FormatError(fmt::format("model header field '{}' is malformed", key));
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

void save_model(std::ostream& out, const models::HybridModel& model, const DayTypeProfiles& profiles) {
    const auto& cfg = model.config();
    if (features::context_dim(profiles.slots_per_day()) != cfg.context_dim) {
        throw Error("profiles do not match the model's context size");
    }
    auto params = const_cast<models::HybridModel&>(model).parameters();

    std::string header;
    header += fmt::format("{}\n", kMagic);
    header += fmt::format("format_version {}\n", kModelFormatVersion);
    header += "kind hybrid\n";
    header += fmt::format("charger_id {}\n", profiles.charger_id);
    header += fmt::format("training_range {}\n", profiles.training_range);
    header += fmt::format("m {}\nk {}\ncontext_dim {}\nlstm_hidden {}\n", cfg.m, cfg.k, cfg.context_dim,
                          cfg.lstm_hidden);
    header += fmt::format("branch {}\npost_lstm {}\nmerge {}\nthreshold {}\n", join(cfg.branch), cfg.post_lstm,
                          cfg.merge, cfg.threshold);
    header += fmt::format("feature_layout x1=y[t-1..t-{}] x2=slot/{},weekday/6,weekend,profile[{}]\n", cfg.m,
                          profiles.slots_per_day(), profiles.slots_per_day());
    header += fmt::format("profile_weekday {}\n", join(profiles.weekday));
    header += fmt::format("profile_weekend {}\n", join(profiles.weekend));
    std::size_t floats = 0;
    for (const auto& p : params) {
        header += fmt::format("tensor {} {} {} row-major\n", p.name, p.value.rows(), p.value.cols());
        floats += static_cast<std::size_t>(p.value.size());
    }
    header += fmt::format("payload_bytes {}\n", floats * 4);
    header += kEndHeader;

    std::string payload;
    payload.reserve(floats * 4);
    for (const auto& p : params) {
        for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
                const float f = static_cast<float>(p.value(r, c));
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                for (int b = 0; b < 4; ++b) payload.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
            }
        }
    }

    const std::string body = header + payload;
    out << body << fmt::format("crc32 {:08x}\n", crc_of(body));
    if (!out) throw Error("failed to write model");
}

void save_model(const fs::path& path, const models::HybridModel& model, const DayTypeProfiles& profiles) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write model file {}", path.string()));
    save_model(out, model, profiles);
}

SavedModel load_model(std::istream& in) {
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.empty()) throw ChecksumError("model file is empty");

    const auto header_end = bytes.find(kEndHeader);
    if (bytes.rfind(kMagic, 0) != 0) throw FormatError("not an occuforge model file");

    // Version first, so a newer file is reported as such rather than as corrupt.
    const std::string_view head(bytes.data(), header_end == std::string::npos ? bytes.size() : header_end);
    const auto vpos = head.find("\nformat_version ");
    if (vpos == std::string_view::npos) throw FormatError("model header lacks format_version");
    const auto vend = head.find('\n', vpos + 1);
    const std::string version(head.substr(vpos + 16, vend == std::string_view::npos ? vend : vend - vpos - 16));
    if (version != std::to_string(kModelFormatVersion)) {
        throw VersionError(fmt::format("unsupported model format version '{}'", version));
    }

    const auto trailer = bytes.rfind("crc32 ");
    if (trailer == std::string::npos || header_end == std::string::npos || trailer < header_end ||
        bytes.size() != trailer + 15 || bytes.back() != '\n') {
        throw ChecksumError("model file is truncated");
    }
    std::uint32_t stored = 0;
    const auto [ptr, ec] = std::from_chars(bytes.data() + trailer + 6, bytes.data() + trailer + 14, stored, 16);
    if (ec != std::errc{} || ptr != bytes.data() + trailer + 14) throw ChecksumError("malformed checksum trailer");
    if (crc_of(std::string_view(bytes.data(), trailer)) != stored) throw ChecksumError("model checksum mismatch");

    std::map<std::string, std::string> fields;
    struct TensorDecl {
        std::string name;
        Eigen::Index rows, cols;
    };
    std::vector<TensorDecl> tensors;
    std::istringstream hs(std::string(bytes.substr(0, header_end)));
    std::string line;
    std::getline(hs, line);  // magic
    while (std::getline(hs, line)) {
        const auto sp = line.find(' ');
        const std::string key = line.substr(0, sp);
        const std::string value = sp == std::string::npos ? std::string{} : line.substr(sp + 1);
        if (key == "tensor") {
            std::istringstream ts(value);
            TensorDecl t;
            std::string order;
            if (!(ts >> t.name >> t.rows >> t.cols >> order) || order != "row-major") {
                throw FormatError(fmt::format("bad tensor declaration '{}'", line));
            }
            tensors.push_back(t);
        } else {
            fields[key] = value;
        }
    }
    if (fields["kind"] != "hybrid") throw FormatError(fmt::format("unsupported model kind '{}'", fields["kind"]));

    models::HybridConfig cfg;
    cfg.m = header_number<int>(fields, "m");
    cfg.k = header_number<int>(fields, "k");
    cfg.context_dim = header_number<int>(fields, "context_dim");
    cfg.lstm_hidden = header_number<int>(fields, "lstm_hidden");
    cfg.branch.clear();
    for (double b : header_doubles(fields, "branch")) cfg.branch.push_back(static_cast<int>(b));
    cfg.post_lstm = header_number<int>(fields, "post_lstm");
    cfg.merge = header_number<int>(fields, "merge");
    cfg.threshold = header_number<double>(fields, "threshold");

    SavedModel saved{models::HybridModel(cfg), {}};
    saved.profiles.weekday = header_doubles(fields, "profile_weekday");
    saved.profiles.weekend = header_doubles(fields, "profile_weekend");
    saved.profiles.charger_id = fields["charger_id"];
    saved.profiles.training_range = fields["training_range"];
    if (saved.profiles.weekday.size() != saved.profiles.weekend.size() ||
        features::context_dim(saved.profiles.slots_per_day()) != cfg.context_dim) {
        throw FormatError("stored profiles do not match the context size");
    }

    auto params = saved.model.parameters();
    if (params.size() != tensors.size()) throw FormatError("tensor list does not match the architecture");
    std::size_t offset = header_end + kEndHeader.size();
    const std::size_t declared = header_number<std::size_t>(fields, "payload_bytes");
    if (offset + declared != trailer) throw FormatError("payload size does not match the header");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (tensors[i].name != p.name || tensors[i].rows != p.value.rows() || tensors[i].cols != p.value.cols()) {
            throw FormatError(fmt::format("tensor '{}' does not match the architecture", tensors[i].name));
        }
        for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
                if (offset + 4 > trailer) throw FormatError("payload shorter than declared tensors");
                std::uint32_t bits = 0;
                for (int b = 0; b < 4; ++b) {
                    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
                }
                float f;
                std::memcpy(&f, &bits, 4);
                p.value(r, c) = f;
                offset += 4;
            }
        }
    }
    if (offset != trailer) throw FormatError("payload longer than declared tensors");
    return saved;
}

SavedModel load_model(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open model file {}", path.string()));
    return load_model(in);
}

}  // namespace occuforge::cli
