#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "timefuse/error.hpp"
#include "timefuse/meta_features.hpp"
#include "timefuse/shard_io.hpp"
#include "timefuse/tensor.hpp"
#include "timefuse/text.hpp"

namespace timefuse {

/// Long-format table: one row per (sample, time step), columns sample_id,t,var_0..var_{d-1}.
/// Every sample has the same number of steps.
struct LongTable {
    std::vector<std::string> ids;
    std::size_t length = 0;
    std::size_t d = 0;
    std::vector<std::vector<double>> values;  // per sample, length x d row-major

    [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
};

namespace detail {

[[noreturn]] inline void parse_error(const std::string& source, std::size_t line, const std::string& what) {
    fail(ErrorKind::ParseError, source + ": line " + std::to_string(line) + ": " + what);
}

inline double parse_double(std::string_view cell, const std::string& source, std::size_t line) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        parse_error(source, line, "'" + std::string(cell) + "' is not a number");
    }
    if (!std::isfinite(v)) parse_error(source, line, "value is not finite");
    return v;
}

}  // namespace detail

[[nodiscard]] inline LongTable parse_long_csv(std::string_view text, const std::string& source = "<csv>") {
    LongTable table;
    std::size_t line_no = 0, expected_t = 0;
    bool header = true;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const auto cells = detail::split(line, ',');
        if (header) {
            if (cells.size() < 3 || cells[0] != "sample_id" || cells[1] != "t") {
                detail::parse_error(source, line_no, "header must be sample_id,t,var_0,...");
            }
            for (std::size_t j = 2; j < cells.size(); ++j) {
                if (cells[j] != "var_" + std::to_string(j - 2)) {
                    detail::parse_error(source, line_no, "column " + std::to_string(j + 1) + " must be var_" + std::to_string(j - 2));
                }
            }
            table.d = cells.size() - 2;
            header = false;
            continue;
        }
        if (cells.size() != table.d + 2) {
            detail::parse_error(source, line_no, "expected " + std::to_string(table.d + 2) + " fields, found " +
                                                     std::to_string(cells.size()));
        }
        const std::string id(cells[0]);
        if (id.empty()) detail::parse_error(source, line_no, "empty sample_id");
        std::size_t t = 0;
        const auto [ptr, ec] = std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), t);
        if (ec != std::errc{} || ptr != cells[1].data() + cells[1].size()) {
            detail::parse_error(source, line_no, "t must be a nonnegative integer");
        }
        if (table.ids.empty() || id != table.ids.back()) {
            if (!table.ids.empty()) {
                if (table.length == 0) table.length = expected_t;
                if (expected_t != table.length) {
                    detail::parse_error(source, line_no, "sample '" + table.ids.back() + "' has " +
                                                             std::to_string(expected_t) + " steps, expected " +
                                                             std::to_string(table.length));
                }
            }
            if (std::find(table.ids.begin(), table.ids.end(), id) != table.ids.end()) {
                detail::parse_error(source, line_no, "rows of sample '" + id + "' are not contiguous");
            }
            table.ids.push_back(id);
            table.values.emplace_back();
            expected_t = 0;
        }
        if (t != expected_t) {
            detail::parse_error(source, line_no, "expected t=" + std::to_string(expected_t) + ", found " + std::to_string(t));
        }
        for (std::size_t j = 0; j < table.d; ++j) table.values.back().push_back(detail::parse_double(cells[j + 2], source, line_no));
        ++expected_t;
    }
    if (header) fail(ErrorKind::ParseError, source + ": missing header");
    if (table.ids.empty()) fail(ErrorKind::ParseError, source + ": no data rows");
    if (table.length == 0) table.length = expected_t;
    if (expected_t != table.length) {
        fail(ErrorKind::ParseError, source + ": sample '" + table.ids.back() + "' has " + std::to_string(expected_t) +
                                        " steps, expected " + std::to_string(table.length));
    }
    return table;
}

[[nodiscard]] inline LongTable read_long_csv(const std::filesystem::path& path) {
    return parse_long_csv(detail::read_all(path), path.string());
}

[[nodiscard]] inline std::string long_csv(std::span<const std::string> ids, std::size_t length, std::size_t d,
                                          std::span<const std::vector<double>> values) {
    std::string out = "sample_id,t";
    for (std::size_t j = 0; j < d; ++j) out += ",var_" + std::to_string(j);
    out += "\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t t = 0; t < length; ++t) {
            out += ids[i] + "," + std::to_string(t);
            for (std::size_t j = 0; j < d; ++j) out += "," + detail::g17(values[i][t * d + j]);
            out += "\n";
        }
    }
    return out;
}

[[nodiscard]] inline std::vector<TimeSeriesWindow> to_windows(const LongTable& table) {
    std::vector<TimeSeriesWindow> out;
    out.reserve(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        try {
            out.emplace_back(table.length, table.d, table.values[i]);
        } catch (const Error& e) {
            fail(e.kind(), "window '" + table.ids[i] + "': " + e.what());
        }
    }
    return out;
}

// ---- per-model prediction files ----

struct PredictionFile {
    std::string model;
    std::size_t n_samples = 0;
    std::size_t t_out = 0;
    std::size_t d = 0;
    std::vector<float> values;  // n x t_out x d
};

[[nodiscard]] inline std::filesystem::path prediction_payload_path(const std::filesystem::path& dir, std::string_view model) {
    return dir / (std::string(model) + ".bin");
}

[[nodiscard]] inline std::filesystem::path prediction_sidecar_path(const std::filesystem::path& dir, std::string_view model) {
    return dir / (std::string(model) + ".json");
}

inline void write_prediction_file(const std::filesystem::path& dir, const PredictionFile& file) {
    if (file.values.size() != file.n_samples * file.t_out * file.d) {
        fail(ErrorKind::ShapeMismatch, "model '" + file.model + "': payload does not match n x t_out x d");
    }
    std::string bytes;
    bytes.reserve(4 * file.values.size());
    for (float v : file.values) detail::put_f32(bytes, v);
    nlohmann::ordered_json meta;
    meta["model"] = file.model;
    meta["n_samples"] = file.n_samples;
    meta["t_out"] = file.t_out;
    meta["d"] = file.d;
    detail::write_atomically(prediction_payload_path(dir, file.model), bytes);
    detail::write_atomically(prediction_sidecar_path(dir, file.model), meta.dump(2) + "\n");
}

[[nodiscard]] inline PredictionFile read_prediction_file(const std::filesystem::path& dir, const std::string& model) {
    const auto sidecar = prediction_sidecar_path(dir, model);
    const auto payload = prediction_payload_path(dir, model);
    if (!std::filesystem::exists(sidecar) || !std::filesystem::exists(payload)) {
        fail(ErrorKind::IoError, "model '" + model + "': missing " +
                                     (std::filesystem::exists(sidecar) ? payload : sidecar).string());
    }
    PredictionFile file;
    file.model = model;
    try {
        const auto meta = nlohmann::json::parse(detail::read_all(sidecar));
        if (meta.at("model").get<std::string>() != model) {
            fail(ErrorKind::FormatError, "model '" + model + "': sidecar names model '" + meta.at("model").get<std::string>() + "'");
        }
        file.n_samples = meta.at("n_samples").get<std::size_t>();
        file.t_out = meta.at("t_out").get<std::size_t>();
        file.d = meta.at("d").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::FormatError, "model '" + model + "': bad sidecar: " + e.what());
    }
    const std::string bytes = detail::read_all(payload);
    const std::size_t expected = 4 * file.n_samples * file.t_out * file.d;
    if (bytes.size() < expected) {
        fail(ErrorKind::TruncatedFile, "model '" + model + "': payload has " + std::to_string(bytes.size()) +
                                           " bytes, sidecar declares " + std::to_string(expected));
    }
    if (bytes.size() > expected) fail(ErrorKind::FormatError, "model '" + model + "': payload longer than declared");
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    file.values.resize(file.n_samples * file.t_out * file.d);
    for (std::size_t i = 0; i < file.values.size(); ++i) {
        file.values[i] = std::bit_cast<float>(detail::get_u32(raw + 4 * i));
        if (!std::isfinite(file.values[i])) {
            fail(ErrorKind::NonFiniteInput, "model '" + model + "': value " + std::to_string(i) + " is not finite");
        }
    }
    return file;
}

/// Model names with a sidecar in `dir`, sorted.
[[nodiscard]] inline std::vector<std::string> discover_roster(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) fail(ErrorKind::IoError, dir.string() + " is not a directory");
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

// ---- feature and weight tables ----

[[nodiscard]] inline std::string features_csv(std::span<const std::string> ids, std::span<const MetaFeatureVector> rows) {
    std::string out = "sample_id";
    for (auto name : kMetaFeatureNames) out += "," + std::string(name);
    out += "\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out += ids[i];
        for (double v : rows[i].values) out += "," + detail::g17(v);
        out += "\n";
    }
    return out;
}

[[nodiscard]] inline std::string weights_csv(std::span<const std::string> roster, std::span<const std::string> ids,
                                             std::span<const std::vector<double>> weights) {
    std::string out = "sample_id";
    for (const auto& m : roster) out += "," + m;
    out += "\n";
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out += ids[i];
        for (double w : weights[i]) out += "," + detail::g17(w);
        out += "\n";
    }
    return out;
}

}  // namespace timefuse
