#include "mpguard/ingest.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mpguard/util.hpp"

namespace mpguard::ingest {

namespace {

using preprocess::ColumnInfo;
using preprocess::ColumnKind;

[[noreturn]] void fail_line(const std::string& path, std::size_t line_no,
                            const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

} // namespace

LabelIntervals LabelIntervals::from_per_step(std::vector<std::uint8_t> steps) {
    LabelIntervals out;
    out.per_step = std::move(steps);
    bool in_run = false;
    std::int64_t start = 0;
    for (std::size_t i = 0; i < out.per_step.size(); ++i) {
        if (out.per_step[i] != 0 && !in_run) {
            in_run = true;
            start = static_cast<std::int64_t>(i);
        } else if (out.per_step[i] == 0 && in_run) {
            out.intervals.push_back({start, static_cast<std::int64_t>(i) - 1});
            in_run = false;
        }
    }
    if (in_run)
        out.intervals.push_back({start, static_cast<std::int64_t>(out.per_step.size()) - 1});
    return out;
}

LabelIntervals LabelIntervals::from_intervals(const std::vector<core::Interval>& intervals,
                                              std::size_t length) {
    std::vector<std::uint8_t> steps(length, 0);
    for (const auto& iv : intervals) {
        if (iv.start < 0 || iv.end < iv.start ||
            iv.end >= static_cast<std::int64_t>(length))
            throw std::invalid_argument("LabelIntervals: interval outside series");
        for (std::int64_t t = iv.start; t <= iv.end; ++t)
            steps[static_cast<std::size_t>(t)] = 1;
    }
    return from_per_step(std::move(steps));
}

SchemaConfig SchemaConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

SchemaConfig SchemaConfig::from_text(std::string_view text) {
    SchemaConfig cfg;
    for (const auto& [key, value] : util::parse_key_values(text)) {
        if (key == "timestamp_column") {
            cfg.timestamp_column = value;
        } else if (key == "label_column") {
            cfg.label_column = value;
        } else if (key == "label_attack_token") {
            cfg.label_attack_token = value;
        } else if (key == "label_normal_token") {
            cfg.label_normal_token = value;
        } else if (key.starts_with("kind.")) {
            const std::string column = key.substr(5);
            const std::string v = util::to_lower(value);
            if (v == "boolean" || v == "bool")
                cfg.column_kinds[column] = ColumnKind::boolean;
            else if (v == "continuous")
                cfg.column_kinds[column] = ColumnKind::continuous;
            else
                throw std::invalid_argument("schema config: unknown column kind '" + value +
                                            "'");
        } else {
            throw std::invalid_argument("schema config: unknown key '" + key + "'");
        }
    }
    return cfg;
}

core::TimeSeries Dataset::channel(std::string_view name) const {
    const auto idx = features.column_index(name);
    if (!idx)
        throw std::invalid_argument("dataset has no channel named '" + std::string(name) +
                                    "'");
    return core::TimeSeries(features.column(*idx), std::string(name));
}

Dataset load_csv(const std::filesystem::path& path, const SchemaConfig& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input '" + path.string() + "'");
    const std::string pname = path.string();

    std::string line;
    if (!std::getline(in, line)) fail_line(pname, 1, "missing header row");
    const auto header = util::split_csv(line);
    if (header.size() < 2) fail_line(pname, 1, "header must name at least two columns");

    // resolve timestamp / label columns
    std::optional<std::size_t> ts_col;
    std::optional<std::size_t> label_col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string lower = util::to_lower(header[c]);
        if (schema.timestamp_column) {
            if (header[c] == *schema.timestamp_column) ts_col = c;
        } else if (lower == "timestamp") {
            ts_col = c;
        }
        if (schema.label_column) {
            if (header[c] == *schema.label_column) label_col = c;
        } else if (lower == "label" || lower == "normal/attack") {
            label_col = c;
        }
    }
    if (schema.timestamp_column && !ts_col)
        fail_line(pname, 1,
                  "timestamp column '" + *schema.timestamp_column + "' not in header");
    if (!label_col) {
        const std::string wanted =
            schema.label_column ? "'" + *schema.label_column + "'" : "'label' or 'Normal/Attack'";
        fail_line(pname, 1, "label column " + wanted + " not found in header");
    }

    std::vector<std::size_t> feature_cols;
    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == label_col || (ts_col && c == *ts_col)) continue;
        feature_cols.push_back(c);
        feature_names.emplace_back(header[c]);
    }
    if (feature_cols.empty()) fail_line(pname, 1, "no feature columns in header");

    const std::string attack_extra =
        schema.label_attack_token ? util::to_lower(*schema.label_attack_token) : "";
    const std::string normal_extra =
        schema.label_normal_token ? util::to_lower(*schema.label_normal_token) : "";

    std::vector<double> values;
    std::vector<std::uint8_t> labels;
    std::vector<std::string> timestamps;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        const auto fields = util::split_csv(line);
        if (fields.size() != header.size())
            fail_line(pname, line_no,
                      "expected " + std::to_string(header.size()) + " fields, got " +
                          std::to_string(fields.size()));

        for (std::size_t c : feature_cols) {
            const auto v = util::parse_double(fields[c]);
            if (!v)
                fail_line(pname, line_no,
                          "cannot parse '" + std::string(fields[c]) + "' in column '" +
                              std::string(header[c]) + "'");
            if (!std::isfinite(*v))
                fail_line(pname, line_no,
                          "non-finite value in column '" + std::string(header[c]) + "'");
            values.push_back(*v);
        }

        const std::string token = util::to_lower(fields[*label_col]);
        if (token == "attack" || token == "1" || (!attack_extra.empty() && token == attack_extra)) {
            labels.push_back(1);
        } else if (token == "normal" || token == "0" ||
                   (!normal_extra.empty() && token == normal_extra)) {
            labels.push_back(0);
        } else {
            fail_line(pname, line_no,
                      "unknown label token '" + std::string(fields[*label_col]) + "'");
        }

        if (ts_col) timestamps.emplace_back(fields[*ts_col]);
    }
    if (labels.empty()) fail_line(pname, line_no, "no data rows");

    const std::size_t rows = labels.size();
    const std::size_t cols = feature_cols.size();
    core::Matrix data(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) data.at(r, c) = values[r * cols + c];

    // boolean iff every observed value is 0/1, unless the schema says otherwise
    std::vector<ColumnInfo> info(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        info[c].name = feature_names[c];
        const auto it = schema.column_kinds.find(feature_names[c]);
        if (it != schema.column_kinds.end()) {
            info[c].kind = it->second;
        } else {
            bool boolean = true;
            for (std::size_t r = 0; r < rows && boolean; ++r) {
                const double v = data.at(r, c);
                boolean = (v == 0.0 || v == 1.0);
            }
            info[c].kind = boolean ? ColumnKind::boolean : ColumnKind::continuous;
        }
    }

    Dataset ds;
    ds.features = preprocess::FeatureMatrix(std::move(data), std::move(info));
    ds.labels = LabelIntervals::from_per_step(std::move(labels));
    ds.timestamps = std::move(timestamps);
    ds.source = pname;
    return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output '" + path.string() + "'");

    const bool with_ts = !ds.timestamps.empty();
    if (with_ts) out << "Timestamp,";
    for (const auto& col : ds.features.schema()) out << col.name << ',';
    out << "label\n";

    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (with_ts) out << ds.timestamps[r] << ',';
        for (std::size_t c = 0; c < ds.features.cols(); ++c)
            out << util::fmt_double(ds.features.at(r, c)) << ',';
        out << (ds.labels.per_step[r] != 0 ? '1' : '0') << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    core::Matrix data(rows.size(), ds.features.cols());
    std::vector<std::uint8_t> labels(rows.size());
    std::vector<std::string> timestamps;
    if (!ds.timestamps.empty()) timestamps.reserve(rows.size());

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        for (std::size_t c = 0; c < ds.features.cols(); ++c)
            data.at(i, c) = ds.features.at(r, c);
        labels[i] = ds.labels.per_step[r];
        if (!ds.timestamps.empty()) timestamps.push_back(ds.timestamps[r]);
    }

    Dataset out;
    out.features = preprocess::FeatureMatrix(std::move(data), ds.features.schema());
    out.labels = LabelIntervals::from_per_step(std::move(labels));
    out.timestamps = std::move(timestamps);
    out.source = ds.source;
    return out;
}

} // namespace

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, std::size_t boundary) {
    if (boundary > ds.rows())
        throw std::invalid_argument("split_train_test: boundary beyond row count");
    std::vector<std::size_t> head(boundary), tail(ds.rows() - boundary);
    for (std::size_t i = 0; i < boundary; ++i) head[i] = i;
    for (std::size_t i = boundary; i < ds.rows(); ++i) tail[i - boundary] = i;
    return {take_rows(ds, head), take_rows(ds, tail)};
}

Dataset filter_normal_rows(const Dataset& ds) {
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < ds.rows(); ++r)
        if (ds.labels.per_step[r] == 0) keep.push_back(r);
    return take_rows(ds, keep);
}

} // namespace mpguard::ingest
