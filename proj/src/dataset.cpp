#include "uncharted/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "uncharted/errors.hpp"

namespace uncharted {

namespace {

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(first, last - first + 1));
}

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? field : trim(field));
            field.clear();
            was_quoted = false;
        } else {
            field.push_back(c);
        }
    }
    if (quoted) {
        throw DataError("line " + std::to_string(line_no) + ": unterminated quoted field");
    }
    fields.push_back(was_quoted ? field : trim(field));
    return fields;
}

std::optional<double> parse_real(const std::string& text) {
    if (text.empty()) {
        return std::nullopt;
    }
    const char* first = text.data();
    const char* last = first + text.size();
    if (*first == '+') {
        ++first;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::string csv_escape(const std::string& text) {
    if (text.find_first_of(",\"\n\r") == std::string::npos && trim(text) == text) {
        return text;
    }
    std::string out = "\"";
    for (const char c : text) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out += '"';
    return out;
}

void require_no_missing(const Dataset& data, const char* step) {
    if (data.missing_count() > 0) {
        throw DataError(std::string(step) +
                        ": missing cells remain; add an impute step before it");
    }
}

double population_std(const Eigen::Ref<const Eigen::VectorXd>& v, double mean) {
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size()));
}

}  // namespace

std::size_t Dataset::missing_count() const noexcept {
    return static_cast<std::size_t>(values.array().isNaN().count());
}

void Dataset::validate() const {
    if (values.rows() < 1 || values.cols() < 1) {
        throw DataError("dataset must have at least one sample and one variable");
    }
    if (sample_ids.size() != n_samples()) {
        throw DataError("sample id count does not match sample count");
    }
    if (var_names.size() != n_vars()) {
        throw DataError("variable name count does not match variable count");
    }
    if (labels && labels->size() != n_samples()) {
        throw DataError("label count does not match sample count");
    }
}

ClassBlocks::ClassBlocks(std::vector<ClassBlock> blocks, std::size_t n)
    : blocks_(std::move(blocks)), n_(n) {
    std::size_t expected = 0;
    for (const auto& b : blocks_) {
        if (b.start != expected || b.end <= b.start) {
            throw InvalidArgument("class blocks must be contiguous and nonempty");
        }
        expected = b.end;
    }
    if (expected != n_) {
        throw InvalidArgument("class blocks must cover every row");
    }
}

ClassBlocks ClassBlocks::from_grouped_labels(const std::vector<std::string>& labels) {
    std::vector<ClassBlock> blocks;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (blocks.empty() || blocks.back().label != labels[i]) {
            if (!seen.insert(labels[i]).second) {
                throw InvalidArgument("label '" + labels[i] + "' is not contiguous");
            }
            blocks.push_back({labels[i], i, i});
        }
        blocks.back().end = i + 1;
    }
    return ClassBlocks(std::move(blocks), labels.size());
}

std::size_t ClassBlocks::block_of(std::size_t row) const {
    const auto it = std::upper_bound(blocks_.begin(), blocks_.end(), row,
                                     [](std::size_t r, const ClassBlock& b) { return r < b.end; });
    if (it == blocks_.end()) {
        throw InvalidArgument("row " + std::to_string(row) + " outside class blocks");
    }
    return static_cast<std::size_t>(it - blocks_.begin());
}

std::optional<std::size_t> ClassBlocks::find(const std::string& label) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i].label == label) {
            return i;
        }
    }
    return std::nullopt;
}

PreprocessStep parse_preprocess_step(const std::string& text) {
    const std::string step = trim(text);
    if (step == "log10") {
        return preprocess_step::Log10{};
    }
    if (step == "snv") {
        return preprocess_step::Snv{};
    }
    if (step == "standardize") {
        return preprocess_step::Standardize{};
    }
    if (step.rfind("impute:", 0) == 0) {
        std::vector<std::string> parts;
        std::stringstream ss(step.substr(7));
        for (std::string part; std::getline(ss, part, ':');) {
            parts.push_back(trim(part));
        }
        preprocess_step::Impute impute;
        if (parts.size() == 1) {
            if (auto r = parse_real(parts[0])) {
                impute.replacement = *r;
                return impute;
            }
        } else if (parts.size() == 2) {
            const auto s = parse_real(parts[0]);
            const auto r = parse_real(parts[1]);
            if (s && r) {
                impute.sentinel = *s;
                impute.replacement = *r;
                return impute;
            }
        }
        throw InvalidArgument("malformed impute step '" + step +
                              "' (expected impute:<replacement> or impute:<sentinel>:<replacement>)");
    }
    throw InvalidArgument("unknown preprocessing step '" + step + "'");
}

std::string to_string(const PreprocessStep& step) {
    struct Visitor {
        std::string operator()(const preprocess_step::Log10&) const { return "log10"; }
        std::string operator()(const preprocess_step::Snv&) const { return "snv"; }
        std::string operator()(const preprocess_step::Standardize&) const { return "standardize"; }
        std::string operator()(const preprocess_step::Impute& s) const {
            if (is_missing(s.sentinel)) {
                return "impute:" + format_real(s.replacement);
            }
            return "impute:" + format_real(s.sentinel) + ":" + format_real(s.replacement);
        }
    };
    return std::visit(Visitor{}, step);
}

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_record(line, line_no);
        }
    }
    if (header.empty()) {
        throw DataError("empty CSV: no header row");
    }
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) {
        header[0].erase(0, 3);
    }
    {
        std::set<std::string> names;
        for (const auto& name : header) {
            if (!names.insert(name).second) {
                throw DataError("duplicate column name '" + name + "'");
            }
        }
    }

    auto column_index = [&](const std::optional<std::string>& name) -> std::optional<std::size_t> {
        if (!name) {
            return std::nullopt;
        }
        const auto it = std::find(header.begin(), header.end(), *name);
        if (it == header.end()) {
            throw DataError("column '" + *name + "' not found in header");
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto label_col = column_index(options.label_column);
    const auto id_col = column_index(options.id_column);
    if (label_col && id_col && *label_col == *id_col) {
        throw DataError("id column and label column must differ");
    }

    std::vector<std::size_t> numeric_cols;
    Dataset data;
    data.unknown_label = options.unknown_label;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != label_col && c != id_col) {
            numeric_cols.push_back(c);
            data.var_names.push_back(header[c]);
        }
    }
    if (numeric_cols.empty()) {
        throw DataError("CSV has no numeric columns");
    }

    std::vector<double> cells;
    std::vector<std::string> labels;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_record(line, line_no);
        if (fields.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        }
        for (const auto c : numeric_cols) {
            if (options.missing_sentinel && fields[c] == *options.missing_sentinel) {
                cells.push_back(kMissing);
            } else if (const auto value = parse_real(fields[c])) {
                cells.push_back(*value);
            } else {
                throw DataError("line " + std::to_string(line_no) + ", column '" + header[c] +
                                "': non-numeric value '" + fields[c] + "'");
            }
        }
        data.sample_ids.push_back(id_col ? fields[*id_col]
                                         : std::to_string(data.sample_ids.size() + 1));
        if (label_col) {
            labels.push_back(fields[*label_col]);
        }
    }
    if (data.sample_ids.empty()) {
        throw DataError("CSV has a header but no data rows");
    }

    const auto rows = static_cast<Eigen::Index>(data.sample_ids.size());
    const auto cols = static_cast<Eigen::Index>(numeric_cols.size());
    data.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cells.data(), rows, cols);
    if (label_col) {
        data.labels = std::move(labels);
    }
    data.validate();
    return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), options);
}

std::string format_real(double value) {
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, result.ptr);
}

std::string format_csv(const Dataset& data, const std::string& missing_text) {
    std::string out = "id";
    for (const auto& name : data.var_names) {
        out += ',' + csv_escape(name);
    }
    if (data.labels) {
        out += ",label";
    }
    out += '\n';
    for (std::size_t r = 0; r < data.n_samples(); ++r) {
        out += csv_escape(data.sample_ids[r]);
        for (std::size_t c = 0; c < data.n_vars(); ++c) {
            const double v = data.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            out += ',';
            out += is_missing(v) ? missing_text : format_real(v);
        }
        if (data.labels) {
            out += ',' + csv_escape((*data.labels)[r]);
        }
        out += '\n';
    }
    return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path,
               const std::string& missing_text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << format_csv(data, missing_text);
}

Dataset preprocess(const Dataset& data, const PreprocessSpec& spec) {
    Dataset out = data;
    auto& m = out.values;
    for (const auto& step : spec) {
        if (std::holds_alternative<preprocess_step::Impute>(step)) {
            const auto& s = std::get<preprocess_step::Impute>(step);
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                double& cell = m.data()[i];
                if (is_missing(s.sentinel) ? is_missing(cell) : cell == s.sentinel) {
                    cell = s.replacement;
                }
            }
        } else if (std::holds_alternative<preprocess_step::Log10>(step)) {
            require_no_missing(out, "log10");
            if ((m.array() <= 0.0).any()) {
                throw DataError("log10: all values must be strictly positive");
            }
            m = m.array().log10().matrix();
        } else if (std::holds_alternative<preprocess_step::Snv>(step)) {
            require_no_missing(out, "snv");
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                const double mean = m.row(r).mean();
                const double sd = population_std(m.row(r).transpose(), mean);
                if (!(sd > 0.0)) {
                    throw DataError("snv: sample '" + out.sample_ids[static_cast<std::size_t>(r)] +
                                    "' is constant across variables");
                }
                m.row(r) = (m.row(r).array() - mean) / sd;
            }
        } else if (std::holds_alternative<preprocess_step::Standardize>(step)) {
            require_no_missing(out, "standardize");
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double mean = m.col(c).mean();
                const double sd = population_std(m.col(c), mean);
                if (!(sd > 0.0)) {
                    throw DataError("standardize: variable '" +
                                    out.var_names[static_cast<std::size_t>(c)] + "' is constant");
                }
                m.col(c) = (m.col(c).array() - mean) / sd;
            }
        }
    }
    return out;
}

std::vector<std::string> distinct_labels(const std::vector<std::string>& labels) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& l : labels) {
        if (seen.insert(l).second) {
            out.push_back(l);
        }
    }
    return out;
}

Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.var_names = data.var_names;
    out.unknown_label = data.unknown_label;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), data.values.cols());
    out.sample_ids.reserve(rows.size());
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.values.row(static_cast<Eigen::Index>(i)) = data.values.row(static_cast<Eigen::Index>(rows[i]));
        out.sample_ids.push_back(data.sample_ids.at(rows[i]));
        if (data.labels) {
            labels.push_back((*data.labels)[rows[i]]);
        }
    }
    if (data.labels) {
        out.labels = std::move(labels);
    }
    return out;
}

OrderedDataset order_by_label(const Dataset& data,
                              const std::optional<std::vector<std::string>>& label_order) {
    if (!data.labels) {
        throw DataError("order_by_label: dataset has no labels");
    }
    const auto& labels = *data.labels;

    std::vector<std::string> order;
    if (label_order) {
        order = *label_order;
        const std::set<std::string> given(order.begin(), order.end());
        if (given.size() != order.size()) {
            throw InvalidArgument("order_by_label: label order lists a label twice");
        }
        for (const auto& l : distinct_labels(labels)) {
            if (!given.count(l)) {
                throw DataError("order_by_label: label '" + l + "' missing from label order");
            }
        }
    } else {
        order = distinct_labels(labels);
        const auto unknown = std::find(order.begin(), order.end(), data.unknown_label);
        if (unknown != order.end()) {
            std::rotate(unknown, unknown + 1, order.end());
        }
    }

    std::unordered_map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < order.size(); ++i) {
        rank.emplace(order[i], i);
    }
    std::vector<std::size_t> perm(labels.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return rank.at(labels[a]) < rank.at(labels[b]);
    });

    OrderedDataset out{select_rows(data, perm), {}, perm};
    out.blocks = ClassBlocks::from_grouped_labels(*out.data.labels);
    return out;
}

Dataset subset(const Dataset& data, const std::vector<std::string>& keep_labels,
               const std::vector<std::string>& drop_vars) {
    if (keep_labels.empty()) {
        throw InvalidArgument("subset: keep_labels must not be empty");
    }
    if (!data.labels) {
        throw DataError("subset: dataset has no labels");
    }
    const std::set<std::string> present(data.labels->begin(), data.labels->end());
    for (const auto& l : keep_labels) {
        if (!present.count(l)) {
            throw DataError("subset: unknown label '" + l + "'");
        }
    }
    std::set<std::size_t> dropped;
    for (const auto& v : drop_vars) {
        const auto it = std::find(data.var_names.begin(), data.var_names.end(), v);
        if (it == data.var_names.end()) {
            throw DataError("subset: unknown variable '" + v + "'");
        }
        dropped.insert(static_cast<std::size_t>(it - data.var_names.begin()));
    }
    if (dropped.size() == data.n_vars()) {
        throw DataError("subset: every variable would be dropped");
    }

    const std::set<std::string> keep(keep_labels.begin(), keep_labels.end());
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < data.n_samples(); ++r) {
        if (keep.count((*data.labels)[r])) {
            rows.push_back(r);
        }
    }
    Dataset out = select_rows(data, rows);

    std::vector<Eigen::Index> cols;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < data.n_vars(); ++c) {
        if (!dropped.count(c)) {
            cols.push_back(static_cast<Eigen::Index>(c));
            names.push_back(data.var_names[c]);
        }
    }
    out.values = Eigen::MatrixXd(out.values(Eigen::all, cols));
    out.var_names = std::move(names);
    return out;
}

}  // namespace uncharted
