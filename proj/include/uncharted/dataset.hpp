#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace uncharted {

/// Marker held in cells that matched the missing-value sentinel at load time.
/// It is a NaN so that any arithmetic on an unresolved cell is visibly wrong;
/// preprocess() refuses to run numeric steps while such cells remain.
inline const double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double value) noexcept { return value != value; }

/// Numeric sample-by-variable table with sample ids, variable names and
/// optional class labels.
struct Dataset {
    Eigen::MatrixXd values;  // n_samples x n_vars
    std::vector<std::string> sample_ids;
    std::vector<std::string> var_names;
    std::optional<std::vector<std::string>> labels;
    /// Label reserved for samples of unknown class (provenance assignment).
    std::string unknown_label = "?";

    std::size_t n_samples() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t n_vars() const noexcept { return static_cast<std::size_t>(values.cols()); }
    bool has_labels() const noexcept { return labels.has_value(); }

    /// Number of cells still holding kMissing.
    std::size_t missing_count() const noexcept;

    /// Throws DataError when the field lengths disagree or the table is empty.
    void validate() const;
};

/// One contiguous run of rows sharing a label: rows [start, end).
struct ClassBlock {
    std::string label;
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - start; }
    bool contains(std::size_t row) const noexcept { return row >= start && row < end; }
};

/// Ordered, contiguous, non-overlapping blocks covering [0, n).
class ClassBlocks {
public:
    ClassBlocks() = default;
    /// Throws InvalidArgument unless the blocks tile [0, n) without gaps or
    /// empty blocks.
    ClassBlocks(std::vector<ClassBlock> blocks, std::size_t n);

    /// Blocks from a label sequence that is already grouped (each label's rows
    /// contiguous).
    static ClassBlocks from_grouped_labels(const std::vector<std::string>& labels);

    const std::vector<ClassBlock>& blocks() const noexcept { return blocks_; }
    std::size_t size() const noexcept { return blocks_.size(); }
    std::size_t n_rows() const noexcept { return n_; }
    const ClassBlock& operator[](std::size_t i) const { return blocks_.at(i); }

    /// Index of the block holding `row`.
    std::size_t block_of(std::size_t row) const;
    /// Index of the block labelled `label`, if any.
    std::optional<std::size_t> find(const std::string& label) const;

private:
    std::vector<ClassBlock> blocks_;
    std::size_t n_ = 0;
};

namespace preprocess_step {
struct Log10 {};
/// Per-sample (row) centring and scaling with the population standard deviation.
struct Snv {};
/// Replace cells equal to `sentinel` (kMissing matches any missing cell).
struct Impute {
    double sentinel = kMissing;
    double replacement = 0.0;
};
/// Per-variable (column) centring and scaling with the population standard deviation.
struct Standardize {};
}  // namespace preprocess_step

using PreprocessStep = std::variant<preprocess_step::Log10, preprocess_step::Snv,
                                    preprocess_step::Impute, preprocess_step::Standardize>;

/// Steps run strictly in order.
using PreprocessSpec = std::vector<PreprocessStep>;

/// Parses "log10", "snv", "standardize", "impute:<replacement>" or
/// "impute:<sentinel>:<replacement>". Throws InvalidArgument.
PreprocessStep parse_preprocess_step(const std::string& text);
std::string to_string(const PreprocessStep& step);

struct CsvOptions {
    /// Column holding class labels; excluded from the numeric values.
    std::optional<std::string> label_column;
    /// Column holding sample ids; rows are numbered from 1 when absent.
    std::optional<std::string> id_column;
    /// Cell text that marks a missing value (stored as kMissing).
    std::optional<std::string> missing_sentinel;
    std::string unknown_label = "?";
};

/// Reads a comma-separated table with a header row. Throws DataError on a
/// missing file, ragged rows, duplicate column names or non-numeric cells.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {});

/// Writes the id column (named "id"), the variables with 17 significant
/// digits, and a "label" column when labels exist. Missing cells are written
/// as `missing_text`.
std::string format_csv(const Dataset& data, const std::string& missing_text = "NA");
void write_csv(const Dataset& data, const std::filesystem::path& path,
               const std::string& missing_text = "NA");

/// Shortest text that is at least 17 significant digits and round-trips.
std::string format_real(double value);

Dataset preprocess(const Dataset& data, const PreprocessSpec& spec);

struct OrderedDataset {
    Dataset data;
    ClassBlocks blocks;
    /// permutation[new_row] = old_row
    std::vector<std::size_t> permutation;
};

/// Stable reorder so equal labels are contiguous. Without `label_order`,
/// labels appear in first-appearance order with the unknown label last.
OrderedDataset order_by_label(const Dataset& data,
                              const std::optional<std::vector<std::string>>& label_order = {});

/// Rows whose label is in `keep_labels`, minus the `drop_vars` columns.
Dataset subset(const Dataset& data, const std::vector<std::string>& keep_labels,
               const std::vector<std::string>& drop_vars = {});

/// Rows in the given order (rows may repeat).
Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& rows);

/// Distinct labels in first-appearance order.
std::vector<std::string> distinct_labels(const std::vector<std::string>& labels);

}  // namespace uncharted
