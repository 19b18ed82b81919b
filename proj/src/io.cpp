#include "uncharted/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "uncharted/errors.hpp"

namespace uncharted {

std::string format_matrix_csv(const Eigen::MatrixXd& m) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * 20);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) {
                out += ',';
            }
            out += format_real(m(r, c));
        }
        out += '\n';
    }
    return out;
}

Eigen::MatrixXd parse_matrix_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const auto comma = std::min(line.find(',', pos), line.size());
            const char* first = line.data() + pos;
            const char* last = line.data() + comma;
            while (first < last && *first == ' ') ++first;
            while (last > first && last[-1] == ' ') --last;
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc{} || ptr != last || first == last) {
                throw DataError("matrix line " + std::to_string(line_no) + ": non-numeric cell");
            }
            row.push_back(value);
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError("matrix line " + std::to_string(line_no) + ": ragged row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw DataError("matrix file is empty");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

std::string format_blocks_csv(const ClassBlocks& blocks) {
    std::string out = "label,start,end\n";
    for (const auto& b : blocks.blocks()) {
        out += b.label + ',' + std::to_string(b.start) + ',' + std::to_string(b.end) + '\n';
    }
    return out;
}

ClassBlocks parse_blocks_csv(const std::string& text, std::size_t n_rows) {
    CsvOptions options;
    options.label_column = "label";
    const Dataset table = parse_csv(text, options);
    if (table.var_names != std::vector<std::string>{"start", "end"}) {
        throw DataError("blocks file must have columns label,start,end");
    }
    std::vector<ClassBlock> blocks;
    for (std::size_t i = 0; i < table.n_samples(); ++i) {
        const double start = table.values(static_cast<Eigen::Index>(i), 0);
        const double end = table.values(static_cast<Eigen::Index>(i), 1);
        if (start < 0 || end < 0 || start != std::floor(start) || end != std::floor(end)) {
            throw DataError("blocks file: start/end must be nonnegative integers");
        }
        blocks.push_back({(*table.labels)[i], static_cast<std::size_t>(start), static_cast<std::size_t>(end)});
    }
    try {
        return ClassBlocks(std::move(blocks), n_rows);
    } catch (const InvalidArgument& e) {
        throw DataError(std::string("blocks file: ") + e.what());
    }
}

std::uint8_t to_pixel(double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidArgument("pixel value outside [0, 1]");
    }
    return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

std::string format_pgm(const Eigen::MatrixXd& m) {
    std::string out = "P5\n" + std::to_string(m.cols()) + ' ' + std::to_string(m.rows()) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out.push_back(static_cast<char>(to_pixel(m(r, c))));
        }
    }
    return out;
}

std::string format_overlay_pgm(const Eigen::MatrixXd& m, const ClassBlocks& blocks) {
    Eigen::MatrixXd marked = m;
    for (std::size_t b = 1; b < blocks.size(); ++b) {
        const auto edge = static_cast<Eigen::Index>(blocks[b].start);
        if (edge < marked.rows()) {
            marked.row(edge).setOnes();
        }
        if (edge < marked.cols()) {
            marked.col(edge).setOnes();
        }
    }
    return format_pgm(marked);
}

void write_pgm(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
    write_file(path, format_pgm(m));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw DataError("failed writing '" + path.string() + "'");
    }
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

}  // namespace uncharted
