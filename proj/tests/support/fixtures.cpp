#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace fixture {

namespace fs = std::filesystem;

fs::path data_dir() { return UNCHARTED_DATA_DIR; }

fs::path iris_path() { return data_dir() / "iris.csv"; }

Eigen::MatrixXd normal_matrix(uncharted::Engine& rng, std::size_t n, std::size_t v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(v));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = uncharted::standard_normal(rng);
        }
    }
    return m;
}

uncharted::Dataset three_blobs(std::uint64_t seed) {
    const double centres[3][6] = {{0, 0, 0, 0, 0, 0}, {4, 4, 0, 0, 4, 0}, {0, 4, 4, 4, 0, 0}};
    auto rng = uncharted::make_engine(seed, 0);
    uncharted::Dataset d;
    d.values = normal_matrix(rng, 90, 6);
    std::vector<std::string> labels;
    for (int r = 0; r < 90; ++r) {
        for (int c = 0; c < 6; ++c) d.values(r, c) += centres[r / 30][c];
        d.sample_ids.push_back("p" + std::to_string(r + 1));
        labels.push_back("b" + std::to_string(r / 30));
    }
    d.labels = labels;
    for (int c = 0; c < 6; ++c) d.var_names.push_back("x" + std::to_string(c + 1));
    return d;
}

Provenance provenance(std::uint64_t seed) {
    constexpr int kVars = 5;
    auto rng = uncharted::make_engine(seed, 0);
    auto centre = [](int source, int var) { return var == source % kVars ? 8.0 * (1 + source / kVars) : 0.0; };

    Provenance p;
    auto& d = p.data;
    d.values.resize(72, kVars);
    std::vector<std::string> labels;
    int row = 0;
    auto add = [&](int source, const std::string& label) {
        for (int c = 0; c < kVars; ++c) d.values(row, c) = centre(source, c) + uncharted::standard_normal(rng);
        d.sample_ids.push_back("s" + std::to_string(row + 1));
        labels.push_back(label);
        ++row;
    };
    for (int s = 0; s < 4; ++s) {
        for (int i = 0; i < 15; ++i) add(s, "src" + std::to_string(s));
    }
    for (int i = 0; i < 12; ++i) {
        const int s = i % 3;
        add(s, "?");
        p.truth.push_back("src" + std::to_string(s));
    }
    d.labels = labels;
    for (int c = 0; c < kVars; ++c) d.var_names.push_back("e" + std::to_string(c + 1));
    return p;
}

Eigen::MatrixXd random_affinity(uncharted::Engine& rng, std::size_t n, bool coarse) {
    const auto size = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
        for (Eigen::Index j = i + 1; j < size; ++j) {
            const double u = uncharted::uniform_unit(rng);
            p(i, j) = p(j, i) = coarse ? static_cast<double>(uncharted::uniform_below(rng, 9)) / 8.0 : u;
        }
    }
    return p;
}

std::vector<std::size_t> random_bounds(uncharted::Engine& rng, std::size_t n, std::size_t k) {
    auto cuts = uncharted::sample_without_replacement(rng, n - 1, k - 1);
    std::vector<std::size_t> bounds{0};
    for (auto c : cuts) bounds.push_back(c + 1);
    bounds.push_back(n);
    std::sort(bounds.begin(), bounds.end());
    return bounds;
}

fs::path temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const fs::path dir = fs::temp_directory_path() /
                         ("uncharted_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace fixture
