#pragma once

// Small helpers shared by the test files.

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "gatead/nn.hpp"
#include "gatead/tokenio.hpp"
#include "oracles.hpp"

namespace testing {

template <class T>
gatead::Matrix<T> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    gatead::Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(gen));
    return m;
}

template <class T>
gatead::Vector<T> random_vector(std::size_t n, std::mt19937_64& gen, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    gatead::Vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(dist(gen));
    return v;
}

template <class Derived>
oracle::Mat to_mat(const Eigen::MatrixBase<Derived>& m) {
    oracle::Mat out = oracle::zeros(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = static_cast<double>(m(i, j));
    return out;
}

inline gatead::PatchGrid random_grid(std::uint32_t rows, std::uint32_t cols, std::uint32_t dim, std::uint64_t seed) {
    gatead::PatchGrid g(rows, cols, dim);
    std::mt19937_64 gen(seed);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    for (auto& v : g.data) v = dist(gen);
    return g;
}

/// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("gatead_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
