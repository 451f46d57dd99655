#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sslgmm/params.hpp"

namespace sslgmm {

// Dense row-major matrix.
class RowMatrix {
public:
    RowMatrix() = default;
    RowMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, 0.0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int r, int c) { return data_[std::size_t(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[std::size_t(r) * cols_ + c]; }

    std::span<double> row(int r) { return {data_.data() + std::size_t(r) * cols_, std::size_t(cols_)}; }
    std::span<const double> row(int r) const {
        return {data_.data() + std::size_t(r) * cols_, std::size_t(cols_)};
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

struct Dataset {
    int n_dim = 0;
    std::uint64_t seed = 0;
    RowMatrix x_labeled;         // M_l x N
    std::vector<int> y_labeled;  // +-1
    RowMatrix x_unlabeled;       // M_u x N
    std::vector<int> y_hidden;   // true labels of unlabeled rows, never read by estimators
    std::vector<double> w0;      // teacher weights
    // Effective alphas after rounding M = round(alpha N).
    double alpha_l_effective = 0.0;
    double alpha_u_effective = 0.0;
};

// x = y w0 / sqrt(N) + xi, xi ~ N(0, sigma2 I), w0 ~ N(0, 1/lambda0), P(y=+1) = rho.
// Every random quantity draws from its own counter stream keyed by seed.
Dataset generate_dataset(const ModelParams& params, std::uint64_t seed);

// (1/N) sum_i w0_i^2, the finite-N proxy for 1/lambda0.
double empirical_signal_variance(const Dataset& data);

// Header row_type,label,feature_0..feature_{N-1}; row types W0, L, U.
// Hidden labels of U rows are written only when reveal_hidden is set.
void write_dataset_csv(std::ostream& out, const Dataset& data, bool reveal_hidden);

}  // namespace sslgmm
