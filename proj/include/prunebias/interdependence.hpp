#pragma once

// Label interrelation: how well one attribute's scores are explained by a
// linear model over all other attributes' scores.

#include "prunebias/data_model.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace prunebias {

/// Row-major real matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct OLSFit {
    double intercept = 0.0;
    std::vector<double> coefficients;  // one per feature
    double r_squared = 0.0;
    bool condition_flag = false;       // ridge fallback engaged
};

/// Least squares with intercept via the normal equations on centred data.
/// A numerically singular Gram matrix gets a ridge of 1e-8 * trace / p.
OLSFit fit_ols(const Matrix& features, std::span<const double> target);

/// R^2 of `attribute`'s scores regressed on every other attribute's scores.
double interdependence(const PredictionRun& run, std::string_view attribute);

} // namespace prunebias
