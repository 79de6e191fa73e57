#include "prunebias/interdependence.hpp"

#include "prunebias/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace prunebias {

namespace {

// Pivot ratio below which the Gram matrix is treated as singular.
constexpr double kSingularPivotRatio = 1e-12;
constexpr double kRidgeScale = 1e-8;

/// In-place Cholesky (lower triangle). Returns nullopt when a pivot is not
/// safely positive relative to the largest diagonal entry.
std::optional<Matrix> cholesky(const Matrix& a) {
    const std::size_t p = a.rows;
    double max_diag = 0.0;
    for (std::size_t i = 0; i < p; ++i) max_diag = std::max(max_diag, a(i, i));
    if (max_diag <= 0.0) return std::nullopt;

    Matrix l(p, p);
    for (std::size_t j = 0; j < p; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > kSingularPivotRatio * max_diag)) return std::nullopt;
        const double pivot = std::sqrt(d);
        l(j, j) = pivot;
        for (std::size_t i = j + 1; i < p; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / pivot;
        }
    }
    return l;
}

std::vector<double> cholesky_solve(const Matrix& l, std::vector<double> b) {
    const std::size_t p = l.rows;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= l(i, k) * b[k];
        b[i] /= l(i, i);
    }
    for (std::size_t i = p; i-- > 0;) {
        for (std::size_t k = i + 1; k < p; ++k) b[i] -= l(k, i) * b[k];
        b[i] /= l(i, i);
    }
    return b;
}

} // namespace

OLSFit fit_ols(const Matrix& features, std::span<const double> target) {
    const std::size_t n = features.rows;
    const std::size_t p = features.cols;
    if (target.size() != n) throw AlignmentError("fit_ols: target length does not match feature rows");
    if (n < p + 2) throw ArgumentError("fit_ols: needs more samples than features plus one");

    double y_mean = 0.0;
    for (double y : target) y_mean += y;
    y_mean /= static_cast<double>(n);
    double ss_tot = 0.0;
    for (double y : target) ss_tot += (y - y_mean) * (y - y_mean);
    // A constant target can leave a rounding residue in ss_tot, so test the values directly.
    const auto [lo, hi] = std::minmax_element(target.begin(), target.end());
    if (*lo == *hi || !(ss_tot > 0.0)) throw DegenerateInputError("fit_ols: target has zero variance");

    std::vector<double> x_mean(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) x_mean[j] += features(i, j);
    }
    for (auto& m : x_mean) m /= static_cast<double>(n);

    Matrix gram(p, p);
    std::vector<double> rhs(p, 0.0);
    std::vector<double> centred(p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) centred[j] = features(i, j) - x_mean[j];
        const double yc = target[i] - y_mean;
        for (std::size_t j = 0; j < p; ++j) {
            rhs[j] += centred[j] * yc;
            for (std::size_t k = 0; k <= j; ++k) gram(j, k) += centred[j] * centred[k];
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k < j; ++k) gram(k, j) = gram(j, k);
    }

    OLSFit fit;
    if (p > 0) {
        auto factor = cholesky(gram);
        if (!factor) {
            double trace = 0.0;
            for (std::size_t j = 0; j < p; ++j) trace += gram(j, j);
            double ridge = kRidgeScale * trace / static_cast<double>(p);
            if (!(ridge > 0.0)) ridge = kRidgeScale;
            for (std::size_t j = 0; j < p; ++j) gram(j, j) += ridge;
            fit.condition_flag = true;
            factor = cholesky(gram);
            // Constant feature columns leave the ridge as the only diagonal mass.
            for (int attempt = 0; !factor && attempt < 8; ++attempt) {
                ridge *= 100.0;
                for (std::size_t j = 0; j < p; ++j) gram(j, j) += ridge;
                factor = cholesky(gram);
            }
            if (!factor) throw DegenerateInputError("fit_ols: Gram matrix could not be regularised");
        }
        fit.coefficients = cholesky_solve(*factor, rhs);
    }

    fit.intercept = y_mean;
    for (std::size_t j = 0; j < p; ++j) fit.intercept -= fit.coefficients[j] * x_mean[j];

    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = fit.intercept;
        for (std::size_t j = 0; j < p; ++j) pred += fit.coefficients[j] * features(i, j);
        ss_res += (target[i] - pred) * (target[i] - pred);
    }
    fit.r_squared = 1.0 - ss_res / ss_tot;
    return fit;
}

double interdependence(const PredictionRun& run, std::string_view attribute) {
    if (run.cols() < 2) throw ArgumentError("interdependence: run needs at least two attributes");
    const std::size_t target_col = run.attribute_index(attribute);
    Matrix features(run.rows(), run.cols() - 1);
    std::vector<double> target(run.rows());
    for (std::size_t i = 0; i < run.rows(); ++i) {
        std::size_t f = 0;
        for (std::size_t j = 0; j < run.cols(); ++j) {
            if (j == target_col) {
                target[i] = run.at(i, j);
            } else {
                features(i, f++) = run.at(i, j);
            }
        }
    }
    return fit_ols(features, target).r_squared;
}

} // namespace prunebias
