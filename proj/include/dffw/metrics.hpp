#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dffw/special.hpp"

namespace dffw {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    long n = 0;
};

/// Unweighted mean and sample standard deviation (n-1 denominator; 0 when
/// fewer than two values).
inline MeanStd aggregate(const std::vector<double>& xs) {
    MeanStd r;
    r.n = static_cast<long>(xs.size());
    if (r.n == 0) return r;
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / double(r.n);
    if (r.n >= 2) {
        double ss = 0.0;
        for (double x : xs) ss += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(ss / double(r.n - 1));
    }
    return r;
}

/// Root mean square error normalized by the ground-truth range, in percent.
/// Columns are dimensions, rows are timesteps; multi-dimensional series are
/// reduced per dimension then averaged.
inline double nrmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw std::invalid_argument("nrmse: series shapes differ");
    if (truth.rows() < 2) throw std::invalid_argument("nrmse: need at least 2 timesteps");
    double acc = 0.0;
    for (Eigen::Index d = 0; d < truth.cols(); ++d) {
        const double range = truth.col(d).maxCoeff() - truth.col(d).minCoeff();
        if (range <= 0.0) throw std::invalid_argument("nrmse: constant ground-truth dimension");
        const double rmse = std::sqrt((pred.col(d) - truth.col(d)).squaredNorm() / double(truth.rows()));
        acc += 100.0 * rmse / range;
    }
    return acc / double(truth.cols());
}

/// Sample Pearson correlation; multi-dimensional series are reduced per
/// dimension then averaged.
inline double pcc(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw std::invalid_argument("pcc: series shapes differ");
    const double n = static_cast<double>(truth.rows());
    if (n < 3) throw std::invalid_argument("pcc: need at least 3 timesteps");
    double acc = 0.0;
    for (Eigen::Index d = 0; d < truth.cols(); ++d) {
        const Eigen::VectorXd x = pred.col(d).array() - pred.col(d).mean();
        const Eigen::VectorXd y = truth.col(d).array() - truth.col(d).mean();
        const double sx = x.squaredNorm(), sy = y.squaredNorm();
        if (sx <= 0.0 || sy <= 0.0) throw std::invalid_argument("pcc: constant series dimension");
        acc += x.dot(y) / std::sqrt(sx * sy);
    }
    return acc / double(truth.cols());
}

/// Two-sided p-value of the t-test for a sample Pearson correlation r over n
/// pairs: t = r sqrt((n-2)/(1-r^2)) against Student-t with n-2 degrees of
/// freedom, evaluated exactly as I_x(nu/2, 1/2) with x = nu/(nu + t^2).
inline double pcc_pvalue(double r, long n) {
    if (n < 3) throw std::invalid_argument("pcc_pvalue: need n >= 3");
    if (std::isnan(r) || std::abs(r) > 1.0 + 1e-12) throw std::invalid_argument("pcc_pvalue: |r| must be <= 1");
    if (std::abs(r) >= 1.0) return 0.0;
    if (r == 0.0) return 1.0;
    const double nu = static_cast<double>(n - 2);
    const double t2 = r * r * nu / (1.0 - r * r);
    return ibeta_reg(nu / 2.0, 0.5, nu / (nu + t2));
}

/// Percent of matching labels.
inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("accuracy: label vectors must be non-empty and equal length");
    long hits = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++hits;
    return 100.0 * double(hits) / double(pred.size());
}

}  // namespace dffw
