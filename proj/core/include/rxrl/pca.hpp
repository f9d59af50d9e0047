#pragma once

#include <Eigen/Core>

namespace rxrl {

struct PcaModel {
    Eigen::VectorXd mean;
    // Columns are principal axes, descending eigenvalue; all axes are kept.
    Eigen::MatrixXd axes;
    Eigen::VectorXd eigenvalues;
    Eigen::VectorXd explained_variance;  // fraction per axis
    int retained = 0;

    // Coordinates on the first `retained` axes; rows are observations.
    Eigen::MatrixXd project(const Eigen::MatrixXd& rows) const;
    Eigen::VectorXd project(const Eigen::VectorXd& row) const;
    Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& coords) const;
    double retained_variance() const;
};

// Eigendecomposition of the sample covariance; keeps the fewest axes whose
// cumulative explained variance reaches variance_target.
// Throws InputError for fewer than 2 rows or non-finite data and
// DegenerateDataError when every row is identical.
PcaModel pca_fit(const Eigen::MatrixXd& rows, double variance_target = 0.90);

}  // namespace rxrl
