#include "rxrl/pca.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <numeric>
#include <vector>

#include "rxrl/errors.hpp"

namespace rxrl {

PcaModel pca_fit(const Eigen::MatrixXd& rows, double variance_target) {
    if (rows.rows() < 2) throw InputError("PCA needs at least two rows");
    if (!rows.allFinite()) throw InputError("PCA input has non-finite entries");
    if (!(variance_target > 0.0 && variance_target <= 1.0))
        throw ConfigError("variance_target must lie in (0, 1]");

    bool all_equal = true;
    for (Eigen::Index i = 1; i < rows.rows() && all_equal; ++i) all_equal = rows.row(i) == rows.row(0);
    if (all_equal) throw DegenerateDataError("all rows are identical; covariance is zero");

    PcaModel m;
    m.mean = rows.colwise().mean().transpose();
    const Eigen::MatrixXd centered = rows.rowwise() - m.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(rows.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw DegenerateDataError("eigendecomposition failed");

    const Eigen::Index d = cov.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    const auto& ev = solver.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ev[a] > ev[b]; });

    m.axes.resize(d, d);
    m.eigenvalues.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto src = order[static_cast<std::size_t>(i)];
        m.eigenvalues[i] = std::max(0.0, ev[src]);
        Eigen::VectorXd axis = solver.eigenvectors().col(src);
        // Sign convention: largest-magnitude component positive.
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis[arg] < 0.0) axis = -axis;
        m.axes.col(i) = axis;
    }

    const double total = m.eigenvalues.sum();
    if (!(total > 0.0)) throw DegenerateDataError("covariance has no positive eigenvalue");
    m.explained_variance = m.eigenvalues / total;

    double cumulative = 0.0;
    m.retained = static_cast<int>(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        cumulative += m.explained_variance[i];
        if (cumulative >= variance_target - 1e-12) {
            m.retained = static_cast<int>(i + 1);
            break;
        }
    }
    return m;
}

Eigen::MatrixXd PcaModel::project(const Eigen::MatrixXd& rows) const {
    return (rows.rowwise() - mean.transpose()) * axes.leftCols(retained);
}

Eigen::VectorXd PcaModel::project(const Eigen::VectorXd& row) const {
    return axes.leftCols(retained).transpose() * (row - mean);
}

Eigen::MatrixXd PcaModel::reconstruct(const Eigen::MatrixXd& coords) const {
    Eigen::MatrixXd out = coords * axes.leftCols(retained).transpose();
    out.rowwise() += mean.transpose();
    return out;
}

double PcaModel::retained_variance() const {
    return explained_variance.head(retained).sum();
}

}  // namespace rxrl
