#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace rxrl {

struct KnnResult {
    double value = 0.0;
    std::size_t neighbors_used = 0;
    bool fewer_than_k = false;   // pool for this action was smaller than k
    bool tie_expanded = false;   // ties at the k-th distance pulled in extra neighbors
    std::vector<std::size_t> neighbors;  // row ids, nearest first
};

// Encounters grouped by the action the clinician logged. Row ids are
// positions in the matrix handed to the constructor.
class KnnIndex {
public:
    KnnIndex() = default;
    KnnIndex(Eigen::MatrixXd points, std::vector<int> actions, std::vector<double> outcomes);

    std::size_t size() const { return actions_.size(); }
    std::size_t count(int action) const;
    const Eigen::MatrixXd& points() const { return points_; }
    double outcome(std::size_t row) const { return outcomes_[row]; }
    int action(std::size_t row) const { return actions_[row]; }

    // Mean outcome over the k nearest (Euclidean) rows whose action matches.
    // Rows with a NaN outcome and `exclude` are skipped. Throws
    // UnsupportedActionError when no eligible row has the action.
    KnnResult query(const Eigen::VectorXd& point, int action, std::size_t k,
                    std::optional<std::size_t> exclude = std::nullopt) const;

private:
    Eigen::MatrixXd points_;
    std::vector<int> actions_;
    std::vector<double> outcomes_;
    std::map<int, std::vector<std::size_t>> by_action_;
};

}  // namespace rxrl
