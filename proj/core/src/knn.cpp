#include "rxrl/knn.hpp"

#include <algorithm>
#include <cmath>

#include "rxrl/errors.hpp"

namespace rxrl {

KnnIndex::KnnIndex(Eigen::MatrixXd points, std::vector<int> actions, std::vector<double> outcomes)
    : points_(std::move(points)), actions_(std::move(actions)), outcomes_(std::move(outcomes)) {
    if (static_cast<std::size_t>(points_.rows()) != actions_.size() || actions_.size() != outcomes_.size())
        throw ShapeError("kNN index inputs differ in length");
    for (std::size_t i = 0; i < actions_.size(); ++i)
        if (!std::isnan(outcomes_[i])) by_action_[actions_[i]].push_back(i);
}

std::size_t KnnIndex::count(int action) const {
    const auto it = by_action_.find(action);
    return it == by_action_.end() ? 0 : it->second.size();
}

KnnResult KnnIndex::query(const Eigen::VectorXd& point, int action, std::size_t k,
                          std::optional<std::size_t> exclude) const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (point.size() != points_.cols()) throw ShapeError("query dimension does not match index");

    std::vector<std::pair<double, std::size_t>> cand;
    if (const auto it = by_action_.find(action); it != by_action_.end()) {
        cand.reserve(it->second.size());
        for (std::size_t row : it->second) {
            if (exclude && *exclude == row) continue;
            cand.emplace_back((points_.row(static_cast<Eigen::Index>(row)).transpose() - point).squaredNorm(), row);
        }
    }
    if (cand.empty()) throw UnsupportedActionError(action);

    KnnResult r;
    const std::size_t want = std::min(k, cand.size());
    r.fewer_than_k = cand.size() < k;
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(want), cand.end());
    std::size_t used = want;
    // Everything tied with the k-th distance comes along.
    const double kth = cand[want - 1].first;
    std::vector<std::pair<double, std::size_t>> ties;
    for (std::size_t i = want; i < cand.size(); ++i)
        if (cand[i].first == kth) ties.push_back(cand[i]);
    std::sort(ties.begin(), ties.end());
    for (std::size_t i = 0; i < ties.size(); ++i) cand[want + i] = ties[i];
    used += ties.size();
    r.tie_expanded = !ties.empty();

    double sum = 0.0;
    for (std::size_t i = 0; i < used; ++i) {
        sum += outcomes_[cand[i].second];
        r.neighbors.push_back(cand[i].second);
    }
    r.neighbors_used = used;
    r.value = sum / static_cast<double>(used);
    return r;
}

}  // namespace rxrl
