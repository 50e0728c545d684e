#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otvq/ot/discrete.hpp"

namespace otvq::ot {

inline constexpr std::size_t kExactMaxCells = 400;

struct ExactOptions {
    std::size_t max_pivots = 20000;
    double marginal_tol = 1e-9;
};

namespace detail {

struct Cell {
    std::size_t i, j;
};

// Transportation simplex state. Basic cells form a spanning tree of the
// bipartite row/column graph with exactly n + k - 1 edges (zeros allowed).
class TransportSimplex {
public:
    TransportSimplex(std::span<const double> supply, std::span<const double> demand, const Matrix& cost)
        : n_(supply.size()), k_(demand.size()), cost_(cost), x_(n_, k_), basic_(n_ * k_, 0) {
        north_west_corner(supply, demand);
    }

    // Runs pivots until no reduced cost is negative. Returns the pivot count.
    std::size_t solve(std::size_t max_pivots) {
        std::size_t pivots = 0;
        std::vector<double> u, v;
        while (true) {
            potentials(u, v);
            auto entering = bland_entering(u, v);
            if (!entering) return pivots;
            if (++pivots > max_pivots) {
                throw NumericError("exact_ot: pivot budget of " + std::to_string(max_pivots) + " exhausted");
            }
            pivot(*entering);
        }
    }

    Matrix plan() const {
        Matrix m = x_;
        for (double& e : m.data) {
            if (e < 0.0 && e > -1e-13) e = 0.0;
            if (std::abs(e) < 1e-15) e = 0.0;
        }
        return m;
    }

    std::vector<Cell> basis() const { return cells_; }

private:
    bool is_basic(std::size_t i, std::size_t j) const { return basic_[i * k_ + j] != 0; }

    void add_basic(std::size_t i, std::size_t j) {
        basic_[i * k_ + j] = 1;
        cells_.push_back({i, j});
    }

    void north_west_corner(std::span<const double> supply, std::span<const double> demand) {
        std::vector<double> a(supply.begin(), supply.end()), b(demand.begin(), demand.end());
        std::size_t i = 0, j = 0;
        while (true) {
            const double q = std::min(a[i], b[j]);
            x_(i, j) = q;
            a[i] -= q;
            b[j] -= q;
            add_basic(i, j);
            if (i == n_ - 1 && j == k_ - 1) break;
            if (i == n_ - 1) {
                ++j;
            } else if (j == k_ - 1) {
                ++i;
            } else if (a[i] <= b[j]) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    // u_i + v_j = c_ij on every basic cell, u_0 = 0.
    void potentials(std::vector<double>& u, std::vector<double>& v) const {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        u.assign(n_, nan);
        v.assign(k_, nan);
        std::vector<std::vector<std::size_t>> row_cols(n_), col_rows(k_);
        for (const auto& c : cells_) {
            row_cols[c.i].push_back(c.j);
            col_rows[c.j].push_back(c.i);
        }
        u[0] = 0.0;
        std::deque<std::pair<bool, std::size_t>> queue{{true, 0}};
        while (!queue.empty()) {
            auto [is_row, idx] = queue.front();
            queue.pop_front();
            if (is_row) {
                for (std::size_t j : row_cols[idx]) {
                    if (std::isnan(v[j])) {
                        v[j] = cost_(idx, j) - u[idx];
                        queue.emplace_back(false, j);
                    }
                }
            } else {
                for (std::size_t i : col_rows[idx]) {
                    if (std::isnan(u[i])) {
                        u[i] = cost_(i, idx) - v[idx];
                        queue.emplace_back(true, i);
                    }
                }
            }
        }
    }

    // Bland: first nonbasic cell in row-major order with negative reduced cost.
    std::optional<Cell> bland_entering(const std::vector<double>& u, const std::vector<double>& v) const {
        double scale = 1.0;
        for (double c : cost_.data) scale = std::max(scale, std::abs(c));
        const double tol = 1e-12 * scale;
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < k_; ++j) {
                if (is_basic(i, j)) continue;
                if (cost_(i, j) - u[i] - v[j] < -tol) return Cell{i, j};
            }
        }
        return std::nullopt;
    }

    // Tree path from column `col` to row `row` as a list of basic cells.
    std::vector<Cell> tree_path(std::size_t col, std::size_t row) const {
        // nodes: rows 0..n-1, columns n..n+k-1
        const std::size_t total = n_ + k_;
        std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(total);  // (neighbor, cell index)
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            adj[cells_[c].i].emplace_back(n_ + cells_[c].j, c);
            adj[n_ + cells_[c].j].emplace_back(cells_[c].i, c);
        }
        const std::size_t none = std::numeric_limits<std::size_t>::max();
        std::vector<std::size_t> via(total, none), prev(total, none);
        std::vector<char> seen(total, 0);
        std::deque<std::size_t> queue{n_ + col};
        seen[n_ + col] = 1;
        while (!queue.empty()) {
            const std::size_t node = queue.front();
            queue.pop_front();
            if (node == row) break;
            for (auto [next, cell] : adj[node]) {
                if (seen[next]) continue;
                seen[next] = 1;
                prev[next] = node;
                via[next] = cell;
                queue.push_back(next);
            }
        }
        if (!seen[row]) throw NumericError("exact_ot: basis is not a spanning tree");
        std::vector<Cell> path;
        for (std::size_t node = row; node != n_ + col; node = prev[node]) path.push_back(cells_[via[node]]);
        std::reverse(path.begin(), path.end());  // starts at the cell in column `col`
        return path;
    }

    void pivot(Cell entering) {
        const auto path = tree_path(entering.j, entering.i);
        // Cycle: entering (+), then path cells alternating -, +, -, ... ending with -.
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = std::numeric_limits<std::size_t>::max();
        for (std::size_t p = 0; p < path.size(); p += 2) {
            const auto& c = path[p];
            const double q = std::max(0.0, x_(c.i, c.j));
            const std::size_t flat = c.i * k_ + c.j;
            const bool better = q < theta || (q == theta && flat < leave);
            if (better) {
                theta = q;
                leave = flat;
            }
        }
        x_(entering.i, entering.j) += theta;
        for (std::size_t p = 0; p < path.size(); ++p) {
            const auto& c = path[p];
            x_(c.i, c.j) += (p % 2 == 0) ? -theta : theta;
        }
        const std::size_t li = leave / k_, lj = leave % k_;
        x_(li, lj) = 0.0;
        basic_[leave] = 0;
        cells_.erase(std::find_if(cells_.begin(), cells_.end(), [&](const Cell& c) { return c.i == li && c.j == lj; }));
        add_basic(entering.i, entering.j);
    }

    std::size_t n_, k_;
    const Matrix& cost_;
    Matrix x_;
    std::vector<char> basic_;
    std::vector<Cell> cells_;
};

}  // namespace detail

/// Exact discrete optimal transport by the transportation simplex method
/// (north-west-corner start, stepping-stone pivots, Bland's rule).
/// Intended as an oracle: n * k is limited to kExactMaxCells.
inline TransportPlan exact_ot(std::span<const double> mu, std::span<const double> nu, const Matrix& cost,
                              const ExactOptions& opts = {}) {
    if (mu.empty() || nu.empty()) throw ValueError("exact_ot: empty marginal");
    if (cost.rows != mu.size() || cost.cols != nu.size()) {
        throw ShapeError("exact_ot: cost is " + std::to_string(cost.rows) + "x" + std::to_string(cost.cols) +
                         ", marginals " + std::to_string(mu.size()) + "x" + std::to_string(nu.size()));
    }
    if (mu.size() * nu.size() > kExactMaxCells) throw ValueError("exact_ot: instance exceeds oracle scale");
    for (double c : cost.data) {
        if (!std::isfinite(c)) throw NumericError("exact_ot: non-finite cost");
    }
    double sa = 0.0, sb = 0.0;
    for (double a : mu) {
        if (!(a >= 0.0)) throw ValueError("exact_ot: negative row marginal");
        sa += a;
    }
    for (double b : nu) {
        if (!(b >= 0.0)) throw ValueError("exact_ot: negative column marginal");
        sb += b;
    }
    if (std::abs(sa - sb) > opts.marginal_tol) {
        throw ValueError("exact_ot: marginal mismatch (" + std::to_string(sa) + " vs " + std::to_string(sb) + ")");
    }

    detail::TransportSimplex simplex(mu, nu, cost);
    simplex.solve(opts.max_pivots);
    return finalize_plan(simplex.plan(), cost);
}

inline TransportPlan exact_ot(const DiscreteDist& mu, const DiscreteDist& nu, const Matrix& cost,
                              const ExactOptions& opts = {}) {
    mu.validate();
    nu.validate();
    return exact_ot(mu.weights, nu.weights, cost, opts);
}

}  // namespace otvq::ot
