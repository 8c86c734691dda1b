#pragma once

#include "mimo/config.hpp"
#include "mimo/receiver.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace mimo {

// Binary user-to-BS association rho. Each user is served by at most one BS
// (kUnassigned otherwise); column capacities are checked against a
// capacity vector by feasible() because predicted associations may exceed them.
class Association {
public:
    static constexpr int kUnassigned = -1;

    Association() = default;
    Association(int users, int num_bs);
    static Association from_serving(std::vector<int> serving, int num_bs);

    int users() const { return static_cast<int>(serving_.size()); }
    int num_bs() const { return num_bs_; }
    int serving(int k) const { return serving_.at(static_cast<std::size_t>(k)); }
    bool rho(int k, int m) const { return serving(k) == m; }
    const std::vector<int>& serving() const { return serving_; }

    void assign(int k, int m);
    void unassign(int k) { serving_.at(static_cast<std::size_t>(k)) = kUnassigned; }

    std::vector<int> loads() const;
    int assigned_count() const;
    bool feasible(std::span<const int> capacities) const;
    Eigen::MatrixXi matrix() const;

    friend bool operator==(const Association&, const Association&) = default;

private:
    std::vector<int> serving_;
    int num_bs_ = 0;
};

struct SolveReport {
    double objective = 0.0;
    bool integral = true;
    double max_fractionality = 0.0;
    int solver_iterations = 0;
    // Sum of capacities below K: some users necessarily stay unassigned.
    bool capacity_shortfall = false;
};

struct SolveResult {
    Association association;
    SolveReport report;
};

// Exact maximizer of sum rho(k, m) r(k, m) under the one-BS-per-user and
// capacity constraints: min-cost flow source -> users -> BSs -> sink with
// successive shortest paths. Throws DomainError on negative or non-finite rates.
SolveResult solve_association(const Eigen::MatrixXd& rates, std::span<const int> capacities);
SolveResult solve_association(const RateMatrix& rates, std::span<const int> capacities);

// The continuous relaxation (rho in [0, 1]) solved by a dense primal simplex.
// The report carries the fractionality of the returned vertex; the
// association rounds entries at 1/2.
SolveResult solve_association_lp(const Eigen::MatrixXd& rates, std::span<const int> capacities);

struct BruteForceResult {
    Association association;
    double objective = 0.0;
};

// Exhaustive search over every capacity-feasible assignment, each user
// choosing a BS or none. Requires (M + 1)^K <= 1e7. On ties the first
// assignment in lexicographic order wins, where a user's choices are ordered
// BS 0 < BS 1 < ... < unassigned.
BruteForceResult brute_force_association(const Eigen::MatrixXd& rates, std::span<const int> capacities);

// sum_{k,m} rho(k, m) r(k, m); unassigned users contribute zero.
double association_objective(const Association& assoc, const Eigen::MatrixXd& rates);

// B (tau_u / tau_c) sum rho r, in bit/s.
double sum_rate(const Association& assoc, const Eigen::MatrixXd& rates, const NetworkConfig& cfg);
double sum_rate(const Association& assoc, const RateMatrix& rates, const NetworkConfig& cfg);

namespace detail {
// Solver with an optional injected fault (flips the sign of the first
// user-BS arc cost). Used by the self-test to prove it detects a broken solver.
SolveResult solve_association_flow(const Eigen::MatrixXd& rates, std::span<const int> capacities,
                                   bool flip_first_cost);
}  // namespace detail

}  // namespace mimo
