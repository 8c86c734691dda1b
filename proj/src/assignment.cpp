#include "mimo/assignment.hpp"

#include "mimo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mimo {

Association::Association(int users, int num_bs)
    : serving_(static_cast<std::size_t>(users), kUnassigned), num_bs_(num_bs)
{
}

Association Association::from_serving(std::vector<int> serving, int num_bs)
{
    Association a;
    a.num_bs_ = num_bs;
    for (int m : serving) {
        if (m != kUnassigned && (m < 0 || m >= num_bs)) throw DomainError("association: BS index out of range");
    }
    a.serving_ = std::move(serving);
    return a;
}

void Association::assign(int k, int m)
{
    if (m < 0 || m >= num_bs_) throw DomainError("association: BS index out of range");
    serving_.at(static_cast<std::size_t>(k)) = m;
}

std::vector<int> Association::loads() const
{
    std::vector<int> out(static_cast<std::size_t>(num_bs_), 0);
    for (int m : serving_) {
        if (m != kUnassigned) ++out[m];
    }
    return out;
}

int Association::assigned_count() const
{
    return static_cast<int>(std::count_if(serving_.begin(), serving_.end(), [](int m) { return m != kUnassigned; }));
}

bool Association::feasible(std::span<const int> capacities) const
{
    if (static_cast<int>(capacities.size()) != num_bs_) return false;
    const auto l = loads();
    for (int m = 0; m < num_bs_; ++m) {
        if (l[m] > capacities[m]) return false;
    }
    return true;
}

Eigen::MatrixXi Association::matrix() const
{
    Eigen::MatrixXi rho = Eigen::MatrixXi::Zero(users(), num_bs_);
    for (int k = 0; k < users(); ++k) {
        if (serving_[k] != kUnassigned) rho(k, serving_[k]) = 1;
    }
    return rho;
}

namespace {

void check_instance(const Eigen::MatrixXd& rates, std::span<const int> capacities)
{
    if (rates.cols() != static_cast<Eigen::Index>(capacities.size()))
        throw DomainError("association: one capacity per BS required");
    if (!rates.allFinite()) throw DomainError("association: rates must be finite");
    if ((rates.array() < 0.0).any()) throw DomainError("association: rates must be non-negative");
    for (int d : capacities) {
        if (d < 0) throw DomainError("association: capacities must be non-negative");
    }
}

bool shortfall(const Eigen::MatrixXd& rates, std::span<const int> capacities)
{
    const long total = std::accumulate(capacities.begin(), capacities.end(), 0L);
    return total < rates.rows();
}

struct Arc {
    int to;
    int rev;
    int cap;
    double cost;
};

class FlowNetwork {
public:
    explicit FlowNetwork(int nodes) : adj_(static_cast<std::size_t>(nodes)) {}

    int add_arc(int from, int to, int cap, double cost)
    {
        adj_[from].push_back({to, static_cast<int>(adj_[to].size()), cap, cost});
        adj_[to].push_back({from, static_cast<int>(adj_[from].size()) - 1, 0, -cost});
        return static_cast<int>(adj_[from].size()) - 1;
    }

    const Arc& arc(int from, int index) const { return adj_[from][index]; }

    // Successive shortest paths with Bellman-Ford (costs may be negative).
    // Stops when no augmenting path of non-positive cost remains.
    int min_cost_flow(int source, int sink)
    {
        const int n = static_cast<int>(adj_.size());
        constexpr double inf = std::numeric_limits<double>::infinity();
        int augmentations = 0;
        std::vector<double> dist(static_cast<std::size_t>(n));
        std::vector<int> prev_node(static_cast<std::size_t>(n));
        std::vector<int> prev_arc(static_cast<std::size_t>(n));
        while (true) {
            std::fill(dist.begin(), dist.end(), inf);
            dist[source] = 0.0;
            for (int pass = 0; pass < n; ++pass) {
                bool changed = false;
                for (int u = 0; u < n; ++u) {
                    if (dist[u] == inf) continue;
                    for (int i = 0; i < static_cast<int>(adj_[u].size()); ++i) {
                        const Arc& a = adj_[u][i];
                        if (a.cap <= 0) continue;
                        const double candidate = dist[u] + a.cost;
                        if (candidate < dist[a.to] - 1e-12) {
                            dist[a.to] = candidate;
                            prev_node[a.to] = u;
                            prev_arc[a.to] = i;
                            changed = true;
                        }
                    }
                }
                if (!changed) break;
            }
            if (dist[sink] == inf || dist[sink] > 1e-12) break;
            for (int v = sink; v != source; v = prev_node[v]) {
                Arc& a = adj_[prev_node[v]][prev_arc[v]];
                a.cap -= 1;
                adj_[v][a.rev].cap += 1;
            }
            ++augmentations;
        }
        return augmentations;
    }

private:
    std::vector<std::vector<Arc>> adj_;
};

}  // namespace

namespace detail {

SolveResult solve_association_flow(const Eigen::MatrixXd& rates, std::span<const int> capacities,
                                   bool flip_first_cost)
{
    check_instance(rates, capacities);
    const int users = static_cast<int>(rates.rows());
    const int num_bs = static_cast<int>(rates.cols());
    const int source = users + num_bs;
    const int sink = source + 1;

    FlowNetwork net(users + num_bs + 2);
    for (int k = 0; k < users; ++k) net.add_arc(source, k, 1, 0.0);
    std::vector<int> user_arc(static_cast<std::size_t>(users) * num_bs);
    for (int k = 0; k < users; ++k) {
        for (int m = 0; m < num_bs; ++m) {
            double cost = -rates(k, m);
            if (flip_first_cost && k == 0 && m == 0) cost = -cost;
            user_arc[static_cast<std::size_t>(k) * num_bs + m] = net.add_arc(k, users + m, 1, cost);
        }
    }
    for (int m = 0; m < num_bs; ++m) net.add_arc(users + m, sink, capacities[m], 0.0);

    SolveResult out{Association(users, num_bs), {}};
    out.report.solver_iterations = net.min_cost_flow(source, sink);
    for (int k = 0; k < users; ++k) {
        for (int m = 0; m < num_bs; ++m) {
            if (net.arc(k, user_arc[static_cast<std::size_t>(k) * num_bs + m]).cap == 0) out.association.assign(k, m);
        }
    }
    out.report.objective = association_objective(out.association, rates);
    out.report.capacity_shortfall = shortfall(rates, capacities);
    return out;
}

}  // namespace detail

SolveResult solve_association(const Eigen::MatrixXd& rates, std::span<const int> capacities)
{
    return detail::solve_association_flow(rates, capacities, false);
}

SolveResult solve_association(const RateMatrix& rates, std::span<const int> capacities)
{
    return solve_association(rates.r, capacities);
}

SolveResult solve_association_lp(const Eigen::MatrixXd& rates, std::span<const int> capacities)
{
    check_instance(rates, capacities);
    const int users = static_cast<int>(rates.rows());
    const int num_bs = static_cast<int>(rates.cols());
    const int vars = users * num_bs;
    const int rows = users + num_bs;
    const int cols = vars + rows;  // structural + slack
    constexpr double eps = 1e-10;

    // Tableau for max c^T x, A x <= b, x >= 0 with b >= 0: the slack basis is
    // feasible. Last column holds the right-hand side, last row reduced costs.
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows + 1, cols + 1);
    for (int k = 0; k < users; ++k) {
        for (int m = 0; m < num_bs; ++m) {
            const int j = k * num_bs + m;
            t(k, j) = 1.0;
            t(users + m, j) = 1.0;
            t(rows, j) = -rates(k, m);
        }
    }
    for (int i = 0; i < rows; ++i) {
        t(i, vars + i) = 1.0;
        t(i, cols) = i < users ? 1.0 : static_cast<double>(capacities[i - users]);
    }
    std::vector<int> basis(static_cast<std::size_t>(rows));
    std::iota(basis.begin(), basis.end(), vars);

    int iterations = 0;
    while (true) {
        // Bland's rule: first improving column, then first tying row.
        int enter = -1;
        for (int j = 0; j < cols; ++j) {
            if (t(rows, j) < -eps) {
                enter = j;
                break;
            }
        }
        if (enter < 0) break;
        int leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < rows; ++i) {
            if (t(i, enter) > eps) {
                const double ratio = t(i, cols) / t(i, enter);
                if (ratio < best - eps || (leave >= 0 && std::abs(ratio - best) <= eps && basis[i] < basis[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) throw NumericalError("association LP: unbounded relaxation");
        t.row(leave) /= t(leave, enter);
        for (int i = 0; i <= rows; ++i) {
            if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
        }
        basis[leave] = enter;
        ++iterations;
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(vars);
    for (int i = 0; i < rows; ++i) {
        if (basis[i] < vars) x(basis[i]) = t(i, cols);
    }
    SolveResult out{Association(users, num_bs), {}};
    double frac = 0.0;
    for (int j = 0; j < vars; ++j) {
        frac = std::max(frac, std::min(std::abs(x(j)), std::abs(1.0 - x(j))));
        if (x(j) > 0.5) out.association.assign(j / num_bs, j % num_bs);
    }
    double objective = 0.0;
    for (int j = 0; j < vars; ++j) objective += x(j) * rates(j / num_bs, j % num_bs);
    out.report.objective = objective;
    out.report.max_fractionality = frac;
    out.report.integral = frac <= 1e-6;
    out.report.solver_iterations = iterations;
    out.report.capacity_shortfall = shortfall(rates, capacities);
    return out;
}

BruteForceResult brute_force_association(const Eigen::MatrixXd& rates, std::span<const int> capacities)
{
    check_instance(rates, capacities);
    const int users = static_cast<int>(rates.rows());
    const int num_bs = static_cast<int>(rates.cols());
    const double count = std::pow(static_cast<double>(num_bs + 1), users);
    if (count > 1e7)
        throw SizeError("brute force association: (M+1)^K = " + std::to_string(count) + " exceeds 1e7");

    // choice[k] in [0, M]; M means unassigned. Enumerated in lexicographic order.
    std::vector<int> choice(static_cast<std::size_t>(users), 0);
    std::vector<int> load(static_cast<std::size_t>(num_bs), 0);
    BruteForceResult best{Association(users, num_bs), -1.0};

    // Depth-first enumeration with capacity pruning keeps the lexicographic order.
    auto recurse = [&](auto&& self, int k, double value) -> void {
        if (k == users) {
            if (value > best.objective) {
                best.objective = value;
                std::vector<int> serving(choice.begin(), choice.end());
                for (int& m : serving) {
                    if (m == num_bs) m = Association::kUnassigned;
                }
                best.association = Association::from_serving(std::move(serving), num_bs);
            }
            return;
        }
        for (int m = 0; m <= num_bs; ++m) {
            if (m < num_bs && load[m] >= capacities[m]) continue;
            choice[k] = m;
            if (m < num_bs) ++load[m];
            self(self, k + 1, value + (m < num_bs ? rates(k, m) : 0.0));
            if (m < num_bs) --load[m];
        }
    };
    recurse(recurse, 0, 0.0);
    return best;
}

double association_objective(const Association& assoc, const Eigen::MatrixXd& rates)
{
    if (assoc.users() != rates.rows() || assoc.num_bs() != rates.cols())
        throw DomainError("association objective: dimension mismatch");
    double total = 0.0;
    for (int k = 0; k < assoc.users(); ++k) {
        if (assoc.serving(k) != Association::kUnassigned) total += rates(k, assoc.serving(k));
    }
    return total;
}

double sum_rate(const Association& assoc, const Eigen::MatrixXd& rates, const NetworkConfig& cfg)
{
    return cfg.bandwidth_hz * cfg.uplink_fraction() * association_objective(assoc, rates);
}

double sum_rate(const Association& assoc, const RateMatrix& rates, const NetworkConfig& cfg)
{
    return sum_rate(assoc, rates.r, cfg);
}

}  // namespace mimo
