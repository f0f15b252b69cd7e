#pragma once

#include "ipm/core.hpp"
#include "ipm/distribution.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

namespace ipm {

struct TransportPlan {
  Matrix coupling;  // n_p x n_q
  double cost = 0.0;
};

namespace detail {

// O(n^3) assignment (shortest augmenting path with potentials). Returns col
// assigned to each row.
inline std::vector<int> hungarian(const Matrix& c) {
  const int n = static_cast<int>(c.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(n);
  for (int j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

// Transportation problem by successive shortest paths (Dijkstra with potentials)
// on the bipartite network source -> rows -> cols -> sink.
inline Matrix min_cost_flow(const Matrix& c, const Vector& a, const Vector& b) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  const int N = n + m + 2, S = n + m, T = n + m + 1;
  struct Edge {
    int to;
    double cap, cost;
    int rev;
  };
  std::vector<std::vector<Edge>> g(N);
  auto add = [&](int u, int v, double cap, double cost) {
    g[u].push_back({v, cap, cost, static_cast<int>(g[v].size())});
    g[v].push_back({u, 0.0, -cost, static_cast<int>(g[u].size()) - 1});
  };
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) add(S, i, a(i), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) add(i, n + j, inf, c(i, j));
  for (int j = 0; j < m; ++j) add(n + j, T, b(j), 0.0);

  const double total = std::min(a.sum(), b.sum());
  const double eps = 1e-14 * std::max(1.0, total);
  std::vector<double> pot(N, 0.0), dist(N);
  std::vector<int> prev_node(N), prev_edge(N);
  double sent = 0.0;
  for (int iter = 0; sent < total - eps; ++iter) {
    if (iter > 50 * N * N) throw NumericError("transport solver did not converge");
    std::fill(dist.begin(), dist.end(), inf);
    dist[S] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({0.0, S});
    while (!pq.empty()) {
      const auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) continue;
      for (std::size_t e = 0; e < g[u].size(); ++e) {
        const Edge& ed = g[u][e];
        if (ed.cap <= eps) continue;
        const double nd = d + std::max(0.0, ed.cost + pot[u] - pot[ed.to]);
        if (nd < dist[ed.to]) {
          dist[ed.to] = nd;
          prev_node[ed.to] = u;
          prev_edge[ed.to] = static_cast<int>(e);
          pq.push({nd, ed.to});
        }
      }
    }
    if (dist[T] == inf) throw NumericError("transport solver: sink unreachable");
    for (int v = 0; v < N; ++v)
      if (dist[v] < inf) pot[v] += dist[v];
    double push = inf;
    for (int v = T; v != S; v = prev_node[v]) push = std::min(push, g[prev_node[v]][prev_edge[v]].cap);
    for (int v = T; v != S; v = prev_node[v]) {
      Edge& ed = g[prev_node[v]][prev_edge[v]];
      ed.cap -= push;
      g[v][ed.rev].cap += push;
    }
    sent += push;
  }
  Matrix flow = Matrix::Zero(n, m);
  for (int i = 0; i < n; ++i)
    for (const Edge& ed : g[i])
      if (ed.to >= n && ed.to < n + m) flow(i, ed.to - n) = g[ed.to][ed.rev].cap;
  return flow;
}

// Groups bitwise-identical columns; returns representative index per group and
// group id per original column.
inline std::vector<int> merge_identical(const Matrix& pts, std::vector<int>& group_of) {
  std::vector<int> reps;
  group_of.assign(pts.cols(), -1);
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    for (std::size_t g = 0; g < reps.size(); ++g)
      if (pts.col(reps[g]) == pts.col(j)) {
        group_of[j] = static_cast<int>(g);
        break;
      }
    if (group_of[j] < 0) {
      group_of[j] = static_cast<int>(reps.size());
      reps.push_back(static_cast<int>(j));
    }
  }
  return reps;
}

}  // namespace detail

inline TransportPlan optimal_transport(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  require(p.dim() == q.dim(), "transport: dimension mismatch");
  require(std::abs(p.masses().sum() - 1.0) < 1e-9 && std::abs(q.masses().sum() - 1.0) < 1e-9,
          "transport: distributions must be normalized");
  const int n = p.size(), m = q.size();
  auto sqdist = [&](int i, int j) { return (p.points().col(i) - q.points().col(j)).squaredNorm(); };

  TransportPlan plan;
  plan.coupling = Matrix::Zero(n, m);
  const bool uniform_square = n == m && (p.masses().array() == p.mass(0)).all() &&
                              (q.masses().array() == q.mass(0)).all();
  if (uniform_square) {
    Matrix c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = sqdist(i, j);
    const auto assign = detail::hungarian(c);
    for (int i = 0; i < n; ++i) plan.coupling(i, assign[i]) = 1.0 / n;
  } else {
    std::vector<int> gp, gq;
    const auto rp = detail::merge_identical(p.points(), gp);
    const auto rq = detail::merge_identical(q.points(), gq);
    Vector a = Vector::Zero(static_cast<Eigen::Index>(rp.size())), b = Vector::Zero(static_cast<Eigen::Index>(rq.size()));
    for (int i = 0; i < n; ++i) a(gp[i]) += p.mass(i);
    for (int j = 0; j < m; ++j) b(gq[j]) += q.mass(j);
    Matrix c(a.size(), b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
      for (Eigen::Index j = 0; j < b.size(); ++j) c(i, j) = sqdist(rp[i], rq[j]);
    const Matrix flow = detail::min_cost_flow(c, a, b);
    // split merged flow in proportion to the original masses
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        plan.coupling(i, j) = flow(gp[i], gq[j]) * (p.mass(i) / a(gp[i])) * (q.mass(j) / b(gq[j]));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (plan.coupling(i, j) != 0.0) plan.cost += plan.coupling(i, j) * sqdist(i, j);
  return plan;
}

inline double wasserstein2(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  return std::sqrt(std::max(0.0, optimal_transport(p, q).cost));
}

}  // namespace ipm
