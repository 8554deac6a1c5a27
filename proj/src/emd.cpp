#include "mfg/emd.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace mfg {

namespace {

struct Arc {
  int i, j;      // source row, sink column
  double flow;
  bool alive;
};

struct Simplex {
  int m, n;
  const std::vector<Vec2>& xs;
  const std::vector<Vec2>& ys;
  std::vector<double> a, b;            // perturbed supplies/demands
  std::vector<Arc> arcs;               // basic arcs (tree edges), lazily deleted
  std::vector<std::vector<int>> adj;   // node -> arc indices; nodes: 0..m-1 rows, m..m+n-1 cols
  std::vector<double> u, v;            // duals
  std::vector<int> parent_arc;         // scratch for BFS

  Simplex(const std::vector<Vec2>& xs_, const Eigen::ArrayXd& a_, const std::vector<Vec2>& ys_,
          const Eigen::ArrayXd& b_)
      : m(static_cast<int>(xs_.size())), n(static_cast<int>(ys_.size())), xs(xs_), ys(ys_) {
    a.assign(a_.data(), a_.data() + m);
    b.assign(b_.data(), b_.data() + n);
    // tiny supply perturbation against degenerate pivots; absorbed by the
    // last column so totals still match
    double delta = 1e-13 * (a_.sum() / (m + n));
    for (int i = 0; i < m; ++i) a[i] += delta;
    b[n - 1] += delta * m;
    adj.resize(m + n);
    u.resize(m);
    v.resize(n);
    parent_arc.resize(m + n);
  }

  double cost(int i, int j) const { return (xs[i] - ys[j]).norm(); }

  void add_arc(int i, int j, double f) {
    arcs.push_back({i, j, f, true});
    int id = static_cast<int>(arcs.size()) - 1;
    adj[i].push_back(id);
    adj[m + j].push_back(id);
  }

  void remove_arc(int id) {
    arcs[id].alive = false;
    auto scrub = [&](int node) {
      auto& l = adj[node];
      for (size_t k = 0; k < l.size(); ++k)
        if (l[k] == id) {
          l[k] = l.back();
          l.pop_back();
          break;
        }
    };
    scrub(arcs[id].i);
    scrub(m + arcs[id].j);
  }

  void northwest_init() {
    std::vector<double> ra = a, rb = b;
    int i = 0, j = 0;
    while (i < m && j < n) {
      double f = std::min(ra[i], rb[j]);
      add_arc(i, j, f);
      ra[i] -= f;
      rb[j] -= f;
      // advance exactly one index per basic cell so the tree has m+n-1 arcs
      if (i == m - 1 && j == n - 1) break;
      if (ra[i] <= rb[j] && i < m - 1)
        ++i;
      else if (j < n - 1)
        ++j;
      else
        ++i;
    }
  }

  void compute_duals() {
    std::vector<char> seen(m + n, 0);
    std::deque<int> q;
    u[0] = 0.0;
    seen[0] = 1;
    q.push_back(0);
    while (!q.empty()) {
      int node = q.front();
      q.pop_front();
      for (int id : adj[node]) {
        const Arc& e = arcs[id];
        int other = (node < m) ? m + e.j : e.i;
        if (seen[other]) continue;
        seen[other] = 1;
        if (other < m)
          u[other] = cost(e.i, e.j) - v[e.j];
        else
          v[other - m] = cost(e.i, e.j) - u[e.i];
        q.push_back(other);
      }
    }
  }

  double solve() {
    northwest_init();
    compute_duals();
    const double tol = 1e-11;
    const long long total_cells = static_cast<long long>(m) * n;
    const long long block = std::max<long long>(4096, total_cells / 64);
    long long cursor = 0;
    long long max_pivots = 200LL * (m + n) + 10000;
    for (long long pivot = 0; pivot < max_pivots; ++pivot) {
      // block search for the entering arc
      int bi = -1, bj = -1;
      double best = -tol;
      long long scanned = 0;
      while (scanned < total_cells) {
        long long stop = std::min(scanned + block, total_cells);
        for (; scanned < stop; ++scanned) {
          long long cell = (cursor + scanned) % total_cells;
          int i = static_cast<int>(cell / n), j = static_cast<int>(cell % n);
          double rc = cost(i, j) - u[i] - v[j];
          if (rc < best) {
            best = rc;
            bi = i;
            bj = j;
          }
        }
        if (bi >= 0) break;
      }
      cursor = (cursor + scanned) % total_cells;
      if (bi < 0) break;  // optimal
      pivot_on(bi, bj);
      compute_duals();
    }
    double c = 0;
    for (const Arc& e : arcs)
      if (e.alive) c += e.flow * cost(e.i, e.j);
    // certificate: dual feasibility within tolerance
    double worst = 0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) worst = std::min(worst, cost(i, j) - u[i] - v[j]);
    if (worst < -1e-7 * (1.0 + c))
      throw std::runtime_error("emd: simplex terminated without optimality certificate");
    return c;
  }

  void pivot_on(int bi, int bj) {
    // cycle = entering arc (bi,bj) + tree path from row bi to column bj
    std::fill(parent_arc.begin(), parent_arc.end(), -1);
    std::vector<char> seen(m + n, 0);
    std::deque<int> q;
    seen[bi] = 1;
    q.push_back(bi);
    int target = m + bj;
    while (!q.empty() && !seen[target]) {
      int node = q.front();
      q.pop_front();
      for (int id : adj[node]) {
        const Arc& e = arcs[id];
        int other = (node == e.i) ? m + e.j : e.i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_arc[other] = id;
        q.push_back(other);
        if (other == target) break;
      }
    }
    if (!seen[target]) throw std::logic_error("emd: basis not connected");
    // Walk parents from column bj back to row bi. Each segment prev -> node is
    // oriented along the cycle direction bi -> ... -> bj, so arcs used
    // row->column there carry flow parallel to the entering arc and must lose
    // theta; column->row arcs gain it.
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    std::vector<std::pair<int, int>> steps;  // (arc id, sign for flow update)
    int node = target;
    while (node != bi) {
      int id = parent_arc[node];
      const Arc& e = arcs[id];
      int prev = (node == e.i) ? m + e.j : e.i;
      bool gains = (prev != e.i);
      steps.push_back({id, gains ? +1 : -1});
      if (!gains && e.flow < theta) {
        theta = e.flow;
        leaving = id;
      }
      node = prev;
    }
    if (leaving < 0) throw std::logic_error("emd: unbounded pivot");
    for (auto [id, sgn] : steps) arcs[id].flow += sgn * theta;
    remove_arc(leaving);
    add_arc(bi, bj, theta);
  }
};

}  // namespace

double emd(const std::vector<Vec2>& xs, const Eigen::ArrayXd& a, const std::vector<Vec2>& ys,
           const Eigen::ArrayXd& b) {
  if (xs.empty() || ys.empty()) throw std::invalid_argument("emd: empty support");
  if (static_cast<Eigen::Index>(xs.size()) != a.size() ||
      static_cast<Eigen::Index>(ys.size()) != b.size())
    throw std::invalid_argument("emd: size mismatch");
  if (std::abs(a.sum() - b.sum()) > 1e-9) throw std::invalid_argument("emd: unbalanced masses");
  Simplex s(xs, a, ys, b);
  return s.solve();
}

}  // namespace mfg
