#include "cotmap/plan.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <tuple>

namespace cotmap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kDr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
constexpr int kDc[8] = {0, 0, -1, 1, -1, 1, -1, 1};

const GlobalBevMap& map_of(const PlanProblem& p) {
  if (!p.map) throw std::invalid_argument("plan: problem has no map");
  if (p.connectivity != 4 && p.connectivity != 8) throw std::invalid_argument("plan: connectivity must be 4 or 8");
  return *p.map;
}

Cell locate(const PlanProblem& p, const Vec2& xy, const char* what) {
  CellQuery q;
  try {
    q = query_cell(*p.map, xy);
  } catch (const std::out_of_range&) {
    throw std::invalid_argument(std::string("plan: ") + what + " is outside the map");
  }
  if (!cell_cost(p, q.row, q.col)) throw std::invalid_argument(std::string("plan: ") + what + " is not traversable");
  return {q.row, q.col};
}

// Generic best-first search; weight(a, b, step) gives the edge weight, h the heuristic.
PathResult search(const PlanProblem& p, const std::function<double(double, double, double)>& weight,
                  const std::function<double(int, int)>& h, AstarStats* stats) {
  const GlobalBevMap& m = map_of(p);
  const Cell s = locate(p, p.start, "start"), g = locate(p, p.goal, "goal");
  const int rows = m.rows(), cols = m.cols();
  const auto n = std::size_t(rows) * std::size_t(cols);
  std::vector<double> gcost(n, kInf), cost(n, kInf);
  std::vector<int> parent(n, -1);
  std::vector<char> closed(n, 0), cached(n, 0);
  auto cost_at = [&](int r, int c) {
    const auto i = std::size_t(r) * std::size_t(cols) + std::size_t(c);
    if (!cached[i]) {
      cached[i] = 1;
      cost[i] = cell_cost(p, r, c).value_or(kInf);
    }
    return cost[i];
  };
  using Entry = std::tuple<double, int>;  // (f, index)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const int si = s.row * cols + s.col, gi = g.row * cols + g.col;
  gcost[std::size_t(si)] = 0.0;
  open.emplace(h(s.row, s.col), si);
  while (!open.empty()) {
    const auto [f, idx] = open.top();
    open.pop();
    if (closed[std::size_t(idx)]) continue;
    closed[std::size_t(idx)] = 1;
    const int r = idx / cols, c = idx % cols;
    if (stats) stats->expanded.push_back({r, c});
    if (idx == gi) break;
    const double ca = cost_at(r, c);
    for (int k = 0; k < p.connectivity; ++k) {
      const int nr = r + kDr[k], nc = c + kDc[k];
      if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
      const int ni = nr * cols + nc;
      if (closed[std::size_t(ni)]) continue;
      const double cb = cost_at(nr, nc);
      if (cb == kInf) continue;
      const double step = (k < 4 ? 1.0 : std::sqrt(2.0)) * m.cell_size;
      const double ng = gcost[std::size_t(idx)] + weight(ca, cb, step);
      if (ng < gcost[std::size_t(ni)]) {
        gcost[std::size_t(ni)] = ng;
        parent[std::size_t(ni)] = idx;
        open.emplace(ng + h(nr, nc), ni);
      }
    }
  }
  if (!closed[std::size_t(gi)]) throw NoPathError("plan: goal is unreachable");
  std::vector<Cell> cells;
  for (int i = gi; i >= 0; i = parent[std::size_t(i)]) cells.push_back({i / cols, i % cols});
  std::reverse(cells.begin(), cells.end());
  return path_cost(p, cells);
}

double cot_weight(double a, double b, double step) { return 0.5 * (a + b) * step; }

}  // namespace

std::optional<double> cell_cost(const PlanProblem& problem, int row, int col) {
  const GlobalBevMap& m = map_of(problem);
  double c;
  if (!m.known(row, col) || m.cot(row, col) <= 0.0) {
    if (problem.unknown.kind == UnknownPolicy::Kind::Forbid) return std::nullopt;
    c = problem.unknown.penalty;
  } else {
    c = m.cot(row, col);
  }
  if (problem.hard_forbid && c >= *problem.hard_forbid) return std::nullopt;
  if (!(c > 0.0)) return std::nullopt;
  return c;
}

PathResult path_cost(const PlanProblem& problem, const std::vector<Cell>& cells) {
  const GlobalBevMap& m = map_of(problem);
  PathResult r;
  r.cells = cells;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& b = cells[i];
    if (b.row < 0 || b.col < 0 || b.row >= m.rows() || b.col >= m.cols())
      throw std::invalid_argument("path_cost: cell outside the map");
    if (!cell_cost(problem, b.row, b.col)) throw std::invalid_argument("path_cost: path crosses a forbidden cell");
    if (i == 0) continue;
    const Cell& a = cells[i - 1];
    const int dr = std::abs(a.row - b.row), dc = std::abs(a.col - b.col);
    const bool axial = dr + dc == 1, diag = dr == 1 && dc == 1;
    if (!axial && !(diag && problem.connectivity == 8)) throw std::invalid_argument("path_cost: cells are not adjacent");
    const double step = (axial ? 1.0 : std::sqrt(2.0)) * m.cell_size;
    r.total_cost += cot_weight(*cell_cost(problem, a.row, a.col), *cell_cost(problem, b.row, b.col), step);
    r.total_distance += step;
  }
  return r;
}

double min_passable_cot(const PlanProblem& problem) {
  const GlobalBevMap& m = map_of(problem);
  double lo = kInf;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (const auto v = cell_cost(problem, r, c)) lo = std::min(lo, *v);
  return lo == kInf ? 0.0 : lo;
}

PathResult astar_plan(const PlanProblem& problem, AstarStats* stats) {
  const GlobalBevMap& m = map_of(problem);
  const double cmin = min_passable_cot(problem);
  const Cell g = locate(problem, problem.goal, "goal");
  const Vec2 goal = m.center(g.row, g.col);
  return search(problem, cot_weight, [&](int r, int c) { return cmin * (m.center(r, c) - goal).norm(); }, stats);
}

PathResult dijkstra_oracle(const PlanProblem& problem) {
  return search(problem, cot_weight, [](int, int) { return 0.0; }, nullptr);
}

PathResult shortest_distance_plan(const PlanProblem& problem) {
  return search(problem, [](double, double, double step) { return step; }, [](int, int) { return 0.0; }, nullptr);
}

std::vector<double> cost_to_goal(const PlanProblem& problem) {
  const GlobalBevMap& m = map_of(problem);
  const Cell g = locate(problem, problem.goal, "goal");
  const int rows = m.rows(), cols = m.cols();
  std::vector<double> dist(std::size_t(rows) * std::size_t(cols), kInf);
  using Entry = std::tuple<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist[std::size_t(g.row * cols + g.col)] = 0.0;
  open.emplace(0.0, g.row * cols + g.col);
  while (!open.empty()) {
    const auto [d, idx] = open.top();
    open.pop();
    if (d > dist[std::size_t(idx)]) continue;
    const int r = idx / cols, c = idx % cols;
    const double ca = *cell_cost(problem, r, c);
    for (int k = 0; k < problem.connectivity; ++k) {
      const int nr = r + kDr[k], nc = c + kDc[k];
      if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
      const auto cb = cell_cost(problem, nr, nc);
      if (!cb) continue;
      const double nd = d + cot_weight(ca, *cb, (k < 4 ? 1.0 : std::sqrt(2.0)) * m.cell_size);
      const int ni = nr * cols + nc;
      if (nd < dist[std::size_t(ni)]) {
        dist[std::size_t(ni)] = nd;
        open.emplace(nd, ni);
      }
    }
  }
  return dist;
}

}  // namespace cotmap
