#pragma once

#include "cotmap/bev.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace cotmap {

struct UnknownPolicy {
  enum class Kind { Forbid, Penalty } kind = Kind::Forbid;
  double penalty = 0.0;  ///< COT used for unknown cells under Kind::Penalty
};

struct PlanProblem {
  const GlobalBevMap* map = nullptr;
  Vec2 start = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  UnknownPolicy unknown;
  int connectivity = 8;
  /// Cells with COT at or above this are impassable when set.
  std::optional<double> hard_forbid;
};

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

struct PathResult {
  std::vector<Cell> cells;
  double total_cost = 0.0;
  double total_distance = 0.0;
};

class NoPathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Effective COT of a cell under the problem's policies; nullopt when impassable.
std::optional<double> cell_cost(const PlanProblem& problem, int row, int col);

/// Sum over steps of mean(COT(a), COT(b)) * step length (cell_size or sqrt(2) * cell_size).
PathResult path_cost(const PlanProblem& problem, const std::vector<Cell>& cells);

/// A* with heuristic (minimum passable COT) * Euclidean distance; ties break on (f, cell index).
struct AstarStats {
  std::vector<Cell> expanded;
};
PathResult astar_plan(const PlanProblem& problem, AstarStats* stats = nullptr);

/// Exhaustive Dijkstra; independent optimality oracle.
PathResult dijkstra_oracle(const PlanProblem& problem);

/// Exact cost-to-goal for every cell (infinity where the goal is unreachable).
std::vector<double> cost_to_goal(const PlanProblem& problem);

/// Shortest-distance route over passable cells, priced afterwards with path_cost.
PathResult shortest_distance_plan(const PlanProblem& problem);

/// Minimum passable COT in the map (the heuristic's per-meter lower bound).
double min_passable_cot(const PlanProblem& problem);

}  // namespace cotmap
