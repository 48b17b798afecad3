#include <gtest/gtest.h>

#include <set>

#include "mapfw/error.hpp"
#include "mapfw/grid.hpp"
#include "mapfw/rng.hpp"
#include "test_util.hpp"

using namespace mapfw;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::PreconditionViolated;
}

}  // namespace

TEST(LoadMap, ParsesCharacters) {
  GridMap m = load_map("type octile\nheight 2\nwidth 2\nmap\n.@\n..\n");
  EXPECT_EQ(m.width(), 2);
  EXPECT_EQ(m.height(), 2);
  EXPECT_EQ(m.free_count(), 3);
  EXPECT_EQ(m.at({0, 1}), Cell::Obstacle);
}

TEST(LoadMap, AllObstacleCharsAndGoalChar) {
  GridMap m = load_map("type octile\nheight 1\nwidth 6\nmap\n.G@OTW\n");
  EXPECT_EQ(m.free_count(), 2);
  EXPECT_TRUE(m.is_free({0, 1}));
  for (int c = 2; c < 6; ++c) EXPECT_FALSE(m.is_free({0, c}));
}

TEST(LoadMap, Errors) {
  EXPECT_EQ(code_of([] { load_map("type octile\nheight 2\nwidth 2\nmap\n..\n..\n..\n"); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { load_map("type octile\nheight 2\nwidth 2\nmap\n..\n"); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { load_map("type octile\nheight 1\nwidth 3\nmap\n..\n"); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { load_map("type octile\nheight 1\nwidth 2\nmap\n.x\n"); }), ErrorCode::UnknownCellChar);
  EXPECT_EQ(code_of([] { load_map("height 1\nwidth 1\nmap\n.\n"); }), ErrorCode::MalformedHeader);
  EXPECT_EQ(code_of([] { load_map("type octile\nheight 0\nwidth 1\nmap\n"); }), ErrorCode::MalformedHeader);
}

TEST(LoadMap, AllFree17) {
  GridMap m(17, 17);
  EXPECT_EQ(load_map(save_map(m)).free_count(), 289);
}

TEST(SaveMap, ExactBytes) {
  EXPECT_EQ(save_map(GridMap(1, 1)), "type octile\nheight 1\nwidth 1\nmap\n.\n");
}

TEST(SaveMap, RoundTripAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GridMap m = testutil::random_map(21, 21, 0.3, seed);
    const std::string a = save_map(m);
    EXPECT_EQ(a, save_map(m));
    EXPECT_EQ(load_map(a), m);
  }
}

TEST(GenerateInstance, FullMapEveryCellIsStart) {
  GridMap m(5, 5);
  ProblemInstance inst = generate_instance(m, 25, 7);
  std::set<Coord> starts, goals;
  for (const auto& a : inst.agents) {
    starts.insert(a.start);
    goals.insert(a.goal);
  }
  EXPECT_EQ(starts.size(), 25u);
  EXPECT_EQ(goals.size(), 25u);
}

TEST(GenerateInstance, Deterministic) {
  GridMap m = testutil::random_map(12, 12, 0.2, 3);
  EXPECT_EQ(generate_instance(m, 8, 99), generate_instance(m, 8, 99));
  EXPECT_NE(generate_instance(m, 8, 99), generate_instance(m, 8, 100));
}

TEST(GenerateInstance, TooManyAgents) {
  GridMap m(2, 2);
  EXPECT_EQ(code_of([&] { generate_instance(m, 5, 1); }), ErrorCode::TooManyAgents);
}

TEST(GenerateInstance, GoalsStayInStartComponent) {
  // Column 4 is a wall splitting the map into two halves.
  GridMap m(9, 6);
  for (int r = 0; r < 6; ++r) m.set({r, 4}, Cell::Obstacle);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ProblemInstance inst = generate_instance(m, 6, seed);
    for (const auto& a : inst.agents) {
      EXPECT_TRUE(bfs_cost_to_goal(m, a.goal).reachable(a.start));
      EXPECT_TRUE(m.is_free(a.start));
      EXPECT_TRUE(m.is_free(a.goal));
    }
  }
}

TEST(GenerateInstance, NoReachableGoal) {
  // (0,0) is an isolated cell; an agent starting there almost never draws it as goal.
  GridMap m(60, 60);
  m.set({0, 1}, Cell::Obstacle);
  m.set({1, 0}, Cell::Obstacle);
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    try {
      ProblemInstance inst = generate_instance(m, 200, seed);
      for (const auto& a : inst.agents) ASSERT_TRUE(bfs_cost_to_goal(m, a.goal).reachable(a.start));
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::NoReachableGoal);
      ++failures;
    }
  }
  EXPECT_GT(failures, 0);
}

TEST(Step, SwapBothWait) {
  GridMap m(3, 1);
  auto r = step(State{{{0, 0}, {0, 1}}, 0}, {Action::Right, Action::Left}, m);
  EXPECT_EQ(r.resolved, (std::vector<Action>{Action::Wait, Action::Wait}));
  EXPECT_EQ(r.state.positions, (std::vector<Coord>{{0, 0}, {0, 1}}));
  EXPECT_EQ(r.state.step, 1);
}

TEST(Step, OffMapWait) {
  GridMap m(3, 3);
  auto r = step(State{{{0, 0}}, 0}, {Action::Up}, m);
  EXPECT_EQ(r.resolved[0], Action::Wait);
  EXPECT_EQ(r.state.positions[0], (Coord{0, 0}));
}

TEST(Step, ObstacleWait) {
  GridMap m = load_map("type octile\nheight 1\nwidth 2\nmap\n.@\n");
  auto r = step(State{{{0, 0}}, 0}, {Action::Right}, m);
  EXPECT_EQ(r.resolved[0], Action::Wait);
}

TEST(Step, VertexConflictBothWait) {
  GridMap m(3, 1);
  auto r = step(State{{{0, 0}, {0, 2}}, 0}, {Action::Right, Action::Left}, m);
  EXPECT_EQ(r.resolved, (std::vector<Action>{Action::Wait, Action::Wait}));
}

TEST(Step, ChainedWaitPropagates) {
  // 0 blocked by the wall, 1 follows 0, 2 follows 1: all wait.
  GridMap m = load_map("type octile\nheight 1\nwidth 4\nmap\n...@\n");
  auto r = step(State{{{0, 2}, {0, 1}, {0, 0}}, 0}, {Action::Right, Action::Right, Action::Right}, m);
  EXPECT_EQ(r.resolved, (std::vector<Action>{Action::Wait, Action::Wait, Action::Wait}));
}

TEST(Step, TrainFollowingMoves) {
  GridMap m(4, 1);
  auto r = step(State{{{0, 2}, {0, 1}, {0, 0}}, 0}, {Action::Right, Action::Right, Action::Right}, m);
  EXPECT_EQ(r.state.positions, (std::vector<Coord>{{0, 3}, {0, 2}, {0, 1}}));
}

TEST(Step, InvalidStateThrows) {
  GridMap m(3, 1);
  EXPECT_EQ(code_of([&] { step(State{{{0, 0}, {0, 0}}, 0}, {Action::Wait, Action::Wait}, m); }),
            ErrorCode::StateInvalid);
  EXPECT_EQ(code_of([&] { step(State{{{0, 5}}, 0}, {Action::Wait}, m); }), ErrorCode::StateInvalid);
}

TEST(Step, RandomJointActionsStayValid) {
  Rng rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    const int w = 5 + static_cast<int>(rng.below(5));
    const int h = 5 + static_cast<int>(rng.below(5));
    GridMap m = testutil::random_map(w, h, 0.2, rng.next_u64());
    std::vector<Coord> free = m.free_cells();
    rng.shuffle(std::span<Coord>(free));
    const int n = std::min<int>(static_cast<int>(free.size()), 1 + static_cast<int>(rng.below(12)));
    State s{{free.begin(), free.begin() + n}, 0};
    std::vector<Action> joint(n);
    for (auto& a : joint) a = static_cast<Action>(rng.below(5));
    auto r = step(s, joint, m);
    std::set<Coord> seen(r.state.positions.begin(), r.state.positions.end());
    ASSERT_EQ(seen.size(), static_cast<std::size_t>(n));
    for (Coord c : r.state.positions) ASSERT_TRUE(m.is_free(c));
    ASSERT_TRUE(is_conflict_free(s, r.resolved, m));
    ASSERT_EQ(resolve_joint_action(s, r.resolved, m), r.resolved);
    ProblemInstance inst{m, {}, 0};
    for (int i = 0; i < n; ++i) inst.agents.push_back({s.positions[i], s.positions[i]});
    std::vector<Path> paths(n);
    for (int i = 0; i < n; ++i) paths[i] = {s.positions[i], r.state.positions[i]};
    ASSERT_TRUE(validate_plan(inst, paths).ok);
  }
}

TEST(IsSuccess, Cases) {
  GridMap m(4, 4);
  ProblemInstance inst{m, {{{0, 0}, {3, 3}}, {{1, 1}, {2, 2}}}, 0};
  EXPECT_TRUE(is_success(State{{{3, 3}, {2, 2}}, 0}, inst));
  EXPECT_FALSE(is_success(State{{{3, 2}, {2, 2}}, 0}, inst));
  EXPECT_TRUE(is_success(State{}, ProblemInstance{m, {}, 0}));
}

TEST(ValidatePlan, VertexCollision) {
  GridMap m(3, 3);
  ProblemInstance inst{m, {{{0, 1}, {2, 1}}, {{1, 0}, {1, 2}}}, 0};
  auto rep = validate_plan(inst, {{{0, 1}, {1, 1}}, {{1, 0}, {1, 1}}});
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_FALSE(rep.ok);
  EXPECT_EQ(rep.violations[0].step, 1);
  EXPECT_EQ(rep.violations[0].kind, ViolationKind::VertexCollision);
}

TEST(ValidatePlan, EdgeCollision) {
  GridMap m(2, 1);
  ProblemInstance inst{m, {{{0, 0}, {0, 1}}, {{0, 1}, {0, 0}}}, 0};
  auto rep = validate_plan(inst, {{{0, 0}, {0, 1}}, {{0, 1}, {0, 0}}});
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].kind, ViolationKind::EdgeCollision);
  EXPECT_EQ(rep.violations[0].step, 1);
}

TEST(ValidatePlan, OkAndWaitAtEnd) {
  GridMap m(4, 2);
  ProblemInstance inst{m, {{{0, 0}, {0, 3}}, {{1, 0}, {1, 1}}}, 0};
  EXPECT_TRUE(validate_plan(inst, {{{0, 0}, {0, 1}, {0, 2}, {0, 3}}, {{1, 0}, {1, 1}}}).ok);
  // Agent 1 parks at (0,2) and agent 0 runs into it afterwards.
  ProblemInstance inst2{m, {{{0, 0}, {0, 3}}, {{1, 2}, {0, 2}}}, 0};
  auto rep = validate_plan(inst2, {{{0, 0}, {0, 1}, {0, 2}, {0, 3}}, {{1, 2}, {0, 2}}});
  EXPECT_FALSE(rep.ok);
  EXPECT_EQ(rep.violations[0].step, 2);
}

TEST(ValidatePlan, ObstacleAndTeleport) {
  GridMap m = load_map("type octile\nheight 1\nwidth 4\nmap\n.@..\n");
  ProblemInstance inst{m, {{{0, 0}, {0, 3}}}, 0};
  auto rep = validate_plan(inst, {{{0, 0}, {0, 1}, {0, 3}}});
  ASSERT_EQ(rep.violations.size(), 2u);
  EXPECT_EQ(rep.violations[0].kind, ViolationKind::ObstacleEntry);
  EXPECT_EQ(rep.violations[1].kind, ViolationKind::Teleport);
  EXPECT_EQ(code_of([&] { validate_plan(inst, {{}}); }), ErrorCode::EmptyPath);
  EXPECT_EQ(code_of([&] { validate_plan(inst, {{{0, 2}}}); }), ErrorCode::WrongStart);
}

TEST(Bfs, DistancesAndWalls) {
  GridMap m(7, 5);
  CostField f = bfs_cost_to_goal(m, {2, 3});
  EXPECT_EQ(f.at({2, 3}), 0);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 7; ++c) EXPECT_EQ(f.at({r, c}), std::abs(r - 2) + std::abs(c - 3));

  GridMap walled = load_map("type octile\nheight 3\nwidth 3\nmap\n.@.\n@@.\n...\n");
  CostField g = bfs_cost_to_goal(walled, {2, 2});
  EXPECT_FALSE(g.reachable({0, 0}));
  EXPECT_FALSE(g.reachable({0, 1}));
  EXPECT_EQ(g.at({0, 2}), 2);
  EXPECT_EQ(code_of([&] { bfs_cost_to_goal(walled, {0, 1}); }), ErrorCode::GoalOnObstacle);
}

TEST(Bfs, NeighborTriangleProperty) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GridMap m = testutil::random_map(15, 11, 0.3, seed);
    auto free = m.free_cells();
    CostField f = bfs_cost_to_goal(m, free[seed % free.size()]);
    for (Coord u : free) {
      if (!f.reachable(u)) continue;
      for (Action a : kMoves) {
        Coord v = u + action_delta(a);
        if (m.is_free(v)) {
          ASSERT_TRUE(f.reachable(v));
          ASSERT_LE(std::abs(f.at(u) - f.at(v)), 1);
        }
      }
    }
  }
}
