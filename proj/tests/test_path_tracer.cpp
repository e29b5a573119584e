#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "evasion/censored_stats.hpp"
#include "evasion/eikonal.hpp"
#include "evasion/episode.hpp"
#include "evasion/path_tracer.hpp"

using namespace evasion;

namespace {

const PdeGrid kPde(Domain{}, 101);
const ObsGrid kObs(Domain{}, 20);
constexpr double kStep = 0.005;

ScalarField peak_cost(const PdeGrid& g, double scale = 1.0) {
  return ScalarField::sample(g, [scale](Point p) {
    return scale * (0.05 + 8.0 * std::exp(-squared_distance(p, {0.55, 0.3}) / 0.03));
  });
}

Trajectory polyline(std::initializer_list<Point> pts) {
  Trajectory t;
  for (Point p : pts) {
    const double dt = t.size() == 0 ? 0.0 : norm(p - t.vertices.back());
    t.append(p, dt);
  }
  return t;
}

void expect_valid_trajectory(const Trajectory& t, Point x0, double h) {
  ASSERT_GE(t.size(), 2u);
  EXPECT_EQ(t.vertices.front(), x0);
  EXPECT_NEAR(Domain{}.distance_to_boundary(t.vertices.back()), 0.0, 1e-15);
  for (std::size_t k = 1; k < t.size(); ++k) {
    EXPECT_LE(norm(t.vertices[k] - t.vertices[k - 1]), h * (1 + 1e-12));
    EXPECT_TRUE(Domain{}.contains(t.vertices[k]));
  }
}

TEST(TracePath, DistanceFieldGivesStraightExit) {
  const ScalarField u = solve_eikonal(ScalarField(kPde, 1.0));
  const Trajectory t = trace_path(u, {0.5, 0.3}, kStep);
  expect_valid_trajectory(t, {0.5, 0.3}, kStep);
  EXPECT_NEAR(t.length(), 0.3, 2 * kStep);
  EXPECT_NEAR(t.vertices.back().x, 0.5, 1e-9);
  EXPECT_EQ(t.vertices.back().y, 0.0);
}

TEST(TracePath, CenterTieExitsAtAnEdgeMidpoint) {
  const ScalarField u = solve_eikonal(ScalarField(kPde, 1.0));
  const Trajectory t = trace_path(u, {0.5, 0.5}, kStep);
  expect_valid_trajectory(t, {0.5, 0.5}, kStep);
  EXPECT_NEAR(t.length(), 0.5, 2 * kStep);
  const Point e = t.vertices.back();
  const double to_mid = std::min({norm(e - Point{0.5, 0.0}), norm(e - Point{0.5, 1.0}),
                                  norm(e - Point{0.0, 0.5}), norm(e - Point{1.0, 0.5})});
  EXPECT_LT(to_mid, 0.02);
}

TEST(TracePath, LeavesThroughAChannelNarrowerThanTheStep) {
  // A learned lower-confidence field whose cheapest exit runs through a
  // one-node-wide channel: off the grid line every half-spacing step goes
  // uphill, so only a node-to-node move can continue the descent.
  std::ifstream in(std::string(EVASION_TEST_DATA_DIR) + "/channel_plan_cells.csv");
  ASSERT_TRUE(in.good());
  std::string line;
  std::getline(in, line);
  std::vector<double> cells(kObs.cell_count());
  int i = 0, j = 0;
  double v = 0.0;
  char comma = 0;
  while (in >> i >> comma >> j >> comma >> v) {
    cells[static_cast<std::size_t>(i) + 20u * static_cast<std::size_t>(j)] = v;
  }
  const ScalarField plan = prolong_cells(cells, kObs, kPde);
  const ScalarField u = solve_eikonal(plan);
  const Point x0{0.49, 0.52};
  Trajectory t;
  ASSERT_NO_THROW(t = trace_path(u, x0, kStep));
  expect_valid_trajectory(t, x0, kStep * std::sqrt(8.0));
  EXPECT_LE(cumulative_intensity(t, plan), 1.05 * interpolate(u, x0));
}

TEST(TracePath, IndependentOfCostScale) {
  const Point x0{0.47, 0.41};
  const Trajectory a = trace_path(solve_eikonal(peak_cost(kPde)), x0, kStep);
  for (double c : {0.01, 7.0}) {
    const Trajectory b = trace_path(solve_eikonal(peak_cost(kPde, c)), x0, kStep);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_NEAR(a.vertices[k].x, b.vertices[k].x, 1e-10);
      EXPECT_NEAR(a.vertices[k].y, b.vertices[k].y, 1e-10);
    }
  }
}

TEST(TracePath, StepRefinementChangesLittle) {
  const ScalarField k = peak_cost(kPde);
  const ScalarField u = solve_eikonal(k);
  const Point x0{0.5, 0.45};
  const Trajectory coarse = trace_path(u, x0, kStep);
  const Trajectory fine = trace_path(u, x0, kStep / 10);
  expect_valid_trajectory(coarse, x0, kStep);
  EXPECT_NEAR(coarse.length(), fine.length(), 0.02 * fine.length());
  const double jc = cumulative_intensity(coarse, k);
  const double jf = cumulative_intensity(fine, k);
  EXPECT_NEAR(jc, jf, 0.02 * jf);
}

TEST(TracePath, AvoidsTheExpensiveRegion) {
  const ScalarField k = peak_cost(kPde);
  const Trajectory t = trace_path(solve_eikonal(k), {0.55, 0.45}, kStep);
  // The straight drop to y = 0 crosses the peak; the traced path must be cheaper.
  const Trajectory straight = polyline({{0.55, 0.45}, {0.55, 0.0}});
  EXPECT_LT(cumulative_intensity(t, k), 0.8 * cumulative_intensity(straight, k));
}

TEST(TracePath, TravelTimeUsesSpeed) {
  const ScalarField speed(kPde, 2.0);
  const ScalarField u = solve_eikonal(speed, ScalarField(kPde, 1.0));
  const Trajectory t = trace_path(u, {0.5, 0.3}, kStep, &speed);
  EXPECT_NEAR(t.total_time(), 0.5 * t.length(), 1e-12);
}

TEST(TracePath, CorruptFieldDoesNotConverge) {
  // A bowl has an interior minimum, so descent never reaches the boundary.
  const ScalarField bowl =
      ScalarField::sample(kPde, [](Point p) { return squared_distance(p, {0.5, 0.5}); });
  EXPECT_THROW(trace_path(bowl, {0.3, 0.3}, kStep), NonConvergenceError);
}

TEST(TracePath, ContractViolations) {
  const ScalarField u = solve_eikonal(ScalarField(kPde, 1.0));
  EXPECT_THROW(trace_path(u, {0.5, 0.5}, 0.0), ContractViolation);
  EXPECT_THROW(trace_path(u, {1.5, 0.5}, kStep), DomainError);
}

TEST(TrajectoryCsv, HeaderAndRows) {
  std::ostringstream os;
  write_trajectory_csv(os, polyline({{0.5, 0.5}, {0.5, 0.25}}));
  EXPECT_EQ(os.str(), "s,x,y\n0,0.5,0.5\n0.25,0.5,0.25\n");
}

TEST(SegmentByCells, HorizontalCrossing) {
  const auto v = segment_by_cells(polyline({{0.06, 0.025}, {0.14, 0.025}}), kObs);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].cell, (CellId{1, 0}));
  EXPECT_EQ(v[1].cell, (CellId{2, 0}));
  EXPECT_NEAR(v[0].duration, 0.04, 1e-15);
  EXPECT_NEAR(v[1].duration, 0.04, 1e-15);
  EXPECT_NEAR(v[1].entry_s, 0.04, 1e-15);
}

TEST(SegmentByCells, SingleCell) {
  const auto v = segment_by_cells(polyline({{0.51, 0.52}, {0.53, 0.54}}), kObs);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].cell, (CellId{10, 10}));
  EXPECT_NEAR(v[0].duration, std::sqrt(2.0) * 0.02, 1e-15);
}

TEST(SegmentByCells, CornerCrossingAssignsNoTimeToSideCells) {
  const auto v = segment_by_cells(polyline({{0.01, 0.01}, {0.09, 0.09}}), kObs);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].cell, (CellId{0, 0}));
  EXPECT_EQ(v[1].cell, (CellId{1, 1}));
  EXPECT_NEAR(v[0].duration, std::sqrt(2.0) * 0.04, 1e-15);
  EXPECT_NEAR(v[1].duration, std::sqrt(2.0) * 0.04, 1e-15);
}

TEST(SegmentByCells, ReentryIsANewVisit) {
  const auto v =
      segment_by_cells(polyline({{0.02, 0.02}, {0.07, 0.02}, {0.03, 0.02}}), kObs);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].cell, (CellId{0, 0}));
  EXPECT_EQ(v[1].cell, (CellId{1, 0}));
  EXPECT_EQ(v[2].cell, (CellId{0, 0}));
}

TEST(SegmentByCells, VerticesOnGridLinesLeaveNoSlivers) {
  const auto v = segment_by_cells(polyline({{0.1, 0.02}, {0.1, 0.08}}), kObs);
  ASSERT_EQ(v.size(), 2u);
  for (const CellVisit& visit : v) EXPECT_GT(visit.duration, 0.0);
}

TEST(SegmentByCells, ConservesTimeOnRandomTrajectories) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Trajectory t;
    Point p{unit(gen), unit(gen)};
    t.append(p, 0.0);
    const int n = 2 + static_cast<int>(unit(gen) * 40);
    for (int k = 0; k < n; ++k) {
      const Point q = Domain{}.clamp(p + 0.15 * Point{unit(gen) - 0.5, unit(gen) - 0.5});
      t.append(q, norm(q - p) / (0.2 + unit(gen)));
      p = q;
    }
    const auto visits = segment_by_cells(t, kObs);
    double total = 0.0;
    for (std::size_t k = 0; k < visits.size(); ++k) {
      const CellVisit& v = visits[k];
      total += v.duration;
      EXPECT_GT(v.duration, 0.0);
      if (k > 0) {
        EXPECT_FALSE(visits[k - 1].cell == v.cell);
        EXPECT_GE(v.entry_s, visits[k - 1].entry_s);
      }
      EXPECT_EQ(cell_index(t.point_at(0.5 * (v.entry_s + v.exit_s)), kObs), v.cell);
    }
    EXPECT_NEAR(total, t.total_time(), 1e-9 * t.total_time());
  }
}

TEST(SegmentByCells, DegenerateTrajectories) {
  Trajectory single;
  single.append({0.5, 0.5}, 0.0);
  EXPECT_TRUE(segment_by_cells(single, kObs).empty());
  EXPECT_TRUE(segment_by_cells(Trajectory{}, kObs).empty());
}

}  // namespace
