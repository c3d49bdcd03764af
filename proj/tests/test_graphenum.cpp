#include <gtest/gtest.h>

#include <cstdint>
#include <vector>

#include "mrdl/graphenum.hpp"

using namespace mrdl;

namespace {

// Connected labeled graphs counted by flood fill over adjacency bitmasks,
// independently of the recurrence and of the union-find enumerator.
std::uint64_t brute_force_connected(unsigned n) {
  std::vector<std::pair<unsigned, unsigned>> pairs;
  for (unsigned i = 0; i < n; ++i) {
    for (unsigned j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::uint64_t count = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs.size()); ++mask) {
    std::vector<unsigned> adj(n, 0);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      if (mask >> k & 1U) {
        adj[pairs[k].first] |= 1U << pairs[k].second;
        adj[pairs[k].second] |= 1U << pairs[k].first;
      }
    }
    unsigned seen = 1;
    unsigned frontier = 1;
    while (frontier) {
      unsigned next = 0;
      for (unsigned v = 0; v < n; ++v) {
        if (frontier >> v & 1U) next |= adj[v];
      }
      frontier = next & ~seen;
      seen |= next;
    }
    if (seen == (1U << n) - 1U) ++count;
  }
  return count;
}

LabeledGraph complete(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
  }
  return make_graph(n, e);
}

}  // namespace

TEST(ConnectedCount, KnownSequence) {
  const std::vector<int> expected{1, 1, 4, 38, 728};
  for (unsigned n = 1; n <= 5; ++n) EXPECT_EQ(connected_count(n), expected[n - 1]) << n;
  EXPECT_EQ(connected_count(6), 26704);
}

TEST(ConnectedCount, MatchesBruteForce) {
  for (unsigned n = 1; n <= 5; ++n) {
    EXPECT_EQ(connected_count(n), BigInt(brute_force_connected(n))) << n;
  }
}

TEST(ConnectedCount, LargeNIsExact) {
  // d_N approaches 2^C(N,2) from below and stays an integer for large N.
  const BigInt d20 = connected_count(20);
  EXPECT_LT(d20, upper_bound(20));
  EXPECT_GT(d20 * 100, upper_bound(20) * 99);
  EXPECT_THROW(connected_count(0), InvalidArgument);
}

TEST(Bounds, Examples) {
  EXPECT_EQ(upper_bound(2), 2);
  EXPECT_EQ(upper_bound(3), 8);
  EXPECT_EQ(upper_bound(4), 64);
  const std::vector<int> lower{1, 1, 4, 15, 72};
  for (unsigned n = 1; n <= 5; ++n) EXPECT_EQ(lower_bound(n), lower[n - 1]) << n;
}

TEST(EnumerateConnected, CountsAndShape) {
  const auto three = enumerate_connected(3);
  ASSERT_EQ(three.size(), 4u);
  int paths = 0, triangles = 0;
  for (const auto& g : three) {
    EXPECT_TRUE(is_connected(g));
    paths += g.edges.size() == 2;
    triangles += g.edges.size() == 3;
  }
  EXPECT_EQ(paths, 3);
  EXPECT_EQ(triangles, 1);
  EXPECT_EQ(enumerate_connected(2).size(), 1u);
  EXPECT_EQ(enumerate_connected(4).size(), 38u);
  EXPECT_EQ(BigInt(enumerate_connected(5).size()), connected_count(5));
  EXPECT_THROW(enumerate_connected(7), InvalidArgument);
}

TEST(MakeGraph, CanonicalForm) {
  const auto g = make_graph(3, {{2, 1}, {0, 1}, {1, 2}});
  EXPECT_EQ(g.edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
  EXPECT_TRUE(g.has_edge(2, 1));
  EXPECT_FALSE(g.has_edge(0, 2));
  EXPECT_THROW(make_graph(3, {{1, 1}}), InvalidArgument);
  EXPECT_EQ(g.hash(), make_graph(3, {{1, 2}, {0, 1}}).hash());
  EXPECT_NE(g.hash(), make_graph(3, {{0, 2}, {0, 1}}).hash());
}

TEST(EmbedGraph, TriangleAndPathAreEmbeddable) {
  for (const auto& g : {complete(3), make_graph(3, {{0, 1}, {1, 2}})}) {
    const auto r = embed_graph(g, 0.5);
    ASSERT_TRUE(r.feasible) << g.to_string();
    // Re-check distances from the returned positions.
    for (std::size_t u = 0; u < 3; ++u) {
      for (std::size_t v = u + 1; v < 3; ++v) {
        const double d = (r.positions[u] - r.positions[v]).norm();
        if (g.has_edge(u, v)) {
          EXPECT_NEAR(d, 0.5, 1e-8);
        } else {
          EXPECT_GE(d, 0.5 * (1.0 + 1e-3) - 1e-8);
        }
      }
    }
  }
}

TEST(EmbedGraph, CompleteGraphOnFourIsNotEmbeddable) {
  const auto r = embed_graph(complete(4), 1.0);
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.attempts_used, 200);
  EXPECT_GT(r.max_violation, 1e-3);
}

TEST(EmbedGraph, DeterministicVerdicts) {
  const auto g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
  const auto a = embed_graph(g, 1.0);
  const auto b = embed_graph(g, 1.0);
  ASSERT_TRUE(a.feasible);
  EXPECT_EQ(a.attempts_used, b.attempts_used);
  EXPECT_EQ(a.positions, b.positions);
}

TEST(CountAdmissible, SmallN) {
  EXPECT_EQ(count_admissible(1, 1.0).admissible, 1u);
  EXPECT_EQ(count_admissible(2, 1.0).admissible, 1u);
  EXPECT_EQ(count_admissible(3, 1.0).admissible, 4u);
}

TEST(CountAdmissible, ChainOfBoundsHolds) {
  for (unsigned n = 1; n <= 4; ++n) {
    const auto row = count_admissible(n, 1.0);
    EXPECT_LE(row.lower, BigInt(row.admissible)) << n;
    EXPECT_LE(BigInt(row.admissible), row.connected) << n;
    EXPECT_LE(row.connected, row.upper) << n;
    for (const auto& e : row.entries) {
      if (!e.embedding.feasible) continue;
      EXPECT_LE(embedding_violation(e.graph, e.embedding.positions, 1.0, 1e-3), 1e-9);
    }
  }
}

TEST(CountAdmissible, FourVerticesOnlyCompleteGraphFails) {
  const auto row = count_admissible(4, 1.0);
  EXPECT_EQ(row.admissible, 37u);
  for (const auto& e : row.entries) {
    EXPECT_EQ(e.embedding.feasible, e.graph.edges.size() != 6) << e.graph.to_string();
  }
  EXPECT_THROW(count_admissible(5, 1.0), InvalidArgument);
}
