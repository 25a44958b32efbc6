#include <doctest.h>

#include <map>
#include <set>

#include "fmmlab/protocols.hpp"

using namespace fmmlab;
using namespace fmmlab::protocols;

namespace {

// k x k x k unit grid of rank boxes
std::vector<Box3> grid_boxes(int k) {
  std::vector<Box3> boxes;
  for (int z = 0; z < k; ++z)
    for (int y = 0; y < k; ++y)
      for (int x = 0; x < k; ++x)
        boxes.push_back({{double(x), double(y), double(z)},
                         {double(x + 1), double(y + 1), double(z + 1)}});
  return boxes;
}

int grid_rank(int k, int x, int y, int z) { return (z * k + y) * k + x; }

let::CellMsg make_cell(int origin, std::uint64_t key, int level, std::size_t nparticles, int p) {
  let::CellMsg c;
  c.origin = origin;
  c.key = {key, level, space::CurveKind::Morton};
  c.center = {double(origin), double(key), 0.5};
  c.radius = 0.25;
  c.box = {{0, 0, 0}, {1, 1, 1}};
  c.M.assign(static_cast<std::size_t>(core::MonomialBasis::coefficient_count(p)), double(origin) + 0.5);
  if (nparticles > 0) {
    c.leaf_payload = true;
    for (std::size_t i = 0; i < nparticles; ++i)
      c.particles.push_back({{double(i), 0, 0}, 1.0});
  }
  return c;
}

// every pair (src, dst) gets `cells` cells, `nparticles` particles each
ExchangeInput all_pairs_input(int ranks, std::size_t cells, std::size_t nparticles, int p,
                              std::vector<NeighborSet> neighbors = {}) {
  ExchangeInput in;
  in.ranks = ranks;
  in.p = p;
  in.neighbors = std::move(neighbors);
  in.outgoing.assign(static_cast<std::size_t>(ranks),
                     std::vector<std::vector<let::CellMsg>>(static_cast<std::size_t>(ranks)));
  for (int s = 0; s < ranks; ++s)
    for (int d = 0; d < ranks; ++d) {
      if (s == d) continue;
      for (std::size_t c = 0; c < cells; ++c)
        in.outgoing[static_cast<std::size_t>(s)][static_cast<std::size_t>(d)].push_back(
            make_cell(s, c, 0, nparticles, p));
    }
  return in;
}

using Digest = std::vector<std::vector<std::tuple<int, std::uint64_t>>>;
Digest digest_of(const ExchangeResult& ex) {
  Digest d(ex.received.size());
  for (std::size_t r = 0; r < ex.received.size(); ++r) {
    for (const auto& g : ex.received[r])
      for (const auto& c : g.cells) d[r].push_back({g.origin, c.key.key});
    std::sort(d[r].begin(), d[r].end());
  }
  return d;
}

}  // namespace

TEST_CASE("neighbors on a 3x3x3 grid: center has 26, corner has 7") {
  auto sets = build_neighbors(grid_boxes(3), 1e-6);
  CHECK(sets[static_cast<std::size_t>(grid_rank(3, 1, 1, 1))].neighbors.size() == 26);
  CHECK(sets[static_cast<std::size_t>(grid_rank(3, 0, 0, 0))].neighbors.size() == 7);
  // symmetry
  for (const auto& s : sets)
    for (int n : s.neighbors) {
      const auto& back = sets[static_cast<std::size_t>(n)].neighbors;
      CHECK(std::binary_search(back.begin(), back.end(), s.owner));
      CHECK(n != s.owner);
    }
}

TEST_CASE("neighbors of a 1d chain of 5 slabs") {
  std::vector<Box3> slabs;
  for (int i = 0; i < 5; ++i)
    slabs.push_back({{double(i), 0, 0}, {double(i + 1), 1, 1}});
  auto sets = build_neighbors(slabs, 1e-6);
  CHECK(sets[0].neighbors == std::vector<int>{1});
  CHECK(sets[1].neighbors == std::vector<int>{0, 2});
  CHECK(sets[2].neighbors == std::vector<int>{1, 3});
  CHECK(sets[4].neighbors == std::vector<int>{3});
}

TEST_CASE("an isolated rank is a configuration error") {
  std::vector<Box3> boxes = {{{0, 0, 0}, {1, 1, 1}}, {{5, 5, 5}, {6, 6, 6}}};
  CHECK_THROWS_AS(build_neighbors(boxes, 1e-6), std::invalid_argument);
}

TEST_CASE("nb_bound evaluates the relay budget formula") {
  CHECK(nb_bound(125, 27) == 4);  // 3d interior: ceil(98/26)
  CHECK(nb_bound(25, 9) == 2);    // 2d interior: ceil(16/8)
  CHECK(nb_bound(27, 27) == 0);   // no two-hop shell
  CHECK_THROWS_AS(nb_bound(5, 1), std::invalid_argument);
}

TEST_CASE("comm graph on a 1d chain of 5, owner 2") {
  std::vector<Box3> slabs;
  for (int i = 0; i < 5; ++i)
    slabs.push_back({{double(i), 0, 0}, {double(i + 1), 1, 1}});
  auto sets = build_neighbors(slabs, 1e-6);
  auto g = build_comm_graph(sets, 2);
  CHECK(g.max_level == 2);
  CHECK(g.levels[0] == std::vector<int>{1, 3});
  CHECK(g.levels[1] == std::vector<int>{0, 4});
  CHECK(g.relay[0] == 1);
  CHECK(g.relay[4] == 3);
  CHECK(g.relay[2] == -1);
  CHECK(g.level[2] == 0);
}

TEST_CASE("comm graph on a 3x3 flat grid: relays stay within the 2d budget") {
  std::vector<Box3> boxes;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x)
      boxes.push_back({{double(x), double(y), 0}, {double(x + 1), double(y + 1), 1}});
  auto sets = build_neighbors(boxes, 1e-6);
  auto g = build_comm_graph(sets, 4);  // center of the 3x3
  CHECK(g.max_level == 1);             // everything is a Moore neighbor of the center
  for (int corner : {0, 2, 6, 8}) {
    auto gc = build_comm_graph(sets, corner);
    CHECK(gc.max_level == 2);
    for (std::size_t r = 0; r < 9; ++r)
      if (gc.level[r] >= 1) CHECK(gc.load[r] <= nb_bound(25, 9));
  }
}

TEST_CASE("comm graph of a single rank is empty") {
  std::vector<NeighborSet> sets{{0, {}}};
  auto g = build_comm_graph(sets, 0);
  CHECK(g.max_level == 0);
  CHECK(g.levels.empty());
}

TEST_CASE("disconnected neighbor graph reports the unreachable ranks") {
  std::vector<NeighborSet> sets{{0, {1}}, {1, {0}}, {2, {3}}, {3, {2}}};
  try {
    build_comm_graph(sets, 0);
    FAIL("expected disconnection error");
  } catch (const std::invalid_argument& e) {
    std::string what = e.what();
    CHECK(what.find("2") != std::string::npos);
    CHECK(what.find("3") != std::string::npos);
  }
}

TEST_CASE("relay branching on the 5x5x5 interior respects the eq-1 budget") {
  auto sets = build_neighbors(grid_boxes(5), 1e-6);
  int center = grid_rank(5, 2, 2, 2);
  auto g = build_comm_graph(sets, center);
  CHECK(g.max_level == 2);
  int bound = nb_bound(125, 27);
  for (std::size_t r = 0; r < 125; ++r)
    if (g.level[r] >= 1) CHECK(g.load[r] <= bound);
}

TEST_CASE("exchange with one rank moves nothing for every protocol") {
  for (auto kind : {ProtocolKind::BulkAlltoall, ProtocolKind::Granular, ProtocolKind::Hypercube,
                    ProtocolKind::Nbx, ProtocolKind::Hsdx}) {
    auto in = all_pairs_input(1, 4, 0, 2, {{0, {}}});
    auto ex = exchange(kind, in);
    CHECK(ex.total_messages == 0);
    CHECK(ex.payload_steps.empty());
  }
}

TEST_CASE("all five protocols deliver the same content") {
  auto neighbors = build_neighbors(grid_boxes(2), 1e-6);
  auto in = all_pairs_input(8, 5, 2, 4, neighbors);
  Digest ref;
  bool first = true;
  for (auto kind : {ProtocolKind::BulkAlltoall, ProtocolKind::Granular, ProtocolKind::Hypercube,
                    ProtocolKind::Nbx, ProtocolKind::Hsdx}) {
    auto ex = exchange(kind, in);
    auto d = digest_of(ex);
    for (std::size_t r = 0; r < 8; ++r) CHECK(d[r].size() == 7 * 5);
    if (first) {
      ref = d;
      first = false;
    } else {
      CHECK(d == ref);
    }
    // cells survive the trip bit-exactly
    for (const auto& g : ex.received[3])
      for (const auto& c : g.cells) CHECK(c == in.outgoing[static_cast<std::size_t>(g.origin)][3][c.key.key]);
  }
}

TEST_CASE("hypercube: exactly log2(P) payload steps, one send per rank per step") {
  auto in = all_pairs_input(8, 2, 0, 2);
  auto ex = exchange(ProtocolKind::Hypercube, in);
  CHECK(ex.payload_steps == std::vector<int>{1, 2, 3});
  REQUIRE(ex.steps.size() == 3);
  for (const auto& s : ex.steps) {
    CHECK(s.messages == 8);
    CHECK(s.max_rank_msgs == 1);
  }
}

TEST_CASE("hypercube rejects non-power-of-two rank counts") {
  auto in = all_pairs_input(6, 1, 0, 2);
  CHECK_THROWS_AS(exchange(ProtocolKind::Hypercube, in), UnsupportedConfig);
}

TEST_CASE("hypercube routing invariant: bits above the step index still match the origin") {
  // Audit of the routing rule itself: an item (o, d) sits, after step i, at the
  // rank whose low bits follow d and high bits still follow o.
  const int P = 16, q = 4;
  for (int o = 0; o < P; ++o)
    for (int d = 0; d < P; ++d) {
      if (o == d) continue;
      int at = o;
      for (int step = 1; step <= q; ++step) {
        int bit = step - 1;
        if (((d >> bit) & 1) != ((at >> bit) & 1)) at ^= 1 << bit;
        int high_mask = ~((1 << step) - 1) & (P - 1);
        int low_mask = (1 << step) - 1;
        CHECK((at & high_mask) == (o & high_mask));
        CHECK((at & low_mask) == (d & low_mask));
      }
      CHECK(at == d);
    }
}

TEST_CASE("nbx runs a sizing round then a payload round") {
  auto in = all_pairs_input(5, 3, 1, 2);
  auto ex = exchange(ProtocolKind::Nbx, in);
  REQUIRE(ex.steps.size() == 2);
  CHECK(ex.payload_steps == std::vector<int>{2});
  // sizing round: one 16-byte message per pair with data
  CHECK(ex.steps[0].messages == 20);
  CHECK(ex.steps[0].bytes == 20 * 16);
}

TEST_CASE("hsdx is neighbor-only and needs k-1 payload steps on a k-grid") {
  for (int k : {2, 3, 4}) {
    int ranks = k * k * k;
    auto neighbors = build_neighbors(grid_boxes(k), 1e-6);
    auto in = all_pairs_input(ranks, 2, 1, 2, neighbors);
    auto ex = exchange(ProtocolKind::Hsdx, in);
    CHECK(ex.non_neighbor_messages == 0);
    CHECK(ex.payload_steps.size() == static_cast<std::size_t>(k - 1));
    CHECK(ex.steps.size() == 2 * static_cast<std::size_t>(k - 1));
    // content still complete
    auto d = digest_of(ex);
    for (const auto& rd : d) CHECK(rd.size() == static_cast<std::size_t>(ranks - 1) * 2);
  }
}

TEST_CASE("hsdx payload volume shrinks level by level") {
  // flows still in flight at level l+1 are a subset of those at level l
  auto neighbors = build_neighbors(grid_boxes(4), 1e-6);
  auto in = all_pairs_input(64, 3, 1, 2, neighbors);
  auto ex = exchange(ProtocolKind::Hsdx, in);
  REQUIRE(ex.payload_steps.size() == 3);
  std::uint64_t prev = UINT64_MAX;
  for (int step : ex.payload_steps) {
    for (const auto& s : ex.steps)
      if (s.step == step) {
        CHECK(s.bytes <= prev);
        prev = s.bytes;
      }
  }
}

TEST_CASE("hsdx relay fan-in at interior ranks stays within the eq-1 budget") {
  const int k = 4;
  auto neighbors = build_neighbors(grid_boxes(k), 1e-6);
  auto in = all_pairs_input(k * k * k, 1, 0, 2, neighbors);
  auto ex = exchange(ProtocolKind::Hsdx, in);
  for (int x = 1; x < 3; ++x)
    for (int y = 1; y < 3; ++y)
      for (int z = 1; z < 3; ++z) {
        int r = grid_rank(k, x, y, z);
        CHECK(ex.max_relay_in[static_cast<std::size_t>(r)] <= 4);
      }
}

TEST_CASE("hsdx without neighbor sets is rejected") {
  auto in = all_pairs_input(4, 1, 0, 2);
  CHECK_THROWS_AS(exchange(ProtocolKind::Hsdx, in), std::invalid_argument);
}

TEST_CASE("a malformed outgoing matrix is rejected") {
  auto in = all_pairs_input(4, 1, 0, 2);
  in.outgoing.pop_back();
  CHECK_THROWS_AS(exchange(ProtocolKind::BulkAlltoall, in), std::invalid_argument);
  auto in2 = all_pairs_input(4, 1, 0, 2);
  in2.outgoing[2].pop_back();
  CHECK_THROWS_AS(exchange(ProtocolKind::BulkAlltoall, in2), std::invalid_argument);
  auto in3 = all_pairs_input(4, 1, 0, 2);
  in3.grain = 0;
  CHECK_THROWS_AS(exchange(ProtocolKind::Granular, in3), std::invalid_argument);
}

TEST_CASE("grain extremes: total equals bulk, one message per cell at grain 1") {
  auto in = all_pairs_input(4, 6, 0, 2);
  auto bulk = exchange(ProtocolKind::BulkAlltoall, in);

  in.grain = 6;
  auto total = exchange(ProtocolKind::Granular, in);
  CHECK(total.total_messages == bulk.total_messages);
  CHECK(total.total_bytes == bulk.total_bytes);
  CHECK(total.steps.size() == bulk.steps.size());
  CHECK(total.overlap_units == 0);

  in.grain = 1;
  auto fine = exchange(ProtocolKind::Granular, in);
  CHECK(fine.total_messages == 4 * 3 * 6);  // one message per cell sent
  CHECK(fine.total_bytes == bulk.total_bytes);
  CHECK(fine.payload_steps.size() == 6);
}

TEST_CASE("message count is monotone in grain and bytes stay constant") {
  auto in = all_pairs_input(4, 13, 2, 4);
  std::uint64_t prev_msgs = UINT64_MAX;
  std::uint64_t bytes0 = 0;
  for (std::size_t g : {1, 2, 4, 8, 16}) {
    in.grain = g;
    auto ex = exchange(ProtocolKind::Granular, in);
    CHECK(ex.total_messages <= prev_msgs);
    prev_msgs = ex.total_messages;
    if (bytes0 == 0) bytes0 = ex.total_bytes;
    CHECK(ex.total_bytes == bytes0);
  }
}

TEST_CASE("heavy pair volumes make an interior grain strictly cheapest") {
  // ~120 cells of ~254 bytes per pair: far above the eager threshold in bulk
  auto in = all_pairs_input(8, 120, 0, 4);
  std::size_t per_pair = 0;
  for (const auto& c : in.outgoing[0][1]) per_pair += c.wire_size();
  REQUIRE(per_pair > 8192);

  std::vector<std::pair<std::size_t, double>> costs;
  for (std::size_t g : {std::size_t(1), std::size_t(2), std::size_t(4), std::size_t(8),
                        std::size_t(16), std::size_t(32), std::size_t(120)}) {
    in.grain = g;
    costs.push_back({g, exchange(ProtocolKind::Granular, in).modeled_cost});
  }
  auto best = std::min_element(costs.begin(), costs.end(),
                               [](auto& a, auto& b) { return a.second < b.second; });
  CHECK(best->second < costs.front().second);  // beats grain = 1
  CHECK(best->second < costs.back().second);   // beats grain = total
  CHECK(best->first != 1);
  CHECK(best->first != 120u);
}

TEST_CASE("granular overlap counts subtree-steps available before the last arrival") {
  // rank 0 -> 1 sends 4 cells, others send 1: small streams finish early
  ExchangeInput in;
  in.ranks = 3;
  in.p = 2;
  in.grain = 1;
  in.outgoing.assign(3, std::vector<std::vector<let::CellMsg>>(3));
  for (int s = 0; s < 3; ++s)
    for (int d = 0; d < 3; ++d) {
      if (s == d) continue;
      std::size_t n = (s == 0 && d == 1) ? 4 : 1;
      for (std::size_t c = 0; c < n; ++c)
        in.outgoing[static_cast<std::size_t>(s)][static_cast<std::size_t>(d)].push_back(
            make_cell(s, c, 0, 0, 2));
    }
  auto ex = exchange(ProtocolKind::Granular, in);
  CHECK(ex.payload_steps.size() == 4);
  // all single-cell streams complete at arrival step 2; the last arrival is step 5
  // -> each of the 5 early origins banks 3 steps of overlap
  CHECK(ex.overlap_units == 5 * 3);
}
