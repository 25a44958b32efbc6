#include "fmmlab/protocols.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

namespace fmmlab::protocols {

namespace {

constexpr int kTagMeta = 0;
constexpr int kTagPayload = 1;
constexpr std::size_t kMetaEntryBytes = 16;   // origin:4 dst:4 bytes:8
constexpr std::size_t kSegmentHeader = 12;    // origin:4 dst:4 nbytes:4

void put_u32(simnet::Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(simnet::Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint32_t get_u32(std::span<const std::uint8_t> buf, std::size_t& off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[off + static_cast<std::size_t>(i)]) << (8 * i);
  off += 4;
  return v;
}

struct Item {
  int origin;
  int dst;
  simnet::Bytes cells;  // serialized CellMsg stream
};

simnet::Bytes pack_segments(std::span<const Item> items) {
  simnet::Bytes out;
  std::size_t total = 0;
  for (const auto& it : items) total += kSegmentHeader + it.cells.size();
  out.reserve(total);
  for (const auto& it : items) {
    put_u32(out, static_cast<std::uint32_t>(it.origin));
    put_u32(out, static_cast<std::uint32_t>(it.dst));
    put_u32(out, static_cast<std::uint32_t>(it.cells.size()));
    out.insert(out.end(), it.cells.begin(), it.cells.end());
  }
  return out;
}

std::vector<Item> unpack_segments(std::span<const std::uint8_t> buf) {
  std::vector<Item> items;
  std::size_t off = 0;
  while (off < buf.size()) {
    Item it;
    it.origin = static_cast<int>(get_u32(buf, off));
    it.dst = static_cast<int>(get_u32(buf, off));
    std::uint32_t n = get_u32(buf, off);
    it.cells.assign(buf.begin() + static_cast<std::ptrdiff_t>(off),
                    buf.begin() + static_cast<std::ptrdiff_t>(off + n));
    off += n;
    items.push_back(std::move(it));
  }
  return items;
}

// Shared post-run state, owned by the driver.
struct RankResult {
  std::map<int, std::vector<let::CellMsg>> received;
  std::map<int, int> complete_step;
  std::uint64_t max_relay_in = 0;
};

struct Shared {
  const ExchangeInput* in;
  std::vector<RankResult>* results;
  // Serialized outgoing streams and expected chunk counts form the exchange
  // plan every rank knows up front (the sizing handshake real codes run once).
  std::vector<std::vector<simnet::Bytes>> blobs;          // [src][dst]
  std::vector<std::vector<std::size_t>> expected_chunks;  // [dst][src]
};

void deliver(const Shared& sh, int rank, int origin, std::span<const std::uint8_t> cells,
             int superstep) {
  auto& slot = (*sh.results)[static_cast<std::size_t>(rank)];
  auto parsed = let::parse_cells(cells, core::MonomialBasis::coefficient_count(sh.in->p));
  slot.received[origin] = std::move(parsed);
  slot.complete_step[origin] = superstep;
}

class BulkProgram : public simnet::RankProgram {
 public:
  BulkProgram(const Shared& sh, int rank) : sh_(sh), rank_(rank) {}
  simnet::Status step(simnet::RankCtx& ctx, int superstep) override {
    if (superstep == 1) {
      for (int dst = 0; dst < ctx.world(); ++dst) {
        if (dst == rank_) continue;
        const auto& blob = sh_.blobs[static_cast<std::size_t>(rank_)][static_cast<std::size_t>(dst)];
        if (!blob.empty()) ctx.send(dst, kTagPayload, blob);
      }
    }
    for (auto& m : ctx.drain(kTagPayload)) deliver(sh_, rank_, m.src, m.payload, superstep);
    std::size_t expected = 0;
    for (std::size_t s = 0; s < sh_.expected_chunks[static_cast<std::size_t>(rank_)].size(); ++s)
      expected += sh_.expected_chunks[static_cast<std::size_t>(rank_)][s] > 0;
    bool complete = (*sh_.results)[static_cast<std::size_t>(rank_)].received.size() == expected;
    if (complete && superstep >= 1) return simnet::Status::Done;
    for (int src = 0; src < ctx.world(); ++src)
      if (src != rank_ && sh_.expected_chunks[static_cast<std::size_t>(rank_)][static_cast<std::size_t>(src)] > 0)
        ctx.expect(src, kTagPayload);
    return simnet::Status::Running;
  }

 private:
  const Shared& sh_;
  int rank_;
};

class GranularProgram : public simnet::RankProgram {
 public:
  GranularProgram(const Shared& sh, int rank, std::size_t grain)
      : sh_(sh), rank_(rank), grain_(grain) {
    const auto& out = sh_.in->outgoing[static_cast<std::size_t>(rank_)];
    for (std::size_t dst = 0; dst < out.size(); ++dst) {
      std::size_t n = out[dst].size();
      max_chunks_ = std::max(max_chunks_, (n + grain_ - 1) / grain_);
    }
    partial_.resize(out.size());
    got_chunks_.assign(out.size(), 0);
  }

  simnet::Status step(simnet::RankCtx& ctx, int superstep) override {
    // Chunk t of every still-pending destination goes out in superstep t.
    auto t = static_cast<std::size_t>(superstep);
    const auto& out = sh_.in->outgoing[static_cast<std::size_t>(rank_)];
    if (t <= max_chunks_) {
      for (int dst = 0; dst < ctx.world(); ++dst) {
        if (dst == rank_) continue;
        const auto& cells = out[static_cast<std::size_t>(dst)];
        std::size_t lo = (t - 1) * grain_;
        if (lo >= cells.size()) continue;
        std::size_t hi = std::min(cells.size(), lo + grain_);
        auto blob = let::serialize(std::span<const let::CellMsg>(cells.data() + lo, hi - lo));
        ctx.send(dst, kTagPayload, std::move(blob));
      }
    }
    for (auto& m : ctx.drain(kTagPayload)) {
      auto src = static_cast<std::size_t>(m.src);
      auto& buf = partial_[src];
      buf.insert(buf.end(), m.payload.begin(), m.payload.end());
      if (++got_chunks_[src] == sh_.expected_chunks[static_cast<std::size_t>(rank_)][src])
        deliver(sh_, rank_, m.src, buf, superstep);
    }
    bool sent_all = t >= max_chunks_;
    std::size_t expected = 0;
    for (std::size_t s = 0; s < sh_.expected_chunks[static_cast<std::size_t>(rank_)].size(); ++s)
      expected += sh_.expected_chunks[static_cast<std::size_t>(rank_)][s] > 0;
    bool complete = (*sh_.results)[static_cast<std::size_t>(rank_)].received.size() == expected;
    return sent_all && complete ? simnet::Status::Done : simnet::Status::Running;
  }

 private:
  const Shared& sh_;
  int rank_;
  std::size_t grain_;
  std::size_t max_chunks_ = 0;
  std::vector<simnet::Bytes> partial_;
  std::vector<std::size_t> got_chunks_;
};

class HypercubeProgram : public simnet::RankProgram {
 public:
  HypercubeProgram(const Shared& sh, int rank, int dims) : sh_(sh), rank_(rank), dims_(dims) {
    const auto& blobs = sh_.blobs[static_cast<std::size_t>(rank_)];
    for (int dst = 0; dst < static_cast<int>(blobs.size()); ++dst)
      if (dst != rank_ && !blobs[static_cast<std::size_t>(dst)].empty())
        items_.push_back({rank_, dst, blobs[static_cast<std::size_t>(dst)]});
  }

  simnet::Status step(simnet::RankCtx& ctx, int superstep) override {
    int partner_prev = superstep >= 2 ? (rank_ ^ (1 << (superstep - 2))) : -1;
    if (partner_prev >= 0) {
      if (auto m = ctx.try_recv(partner_prev, kTagPayload)) {
        for (auto& it : unpack_segments(m->payload)) {
          if (it.dst == rank_)
            deliver(sh_, rank_, it.origin, it.cells, superstep);
          else
            items_.push_back(std::move(it));
        }
      }
    }
    if (superstep <= dims_) {
      int bit = superstep - 1;
      int partner = rank_ ^ (1 << bit);
      std::vector<Item> bundle;
      std::erase_if(items_, [&](Item& it) {
        if (((it.dst >> bit) & 1) != ((rank_ >> bit) & 1)) {
          bundle.push_back(std::move(it));
          return true;
        }
        return false;
      });
      if (!bundle.empty()) ctx.send(partner, kTagPayload, pack_segments(bundle));
      return simnet::Status::Running;
    }
    return simnet::Status::Done;
  }

 private:
  const Shared& sh_;
  int rank_;
  int dims_;
  std::vector<Item> items_;
};

class NbxProgram : public simnet::RankProgram {
 public:
  NbxProgram(const Shared& sh, int rank) : sh_(sh), rank_(rank) {}

  simnet::Status step(simnet::RankCtx& ctx, int superstep) override {
    if (superstep == 1) {
      if (ctx.world() == 1) return simnet::Status::Done;
      const auto& blobs = sh_.blobs[static_cast<std::size_t>(rank_)];
      for (int dst = 0; dst < ctx.world(); ++dst) {
        if (dst == rank_ || blobs[static_cast<std::size_t>(dst)].empty()) continue;
        simnet::Bytes meta;
        put_u32(meta, static_cast<std::uint32_t>(rank_));
        put_u32(meta, static_cast<std::uint32_t>(dst));
        put_u64(meta, blobs[static_cast<std::size_t>(dst)].size());
        ctx.send(dst, kTagMeta, std::move(meta));
      }
      return simnet::Status::Running;
    }
    if (superstep == 2) {
      // All sizing messages are in; answer with the payloads.
      expected_ = ctx.drain(kTagMeta).size();
      const auto& blobs = sh_.blobs[static_cast<std::size_t>(rank_)];
      for (int dst = 0; dst < ctx.world(); ++dst)
        if (dst != rank_ && !blobs[static_cast<std::size_t>(dst)].empty())
          ctx.send(dst, kTagPayload, blobs[static_cast<std::size_t>(dst)]);
      return expected_ == 0 ? simnet::Status::Done : simnet::Status::Running;
    }
    for (auto& m : ctx.drain(kTagPayload)) {
      deliver(sh_, rank_, m.src, m.payload, superstep);
      --expected_;
    }
    return expected_ == 0 ? simnet::Status::Done : simnet::Status::Running;
  }

 private:
  const Shared& sh_;
  int rank_;
  std::size_t expected_ = 0;
};

class HsdxProgram : public simnet::RankProgram {
 public:
  HsdxProgram(const Shared& sh, int rank, const std::vector<CommGraph>& graphs, int max_level)
      : sh_(sh), rank_(rank), graphs_(graphs), max_level_(max_level) {
    const auto& blobs = sh_.blobs[static_cast<std::size_t>(rank_)];
    for (int dst = 0; dst < static_cast<int>(blobs.size()); ++dst)
      if (dst != rank_ && !blobs[static_cast<std::size_t>(dst)].empty())
        buffer_.push_back({rank_, dst, blobs[static_cast<std::size_t>(dst)]});
  }

  simnet::Status step(simnet::RankCtx& ctx, int superstep) override {
    // Incoming payloads: keep what is ours, queue the rest for the next level.
    for (auto& m : ctx.drain(kTagPayload)) {
      std::uint64_t relayed_here = 0;
      for (auto& it : unpack_segments(m.payload)) {
        if (it.dst == rank_) {
          ++relayed_here;
          deliver(sh_, rank_, it.origin, it.cells, superstep);
        } else {
          buffer_.push_back(std::move(it));
        }
      }
      auto& slot = (*sh_.results)[static_cast<std::size_t>(rank_)];
      slot.max_relay_in = std::max(slot.max_relay_in, relayed_here);
    }
    ctx.drain(kTagMeta);  // sizing info; content mirrors the next payload round

    if (superstep > 2 * max_level_) return simnet::Status::Done;

    // Odd supersteps announce the flows, even supersteps move them, one
    // neighbor hop per level.
    auto next_hop = [&](const Item& it) {
      return graphs_[static_cast<std::size_t>(it.dst)].relay[static_cast<std::size_t>(rank_)];
    };
    if (superstep % 2 == 1) {
      std::map<int, simnet::Bytes> metas;
      for (const auto& it : buffer_) {
        auto& meta = metas[next_hop(it)];
        put_u32(meta, static_cast<std::uint32_t>(it.origin));
        put_u32(meta, static_cast<std::uint32_t>(it.dst));
        put_u64(meta, it.cells.size());
      }
      for (auto& [n, meta] : metas) ctx.send(n, kTagMeta, std::move(meta));
    } else {
      std::map<int, std::vector<Item>> bundles;
      for (auto& it : buffer_) bundles[next_hop(it)].push_back(std::move(it));
      buffer_.clear();
      for (auto& [n, items] : bundles)
        ctx.send(n, kTagPayload, pack_segments(items));
    }
    return simnet::Status::Running;
  }

 private:
  const Shared& sh_;
  int rank_;
  const std::vector<CommGraph>& graphs_;
  int max_level_;
  std::vector<Item> buffer_;
};

}  // namespace

std::vector<NeighborSet> build_neighbors(std::span<const Box3> bounds, double epsilon) {
  const auto n = static_cast<int>(bounds.size());
  std::vector<NeighborSet> sets(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sets[static_cast<std::size_t>(i)].owner = i;
  for (int i = 0; i < n; ++i) {
    Box3 bi = bounds[static_cast<std::size_t>(i)].inflated(epsilon);
    for (int j = i + 1; j < n; ++j) {
      if (bi.overlaps(bounds[static_cast<std::size_t>(j)].inflated(epsilon))) {
        sets[static_cast<std::size_t>(i)].neighbors.push_back(j);
        sets[static_cast<std::size_t>(j)].neighbors.push_back(i);
      }
    }
  }
  for (auto& s : sets) {
    std::sort(s.neighbors.begin(), s.neighbors.end());
    if (n >= 2 && s.neighbors.empty())
      throw std::invalid_argument("protocols: rank " + std::to_string(s.owner) +
                                  " has no neighbors (disconnected partitioning)");
  }
  return sets;
}

int nb_bound(std::size_t two_hop_incl_self, std::size_t neighborhood_incl_self) {
  if (neighborhood_incl_self < 2)
    throw std::invalid_argument("protocols: nb_bound needs a neighborhood of at least 2");
  if (two_hop_incl_self <= neighborhood_incl_self) return 0;
  std::size_t num = two_hop_incl_self - neighborhood_incl_self;
  std::size_t den = neighborhood_incl_self - 1;
  return static_cast<int>((num + den - 1) / den);
}

CommGraph build_comm_graph(std::span<const NeighborSet> neighbors, int owner) {
  const auto n = static_cast<int>(neighbors.size());
  CommGraph g;
  g.owner = owner;
  g.level.assign(static_cast<std::size_t>(n), -1);
  g.relay.assign(static_cast<std::size_t>(n), -1);
  g.load.assign(static_cast<std::size_t>(n), 0);
  g.level[static_cast<std::size_t>(owner)] = 0;

  std::vector<int> frontier{owner};
  while (!frontier.empty()) {
    // Ranks adjacent to the frontier and not yet placed, with their candidates.
    std::map<int, std::vector<int>> candidates;
    for (int f : frontier)
      for (int x : neighbors[static_cast<std::size_t>(f)].neighbors)
        if (g.level[static_cast<std::size_t>(x)] < 0) candidates[x].push_back(f);
    if (candidates.empty()) break;

    std::vector<int> order;
    for (auto& [x, cand] : candidates) order.push_back(x);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      std::size_t ca = candidates[a].size(), cb = candidates[b].size();
      return ca != cb ? ca < cb : a < b;
    });

    std::vector<int> next;
    for (int x : order) {
      int best = -1;
      for (int c : candidates[x]) {
        if (best < 0 || g.load[static_cast<std::size_t>(c)] < g.load[static_cast<std::size_t>(best)] ||
            (g.load[static_cast<std::size_t>(c)] == g.load[static_cast<std::size_t>(best)] && c < best))
          best = c;
      }
      g.relay[static_cast<std::size_t>(x)] = best;
      g.level[static_cast<std::size_t>(x)] = g.level[static_cast<std::size_t>(best)] + 1;
      ++g.load[static_cast<std::size_t>(best)];
      next.push_back(x);
    }
    g.levels.push_back(next);
    g.max_level = static_cast<int>(g.levels.size());
    frontier = std::move(next);
  }

  std::vector<int> unreachable;
  for (int r = 0; r < n; ++r)
    if (g.level[static_cast<std::size_t>(r)] < 0) unreachable.push_back(r);
  if (!unreachable.empty()) {
    std::ostringstream oss;
    oss << "protocols: neighbor graph disconnected from rank " << owner << "; unreachable:";
    for (int r : unreachable) oss << " " << r;
    throw std::invalid_argument(oss.str());
  }
  return g;
}

ExchangeResult exchange(ProtocolKind kind, const ExchangeInput& in) {
  const int world = in.ranks;
  if (world < 1) throw std::invalid_argument("protocols: ranks must be >= 1");
  if (in.outgoing.size() != static_cast<std::size_t>(world))
    throw std::invalid_argument("protocols: outgoing matrix must be ranks x ranks");
  if (kind == ProtocolKind::Granular && in.grain < 1)
    throw std::invalid_argument("protocols: grain must be >= 1");
  if (kind == ProtocolKind::Hypercube && !std::has_single_bit(static_cast<unsigned>(world)))
    throw UnsupportedConfig("protocols: hypercube requires a power-of-two rank count, got " +
                            std::to_string(world));

  Shared sh;
  sh.in = &in;
  std::vector<RankResult> results(static_cast<std::size_t>(world));
  sh.results = &results;
  sh.blobs.resize(static_cast<std::size_t>(world));
  sh.expected_chunks.assign(static_cast<std::size_t>(world),
                            std::vector<std::size_t>(static_cast<std::size_t>(world), 0));
  for (int src = 0; src < world; ++src) {
    sh.blobs[static_cast<std::size_t>(src)].resize(static_cast<std::size_t>(world));
    if (in.outgoing[static_cast<std::size_t>(src)].size() != static_cast<std::size_t>(world))
      throw std::invalid_argument("protocols: outgoing matrix must be ranks x ranks");
    for (int dst = 0; dst < world; ++dst) {
      const auto& cells = in.outgoing[static_cast<std::size_t>(src)][static_cast<std::size_t>(dst)];
      if (src == dst || cells.empty()) continue;
      sh.blobs[static_cast<std::size_t>(src)][static_cast<std::size_t>(dst)] = let::serialize(cells);
      std::size_t chunks = 1;
      if (kind == ProtocolKind::Granular) chunks = (cells.size() + in.grain - 1) / in.grain;
      sh.expected_chunks[static_cast<std::size_t>(dst)][static_cast<std::size_t>(src)] = chunks;
    }
  }

  std::vector<CommGraph> graphs;
  int max_level = 0;
  if (kind == ProtocolKind::Hsdx) {
    if (in.neighbors.size() != static_cast<std::size_t>(world))
      throw std::invalid_argument("protocols: hsdx requires neighbor sets for every rank");
    graphs.reserve(static_cast<std::size_t>(world));
    for (int owner = 0; owner < world; ++owner) {
      graphs.push_back(build_comm_graph(in.neighbors, owner));
      max_level = std::max(max_level, graphs.back().max_level);
    }
  }

  auto factory = [&](int rank) -> std::unique_ptr<simnet::RankProgram> {
    switch (kind) {
      case ProtocolKind::BulkAlltoall: return std::make_unique<BulkProgram>(sh, rank);
      case ProtocolKind::Granular: return std::make_unique<GranularProgram>(sh, rank, in.grain);
      case ProtocolKind::Hypercube:
        return std::make_unique<HypercubeProgram>(sh, rank,
                                                  std::bit_width(static_cast<unsigned>(world)) - 1);
      case ProtocolKind::Nbx: return std::make_unique<NbxProgram>(sh, rank);
      case ProtocolKind::Hsdx: return std::make_unique<HsdxProgram>(sh, rank, graphs, max_level);
    }
    throw std::logic_error("protocols: unknown protocol kind");
  };

  auto run = simnet::run(world, factory, in.cost.eager_threshold);

  ExchangeResult out;
  out.steps = run.steps;
  out.modeled_cost = simnet::modeled_cost(out.steps, in.cost);
  out.received.resize(static_cast<std::size_t>(world));
  for (int r = 0; r < world; ++r) {
    for (auto& [origin, cells] : results[static_cast<std::size_t>(r)].received)
      out.received[static_cast<std::size_t>(r)].push_back({origin, std::move(cells)});
  }
  for (const auto& s : out.steps) {
    out.total_messages += s.messages;
    out.total_bytes += s.bytes;
  }

  std::set<int> payload_steps;
  for (const auto& rec : run.log) {
    if (rec.tag == kTagPayload) payload_steps.insert(rec.step);
    if (!in.neighbors.empty()) {
      const auto& nb = in.neighbors[static_cast<std::size_t>(rec.src)].neighbors;
      if (!std::binary_search(nb.begin(), nb.end(), rec.dst)) ++out.non_neighbor_messages;
    }
  }
  out.payload_steps.assign(payload_steps.begin(), payload_steps.end());

  out.max_relay_in.resize(static_cast<std::size_t>(world), 0);
  std::uint64_t last_payload = out.payload_steps.empty() ? 0u
                               : static_cast<std::uint64_t>(out.payload_steps.back());
  for (int r = 0; r < world; ++r) {
    out.max_relay_in[static_cast<std::size_t>(r)] = results[static_cast<std::size_t>(r)].max_relay_in;
    if (kind == ProtocolKind::Granular)
      for (auto& [origin, step] : results[static_cast<std::size_t>(r)].complete_step)
        out.overlap_units += last_payload + 1 - static_cast<std::uint64_t>(step);
  }
  return out;
}

ProtocolKind parse_protocol(const std::string& name) {
  if (name == "bulk") return ProtocolKind::BulkAlltoall;
  if (name == "granular") return ProtocolKind::Granular;
  if (name == "hypercube") return ProtocolKind::Hypercube;
  if (name == "nbx") return ProtocolKind::Nbx;
  if (name == "hsdx") return ProtocolKind::Hsdx;
  throw std::invalid_argument("protocols: unknown protocol '" + name +
                              "' (bulk|granular|hypercube|nbx|hsdx)");
}

std::string to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::BulkAlltoall: return "bulk";
    case ProtocolKind::Granular: return "granular";
    case ProtocolKind::Hypercube: return "hypercube";
    case ProtocolKind::Nbx: return "nbx";
    case ProtocolKind::Hsdx: return "hsdx";
  }
  return "?";
}

}  // namespace fmmlab::protocols
