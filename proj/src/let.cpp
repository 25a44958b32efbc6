#include "fmmlab/let.hpp"

#include <cstring>
#include <map>
#include <stdexcept>
#include <string>

namespace fmmlab::let {

namespace {

constexpr std::uint8_t kFlagPayload = 1;
constexpr std::uint8_t kFlagChildren = 2;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  std::span<const std::uint8_t> buf;
  std::size_t& off;
  std::uint32_t u32() {
    if (off + 4 > buf.size()) throw std::runtime_error("let: truncated cell message");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[off + static_cast<std::size_t>(i)]) << (8 * i);
    off += 4;
    return v;
  }
  std::uint64_t u64() {
    if (off + 8 > buf.size()) throw std::runtime_error("let: truncated cell message");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[off + static_cast<std::size_t>(i)]) << (8 * i);
    off += 8;
    return v;
  }
  std::uint8_t u8() {
    if (off + 1 > buf.size()) throw std::runtime_error("let: truncated cell message");
    return buf[off++];
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

}  // namespace

std::size_t wire_size(int ncoef, std::size_t payload_count) {
  std::size_t s = 14 + 10 * 8 + static_cast<std::size_t>(ncoef) * 8;
  if (payload_count > 0) s += 4 + payload_count * 4 * 8;
  return s;
}

std::size_t CellMsg::wire_size() const {
  return let::wire_size(static_cast<int>(M.size()), leaf_payload ? particles.size() : 0);
}

void serialize(const CellMsg& msg, std::vector<std::uint8_t>& out) {
  put_u32(out, static_cast<std::uint32_t>(msg.origin));
  put_u64(out, msg.key.key);
  out.push_back(static_cast<std::uint8_t>(msg.key.level));
  std::uint8_t flags = 0;
  if (msg.leaf_payload) flags |= kFlagPayload;
  if (msg.has_children) flags |= kFlagChildren;
  out.push_back(flags);
  for (std::size_t d = 0; d < 3; ++d) put_f64(out, msg.center[d]);
  put_f64(out, msg.radius);
  for (std::size_t d = 0; d < 3; ++d) put_f64(out, msg.box.min[d]);
  for (std::size_t d = 0; d < 3; ++d) put_f64(out, msg.box.max[d]);
  for (double m : msg.M) put_f64(out, m);
  if (msg.leaf_payload) {
    put_u32(out, static_cast<std::uint32_t>(msg.particles.size()));
    for (const auto& p : msg.particles) {
      for (std::size_t d = 0; d < 3; ++d) put_f64(out, p.pos[d]);
      put_f64(out, p.q);
    }
  }
}

std::vector<std::uint8_t> serialize(std::span<const CellMsg> msgs) {
  std::vector<std::uint8_t> out;
  std::size_t total = 0;
  for (const auto& m : msgs) total += m.wire_size();
  out.reserve(total);
  for (const auto& m : msgs) serialize(m, out);
  return out;
}

CellMsg parse_cell(std::span<const std::uint8_t> buf, std::size_t& offset, int ncoef) {
  Reader r{buf, offset};
  CellMsg msg;
  msg.origin = static_cast<int>(r.u32());
  msg.key.key = r.u64();
  msg.key.level = r.u8();
  std::uint8_t flags = r.u8();
  msg.leaf_payload = flags & kFlagPayload;
  msg.has_children = flags & kFlagChildren;
  for (std::size_t d = 0; d < 3; ++d) msg.center[d] = r.f64();
  msg.radius = r.f64();
  for (std::size_t d = 0; d < 3; ++d) msg.box.min[d] = r.f64();
  for (std::size_t d = 0; d < 3; ++d) msg.box.max[d] = r.f64();
  msg.M.resize(static_cast<std::size_t>(ncoef));
  for (auto& m : msg.M) m = r.f64();
  if (msg.leaf_payload) {
    std::uint32_t n = r.u32();
    msg.particles.resize(n);
    for (auto& p : msg.particles) {
      for (std::size_t d = 0; d < 3; ++d) p.pos[d] = r.f64();
      p.q = r.f64();
    }
  }
  return msg;
}

std::vector<CellMsg> parse_cells(std::span<const std::uint8_t> buf, int ncoef) {
  std::vector<CellMsg> cells;
  std::size_t off = 0;
  while (off < buf.size()) cells.push_back(parse_cell(buf, off, ncoef));
  return cells;
}

namespace {

void extract_walk(const core::Tree& tree, int origin, const Box3& remote, double remote_radius,
                  const core::TraversalConfig& cfg, int cell_idx, std::vector<CellMsg>& out) {
  const core::Cell& cell = tree.cells[static_cast<std::size_t>(cell_idx)];
  CellMsg msg;
  msg.origin = origin;
  msg.key = cell.key;
  msg.center = cell.center;
  msg.radius = cell.radius;
  msg.box = cell.box;
  msg.M = cell.M;

  // Cut when the receiver MAC holds for every pair that can still want this
  // cell opened. The receiver descends the larger side first, so a pruned cell
  // only meets splittable targets with radius at most its own (capped by the
  // remote box); any target center sits at least the nearest-point distance
  // away. Oversized leaf targets are the one exception, handled (and counted)
  // by the traversal.
  double d0 = remote.distance(cell.center);
  double target_bound = std::min(cell.radius, remote_radius);
  bool cut = d0 > 0.0 && cell.radius + target_bound < cfg.theta * d0;
  if (cut) {
    out.push_back(std::move(msg));
    return;
  }
  if (cell.is_leaf()) {
    msg.leaf_payload = true;
    msg.particles.assign(tree.particles.begin() + static_cast<std::ptrdiff_t>(cell.first),
                         tree.particles.begin() + static_cast<std::ptrdiff_t>(cell.first + cell.count));
    out.push_back(std::move(msg));
    return;
  }
  msg.has_children = true;
  out.push_back(std::move(msg));
  for (int k = 0; k < cell.nchild; ++k)
    extract_walk(tree, origin, remote, remote_radius, cfg, cell.child[static_cast<std::size_t>(k)], out);
}

}  // namespace

std::vector<CellMsg> extract_essential(const core::Tree& tree, int origin,
                                       const Box3& remote_bounds,
                                       const core::TraversalConfig& cfg) {
  if (!remote_bounds.valid()) throw std::invalid_argument("let: invalid remote bounds");
  if (tree.cells.empty() || tree.root().M.empty())
    throw std::invalid_argument("let: extraction requires a tree with the upward pass done");
  std::vector<CellMsg> out;
  extract_walk(tree, origin, remote_bounds, remote_bounds.radius(), cfg, 0, out);
  return out;
}

core::Tree assemble_subtree(std::span<const CellMsg> msgs, int p) {
  if (msgs.empty()) throw std::invalid_argument("let: cannot assemble an empty message stream");
  core::Tree tree;
  const auto ncoef = static_cast<std::size_t>(core::MonomialBasis::coefficient_count(p));
  std::map<std::pair<std::uint64_t, int>, int> by_key;
  for (const auto& msg : msgs) {
    if (msg.M.size() != ncoef) throw std::runtime_error("let: coefficient count mismatch in stream");
    int idx = static_cast<int>(tree.cells.size());
    core::Cell cell;
    cell.key = msg.key;
    cell.box = msg.box;
    cell.center = msg.center;
    cell.radius = msg.radius;
    cell.M = msg.M;
    if (idx == 0) {
      cell.parent = -1;
    } else {
      auto it = by_key.find({msg.key.key >> 3, msg.key.level - 1});
      if (it == by_key.end())
        throw std::runtime_error("let: orphan cell from origin " + std::to_string(msg.origin) +
                                 ", key " + std::to_string(msg.key.key) + " level " +
                                 std::to_string(msg.key.level));
      cell.parent = it->second;
      core::Cell& parent = tree.cells[static_cast<std::size_t>(it->second)];
      if (parent.nchild >= 8) throw std::runtime_error("let: more than 8 children in stream");
      parent.child[static_cast<std::size_t>(parent.nchild++)] = idx;
    }
    if (msg.leaf_payload) {
      cell.first = tree.particles.size();
      cell.count = msg.particles.size();
      tree.particles.insert(tree.particles.end(), msg.particles.begin(), msg.particles.end());
    }
    auto [_, inserted] = by_key.insert({{msg.key.key, msg.key.level}, idx});
    if (!inserted)
      throw std::runtime_error("let: duplicate cell from origin " + std::to_string(msg.origin) +
                               ", key " + std::to_string(msg.key.key));
    tree.max_depth = std::max(tree.max_depth, msg.key.level);
    tree.cells.push_back(std::move(cell));
  }
  tree.build_bounds = tree.root().box;
  return tree;
}

std::vector<const core::Tree*> LocalEssentialTree::source_trees() const {
  std::vector<const core::Tree*> out;
  if (local) out.push_back(local);
  for (const auto& g : remote) out.push_back(&g.tree);
  return out;
}

LocalEssentialTree graft(const core::Tree& local, std::span<const IncomingGroup> groups, int p) {
  LocalEssentialTree let;
  let.local = &local;
  let.remote.reserve(groups.size());
  for (const auto& g : groups)
    let.remote.push_back({g.origin, assemble_subtree(g.cells, p)});
  return let;
}

}  // namespace fmmlab::let
