#include "fmmlab/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmmlab/traversal.hpp"

namespace fmmlab::experiment {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("io: cannot write " + path);
  return os;
}

void write_config_echo(const Config& cfg, const std::string& base) {
  if (cfg.out.empty()) return;
  auto os = open_out(base + ".config.txt");
  os << cfg.echo();
}

Box3 tree_bounds_for(const Config& cfg, const partition::Partition& part, const Box3& global) {
  // The hybrid scheme keys each rank's tree on its own tight box; the classic
  // schemes keep the global octant grid.
  return cfg.scheme == partition::SchemeKind::HybridOrb ? part.bounds : global;
}

std::vector<double> gather_potentials(std::size_t n, std::span<const core::Tree> trees) {
  std::vector<double> phi(n, 0.0);
  for (const auto& t : trees)
    for (const auto& p : t.particles) phi[p.id] = p.phi;
  return phi;
}

struct OracleResult {
  double rel_l2 = -1.0;
  std::size_t targets = 0;
};

OracleResult oracle_error(const Config& cfg, const Particles& original,
                          std::span<const double> potentials) {
  Particles targets;
  if (original.size() <= cfg.oracle_cap) {
    targets = original;
  } else {
    std::size_t stride = std::max<std::size_t>(1, original.size() / cfg.oracle_samples);
    for (std::size_t i = 0; i < original.size() && targets.size() < cfg.oracle_samples; i += stride)
      targets.push_back(original[i]);
  }
  reset_outputs(targets);
  if (original.size() <= cfg.oracle_cap)
    core::direct_sum(targets, core::Parallel::OpenMP);
  else
    core::direct_sum(targets, original, core::Parallel::OpenMP);

  double num = 0.0, den = 0.0;
  for (const auto& t : targets) {
    double d = potentials[t.id] - t.phi;
    num += d * d;
    den += t.phi * t.phi;
  }
  return {den > 0.0 ? std::sqrt(num / den) : std::sqrt(num), targets.size()};
}

}  // namespace

void Config::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config error: " + msg); };
  if (n == 0) fail("n must be positive");
  if (ranks < 1) fail("ranks must be >= 1");
  if (n < static_cast<std::size_t>(ranks)) fail("need at least one particle per rank");
  if (!(theta > 0.0) || !(theta < 1.0)) fail("theta must be in (0, 1)");
  if (order < 1 || order > 16) fail("order must be in [1, 16]");
  if (n_leaf < 1) fail("leaf capacity must be >= 1");
  if (grain < 1) fail("grain must be >= 1");
  if (protocol == protocols::ProtocolKind::Hypercube &&
      !std::has_single_bit(static_cast<unsigned>(ranks)))
    fail("hypercube requires a power-of-two rank count, got " + std::to_string(ranks));
  if (cost.alpha < 0 || cost.beta < 0 || cost.rendezvous_penalty < 0)
    fail("cost model coefficients must be nonnegative");
}

std::string Config::echo() const {
  std::ostringstream os;
  os << "n = " << n << "\n";
  os << "dist = " << space::to_string(dist) << "\n";
  os << "seed = " << seed << "\n";
  os << "ranks = " << ranks << "\n";
  os << "scheme = " << partition::to_string(scheme) << "\n";
  os << "protocol = " << protocols::to_string(protocol) << "\n";
  os << "grain = " << grain << "\n";
  os << "order = " << order << "\n";
  os << "theta = " << fmt(theta) << "\n";
  os << "n_leaf = " << n_leaf << "\n";
  os << "epsilon = " << fmt(epsilon) << "\n";
  os << "alpha = " << fmt(cost.alpha) << "\n";
  os << "beta = " << fmt(cost.beta) << "\n";
  os << "eager_threshold = " << cost.eager_threshold << "\n";
  os << "rendezvous_penalty = " << fmt(cost.rendezvous_penalty) << "\n";
  os << "oracle_cap = " << oracle_cap << "\n";
  os << "oracle_samples = " << oracle_samples << "\n";
  os << "forces = " << (forces ? 1 : 0) << "\n";
  os << "out = " << out << "\n";
  return os.str();
}

DistributedSetup prepare(const Config& cfg) {
  cfg.validate();
  DistributedSetup s;
  s.particles = space::generate({cfg.dist, cfg.n, cfg.seed});
  s.global_bounds = bounding_box(s.particles);
  if (cfg.epsilon > 0.0) {
    s.epsilon = cfg.epsilon;
  } else {
    // Tight partition boxes leave inter-particle-scale gaps, so the adjacency
    // tolerance has to resolve the realized spacing, not just roundoff.
    s.epsilon = std::max(1e-9 * s.global_bounds.diagonal(),
                         cfg.ranks > 1 ? 1.5 * partition::mean_nn_spacing(s.particles) : 0.0);
  }
  s.parts = partition::make_partitions(s.particles, {cfg.scheme, cfg.ranks, cfg.n_leaf});

  auto tcfg = cfg.traversal();
  s.trees.reserve(s.parts.size());
  for (const auto& part : s.parts) {
    s.trees.push_back(core::build_tree(part.particles, tree_bounds_for(cfg, part, s.global_bounds), tcfg));
    core::upward_pass(s.trees.back(), tcfg);
  }

  if (cfg.ranks > 1) {
    std::vector<Box3> boxes;
    for (const auto& part : s.parts) boxes.push_back(part.bounds);
    try {
      s.neighbors = protocols::build_neighbors(boxes, s.epsilon);
    } catch (const std::invalid_argument&) {
      if (cfg.protocol == protocols::ProtocolKind::Hsdx) throw;
      s.neighbors.clear();  // adjacency is only accounting for direct protocols
    }

    s.outgoing.assign(static_cast<std::size_t>(cfg.ranks),
                      std::vector<std::vector<let::CellMsg>>(static_cast<std::size_t>(cfg.ranks)));
    for (int src = 0; src < cfg.ranks; ++src)
      for (int dst = 0; dst < cfg.ranks; ++dst) {
        if (src == dst) continue;
        auto cells = let::extract_essential(s.trees[static_cast<std::size_t>(src)], src,
                                            s.parts[static_cast<std::size_t>(dst)].bounds, tcfg);
        for (const auto& c : cells) s.let_bytes += c.wire_size();
        s.outgoing[static_cast<std::size_t>(src)][static_cast<std::size_t>(dst)] = std::move(cells);
      }
  }
  return s;
}

SolveResult run_solve(const Config& cfg) {
  cfg.validate();
  auto tcfg = cfg.traversal();
  SolveResult res;

  DistributedSetup setup = prepare(cfg);
  for (const auto& part : setup.parts) res.rank_counts.push_back(part.count());
  res.let_bytes = setup.let_bytes;

  if (cfg.ranks == 1) {
    auto stats = core::evaluate(setup.trees[0], tcfg, core::Parallel::OpenMP, cfg.forces);
    res.coincident_skips = stats.coincident_skips;
  } else {
    protocols::ExchangeInput input;
    input.ranks = cfg.ranks;
    input.p = cfg.order;
    input.outgoing = std::move(setup.outgoing);
    input.neighbors = setup.neighbors;
    input.cost = cfg.cost;
    input.grain = cfg.grain;
    res.exchange = protocols::exchange(cfg.protocol, input);

    for (int r = 0; r < cfg.ranks; ++r) {
      auto& tree = setup.trees[static_cast<std::size_t>(r)];
      auto let = let::graft(tree, res.exchange.received[static_cast<std::size_t>(r)], cfg.order);
      auto sources = let.source_trees();
      auto stats = core::evaluate(tree, sources, tcfg, core::Parallel::OpenMP, cfg.forces);
      res.coincident_skips += stats.coincident_skips;
    }
  }

  res.potentials = gather_potentials(cfg.n, setup.trees);
  auto oracle = oracle_error(cfg, setup.particles, res.potentials);
  res.rel_l2_error = oracle.rel_l2;
  res.oracle_targets = oracle.targets;

  if (!cfg.out.empty()) {
    write_config_echo(cfg, cfg.out);
    {
      auto os = open_out(cfg.out + ".steps.csv");
      simnet::write_metrics_csv(os, res.exchange.steps);
    }
    auto os = open_out(cfg.out + ".summary.csv");
    os << "n,dist,seed,ranks,scheme,protocol,rel_l2_error,oracle_targets,messages,bytes,"
          "payload_steps,total_steps,modeled_cost,non_neighbor_msgs,let_bytes,min_count,"
          "max_count,coincident_skips\n";
    std::size_t mn = res.rank_counts.empty() ? 0 : *std::min_element(res.rank_counts.begin(), res.rank_counts.end());
    std::size_t mx = res.rank_counts.empty() ? 0 : *std::max_element(res.rank_counts.begin(), res.rank_counts.end());
    os << cfg.n << "," << space::to_string(cfg.dist) << "," << cfg.seed << "," << cfg.ranks << ","
       << partition::to_string(cfg.scheme) << "," << protocols::to_string(cfg.protocol) << ","
       << fmt(res.rel_l2_error) << "," << res.oracle_targets << "," << res.exchange.total_messages
       << "," << res.exchange.total_bytes << "," << res.exchange.payload_steps.size() << ","
       << res.exchange.steps.size() << "," << fmt(res.exchange.modeled_cost) << ","
       << res.exchange.non_neighbor_messages << "," << res.let_bytes << "," << mn << "," << mx
       << "," << res.coincident_skips << "\n";
  }
  return res;
}

BoundaryWeaknessResult recipe_boundary_weakness(Config cfg) {
  cfg.validate();
  BoundaryWeaknessResult out;
  Particles reference = space::generate({cfg.dist, cfg.n, cfg.seed});
  out.linking_length = partition::default_linking_length(reference);

  for (auto scheme : {partition::SchemeKind::HotHilbert, partition::SchemeKind::HybridOrb}) {
    Config c = cfg;
    c.scheme = scheme;
    c.protocol = protocols::ProtocolKind::BulkAlltoall;  // no routing here; volumes only
    DistributedSetup setup = prepare(c);
    out.let_bytes[partition::to_string(scheme)] = setup.let_bytes;
    for (const auto& part : setup.parts)
      out.rows.push_back({partition::to_string(scheme), part.rank, part.count(),
                          partition::connectivity_components(part.particles, out.linking_length)});
  }

  if (!cfg.out.empty()) {
    write_config_echo(cfg, cfg.out);
    auto os = open_out(cfg.out + ".csv");
    os << "scheme,rank,count,components\n";
    for (const auto& r : out.rows)
      os << r.scheme << "," << r.rank << "," << r.count << "," << r.components << "\n";
    auto sum = open_out(cfg.out + ".summary.csv");
    sum << "scheme,let_bytes,linking_length\n";
    for (const auto& [scheme, bytes] : out.let_bytes)
      sum << scheme << "," << bytes << "," << fmt(out.linking_length) << "\n";
  }
  return out;
}

std::vector<GrainSweepRow> recipe_grain_sweep(const Config& cfg) {
  Config c = cfg;
  c.protocol = protocols::ProtocolKind::Granular;
  c.validate();
  DistributedSetup setup = prepare(c);

  std::size_t max_cells = 1;
  for (const auto& row : setup.outgoing)
    for (const auto& cells : row) max_cells = std::max(max_cells, cells.size());

  std::vector<std::size_t> grains;
  for (std::size_t g = 1; g < max_cells; g *= 2) grains.push_back(g);
  grains.push_back(max_cells);

  protocols::ExchangeInput input;
  input.ranks = c.ranks;
  input.p = c.order;
  input.outgoing = std::move(setup.outgoing);
  input.neighbors = setup.neighbors;
  input.cost = c.cost;

  std::vector<GrainSweepRow> rows;
  for (std::size_t g : grains) {
    input.grain = g;
    auto ex = protocols::exchange(protocols::ProtocolKind::Granular, input);
    rows.push_back({g, ex.total_messages, ex.total_bytes, ex.modeled_cost, ex.overlap_units});
  }

  if (!cfg.out.empty()) {
    write_config_echo(cfg, cfg.out);
    auto os = open_out(cfg.out + ".csv");
    os << "grain,messages,bytes,modeled_cost,overlap_units\n";
    for (const auto& r : rows)
      os << r.grain << "," << r.messages << "," << r.bytes << "," << fmt(r.modeled_cost) << ","
         << r.overlap_units << "\n";
  }
  return rows;
}

std::vector<FaceoffRow> recipe_protocol_faceoff(const Config& cfg) {
  Config c = cfg;
  c.protocol = protocols::ProtocolKind::Hsdx;  // strict adjacency up front
  c.validate();
  DistributedSetup setup = prepare(c);

  protocols::ExchangeInput input;
  input.ranks = c.ranks;
  input.p = c.order;
  input.outgoing = std::move(setup.outgoing);
  input.neighbors = setup.neighbors;
  input.cost = c.cost;
  input.grain = c.grain;

  std::vector<protocols::ProtocolKind> kinds{
      protocols::ProtocolKind::BulkAlltoall, protocols::ProtocolKind::Granular,
      protocols::ProtocolKind::Hypercube, protocols::ProtocolKind::Nbx,
      protocols::ProtocolKind::Hsdx};

  std::vector<FaceoffRow> rows;
  // Digest of received (origin, key) multisets; identical across protocols.
  using Digest = std::vector<std::vector<std::tuple<int, std::uint64_t, int>>>;
  Digest first_digest;
  bool have_digest = false;
  for (auto kind : kinds) {
    if (kind == protocols::ProtocolKind::Hypercube &&
        !std::has_single_bit(static_cast<unsigned>(c.ranks)))
      continue;
    auto ex = protocols::exchange(kind, input);
    Digest digest(ex.received.size());
    for (std::size_t r = 0; r < ex.received.size(); ++r) {
      for (const auto& g : ex.received[r])
        for (const auto& cell : g.cells)
          digest[r].push_back({g.origin, cell.key.key, cell.key.level});
      std::sort(digest[r].begin(), digest[r].end());
    }
    if (!have_digest) {
      first_digest = std::move(digest);
      have_digest = true;
    } else if (digest != first_digest) {
      throw VerificationError("protocols: delivery mismatch for " + protocols::to_string(kind));
    }
    rows.push_back({protocols::to_string(kind), ex.total_messages, ex.total_bytes,
                    ex.payload_steps.size(), ex.steps.size(), ex.modeled_cost,
                    ex.non_neighbor_messages});
  }

  if (!cfg.out.empty()) {
    write_config_echo(cfg, cfg.out);
    auto os = open_out(cfg.out + ".csv");
    os << "protocol,messages,bytes,payload_steps,total_steps,modeled_cost,non_neighbor_msgs\n";
    for (const auto& r : rows)
      os << r.protocol << "," << r.messages << "," << r.bytes << "," << r.payload_steps << ","
         << r.total_steps << "," << fmt(r.modeled_cost) << "," << r.non_neighbor_messages << "\n";
  }
  return rows;
}

bool run_recipe(const std::string& name, const Config& cfg) {
  if (name == "boundary-weakness") {
    auto res = recipe_boundary_weakness(cfg);
    bool hot_split = false, hybrid_whole = true;
    for (const auto& r : res.rows) {
      if (r.scheme == "hot-hilbert" && r.components >= 2) hot_split = true;
      if (r.scheme == "hybrid-orb" && r.components != 1) hybrid_whole = false;
    }
    return hot_split && hybrid_whole &&
           res.let_bytes.at("hybrid-orb") < res.let_bytes.at("hot-hilbert");
  }
  if (name == "grain-sweep") {
    auto rows = recipe_grain_sweep(cfg);
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].messages > rows[i - 1].messages) return false;
    return true;
  }
  if (name == "protocol-faceoff") {
    auto rows = recipe_protocol_faceoff(cfg);
    std::uint64_t hsdx_foreign = 1, bulk_foreign = 0;
    for (const auto& r : rows) {
      if (r.protocol == "hsdx") hsdx_foreign = r.non_neighbor_messages;
      if (r.protocol == "bulk") bulk_foreign = r.non_neighbor_messages;
    }
    return hsdx_foreign == 0 && bulk_foreign > 0;
  }
  throw ConfigError("config error: unknown recipe '" + name +
                    "' (boundary-weakness|grain-sweep|protocol-faceoff)");
}

std::vector<PartitionReportRow> partition_report(const Config& cfg) {
  cfg.validate();
  Particles particles = space::generate({cfg.dist, cfg.n, cfg.seed});
  auto parts = partition::make_partitions(particles, {cfg.scheme, cfg.ranks, cfg.n_leaf});
  double link = partition::default_linking_length(particles);
  std::vector<PartitionReportRow> rows;
  for (const auto& part : parts)
    rows.push_back({part.rank, part.count(),
                    partition::connectivity_components(part.particles, link), part.bounds});
  if (!cfg.out.empty()) {
    write_config_echo(cfg, cfg.out);
    auto os = open_out(cfg.out + ".csv");
    os << "rank,count,components,min_x,min_y,min_z,max_x,max_y,max_z\n";
    for (const auto& r : rows) {
      os << r.rank << "," << r.count << "," << r.components;
      for (std::size_t d = 0; d < 3; ++d) os << "," << fmt(r.bounds.min[d]);
      for (std::size_t d = 0; d < 3; ++d) os << "," << fmt(r.bounds.max[d]);
      os << "\n";
    }
  }
  return rows;
}

}  // namespace fmmlab::experiment
