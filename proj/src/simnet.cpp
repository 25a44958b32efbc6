#include "fmmlab/simnet.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace fmmlab::simnet {

double modeled_cost(std::span<const StepMetrics> steps, const CostModel& model) {
  double cost = 0.0;
  for (const auto& s : steps) {
    cost += model.alpha * static_cast<double>(s.max_rank_msgs);
    cost += model.beta * static_cast<double>(s.max_rank_bytes);
    cost += model.rendezvous_penalty * static_cast<double>(s.rendezvous);
  }
  return cost;
}

void write_metrics_csv(std::ostream& os, std::span<const StepMetrics> steps) {
  os << "step,messages,bytes,max_rank_msgs,max_rank_bytes,eager,rendezvous\n";
  for (const auto& s : steps) {
    char line[256];
    std::snprintf(line, sizeof line, "%d,%llu,%llu,%llu,%llu,%llu,%llu\n", s.step,
                  static_cast<unsigned long long>(s.messages),
                  static_cast<unsigned long long>(s.bytes),
                  static_cast<unsigned long long>(s.max_rank_msgs),
                  static_cast<unsigned long long>(s.max_rank_bytes),
                  static_cast<unsigned long long>(s.eager),
                  static_cast<unsigned long long>(s.rendezvous));
    os << line;
  }
}

void RankCtx::send(int dst, int tag, Bytes payload) {
  if (dst < 0 || dst >= world_ || dst == rank_)
    throw std::invalid_argument("simnet: bad destination rank " + std::to_string(dst));
  outbox_.push_back({rank_, dst, tag, std::move(payload)});
}

std::optional<Message> RankCtx::try_recv(int src, int tag) {
  auto it = inbox_.find({src, tag});
  if (it == inbox_.end() || it->second.empty()) return std::nullopt;
  Message m = std::move(it->second.front());
  it->second.pop_front();
  return m;
}

std::vector<Message> RankCtx::drain(int tag) {
  std::vector<Message> out;
  for (auto& [key, q] : inbox_) {
    if (key.second != tag) continue;
    while (!q.empty()) {
      out.push_back(std::move(q.front()));
      q.pop_front();
    }
  }
  return out;
}

bool RankCtx::has_pending() const {
  for (const auto& [key, q] : inbox_)
    if (!q.empty()) return true;
  return false;
}

void RankCtx::expect(int src, int tag) { expectations_.push_back({src, tag}); }

RunResult run(int world, const std::function<std::unique_ptr<RankProgram>(int)>& make_program,
              std::uint64_t eager_threshold) {
  if (world < 1) throw std::invalid_argument("simnet: world size must be >= 1");
  std::vector<RankCtx> ctxs;
  ctxs.reserve(static_cast<std::size_t>(world));
  std::vector<std::unique_ptr<RankProgram>> programs;
  for (int r = 0; r < world; ++r) {
    ctxs.emplace_back(r, world);
    programs.push_back(make_program(r));
  }
  std::vector<bool> done(static_cast<std::size_t>(world), false);

  RunResult result;
  for (int superstep = 1;; ++superstep) {
    result.supersteps = superstep;
    bool any_finished = false;
    for (int r = 0; r < world; ++r) {
      if (done[static_cast<std::size_t>(r)]) continue;
      auto& ctx = ctxs[static_cast<std::size_t>(r)];
      ctx.expectations_.clear();
      if (programs[static_cast<std::size_t>(r)]->step(ctx, superstep) == Status::Done) {
        done[static_cast<std::size_t>(r)] = true;
        any_finished = true;
      }
    }

    // Barrier: collect all sends, account, deliver.
    StepMetrics metrics;
    metrics.step = superstep;
    std::vector<std::uint64_t> rank_msgs(static_cast<std::size_t>(world), 0);
    std::vector<std::uint64_t> rank_bytes(static_cast<std::size_t>(world), 0);
    bool any_send = false;
    for (int r = 0; r < world; ++r) {
      auto& out = ctxs[static_cast<std::size_t>(r)].outbox_;
      for (auto& m : out) {
        any_send = true;
        ++metrics.messages;
        metrics.bytes += m.payload.size();
        ++rank_msgs[static_cast<std::size_t>(m.dst)];
        rank_bytes[static_cast<std::size_t>(m.dst)] += m.payload.size();
        if (m.payload.size() <= eager_threshold)
          ++metrics.eager;
        else
          ++metrics.rendezvous;
        result.log.push_back({superstep, m.src, m.dst, m.tag, m.payload.size()});
        ctxs[static_cast<std::size_t>(m.dst)].inbox_[{m.src, m.tag}].push_back(std::move(m));
      }
      out.clear();
    }
    if (any_send) {
      metrics.max_rank_msgs = *std::max_element(rank_msgs.begin(), rank_msgs.end());
      metrics.max_rank_bytes = *std::max_element(rank_bytes.begin(), rank_bytes.end());
      result.steps.push_back(metrics);
    }

    bool all_done = std::all_of(done.begin(), done.end(), [](bool d) { return d; });
    bool pending = false;
    for (const auto& ctx : ctxs) pending = pending || ctx.has_pending();
    if (all_done) {
      if (pending) throw std::logic_error("simnet: run finished with undelivered messages");
      break;
    }
    if (!any_send && !any_finished && !pending) {
      std::ostringstream oss;
      oss << "simnet: deadlock, no messages in flight and ranks still waiting:";
      for (int r = 0; r < world; ++r) {
        if (done[static_cast<std::size_t>(r)]) continue;
        oss << " rank " << r;
        const auto& exp = ctxs[static_cast<std::size_t>(r)].expectations_;
        if (!exp.empty()) {
          oss << " (expects";
          for (auto [src, tag] : exp) oss << " src=" << src << ",tag=" << tag;
          oss << ")";
        }
        oss << ";";
      }
      throw DeadlockError(oss.str());
    }
  }

  if (result.steps.empty()) result.steps.push_back(StepMetrics{1, 0, 0, 0, 0, 0, 0});
  return result;
}

}  // namespace fmmlab::simnet
