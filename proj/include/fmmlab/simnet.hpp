#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace fmmlab::simnet {

using Bytes = std::vector<std::uint8_t>;

struct Message {
  int src = -1;
  int dst = -1;
  int tag = 0;
  Bytes payload;
};

/// Per-superstep accounting. Maxima are over receiving ranks; eager/rendezvous
/// split messages at the byte threshold the run was configured with.
struct StepMetrics {
  int step = 0;
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  std::uint64_t max_rank_msgs = 0;
  std::uint64_t max_rank_bytes = 0;
  std::uint64_t eager = 0;
  std::uint64_t rendezvous = 0;
};

/// Latency/bandwidth cost with an eager-to-rendezvous switch: messages above
/// the threshold pay an extra per-message latency on top of alpha and beta.
struct CostModel {
  double alpha = 1000.0;
  double beta = 1.0;
  std::uint64_t eager_threshold = 8192;
  double rendezvous_penalty = 1000.0;
};

/// Critical-path cost: per step, alpha * (max per-rank messages) +
/// beta * (max per-rank bytes) + penalty * (rendezvous messages in the step).
double modeled_cost(std::span<const StepMetrics> steps, const CostModel& model);

void write_metrics_csv(std::ostream& os, std::span<const StepMetrics> steps);

class DeadlockError : public std::runtime_error {
 public:
  explicit DeadlockError(const std::string& what) : std::runtime_error(what) {}
};

class RankProgram;
struct RunResult;

/// A rank's view of the network for one superstep. Sends are staged and
/// delivered at the superstep boundary; receipt order is FIFO per (src, tag)
/// with no ordering promise across tags.
class RankCtx {
 public:
  RankCtx(int rank, int world) : rank_(rank), world_(world) {}

  int rank() const { return rank_; }
  int world() const { return world_; }

  void send(int dst, int tag, Bytes payload);
  std::optional<Message> try_recv(int src, int tag);
  /// All pending messages with the tag, ordered by sender then arrival.
  std::vector<Message> drain(int tag);
  bool has_pending() const;
  /// Declares what this rank is waiting on; reported if the run deadlocks.
  void expect(int src, int tag);

 private:
  friend RunResult run(int, const std::function<std::unique_ptr<RankProgram>(int)>&, std::uint64_t);
  int rank_, world_;
  std::map<std::pair<int, int>, std::deque<Message>> inbox_;
  std::vector<Message> outbox_;
  std::vector<std::pair<int, int>> expectations_;
};

enum class Status { Running, Done };

class RankProgram {
 public:
  virtual ~RankProgram() = default;
  /// Called once per superstep until it returns Done. Messages sent during
  /// superstep t are visible from superstep t+1 on.
  virtual Status step(RankCtx& ctx, int superstep) = 0;
};

struct MessageRecord {
  int step, src, dst, tag;
  std::size_t bytes;
};

struct RunResult {
  std::vector<StepMetrics> steps;  // traffic-bearing supersteps (one zero row if none)
  std::vector<MessageRecord> log;
  int supersteps = 0;
};

/// Executes ranks in deterministic order through synchronous supersteps
/// (compute/send, barrier, deliver) until every rank is done and nothing is in
/// flight. Quiescence with unfinished ranks raises DeadlockError naming the
/// waiting ranks and their expected (src, tag) pairs.
RunResult run(int world, const std::function<std::unique_ptr<RankProgram>(int)>& make_program,
              std::uint64_t eager_threshold = 8192);

}  // namespace fmmlab::simnet
