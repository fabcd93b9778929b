#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gpdm/kernel.hpp"

namespace gpdm {

struct GPHyper {
  double sigma2 = 1.0;       // observation-noise variance
  double gamma = 1.0;        // discount
  std::size_t dict_cap = 1000;
  double novelty_tol = 1e-4;  // projection-residual threshold for dropping points at cap

  void validate() const;
};

struct QEstimate {
  double mean = 0.0;
  double variance = 0.0;
};

class GPPolicy;

// Deterministic prior mean over points. Implementations: a constant zero and
// a frozen policy's posterior mean (used for cross-domain adaptation).
class PriorMean {
 public:
  virtual ~PriorMean() = default;
  virtual double at(const Point& p) const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

std::shared_ptr<PriorMean> zero_prior();
std::shared_ptr<PriorMean> policy_prior(std::shared_ptr<const GPPolicy> frozen);
std::shared_ptr<PriorMean> prior_from_json(const nlohmann::json& j);

struct GPDiagnostics {
  std::uint64_t variance_clamps = 0;
  std::uint64_t jitter_retries = 0;
  std::uint64_t full_rebuilds = 0;
  std::uint64_t dropped_points = 0;
  std::uint64_t evicted_points = 0;
};

// Per-turn query context: the belief kernel against every informative
// dictionary point is computed once, then reused across candidate actions.
struct TurnContext {
  std::shared_ptr<const FeatureVector> features;
  std::string domain;
  double self_k = 0.0;
  Eigen::VectorXd bk;  // indexed by dictionary column
};

// GP-Sarsa value estimator over belief-action points. Episodes enter as
// point sequences with per-transition rewards; the temporal-difference
// operator ties consecutive points of one episode with coefficients (1, -g).
// Single writer: ingest_episode requires exclusive access, queries are const
// and may run concurrently between ingests.
class GPPolicy {
 public:
  GPPolicy(std::string domain, KernelSpec spec, GPHyper hyper = {},
           std::shared_ptr<PriorMean> prior = nullptr);
  GPPolicy(const GPPolicy& o);
  GPPolicy& operator=(const GPPolicy&) = delete;

  const std::string& domain() const { return domain_; }
  const GPHyper& hyper() const { return hyper_; }
  const KernelSpec& spec() const { return spec_; }
  const PriorMean& prior() const { return *prior_; }

  std::size_t dictionary_size() const { return dict_.size(); }
  std::size_t episode_count() const { return blocks_.size(); }
  const Point& dictionary_point(std::size_t i) const { return dict_[i].p; }
  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<std::pair<int, int>>& blocks() const { return blocks_; }
  GPDiagnostics diagnostics() const;

  // points.size() >= 2, rewards.size() == points.size() - 1. Appends one
  // episode block; at dict_cap, low-novelty incoming points are dropped and
  // least-novel stored points evicted, rewards merging along the chain.
  void ingest_episode(const std::vector<Point>& points, const std::vector<double>& rewards);

  TurnContext prepare(std::shared_ptr<const FeatureVector> features,
                      const std::string& domain) const;
  QEstimate q_in_context(const TurnContext& ctx, const SummaryAction& a) const;
  QEstimate q_posterior(const Point& p) const;

  // Thompson sampling: one Gaussian draw per candidate, argmax; ties keep the
  // earlier candidate. Draw count is fixed so rng streams stay aligned.
  SummaryAction select_action(const TurnContext& ctx, const std::vector<SummaryAction>& candidates,
                              std::mt19937_64& rng, QEstimate* chosen = nullptr) const;
  SummaryAction greedy_action(const TurnContext& ctx, const std::vector<SummaryAction>& candidates,
                              QEstimate* chosen = nullptr) const;

  // Adds cross-domain maps (for querying this policy from a new domain).
  // Rejected if both endpoint domains already occur in the dictionary, since
  // that could silently change stored kernel values.
  void extend_maps(const std::vector<SlotMap>& extra);

  // Freezes a copy of this policy as a prior mean provider.
  std::shared_ptr<PriorMean> as_prior() const;

  nlohmann::json snapshot() const;
  static std::shared_ptr<GPPolicy> restore(const nlohmann::json& j);

 private:
  struct Entry {
    Point p;
    double self_k = 0.0;
    double prior_m = 0.0;
    int col = -1;  // kernel-matrix column; -1 for zero-kernel anchor points
    std::string bucket;
  };
  struct Bucket {
    std::vector<int> cols;
    Eigen::MatrixXd L;    // chol of the bucket Gram + jitter
    Eigen::VectorXd loo;  // leave-one-out novelty per member
    bool dirty = true;
  };

  void rebuild_action_index();
  std::string bucket_key(const SummaryAction& a, const std::string& domain) const;
  bool actions_match(const SummaryAction& qa, const std::string& qd, const Entry& e) const;
  const NodeAlignment& alignment(const FeatureVector& from, const FeatureVector& to) const;
  double belief_k(const FeatureVector& qf, const Entry& e) const;

  void append_point(const Point& pt);
  double incoming_novelty(const Point& pt, double self_k);
  void refresh_bucket(Bucket& b);
  bool evict_one();
  void drop_block(std::size_t bi);
  bool is_protected(int dict_idx) const;
  int reward_base(std::size_t block_idx) const;

  std::vector<std::pair<int, int>> td_rows() const;  // (i, j) dict indices per H row
  void rebuild_solver();
  void extend_solver(std::size_t first_new_row);

  std::string domain_;
  GPHyper hyper_;
  KernelSpec spec_;
  std::shared_ptr<PriorMean> prior_;

  std::vector<Entry> dict_;
  std::vector<double> rewards_;
  std::vector<std::pair<int, int>> blocks_;  // (start, len) per episode
  std::vector<int> col_to_dict_;

  Eigen::MatrixXd K_;  // informative-point kernel matrix
  Eigen::MatrixXd L_;  // chol of the TD-projected system
  Eigen::MatrixXd Z_;  // L^-1 H
  Eigen::MatrixXd C_;  // H^T (HKH^T + s2 HH^T)^-1 H
  Eigen::VectorXd resid_, y_, alpha_, w_;
  bool factors_ready_ = false;
  bool k_ready_ = true;  // false after restore until the kernel matrix is rebuilt

  std::unordered_map<std::string, std::string> dsu_root_;
  std::unordered_map<std::string, std::string> pair_lookup_;  // "da\x1fdb\x1fslot" -> slot'
  std::map<std::string, Bucket> buckets_;

  mutable std::mutex cache_mu_;
  mutable std::map<std::pair<std::string, std::string>, NodeAlignment> align_cache_;

  mutable std::atomic<std::uint64_t> variance_clamps_{0};
  std::uint64_t jitter_retries_ = 0;
  std::uint64_t full_rebuilds_ = 0;
  std::uint64_t dropped_points_ = 0;
  std::uint64_t evicted_points_ = 0;
};

}  // namespace gpdm
