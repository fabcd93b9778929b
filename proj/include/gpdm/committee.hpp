#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "gpdm/gp.hpp"

namespace gpdm {

// Product-of-experts combination: each estimate is an independent posterior
// over the same query, k_star its prior variance. A non-positive combined
// precision falls back to the plain precision sum (counted via fallback_count).
// A single estimate is returned unchanged.
QEstimate bcm_combine(const std::vector<QEstimate>& estimates, double k_star,
                      std::uint64_t* fallback_count = nullptr);

struct CommitteeMember {
  const DomainModel* model = nullptr;
  std::shared_ptr<GPPolicy> policy;
};

// Query-time state shared by all candidate actions of one turn: the raw
// features, their self-kernel, and per-member mapped features and contexts.
struct CommitteeContext {
  std::string domain;
  std::shared_ptr<const FeatureVector> raw;
  double k_star = 0.0;
  std::vector<std::shared_ptr<const FeatureVector>> mapped;
  std::vector<TurnContext> member_ctx;
};

// A committee of single-domain policies jointly serving queries from any
// domain covered by the slot maps. Points are translated into each member's
// own layout both when storing and when querying, so members stay
// single-domain internally.
class PolicyCommittee {
 public:
  PolicyCommittee(std::vector<CommitteeMember> members, KernelSpec spec);

  // Fresh untrained members over member_models; serving_models only widen the
  // slot maps so additional domains can query the committee.
  static PolicyCommittee fresh(const std::vector<const DomainModel*>& member_models,
                               const GPHyper& hyper,
                               const std::vector<const DomainModel*>& serving_models = {},
                               double goal_weight = 1.0, double history_weight = 1.0);

  std::size_t size() const { return members_.size(); }
  const CommitteeMember& member(std::size_t i) const { return members_[i]; }
  int member_for_domain(const std::string& domain) const;
  const KernelSpec& spec() const { return spec_; }
  std::uint64_t bcm_fallbacks() const { return fallbacks_.load(); }

  std::shared_ptr<const FeatureVector> map_features(
      const std::shared_ptr<const FeatureVector>& f, const std::string& domain,
      std::size_t member) const;
  SummaryAction map_action(const SummaryAction& a, const std::string& domain,
                           std::size_t member) const;
  Point map_point(const Point& p, std::size_t member) const;

  CommitteeContext prepare(std::shared_ptr<const FeatureVector> features,
                           const std::string& domain) const;
  QEstimate combined_q(const CommitteeContext& ctx, const SummaryAction& a,
                       std::vector<QEstimate>* member_estimates = nullptr) const;
  SummaryAction select_action(const CommitteeContext& ctx,
                              const std::vector<SummaryAction>& candidates, std::mt19937_64& rng,
                              QEstimate* chosen = nullptr,
                              std::vector<QEstimate>* chosen_members = nullptr) const;
  SummaryAction greedy_action(const CommitteeContext& ctx,
                              const std::vector<SummaryAction>& candidates,
                              QEstimate* chosen = nullptr,
                              std::vector<QEstimate>* chosen_members = nullptr) const;

  // member_weights scales each member's immediate rewards; a zero weight
  // skips that member entirely. Null means every member learns at weight 1.
  void ingest_episode(const std::vector<Point>& points, const std::vector<double>& rewards,
                      const std::vector<double>* member_weights = nullptr);

  nlohmann::json manifest() const;

 private:
  const NodeAlignment& member_alignment(std::size_t member, const FeatureVector& sample) const;

  std::vector<CommitteeMember> members_;
  KernelSpec spec_;
  std::vector<FeatureVector> templates_;  // zero-valued member layouts
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::size_t, std::string>, NodeAlignment> align_;
  mutable std::atomic<std::uint64_t> fallbacks_{0};
};

}  // namespace gpdm
