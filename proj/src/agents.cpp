#include "gpdm/agents.hpp"

#include <algorithm>
#include <stdexcept>

namespace gpdm {

namespace {
constexpr double kVarFloor = 1e-8;
}

const char* to_string(RewardStrategy s) {
  switch (s) {
    case RewardStrategy::Naive: return "NAIV";
    case RewardStrategy::Winner: return "WINN";
    case RewardStrategy::Scaled: return "SCALE";
    case RewardStrategy::Home: return "MBCM";
  }
  throw std::logic_error("unreachable reward strategy");
}

RewardStrategy reward_strategy_from_string(const std::string& s) {
  if (s == "NAIV") return RewardStrategy::Naive;
  if (s == "WINN") return RewardStrategy::Winner;
  if (s == "SCALE") return RewardStrategy::Scaled;
  if (s == "MBCM") return RewardStrategy::Home;
  throw std::invalid_argument("unknown reward strategy: " + s);
}

std::vector<double> member_ratios(const std::vector<QEstimate>& estimates) {
  std::vector<double> out;
  out.reserve(estimates.size());
  for (const auto& e : estimates) out.push_back(e.mean / std::max(e.variance, kVarFloor));
  return out;
}

EpisodeAttribution attribution_from_episode(const Episode& ep, std::size_t n_members) {
  EpisodeAttribution attr;
  attr.avg_ratio.assign(n_members, 0.0);
  for (const auto& t : ep.turns) {
    if (t.member_estimates.size() != n_members) continue;
    TurnAttribution ta;
    ta.ratio = member_ratios(t.member_estimates);
    ta.action = t.action;
    for (std::size_t i = 0; i < n_members; ++i) attr.avg_ratio[i] += ta.ratio[i];
    attr.turns.push_back(std::move(ta));
  }
  if (!attr.turns.empty())
    for (auto& r : attr.avg_ratio) r /= static_cast<double>(attr.turns.size());
  return attr;
}

std::vector<double> distribute(RewardStrategy s, const EpisodeAttribution& attr,
                               int home_member) {
  std::size_t m = attr.avg_ratio.size();
  if (m == 0) throw std::invalid_argument("attribution covers no members");
  std::vector<double> w(m, 0.0);
  switch (s) {
    case RewardStrategy::Naive:
      std::fill(w.begin(), w.end(), 1.0);
      return w;
    case RewardStrategy::Winner: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < m; ++i)
        if (attr.avg_ratio[i] > attr.avg_ratio[best]) best = i;
      w[best] = 1.0;
      return w;
    }
    case RewardStrategy::Scaled: {
      double total = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        w[i] = std::max(attr.avg_ratio[i], 0.0);
        total += w[i];
      }
      if (total > 0.0) {
        for (auto& x : w) x /= total;
      } else {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(m));
      }
      return w;
    }
    case RewardStrategy::Home:
      if (home_member < 0 || static_cast<std::size_t>(home_member) >= m)
        throw std::invalid_argument("no committee member is native to this domain");
      w[static_cast<std::size_t>(home_member)] = 1.0;
      return w;
  }
  throw std::logic_error("unreachable reward strategy");
}

std::vector<double> distribute(RewardStrategy s, const EpisodeAttribution& attr,
                               const std::string& current_domain,
                               const PolicyCommittee& committee) {
  return distribute(s, attr, committee.member_for_domain(current_domain));
}

void apply_rewards(PolicyCommittee& committee, const std::vector<Point>& points,
                   const std::vector<double>& rewards, const std::vector<double>& weights) {
  committee.ingest_episode(points, rewards, &weights);
}

SummaryAction CommitteeActor::choose(const BeliefState& b,
                                     const std::shared_ptr<const FeatureVector>& features,
                                     const std::vector<SummaryAction>& candidates, bool train,
                                     std::mt19937_64& rng, TurnRecord& rec) {
  CommitteeContext ctx = committee_->prepare(features, b.domain);
  return train
             ? committee_->select_action(ctx, candidates, rng, &rec.chosen,
                                         &rec.member_estimates)
             : committee_->greedy_action(ctx, candidates, &rec.chosen, &rec.member_estimates);
}

void CommitteeActor::observe_episode(const Episode& ep) {
  if (ep.turns.empty()) return;
  last_attribution_ = attribution_from_episode(ep, committee_->size());
  last_weights_ = distribute(strategy_, last_attribution_, ep.domain, *committee_);
  auto [points, rewards] = episode_trace(ep);
  apply_rewards(*committee_, points, rewards, last_weights_);
}

}  // namespace gpdm
