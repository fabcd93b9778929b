#include "gpdm/committee.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gpdm/belief.hpp"
#include "gpdm/util.hpp"

namespace gpdm {

QEstimate bcm_combine(const std::vector<QEstimate>& estimates, double k_star,
                      std::uint64_t* fallback_count) {
  if (estimates.empty()) throw std::invalid_argument("no estimates to combine");
  if (estimates.size() == 1) return estimates[0];
  constexpr double kMinVar = 1e-8;
  double prec_sum = 0.0, mean_sum = 0.0;
  for (const auto& q : estimates) {
    double v = std::max(q.variance, kMinVar);
    prec_sum += 1.0 / v;
    mean_sum += q.mean / v;
  }
  double prec = prec_sum;
  bool fallback = true;
  if (k_star > 0.0) {
    double corrected = prec_sum - (static_cast<double>(estimates.size()) - 1.0) / k_star;
    if (corrected > 0.0) {
      prec = corrected;
      fallback = false;
    }
  }
  if (fallback && fallback_count) ++*fallback_count;
  QEstimate q;
  q.variance = 1.0 / prec;
  q.mean = q.variance * mean_sum;
  return q;
}

PolicyCommittee::PolicyCommittee(std::vector<CommitteeMember> members, KernelSpec spec)
    : members_(std::move(members)), spec_(std::move(spec)) {
  if (members_.empty()) throw std::invalid_argument("a committee needs at least one member");
  for (const auto& m : members_) {
    if (!m.model || !m.policy) throw std::invalid_argument("committee member incomplete");
    if (m.policy->domain() != m.model->ontology.domain)
      throw std::invalid_argument("member policy domain disagrees with its model");
  }
  templates_.reserve(members_.size());
  for (const auto& m : members_) {
    FeatureVector t = feature_vector(init_belief(*m.model));
    for (auto& nd : t.nodes) std::fill(nd.values.begin(), nd.values.end(), 0.0);
    templates_.push_back(std::move(t));
  }
}

PolicyCommittee PolicyCommittee::fresh(const std::vector<const DomainModel*>& member_models,
                                       const GPHyper& hyper,
                                       const std::vector<const DomainModel*>& serving_models,
                                       double goal_weight, double history_weight) {
  std::vector<const DomainModel*> all = member_models;
  for (const auto* m : serving_models) {
    bool seen = false;
    for (const auto* o : all)
      if (o->ontology.domain == m->ontology.domain) seen = true;
    if (!seen) all.push_back(m);
  }
  KernelSpec spec = make_kernel_spec(all);
  spec.goal_weight = goal_weight;
  spec.history_weight = history_weight;
  std::vector<CommitteeMember> members;
  for (const auto* m : member_models) {
    KernelSpec own = make_kernel_spec({m});
    own.goal_weight = goal_weight;
    own.history_weight = history_weight;
    members.push_back(CommitteeMember{
        m, std::make_shared<GPPolicy>(m->ontology.domain, std::move(own), hyper)});
  }
  return PolicyCommittee(std::move(members), std::move(spec));
}

int PolicyCommittee::member_for_domain(const std::string& domain) const {
  for (std::size_t i = 0; i < members_.size(); ++i)
    if (members_[i].model->ontology.domain == domain) return static_cast<int>(i);
  return -1;
}

const NodeAlignment& PolicyCommittee::member_alignment(std::size_t member,
                                                       const FeatureVector& sample) const {
  std::lock_guard<std::mutex> g(mu_);
  auto key = std::make_pair(member, sample.domain);
  auto it = align_.find(key);
  if (it == align_.end())
    it = align_.emplace(key, align_layouts(templates_[member], sample, spec_)).first;
  return it->second;
}

std::shared_ptr<const FeatureVector> PolicyCommittee::map_features(
    const std::shared_ptr<const FeatureVector>& f, const std::string& domain,
    std::size_t member) const {
  if (!f) throw std::invalid_argument("map_features requires features");
  if (domain == members_[member].model->ontology.domain) return f;
  if (f->nodes.empty()) return f;  // featureless points carry nothing to translate
  const NodeAlignment& al = member_alignment(member, *f);
  FeatureVector out;
  out.domain = members_[member].model->ontology.domain;
  out.nodes = templates_[member].nodes;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    int src = al.other[i];
    if (src < 0) continue;  // uncovered nodes stay zero and add nothing to kernels
    const auto& sv = f->nodes[static_cast<std::size_t>(src)].values;
    auto& dv = out.nodes[i].values;
    std::size_t n = std::min(sv.size(), dv.size());
    std::copy(sv.begin(), sv.begin() + static_cast<std::ptrdiff_t>(n), dv.begin());
  }
  return share_features(std::move(out));
}

SummaryAction PolicyCommittee::map_action(const SummaryAction& a, const std::string& domain,
                                          std::size_t member) const {
  const std::string& home = members_[member].model->ontology.domain;
  if (a.slot.empty() || domain == home) return a;
  SummaryAction out;
  out.kind = a.kind;
  std::string paired = spec_.paired_slot(domain, a.slot, home);
  // unmatched slots get a private marker so their data never blends in
  out.slot = paired.empty() ? "@" + domain + ":" + a.slot : paired;
  return out;
}

Point PolicyCommittee::map_point(const Point& p, std::size_t member) const {
  Point out;
  out.features = map_features(p.features, p.domain, member);
  out.action = map_action(p.action, p.domain, member);
  out.domain = members_[member].model->ontology.domain;
  return out;
}

CommitteeContext PolicyCommittee::prepare(std::shared_ptr<const FeatureVector> features,
                                          const std::string& domain) const {
  if (!features) throw std::invalid_argument("prepare requires features");
  CommitteeContext ctx;
  ctx.domain = domain;
  ctx.raw = std::move(features);
  if (!ctx.raw->nodes.empty()) ctx.k_star = belief_kernel(*ctx.raw, *ctx.raw, spec_);
  ctx.mapped.reserve(members_.size());
  ctx.member_ctx.reserve(members_.size());
  for (std::size_t i = 0; i < members_.size(); ++i) {
    auto mf = map_features(ctx.raw, domain, i);
    ctx.member_ctx.push_back(
        members_[i].policy->prepare(mf, members_[i].model->ontology.domain));
    ctx.mapped.push_back(std::move(mf));
  }
  return ctx;
}

QEstimate PolicyCommittee::combined_q(const CommitteeContext& ctx, const SummaryAction& a,
                                      std::vector<QEstimate>* member_estimates) const {
  std::vector<QEstimate> est;
  est.reserve(members_.size());
  for (std::size_t i = 0; i < members_.size(); ++i)
    est.push_back(members_[i].policy->q_in_context(ctx.member_ctx[i],
                                                   map_action(a, ctx.domain, i)));
  std::uint64_t fb = 0;
  QEstimate q = bcm_combine(est, ctx.k_star, &fb);
  if (fb) fallbacks_.fetch_add(fb, std::memory_order_relaxed);
  if (member_estimates) *member_estimates = std::move(est);
  return q;
}

SummaryAction PolicyCommittee::select_action(const CommitteeContext& ctx,
                                             const std::vector<SummaryAction>& candidates,
                                             std::mt19937_64& rng, QEstimate* chosen,
                                             std::vector<QEstimate>* chosen_members) const {
  if (candidates.empty()) throw std::invalid_argument("no candidate actions");
  SummaryAction best{};
  QEstimate bq;
  std::vector<QEstimate> bmem;
  double best_s = 0.0;
  bool have = false;
  for (const auto& a : candidates) {
    std::vector<QEstimate> mem;
    QEstimate q = combined_q(ctx, a, chosen_members ? &mem : nullptr);
    double s = q.mean + std::sqrt(std::max(q.variance, 0.0)) * normal_sample(rng);
    if (!have || s > best_s) {
      have = true;
      best = a;
      bq = q;
      best_s = s;
      bmem = std::move(mem);
    }
  }
  if (chosen) *chosen = bq;
  if (chosen_members) *chosen_members = std::move(bmem);
  return best;
}

SummaryAction PolicyCommittee::greedy_action(const CommitteeContext& ctx,
                                             const std::vector<SummaryAction>& candidates,
                                             QEstimate* chosen,
                                             std::vector<QEstimate>* chosen_members) const {
  if (candidates.empty()) throw std::invalid_argument("no candidate actions");
  SummaryAction best{};
  QEstimate bq;
  std::vector<QEstimate> bmem;
  bool have = false;
  for (const auto& a : candidates) {
    std::vector<QEstimate> mem;
    QEstimate q = combined_q(ctx, a, chosen_members ? &mem : nullptr);
    if (!have || q.mean > bq.mean) {
      have = true;
      best = a;
      bq = q;
      bmem = std::move(mem);
    }
  }
  if (chosen) *chosen = bq;
  if (chosen_members) *chosen_members = std::move(bmem);
  return best;
}

void PolicyCommittee::ingest_episode(const std::vector<Point>& points,
                                     const std::vector<double>& rewards,
                                     const std::vector<double>* member_weights) {
  if (member_weights && member_weights->size() != members_.size())
    throw std::invalid_argument("one weight per member expected");
  for (std::size_t i = 0; i < members_.size(); ++i) {
    double w = member_weights ? (*member_weights)[i] : 1.0;
    if (w == 0.0) continue;
    std::vector<Point> mapped;
    mapped.reserve(points.size());
    for (const auto& p : points) mapped.push_back(map_point(p, i));
    if (w == 1.0) {
      members_[i].policy->ingest_episode(mapped, rewards);
    } else {
      std::vector<double> scaled = rewards;
      for (auto& r : scaled) r *= w;
      members_[i].policy->ingest_episode(mapped, scaled);
    }
  }
}

nlohmann::json PolicyCommittee::manifest() const {
  nlohmann::json j;
  j["format"] = "gpdm-committee-1";
  nlohmann::json mem = nlohmann::json::array();
  for (const auto& m : members_) mem.push_back({{"domain", m.model->ontology.domain}});
  j["members"] = std::move(mem);
  j["spec"] = kernel_spec_to_json(spec_);
  return j;
}

}  // namespace gpdm
