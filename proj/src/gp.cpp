#include "gpdm/gp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "gpdm/util.hpp"

namespace gpdm {

namespace {

constexpr double kAnchorEps = 1e-12;   // self-kernel at or below this means the point carries no features
constexpr double kBucketJitter = 1e-8;

bool slotted_kind(SummaryKind k) {
  return k == SummaryKind::Request || k == SummaryKind::Confirm || k == SummaryKind::Select;
}

std::string slot_token(const std::string& domain, const std::string& slot) {
  std::string t = domain;
  t.push_back('\x1f');
  t += slot;
  return t;
}

// shifts the trailing part of the logical square submatrix up and left by one
void remove_row_col(Eigen::MatrixXd& M, int idx, int logical) {
  int tail = logical - idx - 1;
  if (tail > 0) {
    M.block(idx, 0, tail, logical) = M.block(idx + 1, 0, tail, logical).eval();
    M.block(0, idx, logical, tail) = M.block(0, idx + 1, logical, tail).eval();
  }
}

class ZeroPrior final : public PriorMean {
 public:
  double at(const Point&) const override { return 0.0; }
  std::string kind() const override { return "zero"; }
  nlohmann::json to_json() const override { return nlohmann::json{{"kind", "zero"}}; }
};

class PolicyPrior final : public PriorMean {
 public:
  explicit PolicyPrior(std::shared_ptr<const GPPolicy> p) : pol_(std::move(p)) {
    if (!pol_) throw std::invalid_argument("policy prior requires a policy");
  }

  double at(const Point& p) const override {
    if (!p.features) throw std::invalid_argument("prior query requires features");
    std::lock_guard<std::mutex> g(mu_);
    auto it = ctx_.find(p.features.get());
    if (it == ctx_.end()) {
      if (ctx_.size() >= 1024) ctx_.clear();
      it = ctx_.emplace(p.features.get(), pol_->prepare(p.features, p.domain)).first;
    }
    return pol_->q_in_context(it->second, p.action).mean;
  }

  std::string kind() const override { return "policy"; }

  nlohmann::json to_json() const override {
    return nlohmann::json{{"kind", "policy"}, {"policy", pol_->snapshot()}};
  }

 private:
  std::shared_ptr<const GPPolicy> pol_;
  mutable std::mutex mu_;
  mutable std::unordered_map<const FeatureVector*, TurnContext> ctx_;
};

}  // namespace

void GPHyper::validate() const {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (dict_cap < 2) throw std::invalid_argument("dict_cap must be at least 2");
  if (novelty_tol < 0.0) throw std::invalid_argument("novelty_tol must be non-negative");
}

std::shared_ptr<PriorMean> zero_prior() {
  static std::shared_ptr<PriorMean> z = std::make_shared<ZeroPrior>();
  return z;
}

std::shared_ptr<PriorMean> policy_prior(std::shared_ptr<const GPPolicy> frozen) {
  return std::make_shared<PolicyPrior>(std::move(frozen));
}

std::shared_ptr<PriorMean> prior_from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "zero") return zero_prior();
  if (kind == "policy") return policy_prior(GPPolicy::restore(j.at("policy")));
  throw std::runtime_error("unknown prior kind: " + kind);
}

GPPolicy::GPPolicy(std::string domain, KernelSpec spec, GPHyper hyper,
                   std::shared_ptr<PriorMean> prior)
    : domain_(std::move(domain)),
      hyper_(hyper),
      spec_(std::move(spec)),
      prior_(prior ? std::move(prior) : zero_prior()) {
  if (domain_.empty()) throw std::invalid_argument("policy domain must be non-empty");
  hyper_.validate();
  rebuild_action_index();
}

GPPolicy::GPPolicy(const GPPolicy& o)
    : domain_(o.domain_),
      hyper_(o.hyper_),
      spec_(o.spec_),
      prior_(o.prior_),
      dict_(o.dict_),
      rewards_(o.rewards_),
      blocks_(o.blocks_),
      col_to_dict_(o.col_to_dict_),
      K_(o.K_),
      L_(o.L_),
      Z_(o.Z_),
      C_(o.C_),
      resid_(o.resid_),
      y_(o.y_),
      alpha_(o.alpha_),
      w_(o.w_),
      factors_ready_(o.factors_ready_),
      k_ready_(o.k_ready_),
      dsu_root_(o.dsu_root_),
      pair_lookup_(o.pair_lookup_),
      buckets_(o.buckets_),
      variance_clamps_(o.variance_clamps_.load()),
      jitter_retries_(o.jitter_retries_),
      full_rebuilds_(o.full_rebuilds_),
      dropped_points_(o.dropped_points_),
      evicted_points_(o.evicted_points_) {}

GPDiagnostics GPPolicy::diagnostics() const {
  GPDiagnostics d;
  d.variance_clamps = variance_clamps_.load();
  d.jitter_retries = jitter_retries_;
  d.full_rebuilds = full_rebuilds_;
  d.dropped_points = dropped_points_;
  d.evicted_points = evicted_points_;
  return d;
}

void GPPolicy::rebuild_action_index() {
  dsu_root_.clear();
  pair_lookup_.clear();
  std::unordered_map<std::string, std::string> parent;
  auto find_root = [&](std::string x) {
    while (true) {
      auto it = parent.find(x);
      if (it == parent.end() || it->second == x) return x;
      x = it->second;
    }
  };
  auto unite = [&](const std::string& a, const std::string& b) {
    std::string ra = find_root(a), rb = find_root(b);
    parent.try_emplace(ra, ra);
    parent.try_emplace(rb, rb);
    if (ra == rb) return;
    if (rb < ra) std::swap(ra, rb);  // smaller string wins, order independent
    parent[rb] = ra;
  };
  for (const auto& m : spec_.maps) {
    for (const auto& p : m.pairs) {
      if (p.cls != SlotClass::Requestable) continue;
      unite(slot_token(m.domain_a, p.a), slot_token(m.domain_b, p.b));
      pair_lookup_[m.domain_a + '\x1f' + m.domain_b + '\x1f' + p.a] = p.b;
      pair_lookup_[m.domain_b + '\x1f' + m.domain_a + '\x1f' + p.b] = p.a;
    }
  }
  for (const auto& kv : parent) dsu_root_[kv.first] = find_root(kv.first);
  buckets_.clear();
  for (auto& e : dict_) {
    e.bucket = bucket_key(e.p.action, e.p.domain);
    if (e.col >= 0) buckets_[e.bucket].cols.push_back(e.col);
  }
}

std::string GPPolicy::bucket_key(const SummaryAction& a, const std::string& domain) const {
  std::string key = "k:" + std::to_string(static_cast<int>(a.kind));
  if (!slotted_kind(a.kind)) return key;
  std::string tok = slot_token(domain, a.slot);
  auto it = dsu_root_.find(tok);
  key.push_back(':');
  key += (it == dsu_root_.end()) ? tok : it->second;
  return key;
}

bool GPPolicy::actions_match(const SummaryAction& qa, const std::string& qd, const Entry& e) const {
  if (qa.kind != e.p.action.kind) return false;
  if (!slotted_kind(qa.kind)) return true;
  if (qd == e.p.domain) return qa.slot == e.p.action.slot;
  auto it = pair_lookup_.find(qd + '\x1f' + e.p.domain + '\x1f' + qa.slot);
  return it != pair_lookup_.end() && it->second == e.p.action.slot;
}

const NodeAlignment& GPPolicy::alignment(const FeatureVector& from, const FeatureVector& to) const {
  std::lock_guard<std::mutex> g(cache_mu_);
  auto key = std::make_pair(from.domain, to.domain);
  auto it = align_cache_.find(key);
  if (it == align_cache_.end()) it = align_cache_.emplace(key, align_layouts(from, to, spec_)).first;
  return it->second;
}

double GPPolicy::belief_k(const FeatureVector& qf, const Entry& e) const {
  const FeatureVector& ef = *e.p.features;
  if (qf.nodes.empty() || ef.nodes.empty()) return 0.0;
  return belief_kernel_aligned(qf, ef, alignment(qf, ef));
}

void GPPolicy::append_point(const Point& pt) {
  Entry e;
  e.p = pt;
  if (!pt.features->nodes.empty())
    e.self_k = belief_kernel_aligned(*pt.features, *pt.features, alignment(*pt.features, *pt.features));
  e.prior_m = prior_->at(e.p);
  e.bucket = bucket_key(pt.action, pt.domain);
  if (e.self_k > kAnchorEps) {
    int m = static_cast<int>(col_to_dict_.size());
    if (K_.rows() < m + 1) {
      int grown = std::max(m + 1, std::max(64, static_cast<int>(K_.rows()) * 2));
      K_.conservativeResize(grown, grown);
    }
    for (int c = 0; c < m; ++c) {
      const Entry& o = dict_[col_to_dict_[c]];
      double v = actions_match(pt.action, pt.domain, o) ? belief_k(*pt.features, o) : 0.0;
      K_(m, c) = v;
      K_(c, m) = v;
    }
    K_(m, m) = e.self_k;
    e.col = m;
    col_to_dict_.push_back(static_cast<int>(dict_.size()));
    auto& b = buckets_[e.bucket];
    b.cols.push_back(m);
    b.dirty = true;
  }
  dict_.push_back(std::move(e));
}

void GPPolicy::refresh_bucket(Bucket& b) {
  int bs = static_cast<int>(b.cols.size());
  Eigen::MatrixXd Kb(bs, bs);
  for (int i = 0; i < bs; ++i)
    for (int j = 0; j < bs; ++j) Kb(i, j) = K_(b.cols[i], b.cols[j]);
  Kb.diagonal().array() += kBucketJitter;
  Eigen::LLT<Eigen::MatrixXd> llt(Kb);
  double jit = kBucketJitter;
  while (llt.info() != Eigen::Success && jit < 1e-3) {
    jit *= 100.0;
    Eigen::MatrixXd K2 = Kb;
    K2.diagonal().array() += jit;
    llt.compute(K2);
  }
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("action-bucket kernel factorization failed");
  b.L = llt.matrixL();
  Eigen::MatrixXd Linv = Eigen::MatrixXd::Identity(bs, bs);
  b.L.triangularView<Eigen::Lower>().solveInPlace(Linv);
  b.loo.resize(bs);
  // 1 / (A^-1)_ii is the residual of member i against the rest of its bucket
  for (int i = 0; i < bs; ++i) b.loo[i] = 1.0 / Linv.col(i).squaredNorm();
  b.dirty = false;
}

double GPPolicy::incoming_novelty(const Point& pt, double self_k) {
  auto it = buckets_.find(bucket_key(pt.action, pt.domain));
  if (it == buckets_.end() || it->second.cols.empty()) return self_k;
  Bucket& b = it->second;
  if (b.dirty) refresh_bucket(b);
  int bs = static_cast<int>(b.cols.size());
  Eigen::VectorXd v(bs);
  for (int i = 0; i < bs; ++i) {
    const Entry& o = dict_[col_to_dict_[b.cols[i]]];
    v[i] = actions_match(pt.action, pt.domain, o) ? belief_k(*pt.features, o) : 0.0;
  }
  Eigen::VectorXd u = b.L.triangularView<Eigen::Lower>().solve(v);
  return self_k + kBucketJitter - u.squaredNorm();
}

bool GPPolicy::is_protected(int t) const {
  std::size_t lo = 0, hi = blocks_.size();
  while (lo + 1 < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (blocks_[mid].first <= t) lo = mid;
    else hi = mid;
  }
  int s = blocks_[lo].first, l = blocks_[lo].second;
  return t == s || t == s + l - 1;
}

int GPPolicy::reward_base(std::size_t bi) const {
  int base = 0;
  for (std::size_t b = 0; b < bi; ++b) base += blocks_[b].second - 1;
  return base;
}

bool GPPolicy::evict_one() {
  Bucket* best_b = nullptr;
  int best_pos = -1;
  double best_loo = 0.0;
  for (auto& kv : buckets_) {
    Bucket& b = kv.second;
    if (b.cols.empty()) continue;
    if (b.dirty) refresh_bucket(b);
    for (int i = 0; i < static_cast<int>(b.cols.size()); ++i) {
      int t = col_to_dict_[b.cols[i]];
      if (is_protected(t)) continue;
      if (!best_b || b.loo[i] < best_loo) {
        best_b = &b;
        best_pos = i;
        best_loo = b.loo[i];
      }
    }
  }
  if (!best_b) {
    // every stored point is an episode endpoint; shed the oldest episode
    if (blocks_.size() > 1) {
      drop_block(0);
      return true;
    }
    return false;
  }
  int col = best_b->cols[best_pos];
  int t = col_to_dict_[col];
  std::size_t bi = 0;
  while (bi < blocks_.size() &&
         !(t >= blocks_[bi].first && t < blocks_[bi].first + blocks_[bi].second))
    ++bi;
  int q = t - blocks_[bi].first;
  int base = reward_base(bi);
  // the two transitions around the point collapse into one
  rewards_[base + q - 1] += hyper_.gamma * rewards_[base + q];
  rewards_.erase(rewards_.begin() + base + q);
  remove_row_col(K_, col, static_cast<int>(col_to_dict_.size()));
  col_to_dict_.erase(col_to_dict_.begin() + col);
  for (auto& v : col_to_dict_)
    if (v > t) --v;
  for (auto& kv : buckets_) {
    auto& cols = kv.second.cols;
    for (auto it = cols.begin(); it != cols.end();) {
      if (*it == col) {
        it = cols.erase(it);
        kv.second.dirty = true;
      } else {
        if (*it > col) --(*it);
        ++it;
      }
    }
  }
  dict_.erase(dict_.begin() + t);
  for (auto& e : dict_)
    if (e.col > col) --e.col;  // back-pointers shift with the removed column
  blocks_[bi].second -= 1;
  for (std::size_t b2 = bi + 1; b2 < blocks_.size(); ++b2) blocks_[b2].first -= 1;
  evicted_points_ += 1;
  return true;
}

void GPPolicy::drop_block(std::size_t bi) {
  int s = blocks_[bi].first, l = blocks_[bi].second;
  int base = reward_base(bi);
  rewards_.erase(rewards_.begin() + base, rewards_.begin() + base + (l - 1));
  std::vector<int> keep;  // surviving kernel columns, old indices, in order
  for (std::size_t t = 0; t < dict_.size(); ++t) {
    if (static_cast<int>(t) >= s && static_cast<int>(t) < s + l) continue;
    if (dict_[t].col >= 0) keep.push_back(dict_[t].col);
  }
  int m2 = static_cast<int>(keep.size());
  Eigen::MatrixXd K2(std::max(m2, 1), std::max(m2, 1));
  for (int i = 0; i < m2; ++i)
    for (int j = 0; j < m2; ++j) K2(i, j) = K_(keep[i], keep[j]);
  K_.swap(K2);
  dict_.erase(dict_.begin() + s, dict_.begin() + s + l);
  blocks_.erase(blocks_.begin() + bi);
  for (std::size_t b = bi; b < blocks_.size(); ++b) blocks_[b].first -= l;
  col_to_dict_.clear();
  for (std::size_t t = 0; t < dict_.size(); ++t) {
    if (dict_[t].col >= 0) {
      dict_[t].col = static_cast<int>(col_to_dict_.size());
      col_to_dict_.push_back(static_cast<int>(t));
    }
  }
  rebuild_action_index();
  evicted_points_ += static_cast<std::size_t>(l);
}

void GPPolicy::ingest_episode(const std::vector<Point>& points, const std::vector<double>& rewards) {
  if (points.size() < 2) throw std::invalid_argument("an episode needs at least two points");
  if (rewards.size() + 1 != points.size())
    throw std::invalid_argument("episode rewards must number points - 1 (got " +
                                std::to_string(rewards.size()) + " for " +
                                std::to_string(points.size()) + " points)");
  for (const auto& p : points)
    if (!p.features) throw std::invalid_argument("episode point missing features");

  std::size_t n_rows_old = rewards_.size();
  std::size_t evicted_before = evicted_points_;

  blocks_.push_back({static_cast<int>(dict_.size()), 0});
  append_point(points[0]);
  blocks_.back().second = 1;
  double acc = 0.0, gp = 1.0;
  for (std::size_t t = 1; t < points.size(); ++t) {
    acc += gp * rewards[t - 1];
    gp *= hyper_.gamma;
    bool last = (t + 1 == points.size());
    bool keep = true;
    if (!last && dict_.size() >= hyper_.dict_cap) {
      double sk = 0.0;
      if (!points[t].features->nodes.empty())
        sk = belief_kernel_aligned(*points[t].features, *points[t].features,
                                   alignment(*points[t].features, *points[t].features));
      keep = incoming_novelty(points[t], sk) >= hyper_.novelty_tol;
    }
    if (keep) {
      append_point(points[t]);
      blocks_.back().second += 1;
      rewards_.push_back(acc);
      acc = 0.0;
      gp = 1.0;
    } else {
      dropped_points_ += 1;
    }
  }

  if (dict_.size() > hyper_.dict_cap) {
    // evict in one batch to a low-water mark so later episodes extend in place
    std::size_t low = hyper_.dict_cap - std::max<std::size_t>(1, hyper_.dict_cap / 10);
    while (dict_.size() > low) {
      if (!evict_one()) break;
    }
  }
  if (evicted_points_ != evicted_before) factors_ready_ = false;

  if (factors_ready_) extend_solver(n_rows_old);
  else rebuild_solver();
}

std::vector<std::pair<int, int>> GPPolicy::td_rows() const {
  std::vector<std::pair<int, int>> rows;
  rows.reserve(rewards_.size());
  for (const auto& b : blocks_)
    for (int r = 0; r + 1 < b.second; ++r) rows.emplace_back(b.first + r, b.first + r + 1);
  return rows;
}

void GPPolicy::rebuild_solver() {
  auto rows = td_rows();
  if (rows.size() != rewards_.size()) throw std::logic_error("episode bookkeeping out of sync");
  int n = static_cast<int>(rows.size());
  int m = static_cast<int>(col_to_dict_.size());
  if (!k_ready_) {
    K_.resize(std::max(m, 1), std::max(m, 1));
    for (int i = 0; i < m; ++i) {
      const Entry& a = dict_[col_to_dict_[i]];
      K_(i, i) = a.self_k;
      for (int j = i + 1; j < m; ++j) {
        const Entry& b = dict_[col_to_dict_[j]];
        double v = actions_match(a.p.action, a.p.domain, b) ? belief_k(*a.p.features, b) : 0.0;
        K_(i, j) = v;
        K_(j, i) = v;
      }
    }
    k_ready_ = true;
  }
  if (n == 0) {
    L_.resize(0, 0);
    Z_.resize(0, m);
    C_ = Eigen::MatrixXd::Zero(m, m);
    resid_.resize(0);
    y_.resize(0);
    alpha_.resize(0);
    w_ = Eigen::VectorXd::Zero(m);
    factors_ready_ = true;
    return;
  }
  auto kd = [&](int di, int dj) -> double {
    int ci = dict_[di].col, cj = dict_[dj].col;
    return (ci < 0 || cj < 0) ? 0.0 : K_(ci, cj);
  };
  const double g = hyper_.gamma;
  Eigen::MatrixXd G(n, n);
  for (int r = 0; r < n; ++r) {
    const auto [ir, jr] = rows[r];
    for (int s = r; s < n; ++s) {
      const auto [is, js] = rows[s];
      double v = kd(ir, is) - g * kd(ir, js) - g * kd(jr, is) + g * g * kd(jr, js);
      if (s == r) v += hyper_.sigma2 * (1.0 + g * g);
      else if (s == r + 1 && jr == is) v -= hyper_.sigma2 * g;
      G(r, s) = v;
      G(s, r) = v;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt;
  bool ok = false;
  for (double jit : {0.0, 1e-10, 1e-8, 1e-6}) {
    Eigen::MatrixXd Gj = G;
    if (jit > 0.0) {
      Gj.diagonal().array() += jit;
      jitter_retries_ += 1;
    }
    llt.compute(Gj);
    if (llt.info() == Eigen::Success) {
      ok = true;
      break;
    }
  }
  if (!ok)
    throw std::runtime_error("value-model system is numerically singular (n=" + std::to_string(n) +
                             ", m=" + std::to_string(m) + ") even with diagonal jitter");
  L_ = llt.matrixL();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, m);
  for (int r = 0; r < n; ++r) {
    const auto [ir, jr] = rows[r];
    if (dict_[ir].col >= 0) H(r, dict_[ir].col) += 1.0;
    if (dict_[jr].col >= 0) H(r, dict_[jr].col) -= g;
  }
  Z_ = L_.triangularView<Eigen::Lower>().solve(H);
  C_ = Z_.transpose() * Z_;
  resid_.resize(n);
  for (int r = 0; r < n; ++r) {
    const auto [ir, jr] = rows[r];
    resid_[r] = rewards_[r] - (dict_[ir].prior_m - g * dict_[jr].prior_m);
  }
  y_ = L_.triangularView<Eigen::Lower>().solve(resid_);
  alpha_ = L_.transpose().triangularView<Eigen::Upper>().solve(y_);
  w_ = Eigen::VectorXd::Zero(m);
  for (int r = 0; r < n; ++r) {
    const auto [ir, jr] = rows[r];
    if (dict_[ir].col >= 0) w_[dict_[ir].col] += alpha_[r];
    if (dict_[jr].col >= 0) w_[dict_[jr].col] -= g * alpha_[r];
  }
  full_rebuilds_ += 1;
  factors_ready_ = true;
}

void GPPolicy::extend_solver(std::size_t first_new_row) {
  auto rows = td_rows();
  if (rows.size() != rewards_.size()) throw std::logic_error("episode bookkeeping out of sync");
  int n = static_cast<int>(rows.size());
  int n_old = static_cast<int>(first_new_row);
  int b = n - n_old;
  if (b <= 0) throw std::logic_error("nothing to extend");
  int m = static_cast<int>(col_to_dict_.size());
  int m_old = static_cast<int>(Z_.cols());
  const double g = hyper_.gamma;
  auto kd = [&](int di, int dj) -> double {
    int ci = dict_[di].col, cj = dict_[dj].col;
    return (ci < 0 || cj < 0) ? 0.0 : K_(ci, cj);
  };
  Eigen::MatrixXd G21(b, n_old);
  for (int r = 0; r < b; ++r) {
    const auto [ir, jr] = rows[n_old + r];
    for (int s = 0; s < n_old; ++s) {
      const auto [is, js] = rows[s];
      G21(r, s) = kd(ir, is) - g * kd(ir, js) - g * kd(jr, is) + g * g * kd(jr, js);
    }
  }
  Eigen::MatrixXd G22(b, b);
  for (int r = 0; r < b; ++r) {
    const auto [ir, jr] = rows[n_old + r];
    for (int s = r; s < b; ++s) {
      const auto [is, js] = rows[n_old + s];
      double v = kd(ir, is) - g * kd(ir, js) - g * kd(jr, is) + g * g * kd(jr, js);
      if (s == r) v += hyper_.sigma2 * (1.0 + g * g);
      else if (s == r + 1 && jr == is) v -= hyper_.sigma2 * g;
      G22(r, s) = v;
      G22(s, r) = v;
    }
  }
  Eigen::MatrixXd L21t = L_.triangularView<Eigen::Lower>().solve(G21.transpose());  // n_old x b
  Eigen::MatrixXd S = G22 - L21t.transpose() * L21t;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    // the appended block broke positive definiteness; fall back to a clean build
    factors_ready_ = false;
    rebuild_solver();
    return;
  }
  Eigen::MatrixXd L22 = llt.matrixL();

  Eigen::MatrixXd Zold = Eigen::MatrixXd::Zero(n_old, m);
  Zold.leftCols(m_old) = Z_;
  Eigen::MatrixXd Hnew = Eigen::MatrixXd::Zero(b, m);
  for (int r = 0; r < b; ++r) {
    const auto [ir, jr] = rows[n_old + r];
    if (dict_[ir].col >= 0) Hnew(r, dict_[ir].col) += 1.0;
    if (dict_[jr].col >= 0) Hnew(r, dict_[jr].col) -= g;
  }
  Eigen::MatrixXd Znew =
      L22.triangularView<Eigen::Lower>().solve(Hnew - L21t.transpose() * Zold);

  Eigen::MatrixXd Lnew = Eigen::MatrixXd::Zero(n, n);
  Lnew.topLeftCorner(n_old, n_old) = L_;
  Lnew.bottomLeftCorner(b, n_old) = L21t.transpose();
  Lnew.bottomRightCorner(b, b) = L22;
  L_.swap(Lnew);

  Eigen::MatrixXd Cn = Eigen::MatrixXd::Zero(m, m);
  Cn.topLeftCorner(m_old, m_old) = C_;
  C_ = Cn + Znew.transpose() * Znew;

  Eigen::MatrixXd Zn(n, m);
  Zn.topRows(n_old) = Zold;
  Zn.bottomRows(b) = Znew;
  Z_.swap(Zn);

  Eigen::VectorXd rnew(b);
  for (int r = 0; r < b; ++r) {
    const auto [ir, jr] = rows[n_old + r];
    rnew[r] = rewards_[n_old + r] - (dict_[ir].prior_m - g * dict_[jr].prior_m);
  }
  Eigen::VectorXd ynew = L22.triangularView<Eigen::Lower>().solve(rnew - L21t.transpose() * y_);
  resid_.conservativeResize(n);
  resid_.tail(b) = rnew;
  y_.conservativeResize(n);
  y_.tail(b) = ynew;
  alpha_ = L_.transpose().triangularView<Eigen::Upper>().solve(y_);
  w_ = Eigen::VectorXd::Zero(m);
  for (int r = 0; r < n; ++r) {
    const auto [ir, jr] = rows[r];
    if (dict_[ir].col >= 0) w_[dict_[ir].col] += alpha_[r];
    if (dict_[jr].col >= 0) w_[dict_[jr].col] -= g * alpha_[r];
  }
}

TurnContext GPPolicy::prepare(std::shared_ptr<const FeatureVector> features,
                              const std::string& domain) const {
  if (!features) throw std::invalid_argument("prepare requires features");
  TurnContext ctx;
  ctx.features = std::move(features);
  ctx.domain = domain;
  if (!ctx.features->nodes.empty())
    ctx.self_k = belief_kernel_aligned(*ctx.features, *ctx.features,
                                       alignment(*ctx.features, *ctx.features));
  int m = static_cast<int>(col_to_dict_.size());
  ctx.bk.resize(m);
  for (int c = 0; c < m; ++c) ctx.bk[c] = belief_k(*ctx.features, dict_[col_to_dict_[c]]);
  return ctx;
}

QEstimate GPPolicy::q_in_context(const TurnContext& ctx, const SummaryAction& a) const {
  QEstimate q;
  q.mean = prior_->at(Point{ctx.features, a, ctx.domain});
  q.variance = ctx.self_k;
  auto it = buckets_.find(bucket_key(a, ctx.domain));
  if (it == buckets_.end() || it->second.cols.empty()) return q;
  std::vector<int> sel;
  sel.reserve(it->second.cols.size());
  for (int c : it->second.cols)
    if (actions_match(a, ctx.domain, dict_[col_to_dict_[c]])) sel.push_back(c);
  if (sel.empty()) return q;
  double mv = 0.0, quad = 0.0;
  for (int c : sel) mv += ctx.bk[c] * w_[c];
  for (std::size_t i = 0; i < sel.size(); ++i) {
    double bi = ctx.bk[sel[i]];
    for (std::size_t j = 0; j < sel.size(); ++j) quad += bi * C_(sel[i], sel[j]) * ctx.bk[sel[j]];
  }
  q.mean += mv;
  double var = ctx.self_k - quad;
  if (var < 0.0) {
    variance_clamps_.fetch_add(1, std::memory_order_relaxed);
    var = 0.0;
  }
  q.variance = var;
  return q;
}

QEstimate GPPolicy::q_posterior(const Point& p) const {
  return q_in_context(prepare(p.features, p.domain), p.action);
}

SummaryAction GPPolicy::select_action(const TurnContext& ctx,
                                      const std::vector<SummaryAction>& candidates,
                                      std::mt19937_64& rng, QEstimate* chosen) const {
  if (candidates.empty()) throw std::invalid_argument("no candidate actions");
  SummaryAction best{};
  QEstimate bq;
  double best_s = 0.0;
  bool have = false;
  for (const auto& a : candidates) {
    QEstimate q = q_in_context(ctx, a);
    double s = q.mean + std::sqrt(std::max(q.variance, 0.0)) * normal_sample(rng);
    if (!have || s > best_s) {
      have = true;
      best = a;
      bq = q;
      best_s = s;
    }
  }
  if (chosen) *chosen = bq;
  return best;
}

SummaryAction GPPolicy::greedy_action(const TurnContext& ctx,
                                      const std::vector<SummaryAction>& candidates,
                                      QEstimate* chosen) const {
  if (candidates.empty()) throw std::invalid_argument("no candidate actions");
  SummaryAction best{};
  QEstimate bq;
  bool have = false;
  for (const auto& a : candidates) {
    QEstimate q = q_in_context(ctx, a);
    if (!have || q.mean > bq.mean) {
      have = true;
      best = a;
      bq = q;
    }
  }
  if (chosen) *chosen = bq;
  return best;
}

void GPPolicy::extend_maps(const std::vector<SlotMap>& extra) {
  std::set<std::string> present;
  for (const auto& e : dict_) present.insert(e.p.domain);
  for (const auto& m : extra) {
    if (m.domain_a == m.domain_b) throw std::invalid_argument("self maps are implicit");
    if (present.count(m.domain_a) && present.count(m.domain_b))
      throw std::invalid_argument("cannot add a map between " + m.domain_a + " and " +
                                  m.domain_b + ": both domains already have stored points");
    bool flip = false;
    if (spec_.find_map(m.domain_a, m.domain_b, flip))
      throw std::invalid_argument("map between " + m.domain_a + " and " + m.domain_b +
                                  " already present");
    spec_.maps.push_back(m);
  }
  rebuild_action_index();
  std::lock_guard<std::mutex> g(cache_mu_);
  align_cache_.clear();
}

std::shared_ptr<PriorMean> GPPolicy::as_prior() const {
  return policy_prior(std::make_shared<GPPolicy>(*this));
}

nlohmann::json GPPolicy::snapshot() const {
  nlohmann::json j;
  j["format"] = "gpdm-policy-1";
  j["domain"] = domain_;
  j["hyper"] = {{"sigma2", hyper_.sigma2},
                {"gamma", hyper_.gamma},
                {"dict_cap", hyper_.dict_cap},
                {"novelty_tol", hyper_.novelty_tol}};
  j["prior"] = prior_->to_json();
  j["kernel"] = kernel_spec_to_json(spec_);
  nlohmann::json dict = nlohmann::json::array();
  for (const auto& e : dict_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : e.p.features->nodes)
      nodes.push_back({{"slot", nd.slot}, {"kind", nd.kind}, {"v", nd.values}});
    dict.push_back({{"domain", e.p.domain},
                    {"action", {{"kind", to_string(e.p.action.kind)}, {"slot", e.p.action.slot}}},
                    {"features", std::move(nodes)},
                    {"prior_m", e.prior_m},
                    {"self_k", e.self_k}});
  }
  j["dict"] = std::move(dict);
  j["rewards"] = rewards_;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : blocks_) blocks.push_back({b.first, b.second});
  j["blocks"] = std::move(blocks);
  int m = static_cast<int>(col_to_dict_.size());
  std::vector<double> alpha(alpha_.data(), alpha_.data() + alpha_.size());
  std::vector<double> w(w_.data(), w_.data() + w_.size());
  std::vector<double> cflat;
  cflat.reserve(static_cast<std::size_t>(m) * m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) cflat.push_back(C_(r, c));
  j["solver"] = {{"alpha", alpha},
                 {"w", w},
                 {"c_b64", base64_encode(cflat.data(), cflat.size() * sizeof(double))},
                 {"m_real", m}};
  return j;
}

std::shared_ptr<GPPolicy> GPPolicy::restore(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", std::string()) != "gpdm-policy-1")
    throw std::runtime_error("unsupported policy snapshot format");
  GPHyper h;
  const auto& jh = j.at("hyper");
  h.sigma2 = jh.at("sigma2").get<double>();
  h.gamma = jh.at("gamma").get<double>();
  h.dict_cap = jh.at("dict_cap").get<std::size_t>();
  h.novelty_tol = jh.at("novelty_tol").get<double>();
  auto pol = std::make_shared<GPPolicy>(j.at("domain").get<std::string>(),
                                        kernel_spec_from_json(j.at("kernel")), h,
                                        prior_from_json(j.at("prior")));
  for (const auto& je : j.at("dict")) {
    auto fv = std::make_shared<FeatureVector>();
    fv->domain = je.at("domain").get<std::string>();
    for (const auto& jn : je.at("features")) {
      NodeVec nd;
      nd.slot = jn.at("slot").get<std::string>();
      nd.kind = jn.at("kind").get<int>();
      nd.values = jn.at("v").get<std::vector<double>>();
      fv->nodes.push_back(std::move(nd));
    }
    Entry e;
    e.p.features = std::move(fv);
    e.p.domain = je.at("domain").get<std::string>();
    e.p.action.kind = summary_kind_from_string(je.at("action").at("kind").get<std::string>());
    e.p.action.slot = je.at("action").at("slot").get<std::string>();
    e.prior_m = je.at("prior_m").get<double>();
    e.self_k = je.at("self_k").get<double>();
    if (e.self_k > kAnchorEps) {
      e.col = static_cast<int>(pol->col_to_dict_.size());
      pol->col_to_dict_.push_back(static_cast<int>(pol->dict_.size()));
    }
    pol->dict_.push_back(std::move(e));
  }
  pol->rewards_ = j.at("rewards").get<std::vector<double>>();
  for (const auto& jb : j.at("blocks"))
    pol->blocks_.emplace_back(jb.at(0).get<int>(), jb.at(1).get<int>());
  std::size_t total = 0, rows = 0;
  int at = 0;
  for (const auto& b : pol->blocks_) {
    if (b.first != at || b.second < 2)
      throw std::runtime_error("corrupt snapshot: bad episode blocks");
    at += b.second;
    total += static_cast<std::size_t>(b.second);
    rows += static_cast<std::size_t>(b.second) - 1;
  }
  if (total != pol->dict_.size() || rows != pol->rewards_.size())
    throw std::runtime_error("corrupt snapshot: sizes disagree");
  const auto& js = j.at("solver");
  int m = js.at("m_real").get<int>();
  if (m != static_cast<int>(pol->col_to_dict_.size()))
    throw std::runtime_error("corrupt snapshot: column count mismatch");
  auto alpha = js.at("alpha").get<std::vector<double>>();
  auto w = js.at("w").get<std::vector<double>>();
  if (alpha.size() != rows || w.size() != static_cast<std::size_t>(m))
    throw std::runtime_error("corrupt snapshot: solver sizes disagree");
  pol->alpha_.resize(static_cast<int>(alpha.size()));
  for (std::size_t i = 0; i < alpha.size(); ++i) pol->alpha_[static_cast<int>(i)] = alpha[i];
  pol->w_.resize(m);
  for (int i = 0; i < m; ++i) pol->w_[i] = w[static_cast<std::size_t>(i)];
  auto cbytes = base64_decode(js.at("c_b64").get<std::string>());
  if (cbytes.size() != static_cast<std::size_t>(m) * m * sizeof(double))
    throw std::runtime_error("corrupt snapshot: kernel projection size");
  pol->C_.resize(m, m);
  if (m > 0) {
    const double* cd = reinterpret_cast<const double*>(cbytes.data());
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) pol->C_(r, c) = cd[static_cast<std::size_t>(r) * m + c];
  }
  pol->k_ready_ = false;
  pol->factors_ready_ = false;
  pol->rebuild_action_index();
  return pol;
}

}  // namespace gpdm
