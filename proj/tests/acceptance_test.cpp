// Acceptance gate: one pass/fail line per criterion on stdout, diagnostics on
// stderr, nonzero exit if anything fails. Criteria can be cherry-picked by
// passing their numbers as arguments.
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gpdm/agents.hpp"
#include "gpdm/belief.hpp"
#include "gpdm/committee.hpp"
#include "gpdm/dm.hpp"
#include "gpdm/domains.hpp"
#include "gpdm/gp.hpp"
#include "gpdm/harness.hpp"
#include "gpdm/kernel.hpp"
#include "gpdm/ontology.hpp"
#include "gpdm/simuser.hpp"
#include "gpdm/util.hpp"

using namespace gpdm;
namespace fs = std::filesystem;

namespace {

bool expect(bool cond, const char* what, bool& ok) {
  if (!cond) {
    std::fprintf(stderr, "  failed: %s\n", what);
    ok = false;
  }
  return cond;
}

fs::path work_root() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "gpdm_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path work_dir(const std::string& tag) {
  fs::path p = work_root() / tag;
  fs::create_directories(p);
  return p;
}

const DomainModel& model(const std::string& name) {
  static std::map<std::string, DomainModel> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, builtin_domain_model(name)).first;
  return it->second;
}

// experiment settings: capped dictionaries keep desk-scale runs inside the
// stated budgets without touching any pass threshold
GPHyper policy_hyper() {
  GPHyper h;
  h.sigma2 = 2.0;
  h.gamma = 0.99;
  h.dict_cap = 600;
  h.novelty_tol = 0.05;
  return h;
}

GPHyper committee_hyper() {
  GPHyper h;
  h.sigma2 = 2.0;
  h.gamma = 0.99;
  h.dict_cap = 400;
  h.novelty_tol = 0.05;
  return h;
}

// history nodes share one value set everywhere, so down-weighting goal nodes
// raises the cross-domain share of the kernel; picked on 5-seed pilots
constexpr double kGoalWeight = 0.5;

std::vector<std::uint64_t> ten_seeds() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}; }

std::shared_ptr<const FeatureVector> random_features(const DomainModel& m, std::mt19937_64& rng) {
  BeliefState b = init_belief(m);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& g : b.goals) {
    double total = 0.0;
    for (auto& x : g.dist) {
      x = u(rng);
      total += x;
    }
    for (auto& x : g.dist) x /= total;
  }
  for (auto& h : b.histories) {
    double total = 0.0;
    for (auto& x : h.dist) {
      x = u(rng);
      total += x;
    }
    for (auto& x : h.dist) x /= total;
  }
  return share_features(feature_vector(b));
}

SummaryAction random_action(const DomainModel& m, std::mt19937_64& rng) {
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  switch (rng() % 5) {
    case 0: return {SummaryKind::Request, req[rng() % req.size()].slot};
    case 1: return {SummaryKind::Confirm, req[rng() % req.size()].slot};
    case 2: return {SummaryKind::Inform, ""};
    case 3: return {SummaryKind::Repeat, ""};
    default: return {SummaryKind::Bye, ""};
  }
}

Point random_point(const DomainModel& m, std::mt19937_64& rng) {
  return Point{random_features(m, rng), random_action(m, rng), m.ontology.domain};
}

// dense evaluation of the sparse-episodic posterior: K over the dictionary,
// band rows (1, -gamma) per episode, everything solved with plain LDLT
struct DensePosterior {
  std::vector<Point> dict;
  std::vector<double> rewards;
  std::vector<std::pair<int, int>> blocks;  // start, length

  QEstimate q(const Point& p, const KernelSpec& spec, const GPHyper& hy) const {
    const auto n = static_cast<Eigen::Index>(dict.size());
    std::size_t rows = 0;
    for (const auto& b : blocks) rows += static_cast<std::size_t>(b.second - 1);
    double self = joint_kernel(p, p, spec);
    if (rows == 0) return {0.0, self};

    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) K(i, j) = joint_kernel(dict[i], dict[j], spec);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), n);
    Eigen::VectorXd r(static_cast<Eigen::Index>(rows));
    Eigen::Index row = 0;
    std::size_t at = 0;
    for (const auto& b : blocks)
      for (int t = 0; t + 1 < b.second; ++t, ++row) {
        H(row, b.first + t) = 1.0;
        H(row, b.first + t + 1) = -hy.gamma;
        r(row) = rewards[at++];
      }
    Eigen::MatrixXd G = H * K * H.transpose() + hy.sigma2 * (H * H.transpose());
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i)
      k(i) = joint_kernel(p, dict[static_cast<std::size_t>(i)], spec);
    Eigen::VectorXd hk = H * k;
    QEstimate out;
    out.mean = hk.dot(G.ldlt().solve(r));
    out.variance = std::max(0.0, self - hk.dot(G.ldlt().solve(hk)));
    return out;
  }
};

// small synthetic domain for the entropy examples: one scored slot, entities
// listing its observed values in order
DomainModel entropy_domain(const std::vector<std::string>& observed,
                           std::vector<std::string> declared) {
  DomainOntology ont;
  ont.domain = "tiny";
  SlotSpec name;
  name.name = "id";
  name.cls = SlotClass::Name;
  SlotSpec s;
  s.name = "s";
  s.cls = SlotClass::Requestable;
  s.values = std::move(declared);
  SlotSpec p;
  p.name = "p";
  p.cls = SlotClass::Informable;
  p.values = {"x"};
  Database db;
  db.domain = "tiny";
  for (std::size_t i = 0; i < observed.size(); ++i) {
    Entity e;
    e["id"] = "e" + std::to_string(i);
    e["s"] = observed[i];
    e["p"] = "x";
    name.values.push_back(e["id"]);
    db.entities.push_back(std::move(e));
  }
  ont.slots = {name, s, p};
  return make_domain_model(std::move(ont), std::move(db));
}

double reward_of(const std::vector<ResultRow>& rows, const std::string& strategy,
                 const std::string& domain, int ck, std::uint64_t seed) {
  for (const auto& r : rows)
    if (r.strategy == strategy && r.domain == domain && r.train_dialogues == ck &&
        r.seed == seed)
      return r.stats.reward.mean;
  throw std::runtime_error("missing result row " + strategy + "/" + domain + "/ck" +
                           std::to_string(ck) + "/seed" + std::to_string(seed));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// generic policies trained once on pooled SFR+SFH dialogues, shared by the
// ordering and adaptation criteria
struct GenericBank {
  fs::path dir;
  std::vector<ResultRow> rows;  // GEN rows at checkpoint 400, 500 evals/domain
};

const GenericBank& generic_bank() {
  static GenericBank bank = [] {
    GenericBank b;
    b.dir = work_dir("generic");
    ExperimentConfig cfg;
    cfg.domains = {"SFR", "SFH"};
    cfg.strategies = {"GEN"};
    cfg.checkpoints = {400};
    cfg.eval_dialogues = 500;
    cfg.seeds = ten_seeds();
    cfg.hyper = policy_hyper();
    cfg.goal_weight = kGoalWeight;
    b.rows = run_train(cfg, b.dir.string());
    return b;
  }();
  return bank;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. incremental posterior against the dense transcription
bool criterion1() {
  bool ok = true;
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> reward(-3.0, 21.0);
  const double sigmas[] = {0.1, 0.5, 1.0, 2.0};
  const double gammas[] = {0.9, 0.95, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    bool pooled = trial % 2 == 1;
    std::vector<const DomainModel*> doms =
        pooled ? std::vector<const DomainModel*>{&model("SFR"), &model("SFH")}
               : std::vector<const DomainModel*>{&model("SFR")};
    KernelSpec spec = make_kernel_spec(doms);
    GPHyper hy;
    hy.sigma2 = sigmas[rng() % 4];
    hy.gamma = gammas[rng() % 3];
    GPPolicy policy(pooled ? "SFR+SFH" : "SFR", spec, hy);
    DensePosterior dense;

    int episodes = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < episodes && dense.dict.size() + 6 <= 25; ++e) {
      int len = 2 + static_cast<int>(rng() % 5);
      bool anchored = rng() % 2 == 0;
      std::vector<Point> pts;
      const DomainModel& m = *doms[rng() % doms.size()];
      for (int t = 0; t < len - (anchored ? 1 : 0); ++t) pts.push_back(random_point(m, rng));
      if (anchored)
        pts.push_back(Point{terminal_features(m.ontology.domain),
                            {SummaryKind::Terminal, ""},
                            m.ontology.domain});
      std::vector<double> rs;
      for (int t = 0; t + 1 < len; ++t) rs.push_back(reward(rng));
      dense.blocks.emplace_back(static_cast<int>(dense.dict.size()), len);
      dense.dict.insert(dense.dict.end(), pts.begin(), pts.end());
      dense.rewards.insert(dense.rewards.end(), rs.begin(), rs.end());
      policy.ingest_episode(pts, rs);
    }
    if (policy.dictionary_size() != dense.dict.size()) {
      expect(false, "sparsifier interfered below the cap", ok);
      break;
    }
    for (int probe = 0; probe < 3; ++probe) {
      Point p = random_point(*doms[rng() % doms.size()], rng);
      QEstimate inc = policy.q_posterior(p);
      QEstimate ref = dense.q(p, spec, hy);
      worst = std::max({worst, std::abs(inc.mean - ref.mean),
                        std::abs(inc.variance - ref.variance)});
    }
  }
  double secs = elapsed_s(t0);
  std::fprintf(stderr, "  posterior worst deviation %.3e, %.2f s\n", worst, secs);
  expect(worst <= 1e-8, "posterior deviates from dense reference beyond 1e-8", ok);
  expect(secs < 10.0, "posterior oracle runtime exceeded 10 s", ok);
  return ok;
}

// 2. random Gram matrices stay symmetric and positive semidefinite
bool criterion2() {
  bool ok = true;
  std::mt19937_64 rng(2002);
  const char* names[] = {"SFR", "SFH", "L6", "L11"};
  double min_eig = 0.0;
  for (int trial = 0; trial < 200 && ok; ++trial) {
    bool mixed = trial % 2 == 1;
    std::vector<const DomainModel*> doms;
    if (mixed) {
      doms.push_back(&model(names[trial % 4]));
      doms.push_back(&model(names[(trial + 1) % 4]));
    } else {
      doms.push_back(&model(names[trial % 4]));
    }
    KernelSpec spec = make_kernel_spec(doms, mixed ? "entropy" : "auto");
    std::size_t n = 2 + rng() % 29;
    std::vector<Point> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point(*doms[rng() % doms.size()], rng));

    Eigen::MatrixXd K(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double kij = joint_kernel(pts[i], pts[j], spec);
        K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kij;
        if (j < i)
          expect(kij == K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)),
                 "kernel asymmetry", ok);
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  std::fprintf(stderr, "  smallest Gram eigenvalue %.3e\n", min_eig);
  expect(min_eig >= -1e-9, "Gram matrix indefinite beyond tolerance", ok);
  return ok;
}

// 3. committee combination formula
bool criterion3() {
  bool ok = true;
  QEstimate qa = bcm_combine({{1.0, 0.5}, {3.0, 0.5}}, 1.0);
  expect(std::abs(qa.mean - 8.0 / 3.0) <= 1e-12, "worked example mean 8/3", ok);
  expect(std::abs(qa.variance - 1.0 / 3.0) <= 1e-12, "worked example variance 1/3", ok);
  QEstimate qb = bcm_combine({{1.0, 1.0}, {3.0, 1.0}}, 1.0);
  expect(std::abs(qb.mean - 4.0) <= 1e-12, "worked example mean 4", ok);
  expect(std::abs(qb.variance - 1.0) <= 1e-12, "worked example variance 1", ok);

  QEstimate single{0.7, 0.3};
  QEstimate id = bcm_combine({single}, 42.0);
  expect(id.mean == 0.7 && id.variance == 0.3, "single-member identity", ok);

  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> mu(-5.0, 5.0);
  std::uniform_real_distribution<double> var(0.05, 3.0);
  std::uniform_real_distribution<double> ks(0.1, 5.0);
  std::uint64_t fallbacks = 0, expected_fallbacks = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t m = 2 + rng() % 4;
    std::vector<QEstimate> est;
    double prec = 0.0, wmean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      est.push_back({mu(rng), var(rng)});
      double v = std::max(est.back().variance, 1e-8);
      prec += 1.0 / v;
      wmean += est.back().mean / v;
    }
    double k_star = ks(rng);
    double corrected = prec - (static_cast<double>(m) - 1.0) / k_star;
    double ref_var, ref_mean;
    if (corrected > 0.0) {
      ref_var = 1.0 / corrected;
    } else {
      ++expected_fallbacks;
      ref_var = 1.0 / prec;
    }
    ref_mean = ref_var * wmean;
    QEstimate got = bcm_combine(est, k_star, &fallbacks);
    worst = std::max({worst, std::abs(got.mean - ref_mean), std::abs(got.variance - ref_var)});
  }
  std::fprintf(stderr, "  bcm worst deviation %.3e, %llu fallbacks\n", worst,
               static_cast<unsigned long long>(fallbacks));
  expect(worst <= 1e-10, "bcm deviates from direct formula", ok);
  expect(fallbacks == expected_fallbacks, "fallback count mismatch", ok);
  expect(expected_fallbacks > 0, "draws never exercised the fallback", ok);
  return ok;
}

// 4. normalized entropy examples and properties
bool criterion4() {
  bool ok = true;
  DomainModel even = entropy_domain({"a", "a", "b", "b"}, {"a", "b"});
  expect(std::abs(normalized_entropy(even.ontology, even.db, "s") - std::log(2.0) / 2.0) <=
             1e-12,
         "half/half example", ok);
  DomainModel skew = entropy_domain({"a", "a", "a", "b"}, {"a", "b"});
  double want = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25)) / 2.0;
  expect(std::abs(normalized_entropy(skew.ontology, skew.db, "s") - want) <= 1e-12,
         "3/4 example", ok);
  expect(std::abs(want - 0.2811675723094042) <= 1e-12, "3/4 reference constant", ok);
  DomainModel flat = entropy_domain({"a", "a", "a"}, {"a", "b"});
  expect(normalized_entropy(flat.ontology, flat.db, "s") == 0.0, "single-value example", ok);

  std::mt19937_64 rng(4004);
  for (int trial = 0; trial < 100 && ok; ++trial) {
    std::size_t card = 2 + rng() % 5;
    std::vector<std::string> declared;
    for (std::size_t v = 0; v < card; ++v) declared.push_back("v" + std::to_string(v));
    std::size_t n = 1 + rng() % 40;
    std::vector<std::string> observed;
    for (std::size_t i = 0; i < n; ++i) observed.push_back(declared[rng() % card]);
    DomainModel m = entropy_domain(observed, declared);
    double h = normalized_entropy(m.ontology, m.db, "s");
    expect(h >= 0.0, "entropy negative", ok);
    expect(h <= std::log(static_cast<double>(card)) / static_cast<double>(card) + 1e-12,
           "entropy above ln|V|/|V|", ok);

    std::shuffle(observed.begin(), observed.end(), rng);
    DomainModel shuffled = entropy_domain(observed, declared);
    expect(normalized_entropy(shuffled.ontology, shuffled.db, "s") == h,
           "entropy changed under entity permutation", ok);
  }
  return ok;
}

// 5. reward-distribution weight properties
bool criterion5() {
  bool ok = true;
  std::mt19937_64 rng(5005);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    std::size_t n = 1 + rng() % 6;
    EpisodeAttribution attr;
    attr.avg_ratio.resize(n);
    for (auto& r : attr.avg_ratio) r = u(rng);

    auto naive = distribute(RewardStrategy::Naive, attr, 0);
    for (double w : naive) expect(w == 1.0, "naive weight not 1", ok);

    auto winner = distribute(RewardStrategy::Winner, attr, 0);
    std::size_t best = static_cast<std::size_t>(
        std::max_element(attr.avg_ratio.begin(), attr.avg_ratio.end()) -
        attr.avg_ratio.begin());
    for (std::size_t i = 0; i < n; ++i)
      expect(winner[i] == (i == best ? 1.0 : 0.0), "winner weights not argmax one-hot", ok);

    auto scaled = distribute(RewardStrategy::Scaled, attr, 0);
    bool any_pos = false;
    for (double r : attr.avg_ratio) any_pos = any_pos || r > 0.0;
    double sum = 0.0;
    for (double w : scaled) {
      expect(w >= 0.0, "scaled weight negative", ok);
      sum += w;
    }
    if (any_pos) expect(std::abs(sum - 1.0) <= 1e-9, "scaled weights do not sum to 1", ok);

    int home = static_cast<int>(rng() % n);
    auto homed = distribute(RewardStrategy::Home, attr, home);
    for (std::size_t i = 0; i < n; ++i)
      expect(homed[i] == (static_cast<int>(i) == home ? 1.0 : 0.0),
             "home weights not one-hot", ok);
  }
  return ok;
}

// 6. oracle success and corruption frequency
bool criterion6() {
  bool ok = true;
  for (const auto& name : builtin_domain_names()) {
    int successes = 0;
    for (int i = 0; i < 100; ++i) {
      std::mt19937_64 rng(mix_seed(6006, {tag64(name), static_cast<std::uint64_t>(i)}));
      OracleActor actor;
      SimulatedUser user(model(name), sample_goal(model(name), rng));
      Episode ep = run_dialogue(actor, user, model(name), DMConfig{}, ErrorModel{}, rng, false);
      successes += ep.success ? 1 : 0;
    }
    std::fprintf(stderr, "  oracle %s: %d/100\n", name.c_str(), successes);
    expect(successes == 100, "oracle policy failed a dialogue", ok);
  }

  std::mt19937_64 rng(6007);
  const DomainModel& m = model("SFR");
  const auto& req = m.ordering.of_class(SlotClass::Requestable);
  ErrorModel em;
  int confused = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto& rs = req[rng() % req.size()];
    const auto& values = m.ontology.at(rs.slot).values;
    DialogueAct truth{ActType::Inform, rs.slot, values[rng() % values.size()], {}};
    NBestInput obs = corrupt_act(truth, m, em, rng);
    obs.validate();
    if (!(obs.hypotheses.front().act == truth)) ++confused;
  }
  double freq = confused / 10000.0;
  std::fprintf(stderr, "  corruption frequency %.4f\n", freq);
  expect(freq >= 0.14 && freq <= 0.16, "rank-1 corruption frequency outside 0.15 +/- 0.01", ok);
  return ok;
}

// 7. pooled generic training beats separate in-domain training
bool criterion7() {
  bool ok = true;
  auto t0 = std::chrono::steady_clock::now();
  const GenericBank& bank = generic_bank();

  ExperimentConfig cfg;
  cfg.domains = {"SFR", "SFH"};
  cfg.strategies = {"INDOM"};
  cfg.checkpoints = {200};
  cfg.eval_dialogues = 500;
  cfg.seeds = ten_seeds();
  cfg.hyper = policy_hyper();
  cfg.goal_weight = kGoalWeight;
  auto indom = run_train(cfg, work_dir("c7_indom").string());

  for (const auto& d : cfg.domains) {
    int wins = 0;
    for (std::uint64_t s : cfg.seeds) {
      double g = reward_of(bank.rows, "GEN", d, 400, s);
      double i = reward_of(indom, "INDOM", d, 200, s);
      if (g > i) ++wins;
    }
    std::fprintf(stderr, "  %s: generic wins %d/10\n", d.c_str(), wins);
    expect(wins >= 7, "generic policy won fewer than 7/10 paired seeds", ok);
  }
  double secs = elapsed_s(t0);
  std::fprintf(stderr, "  %.1f s\n", secs);
  expect(secs < 900.0, "runtime exceeded 15 min", ok);
  return ok;
}

// 8. generic prior helps adaptation; an unadapted policy equals the generic
bool criterion8() {
  bool ok = true;
  auto t0 = std::chrono::steady_clock::now();
  const GenericBank& bank = generic_bank();

  ExperimentConfig cfg;
  cfg.domains = {"SFR", "SFH"};
  cfg.domain = "L6";
  cfg.checkpoints = {0, 200};
  cfg.eval_dialogues = 500;
  cfg.hyper = policy_hyper();

  int wins = 0;
  bool exact = true;
  for (std::uint64_t s : ten_seeds()) {
    cfg.seeds = {s};
    cfg.snapshot = (bank.dir / snapshot_filename("GEN", "SFR+SFH", 400, s)).string();
    auto rows = run_adapt(cfg, work_dir("c8_seed" + std::to_string(s)).string());
    if (reward_of(rows, "PRIOR-ADAPT", "L6", 200, s) >
        reward_of(rows, "NO-PRIOR", "L6", 200, s))
      ++wins;

    // the checkpoint-0 arm must reproduce the generic policy's own greedy
    // evaluation on the new domain, bit for bit
    std::ifstream in(cfg.snapshot);
    nlohmann::json js;
    in >> js;
    std::shared_ptr<GPPolicy> generic = GPPolicy::restore(js);
    std::vector<SlotMap> extra;
    for (const auto& src : cfg.domains) {
      KernelSpec pair_spec = make_kernel_spec({&model(src), &model("L6")}, cfg.kernel_mode);
      for (auto& mp : pair_spec.maps) extra.push_back(std::move(mp));
    }
    generic->extend_maps(extra);
    EvalSummary direct =
        evaluate_policy(*generic, model("L6"), cfg.eval_dialogues, s, cfg.dm, cfg.error);
    exact = exact && direct.reward.mean == reward_of(rows, "PRIOR-ADAPT", "L6", 0, s);
  }
  std::fprintf(stderr, "  prior-adapt wins %d/10, checkpoint-0 exact: %s\n", wins,
               exact ? "yes" : "no");
  expect(wins >= 8, "prior adaptation won fewer than 8/10 paired seeds", ok);
  expect(exact, "checkpoint-0 evaluation differs from the generic policy", ok);
  double secs = elapsed_s(t0);
  std::fprintf(stderr, "  %.1f s\n", secs);
  expect(secs < 900.0, "runtime exceeded 15 min", ok);
  return ok;
}

// 9. committee with home-domain rewards matches or beats in-domain training
bool criterion9() {
  bool ok = true;
  auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig mc;
  mc.domains = {"SFR", "SFH", "L6"};
  mc.strategies = {"MBCM"};
  mc.checkpoints = {450};
  mc.eval_dialogues = 300;
  mc.seeds = ten_seeds();
  mc.hyper = committee_hyper();
  mc.goal_weight = kGoalWeight;
  auto mrows = run_multiagent(mc, work_dir("c9_mbcm").string());

  ExperimentConfig ic;
  ic.domains = mc.domains;
  ic.strategies = {"INDOM"};
  ic.checkpoints = {150};
  ic.eval_dialogues = 300;
  ic.seeds = ten_seeds();
  ic.hyper = committee_hyper();
  ic.goal_weight = kGoalWeight;
  auto irows = run_train(ic, work_dir("c9_indom").string());

  for (const auto& d : mc.domains) {
    int wins = 0;
    for (std::uint64_t s : mc.seeds)
      if (reward_of(mrows, "MBCM", d, 450, s) >= reward_of(irows, "INDOM", d, 150, s)) ++wins;
    std::fprintf(stderr, "  %s: committee at least as good in %d/10\n", d.c_str(), wins);
    expect(wins >= 7, "committee matched in-domain training in fewer than 7/10 seeds", ok);
  }
  double secs = elapsed_s(t0);
  std::fprintf(stderr, "  %.1f s\n", secs);
  expect(secs < 1200.0, "runtime exceeded 20 min", ok);
  return ok;
}

// 10. reward-distribution strategies cluster; winner-takes-all lags but beats
// an untrained policy
bool criterion10() {
  bool ok = true;
  auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig cfg;
  cfg.domains = {"SFR", "SFH", "L11"};
  cfg.strategies = {"MBCM", "NAIV", "WINN", "SCALE"};
  cfg.checkpoints = {450};
  cfg.eval_dialogues = 300;
  cfg.seeds = {1, 2};
  cfg.hyper = committee_hyper();
  cfg.goal_weight = kGoalWeight;
  auto rows = run_multiagent(cfg, work_dir("c10").string());

  std::map<std::string, double> final;
  for (const auto& strat : cfg.strategies) {
    double sum = 0.0;
    int count = 0;
    for (const auto& d : cfg.domains)
      for (std::uint64_t s : cfg.seeds) {
        sum += reward_of(rows, strat, d, 450, s);
        ++count;
      }
    final[strat] = sum / count;
    std::fprintf(stderr, "  %s: %.2f\n", strat.c_str(), final[strat]);
  }

  double baseline = 0.0;
  int bcount = 0;
  for (const auto& d : cfg.domains) {
    GPPolicy untrained(d, make_kernel_spec({&model(d)}), cfg.hyper);
    auto factory = [&untrained] {
      return std::unique_ptr<DialogueActor>(new GPActor(untrained));
    };
    for (std::uint64_t s : cfg.seeds) {
      auto evals = evaluate_dialogues(factory, model(d), cfg.eval_dialogues, s, cfg.dm,
                                      cfg.error, true);
      for (const auto& e : evals) {
        baseline += e.reward;
        ++bcount;
      }
    }
  }
  baseline /= bcount;
  std::fprintf(stderr, "  untrained baseline: %.2f\n", baseline);

  bool clustered = std::abs(final["NAIV"] - final["SCALE"]) <= 1.5 &&
                   std::abs(final["NAIV"] - final["MBCM"]) <= 1.5 &&
                   std::abs(final["SCALE"] - final["MBCM"]) <= 1.5;
  expect(clustered || final["SCALE"] >= final["WINN"],
         "strategies neither clustered nor ordered with SCALE >= WINN", ok);
  expect(final["WINN"] >= baseline + 5.0,
         "winner-takes-all does not beat the untrained baseline by 5", ok);
  std::fprintf(stderr, "  %.1f s\n", elapsed_s(t0));
  return ok;
}

// 11. extending a trained committee to an unseen domain
bool criterion11() {
  bool ok = true;
  auto t0 = std::chrono::steady_clock::now();
  GPHyper hy = committee_hyper();
  DMConfig dm;
  ErrorModel em;
  const int evals = 300;

  PolicyCommittee committee = PolicyCommittee::fresh(
      {&model("SFR"), &model("SFH")}, hy, {&model("L11")}, 1.0, 0.1);
  CommitteeActor pretrain(committee, RewardStrategy::Home);
  for (int i = 0; i < 300; ++i) {
    const std::string d = i % 2 == 0 ? "SFR" : "SFH";
    train_dialogue(pretrain, model(d), dm, em, train_stream_seed(11, d, i / 2));
  }

  EvalSummary l11_before = evaluate_committee(committee, model("L11"), evals, 1, dm, em);
  EvalSummary sfr_before = evaluate_committee(committee, model("SFR"), evals, 1, dm, em);
  expect(l11_before.reward.mean < 0.0, "unseen domain scored at or above 0 before adaptation",
         ok);

  CommitteeActor adapt(committee, RewardStrategy::Scaled);
  for (int i = 0; i < 150; ++i)
    train_dialogue(adapt, model("L11"), dm, em, train_stream_seed(12, "L11", i));

  EvalSummary l11_after = evaluate_committee(committee, model("L11"), evals, 1, dm, em);
  EvalSummary sfr_after = evaluate_committee(committee, model("SFR"), evals, 1, dm, em);
  std::fprintf(stderr,
               "  L11 %.2f -> %.2f, SFR %.2f (ci %.2f) -> %.2f\n",
               l11_before.reward.mean, l11_after.reward.mean, sfr_before.reward.mean,
               sfr_before.reward.ci95, sfr_after.reward.mean);
  expect(l11_after.reward.mean - l11_before.reward.mean >= 8.0,
         "adaptation improved the new domain by less than 8", ok);
  expect(sfr_after.reward.mean >= sfr_before.reward.mean - sfr_before.reward.ci95,
         "first domain degraded beyond its confidence half-width", ok);
  std::fprintf(stderr, "  %.1f s\n", elapsed_s(t0));
  return ok;
}

// 12. persistence: posterior survives a snapshot, pipelines are byte-stable
bool criterion12() {
  bool ok = true;
  const DomainModel& m = model("SFR");
  GPPolicy policy("SFR", make_kernel_spec({&m}), policy_hyper());
  GPActor actor(policy);
  DMConfig dm;
  ErrorModel em;
  for (int i = 0; i < 25; ++i)
    train_dialogue(actor, m, dm, em, train_stream_seed(121, "SFR", i));

  std::shared_ptr<GPPolicy> restored = GPPolicy::restore(policy.snapshot());
  std::mt19937_64 rng(12012);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    Point p = random_point(m, rng);
    QEstimate a = policy.q_posterior(p);
    QEstimate b = restored->q_posterior(p);
    worst = std::max({worst, std::abs(a.mean - b.mean), std::abs(a.variance - b.variance)});
  }
  std::fprintf(stderr, "  snapshot posterior deviation %.3e\n", worst);
  expect(worst <= 1e-12, "posterior changed across save/load", ok);

  ExperimentConfig cfg;
  cfg.domains = {"SFR", "SFH"};
  cfg.strategies = {"GEN", "INDOM"};
  cfg.checkpoints = {0, 3};
  cfg.eval_dialogues = 5;
  cfg.seeds = {1, 2};
  cfg.hyper = policy_hyper();
  fs::path a = work_dir("c12_a");
  fs::path b = work_dir("c12_b");
  run_train(cfg, a.string());
  run_train(cfg, b.string());
  expect(slurp(a / "results.csv") == slurp(b / "results.csv"),
         "training results differ between identical runs", ok);
  expect(slurp(a / "train_curve_GEN.csv") == slurp(b / "train_curve_GEN.csv"),
         "generic training curves differ between identical runs", ok);
  expect(slurp(a / "train_curve_INDOM.csv") == slurp(b / "train_curve_INDOM.csv"),
         "in-domain training curves differ between identical runs", ok);

  ExperimentConfig ma;
  ma.domains = {"SFR"};
  ma.member_domains = {"SFR", "SFH"};
  ma.strategies = {"SCALE"};
  ma.checkpoints = {2};
  ma.eval_dialogues = 2;
  ma.seeds = {1};
  ma.hyper = policy_hyper();
  fs::path c = work_dir("c12_c");
  fs::path d = work_dir("c12_d");
  run_multiagent(ma, c.string());
  run_multiagent(ma, d.string());
  expect(slurp(c / "results.csv") == slurp(d / "results.csv"),
         "committee results differ between identical runs", ok);
  expect(slurp(c / "attribution.jsonl") == slurp(d / "attribution.jsonl"),
         "attribution logs differ between identical runs", ok);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  struct Entry {
    int n;
    bool (*fn)();
  };
  const Entry table[] = {{1, criterion1},  {2, criterion2},  {3, criterion3},
                         {4, criterion4},  {5, criterion5},  {6, criterion6},
                         {7, criterion7},  {8, criterion8},  {9, criterion9},
                         {10, criterion10}, {11, criterion11}, {12, criterion12}};
  bool all_ok = true;
  for (const auto& e : table) {
    if (!wanted.empty() && !wanted.count(e.n)) continue;
    bool ok = false;
    try {
      ok = e.fn();
    } catch (const std::exception& ex) {
      std::fprintf(stderr, "  criterion %d threw: %s\n", e.n, ex.what());
    }
    std::printf("criterion %d: %s\n", e.n, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
