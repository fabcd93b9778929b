#include "gpdm/kernel.hpp"

#include <algorithm>
#include <stdexcept>

namespace gpdm {
namespace {

bool slotted(SummaryKind k) {
  return k == SummaryKind::Request || k == SummaryKind::Confirm || k == SummaryKind::Select;
}

double dot_min(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t n = std::min(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

const SlotMap* KernelSpec::find_map(const std::string& dom_a, const std::string& dom_b,
                                    bool& flip) const {
  for (const auto& m : maps) {
    if (m.domain_a == dom_a && m.domain_b == dom_b) {
      flip = false;
      return &m;
    }
    if (m.domain_a == dom_b && m.domain_b == dom_a) {
      flip = true;
      return &m;
    }
  }
  return nullptr;
}

std::string KernelSpec::paired_slot(const std::string& dom_a, const std::string& slot,
                                    const std::string& dom_b) const {
  if (dom_a == dom_b) return slot;
  bool flip = false;
  const SlotMap* m = find_map(dom_a, dom_b, flip);
  if (!m) return {};
  const SlotPair* p = flip ? m->find_b(slot) : m->find_a(slot);
  if (!p || p->cls != SlotClass::Requestable) return {};
  return flip ? p->a : p->b;
}

nlohmann::json kernel_spec_to_json(const KernelSpec& spec) {
  nlohmann::json j;
  j["goal_weight"] = spec.goal_weight;
  j["history_weight"] = spec.history_weight;
  j["maps"] = nlohmann::json::array();
  for (const auto& m : spec.maps) j["maps"].push_back(slot_map_to_json(m));
  return j;
}

KernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  KernelSpec spec;
  spec.goal_weight = j.at("goal_weight").get<double>();
  spec.history_weight = j.at("history_weight").get<double>();
  if (spec.goal_weight <= 0.0 || spec.history_weight <= 0.0)
    throw std::runtime_error("kernel node weights must be positive");
  for (const auto& jm : j.at("maps")) spec.maps.push_back(slot_map_from_json(jm));
  return spec;
}

KernelSpec make_kernel_spec(const std::vector<const DomainModel*>& models,
                            const std::string& mode) {
  if (mode != "auto" && mode != "shared" && mode != "entropy")
    throw std::invalid_argument("unknown cross-kernel mode: " + mode);
  KernelSpec spec;
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t k = i + 1; k < models.size(); ++k) {
      const DomainModel& a = *models[i];
      const DomainModel& b = *models[k];
      if (a.ontology.domain == b.ontology.domain) continue;
      bool shared = mode == "shared";
      if (mode == "auto") {
        for (const auto& s : a.ontology.slots) {
          if (s.cls == SlotClass::Name) continue;
          const SlotSpec* t = b.ontology.find(s.name);
          if (t && t->cls == s.cls) {
            shared = true;
            break;
          }
        }
      }
      spec.maps.push_back(shared
                              ? match_slots_shared(a.ontology, a.ordering, b.ontology, b.ordering)
                              : match_slots(a.ontology, a.ordering, b.ontology, b.ordering));
    }
  }
  return spec;
}

double action_kernel(const SummaryAction& a, const std::string& dom_a, const SummaryAction& b,
                     const std::string& dom_b, const KernelSpec& spec) {
  if (a.kind != b.kind) return 0.0;
  if (dom_a == dom_b) return a.slot == b.slot ? 1.0 : 0.0;
  if (!slotted(a.kind)) return 1.0;
  std::string paired = spec.paired_slot(dom_a, a.slot, dom_b);
  return (!paired.empty() && paired == b.slot) ? 1.0 : 0.0;
}

NodeAlignment align_layouts(const FeatureVector& fa, const FeatureVector& fb,
                            const KernelSpec& spec) {
  NodeAlignment al;
  al.other.assign(fa.nodes.size(), -1);
  al.weight.assign(fa.nodes.size(), 1.0);
  auto find_node = [&](const std::string& slot, int kind) -> int {
    for (std::size_t i = 0; i < fb.nodes.size(); ++i)
      if (fb.nodes[i].kind == kind && fb.nodes[i].slot == slot) return static_cast<int>(i);
    return -1;
  };
  bool flip = false;
  const SlotMap* map = fa.domain == fb.domain ? nullptr : spec.find_map(fa.domain, fb.domain, flip);
  for (std::size_t i = 0; i < fa.nodes.size(); ++i) {
    const NodeVec& n = fa.nodes[i];
    al.weight[i] = n.kind == 0 ? spec.goal_weight : spec.history_weight;
    if (fa.domain == fb.domain) {
      al.other[i] = find_node(n.slot, n.kind);
    } else if (map) {
      const SlotPair* p = flip ? map->find_b(n.slot) : map->find_a(n.slot);
      if (p) al.other[i] = find_node(flip ? p->a : p->b, n.kind);
    }
  }
  return al;
}

double belief_kernel_aligned(const FeatureVector& fa, const FeatureVector& fb,
                             const NodeAlignment& align) {
  double s = 0.0;
  for (std::size_t i = 0; i < fa.nodes.size(); ++i) {
    int j = align.other[i];
    if (j < 0) continue;
    s += align.weight[i] * dot_min(fa.nodes[i].values, fb.nodes[static_cast<std::size_t>(j)].values);
  }
  return s;
}

double belief_kernel(const FeatureVector& fa, const FeatureVector& fb, const KernelSpec& spec) {
  return belief_kernel_aligned(fa, fb, align_layouts(fa, fb, spec));
}

double joint_kernel(const Point& p, const Point& q, const KernelSpec& spec) {
  double ak = action_kernel(p.action, p.domain, q.action, q.domain, spec);
  if (ak == 0.0) return 0.0;
  return ak * belief_kernel(*p.features, *q.features, spec);
}

Eigen::MatrixXd gram_matrix(const std::vector<Point>& points, const KernelSpec& spec) {
  Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      double v = joint_kernel(points[static_cast<std::size_t>(i)],
                              points[static_cast<std::size_t>(j)], spec);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

}  // namespace gpdm
