#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gpdm/acts.hpp"
#include "gpdm/belief.hpp"
#include "gpdm/ontology.hpp"

namespace gpdm {

// A training or query point: belief features plus the summary action taken,
// tagged with the domain the features were produced in.
struct Point {
  std::shared_ptr<const FeatureVector> features;
  SummaryAction action;
  std::string domain;
};

// Kernel configuration: per-node-kind weights (1.0 reproduces the plain sum
// over hidden nodes) and the slot maps used for cross-domain evaluation.
// Points sharing a domain always use the identity pairing, map or not.
struct KernelSpec {
  double goal_weight = 1.0;
  double history_weight = 1.0;
  std::vector<SlotMap> maps;

  // nullptr for an unmapped pair; `flip` set when the map is stored with the
  // roles swapped relative to (dom_a, dom_b).
  const SlotMap* find_map(const std::string& dom_a, const std::string& dom_b, bool& flip) const;
  // Requestable-class slot pairing lookup in the (dom_a, dom_b) direction;
  // empty string when unmatched.
  std::string paired_slot(const std::string& dom_a, const std::string& slot,
                          const std::string& dom_b) const;
};

nlohmann::json kernel_spec_to_json(const KernelSpec& spec);
KernelSpec kernel_spec_from_json(const nlohmann::json& j);

// Builds pairwise maps between every distinct domain pair. mode: "entropy"
// forces pure rank matching, "shared" forces name-identical pairing first,
// "auto" picks shared when the pair has any same-class non-name slot name in
// common and entropy otherwise.
KernelSpec make_kernel_spec(const std::vector<const DomainModel*>& models,
                            const std::string& mode = "auto");

// Delta kernel over summary actions. Same domain: exact equality.
// Cross-domain: kinds must match; slotted kinds additionally need the slots
// paired under the spec's map, otherwise 0.
double action_kernel(const SummaryAction& a, const std::string& dom_a, const SummaryAction& b,
                     const std::string& dom_b, const KernelSpec& spec);

// Sum over paired hidden nodes of the weighted inner product, the shorter
// vector zero-padded. Unpaired nodes contribute nothing.
double belief_kernel(const FeatureVector& fa, const FeatureVector& fb, const KernelSpec& spec);

double joint_kernel(const Point& p, const Point& q, const KernelSpec& spec);

Eigen::MatrixXd gram_matrix(const std::vector<Point>& points, const KernelSpec& spec);

// Precomputed node pairing between two domain layouts: for node i of the
// first layout, `other[i]` is the matching node in the second (-1 when
// unmatched) and `weight[i]` the node-kind weight. Layouts are fixed per
// domain, so alignments are cacheable by domain pair.
struct NodeAlignment {
  std::vector<int> other;
  std::vector<double> weight;
};

NodeAlignment align_layouts(const FeatureVector& fa, const FeatureVector& fb,
                            const KernelSpec& spec);

double belief_kernel_aligned(const FeatureVector& fa, const FeatureVector& fb,
                             const NodeAlignment& align);

}  // namespace gpdm
