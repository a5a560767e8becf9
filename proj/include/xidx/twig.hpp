#pragma once

// Branching path evaluation. Every pattern node is answered as a simple
// root-to-node path through the summary (validated when the summary is
// inexact); the pattern edges are then enforced with structural joins.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "xidx/path_query.hpp"
#include "xidx/structural_join.hpp"
#include "xidx/summary.hpp"
#include "xidx/xml.hpp"

namespace xidx {

namespace detail {

struct PatternNode {
  Axis axis = Axis::child;  // relation to the parent pattern node
  PathQuery rootPath;       // predicate-free path from the document node
  std::vector<const Predicate*> attributeTests;
  std::vector<std::size_t> required;  // children that must be matched
};

class TwigPlan {
 public:
  explicit TwigPlan(const PathQuery& q) {
    PathQuery prefix;
    prefix.anchored = q.anchored;
    for (const Step& step : q.steps) {
      prefix.steps.push_back({step.axis, step.test, {}});
      spine_.push_back(add_node(step, prefix));
    }
  }

  const std::vector<PatternNode>& nodes() const noexcept { return nodes_; }
  const std::vector<std::size_t>& spine() const noexcept { return spine_; }

 private:
  std::size_t add_node(const Step& step, const PathQuery& root_path) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({step.axis, root_path, {}, {}});
    for (const Predicate& p : step.predicates) {
      if (p.kind == Predicate::Kind::attribute_equals) {
        nodes_[id].attributeTests.push_back(&p);
        continue;
      }
      // A branch is a chain; each link requires the next.
      PathQuery path = root_path;
      std::size_t owner = id;
      for (const Step& bs : p.branch.steps) {
        path.steps.push_back({bs.axis, bs.test, {}});
        const std::size_t child = add_node(bs, path);
        nodes_[owner].required.push_back(child);
        owner = child;
      }
    }
    return id;
  }

  std::vector<PatternNode> nodes_;
  std::vector<std::size_t> spine_;
};

inline std::vector<NodeId> semi_join(const RegionMap& regions, Axis axis,
                                     const std::vector<NodeId>& upper,
                                     const std::vector<NodeId>& lower, bool keep_upper) {
  const NodeList a = make_node_list(regions, upper);
  const NodeList d = make_node_list(regions, lower);
  const auto pairs = axis == Axis::child ? parent_child_join(a, d) : structural_join(a, d);
  std::vector<NodeId> out;
  out.reserve(pairs.size());
  for (const JoinPair& p : pairs) out.push_back(keep_upper ? p.ancestor : p.descendant);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

inline std::vector<NodeId> eval_twig(const Document& doc, const SummaryGraph& idx,
                                     const PathQuery& q, const RegionMap& regions) {
  if (!q.has_predicates()) return eval_simple_path(doc, idx, q);

  const detail::TwigPlan plan(q);
  const auto& nodes = plan.nodes();
  std::vector<std::vector<NodeId>> matched(nodes.size());

  // Children always have larger ids than their owner, so a reverse sweep
  // sees every required child before its owner.
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const detail::PatternNode& pn = nodes[i];
    std::vector<NodeId> set = eval_simple_path(doc, idx, pn.rootPath);
    if (!pn.attributeTests.empty()) {
      std::erase_if(set, [&](NodeId v) {
        return std::any_of(pn.attributeTests.begin(), pn.attributeTests.end(),
                           [&](const Predicate* p) {
                             return !detail::attribute_equals(doc, v, p->attribute, p->value);
                           });
      });
    }
    for (std::size_t c : pn.required) {
      if (set.empty()) break;
      set = detail::semi_join(regions, nodes[c].axis, set, matched[c], true);
    }
    matched[i] = std::move(set);
  }

  const auto& spine = plan.spine();
  std::vector<NodeId> current = matched[spine.front()];
  for (std::size_t i = 1; i < spine.size() && !current.empty(); ++i) {
    current = detail::semi_join(regions, nodes[spine[i]].axis, current, matched[spine[i]], false);
  }
  return current;
}

inline std::vector<NodeId> eval_twig(const Document& doc, const SummaryGraph& idx,
                                     const PathQuery& q) {
  return eval_twig(doc, idx, q, assign_regions(doc));
}

}  // namespace xidx
