#pragma once

// Deterministic corpus generators. All randomness comes from a seeded
// mt19937_64 reduced with plain modulo, so output is identical across
// standard libraries for the same parameters.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "xidx/error.hpp"
#include "xidx/path_query.hpp"
#include "xidx/warehouse.hpp"
#include "xidx/xml.hpp"

namespace xidx::gen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform-enough draw in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  bool chance(std::uint32_t percent) { return below(100) < percent; }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 engine_;
};

struct TreeGenParams {
  std::uint32_t nodeCount = 100;
  std::uint32_t maxDepth = 6;  // deepest level; the root is level 0
  std::uint32_t maxFanout = 4;
  std::uint32_t labelAlphabetSize = 4;
  std::uint64_t seed = 1;
};

inline std::string alphabet_label(std::size_t i) {
  if (i < 26) return std::string(1, static_cast<char>('a' + i));
  return "n" + std::to_string(i);
}

// Exactly nodeCount element nodes, no attributes or text.
inline Document generate_tree(const TreeGenParams& p, DocId docId = 0) {
  if (p.nodeCount == 0 || p.maxFanout == 0 || p.labelAlphabetSize == 0) {
    throw Error(ErrorCode::ParamOutOfRange, "nodeCount, maxFanout and labelAlphabetSize must be positive");
  }
  // Capacity of a complete tree with these bounds, saturating.
  std::uint64_t capacity = 0;
  std::uint64_t level_size = 1;
  for (std::uint32_t d = 0; d <= p.maxDepth && capacity < p.nodeCount; ++d) {
    capacity += level_size;
    level_size = std::min<std::uint64_t>(level_size * p.maxFanout, 1ULL << 40);
  }
  if (capacity < p.nodeCount) {
    throw Error(ErrorCode::ParamOutOfRange, "maxDepth/maxFanout cannot hold " +
                                                std::to_string(p.nodeCount) + " nodes");
  }

  Rng rng(p.seed);
  DocumentBuilder b;
  struct Open {
    DocumentBuilder::Handle handle;
    std::uint32_t depth;
    std::uint32_t children;
  };
  std::vector<Open> open;
  const auto root = b.add_root(alphabet_label(rng.below(p.labelAlphabetSize)));
  if (p.maxDepth > 0) open.push_back({root, 0, 0});
  for (std::uint32_t made = 1; made < p.nodeCount; ++made) {
    // Half the time extend the newest open node to get some depth.
    const std::size_t i = rng.chance(50) ? open.size() - 1 : rng.below(open.size());
    Open& parent = open[i];
    const auto h = b.add_element(parent.handle, alphabet_label(rng.below(p.labelAlphabetSize)));
    const std::uint32_t depth = parent.depth + 1;
    if (++parent.children == p.maxFanout) {
      open[i] = open.back();
      open.pop_back();
    }
    if (depth < p.maxDepth) open.push_back({h, depth, 0});
  }
  return b.build(docId);
}

struct StarGenParams {
  std::uint32_t factCount = 1000;
  std::uint32_t dimensionCount = 3;
  std::uint32_t levelsPerDimension = 3;
  std::uint32_t membersPerLevel = 8;
  std::uint32_t attributesPerLevel = 2;
  std::uint32_t measureCount = 2;
  std::uint64_t seed = 1;
};

struct StarModel {
  wh::DimensionSet dims;
  wh::FactTable facts;
};

inline std::string dimension_name(std::size_t i) { return "d" + std::to_string(i); }
inline std::string level_name(std::size_t i) { return "L" + std::to_string(i); }
inline std::string measure_name(std::size_t i) { return "m" + std::to_string(i); }

// Level L0 is the leaf level; each member's parent is drawn from the next
// level up. Attribute a0 is numeric, the others categorical. Even-numbered
// measures are integers, odd-numbered ones carry two decimals.
inline StarModel generate_star_model(const StarGenParams& p) {
  if (p.levelsPerDimension == 0 || p.membersPerLevel == 0 || p.dimensionCount == 0) {
    throw Error(ErrorCode::ParamOutOfRange,
                "dimensionCount, levelsPerDimension and membersPerLevel must be positive");
  }
  Rng rng(p.seed);
  StarModel m;
  for (std::uint32_t d = 0; d < p.dimensionCount; ++d) {
    const std::string dname = dimension_name(d);
    wh::Dimension dim(dname);
    for (std::uint32_t l = 0; l < p.levelsPerDimension; ++l) {
      for (std::uint32_t i = 0; i < p.membersPerLevel; ++i) {
        wh::DimensionMember mem;
        mem.dim = dname;
        mem.memberId = dname + "_" + level_name(l) + "_" + std::to_string(i);
        mem.levelName = level_name(l);
        if (l + 1 < p.levelsPerDimension) {
          mem.parentId = dname + "_" + level_name(l + 1) + "_" +
                         std::to_string(rng.below(p.membersPerLevel));
        }
        for (std::uint32_t a = 0; a < p.attributesPerLevel; ++a) {
          mem.attributes["a" + std::to_string(a)] =
              a == 0 ? std::to_string(rng.below(20)) : "c" + std::to_string(rng.below(5));
        }
        dim.add(std::move(mem));
      }
    }
    dim.link();
    m.dims.emplace(dname, std::move(dim));
  }
  m.facts.cells.reserve(p.factCount);
  for (std::uint32_t f = 0; f < p.factCount; ++f) {
    wh::FactCell cell;
    for (std::uint32_t d = 0; d < p.dimensionCount; ++d) {
      cell.refs[dimension_name(d)] = dimension_name(d) + "_L0_" +
                                     std::to_string(rng.below(p.membersPerLevel));
    }
    for (std::uint32_t i = 0; i < p.measureCount; ++i) {
      std::string text = std::to_string(1 + rng.below(1000));
      if (i % 2 == 1) {
        const auto cents = rng.below(100);
        text += (cents < 10 ? ".0" : ".") + std::to_string(cents);
      }
      cell.measures[measure_name(i)] = {text, *Decimal::parse(text)};
    }
    m.facts.cells.push_back(std::move(cell));
  }
  return m;
}

struct StarDocuments {
  std::string factsXml;
  std::string dimensionsXml;
};

inline StarDocuments generate_star(const StarGenParams& p) {
  const StarModel m = generate_star_model(p);
  return {wh::facts_to_xml(m.facts), wh::dimensions_to_xml(m.dims)};
}

// ---- random queries ----------------------------------------------------------

inline std::vector<NodeId> element_ids(const Document& doc) {
  std::vector<NodeId> out;
  for (const auto& n : doc.nodes) {
    if (n.kind == NodeKind::element) out.push_back(n.id);
  }
  return out;
}

inline std::vector<std::string> distinct_labels(const Document& doc) {
  std::vector<std::string> out;
  for (const auto& n : doc.nodes) {
    if (n.kind == NodeKind::element) out.push_back(n.label);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Mostly derived from a real label path, with some wildcards, '//' skips,
// and the occasional foreign label so that empty answers also occur.
inline PathQuery random_anchored_query(const Document& doc, Rng& rng) {
  const auto ids = element_ids(doc);
  const auto labels = distinct_labels(doc);
  const LabelPath lp = label_path(doc, rng.pick(ids));
  PathQuery q;
  q.anchored = true;
  bool skipping = false;
  for (std::size_t i = 0; i < lp.labels.size(); ++i) {
    const bool last = i + 1 == lp.labels.size();
    if (i > 0 && !last && rng.chance(20)) {
      skipping = true;
      continue;
    }
    Step s;
    s.axis = skipping ? Axis::descendant : Axis::child;
    if (i == 0) s.axis = Axis::child;
    skipping = false;
    s.test = rng.chance(15) ? "*" : (rng.chance(5) ? rng.pick(labels) : lp.labels[i]);
    q.steps.push_back(std::move(s));
  }
  return q;
}

// "//x/y/z" over the trailing labels of a real node; `steps` labeled steps.
inline PathQuery random_suffix_query(const Document& doc, Rng& rng, std::size_t steps) {
  const auto ids = element_ids(doc);
  const LabelPath lp = label_path(doc, rng.pick(ids));
  const std::size_t n = std::min(steps, lp.labels.size());
  PathQuery q;
  q.anchored = false;
  for (std::size_t i = lp.labels.size() - n; i < lp.labels.size(); ++i) {
    Step s;
    s.axis = q.steps.empty() ? Axis::descendant : Axis::child;
    s.test = rng.chance(10) ? "*" : lp.labels[i];
    q.steps.push_back(std::move(s));
  }
  return q;
}

// A random relative chain of 1..max_len steps over the document's labels.
inline PathQuery random_branch(const std::vector<std::string>& labels, Rng& rng,
                               std::size_t max_len) {
  PathQuery b;
  b.anchored = false;
  const std::size_t len = 1 + rng.below(max_len);
  for (std::size_t i = 0; i < len; ++i) {
    Step s;
    s.axis = rng.chance(40) ? Axis::descendant : Axis::child;
    s.test = rng.chance(10) ? "*" : rng.pick(labels);
    b.steps.push_back(std::move(s));
  }
  return b;
}

// Spine from a real label path (at most `max_depth` steps) with up to
// `max_branches` existential branch predicates.
inline PathQuery random_twig(const Document& doc, Rng& rng, std::size_t max_branches,
                             std::size_t max_depth) {
  const auto labels = distinct_labels(doc);
  PathQuery q;
  if (rng.chance(50)) {
    q = random_anchored_query(doc, rng);
    if (q.steps.size() > max_depth) q.steps.resize(max_depth);
  } else {
    q = random_suffix_query(doc, rng, 1 + rng.below(max_depth));
  }
  const std::size_t branches = 1 + rng.below(max_branches);
  for (std::size_t i = 0; i < branches; ++i) {
    Predicate p;
    p.kind = Predicate::Kind::branch;
    p.branch = random_branch(labels, rng, 2);
    if (rng.chance(20)) {
      // Nested predicate on the branch's first step.
      Predicate inner;
      inner.branch = random_branch(labels, rng, 1);
      p.branch.steps.front().predicates.push_back(std::move(inner));
    }
    q.steps[rng.below(q.steps.size())].predicates.push_back(std::move(p));
  }
  return q;
}

inline wh::AnalyticQuery random_analytic_query(const wh::DimensionSet& dims,
                                               const wh::Schema& schema, Rng& rng) {
  std::vector<wh::AttributeRef> refs;
  for (const auto& [d, levels] : schema.attributes) {
    for (const auto& [l, attrs] : levels) {
      for (const auto& a : attrs) refs.push_back({d, l, a});
    }
  }
  auto sample_value = [&](const wh::AttributeRef& r) {
    std::vector<std::string> values;
    for (const auto& m : dims.at(r.dim).members()) {
      if (m.levelName != r.level) continue;
      if (auto it = m.attributes.find(r.attr); it != m.attributes.end()) values.push_back(it->second);
    }
    return values.empty() ? std::string("0") : rng.pick(values);
  };
  static constexpr wh::CompareOp kOps[] = {wh::CompareOp::eq, wh::CompareOp::ne,
                                           wh::CompareOp::lt, wh::CompareOp::le,
                                           wh::CompareOp::gt, wh::CompareOp::ge};
  static constexpr wh::AggregateFn kFns[] = {wh::AggregateFn::count, wh::AggregateFn::sum,
                                             wh::AggregateFn::avg, wh::AggregateFn::min,
                                             wh::AggregateFn::max};
  wh::AnalyticQuery q;
  if (refs.empty()) return q;
  const std::size_t nsel = rng.below(3);
  for (std::size_t i = 0; i < nsel; ++i) {
    const auto& r = rng.pick(refs);
    q.selections.push_back({r, kOps[rng.below(6)], sample_value(r)});
  }
  const std::size_t ngroup = rng.below(3);
  for (std::size_t i = 0; i < ngroup; ++i) {
    const auto& r = rng.pick(refs);
    if (std::find(q.groupBy.begin(), q.groupBy.end(), r) == q.groupBy.end()) q.groupBy.push_back(r);
  }
  q.aggregate.fn = kFns[rng.below(5)];
  if (schema.measures.empty() || q.aggregate.fn == wh::AggregateFn::count) {
    q.aggregate.measure = "*";
    q.aggregate.fn = schema.measures.empty() ? wh::AggregateFn::count : q.aggregate.fn;
  } else {
    const std::vector<std::string> ms(schema.measures.begin(), schema.measures.end());
    q.aggregate.measure = rng.pick(ms);
  }
  return q;
}

}  // namespace xidx::gen
