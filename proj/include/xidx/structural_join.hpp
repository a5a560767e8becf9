#pragma once

// Region-code access paths: a StartPos-ordered interval index with
// findDescendants/findAncestors, and stack-based structural joins.

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xidx/error.hpp"
#include "xidx/xml.hpp"

namespace xidx {

struct NodeEntry {
  RegionCode region;
  NodeId id = 0;

  friend bool operator==(const NodeEntry&, const NodeEntry&) = default;
};

// Sorted by region start, duplicate-free.
using NodeList = std::vector<NodeEntry>;

struct JoinPair {
  NodeId ancestor = 0;
  NodeId descendant = 0;

  friend bool operator==(const JoinPair&, const JoinPair&) = default;
  friend auto operator<=>(const JoinPair&, const JoinPair&) = default;
};

inline void require_same_doc(DocId a, DocId b) {
  if (a != b) {
    throw Error(ErrorCode::CrossDocument,
                "documents " + std::to_string(a) + " and " + std::to_string(b));
  }
}

inline bool is_ancestor(const RegionCode& a, const RegionCode& d) {
  require_same_doc(a.docId, d.docId);
  return a.start < d.start && d.end < a.end;
}

class IntervalIndex {
 public:
  IntervalIndex() = default;

  IntervalIndex(const Document& doc, const RegionMap& regions,
                std::optional<std::string> label = std::nullopt)
      : docId_(doc.docId), label_(std::move(label)) {
    for (const XmlNode& n : doc.nodes) {
      if (n.kind != NodeKind::element) continue;
      if (label_ && n.label != *label_) continue;
      entries_.push_back({regions[n.id], n.id});
    }
    std::sort(entries_.begin(), entries_.end(), [](const NodeEntry& x, const NodeEntry& y) {
      return x.region.start < y.region.start;
    });
  }

  DocId doc_id() const noexcept { return docId_; }
  const std::optional<std::string>& label() const noexcept { return label_; }
  const NodeList& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  // All entries with start in (a.start, a.end). Laminarity makes these
  // exactly the proper descendants of a.
  NodeList find_descendants(const RegionCode& a) const {
    require_same_doc(docId_, a.docId);
    const auto first = lower_start(a.start + 1);
    const auto last = lower_start(a.end);
    return NodeList(first, last);
  }

  // Backward scan over entries that start before d, keeping the ones that
  // close after it.
  NodeList find_ancestors(const RegionCode& d) const {
    require_same_doc(docId_, d.docId);
    NodeList out;
    for (auto it = lower_start(d.start); it != entries_.begin();) {
      --it;
      if (it->region.end > d.end) out.push_back(*it);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  NodeList::const_iterator lower_start(std::uint32_t start) const {
    return std::lower_bound(entries_.begin(), entries_.end(), start,
                            [](const NodeEntry& e, std::uint32_t s) { return e.region.start < s; });
  }

  DocId docId_ = 0;
  std::optional<std::string> label_;
  NodeList entries_;
};

inline IntervalIndex build_interval_index(const Document& doc, const RegionMap& regions,
                                          std::optional<std::string> label = std::nullopt) {
  return IntervalIndex(doc, regions, std::move(label));
}

inline NodeList make_node_list(const RegionMap& regions, const std::vector<NodeId>& ids) {
  NodeList out;
  out.reserve(ids.size());
  for (NodeId id : ids) out.push_back({regions[id], id});
  std::sort(out.begin(), out.end(), [](const NodeEntry& x, const NodeEntry& y) {
    return x.region.start < y.region.start;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace detail {

inline void require_sorted(const NodeList& list, const char* which) {
  for (std::size_t i = 1; i < list.size(); ++i) {
    if (list[i - 1].region.start >= list[i].region.start) {
      throw Error(ErrorCode::UnsortedInput,
                  std::string(which) + " list not strictly sorted by start at entry " +
                      std::to_string(i));
    }
  }
}

inline void require_one_doc(const NodeList& a, const NodeList& d) {
  const NodeEntry* ref = !a.empty() ? &a.front() : (!d.empty() ? &d.front() : nullptr);
  if (!ref) return;
  for (const auto* list : {&a, &d}) {
    for (const NodeEntry& e : *list) require_same_doc(ref->region.docId, e.region.docId);
  }
}

}  // namespace detail

// Single merge pass with a stack of open ancestor intervals. Output is
// ordered by (descendant start, ancestor start). A node present in both
// inputs is never paired with itself.
inline std::vector<JoinPair> structural_join(const NodeList& ancestors,
                                             const NodeList& descendants) {
  detail::require_sorted(ancestors, "ancestor");
  detail::require_sorted(descendants, "descendant");
  detail::require_one_doc(ancestors, descendants);

  std::vector<JoinPair> out;
  std::vector<const NodeEntry*> stack;
  std::size_t ai = 0;
  for (const NodeEntry& d : descendants) {
    // Ancestors starting strictly before d can contain it.
    while (ai < ancestors.size() && ancestors[ai].region.start < d.region.start) {
      const NodeEntry& a = ancestors[ai++];
      while (!stack.empty() && stack.back()->region.end < a.region.start) stack.pop_back();
      stack.push_back(&a);
    }
    while (!stack.empty() && stack.back()->region.end < d.region.start) stack.pop_back();
    for (const NodeEntry* a : stack) out.push_back({a->id, d.id});
  }
  return out;
}

inline std::vector<JoinPair> parent_child_join(const NodeList& ancestors,
                                               const NodeList& descendants) {
  detail::require_sorted(ancestors, "ancestor");
  detail::require_sorted(descendants, "descendant");
  detail::require_one_doc(ancestors, descendants);

  std::vector<JoinPair> out;
  std::vector<const NodeEntry*> stack;
  std::size_t ai = 0;
  for (const NodeEntry& d : descendants) {
    while (ai < ancestors.size() && ancestors[ai].region.start < d.region.start) {
      const NodeEntry& a = ancestors[ai++];
      while (!stack.empty() && stack.back()->region.end < a.region.start) stack.pop_back();
      stack.push_back(&a);
    }
    while (!stack.empty() && stack.back()->region.end < d.region.start) stack.pop_back();
    // Stack levels strictly increase, so at most the top can be the parent.
    if (!stack.empty() && stack.back()->region.level + 1 == d.region.level) {
      out.push_back({stack.back()->id, d.id});
    }
  }
  return out;
}

}  // namespace xidx
