#pragma once

// Structural summaries over the element nodes of a Document. DataGuide,
// A(k)-index and 1-index share one graph representation; they differ only in
// how element nodes are grouped into extents.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xidx/error.hpp"
#include "xidx/path_query.hpp"
#include "xidx/xml.hpp"

namespace xidx {

using SummaryId = std::uint32_t;

enum class SummaryKind : std::uint8_t { dataguide, a_k, one_index };

inline std::string_view to_string(SummaryKind kind) noexcept {
  switch (kind) {
    case SummaryKind::dataguide: return "dataguide";
    case SummaryKind::a_k: return "a_k";
    case SummaryKind::one_index: return "one_index";
  }
  return "?";
}

inline SummaryKind summary_kind_from_string(std::string_view s) {
  if (s == "dataguide") return SummaryKind::dataguide;
  if (s == "a_k" || s == "ak") return SummaryKind::a_k;
  if (s == "one_index" || s == "one") return SummaryKind::one_index;
  throw Error(ErrorCode::IndexFormat, "unknown summary kind '" + std::string(s) + "'");
}

struct SummaryNode {
  SummaryId sid = 0;
  std::string label;
  std::vector<NodeId> extent;  // sorted
  std::vector<SummaryId> childSids;  // sorted

  friend bool operator==(const SummaryNode&, const SummaryNode&) = default;
};

struct SummaryGraph {
  SummaryKind kind = SummaryKind::dataguide;
  std::optional<std::uint32_t> k;
  std::vector<SummaryNode> nodes;
  std::vector<SummaryId> rootSids;
  std::string docHash;

  friend bool operator==(const SummaryGraph&, const SummaryGraph&) = default;
};

// Blocks are numbered by their smallest member node id.
struct Partition {
  std::vector<std::vector<NodeId>> blocks;
  std::vector<std::int32_t> blockOf;  // -1 for non-element nodes
  std::uint32_t steps = 0;  // refinement rounds actually applied
  bool stable = false;      // steps reached the fixpoint

  // Every block of *this is contained in some block of `coarser`.
  bool refines(const Partition& coarser) const {
    for (const auto& block : blocks) {
      const auto target = coarser.blockOf[block.front()];
      for (NodeId v : block) {
        if (coarser.blockOf[v] != target) return false;
      }
    }
    return true;
  }
};

namespace detail {

inline Partition label_partition(const Document& doc) {
  Partition p;
  p.blockOf.assign(doc.size(), -1);
  std::unordered_map<std::string_view, std::int32_t> by_label;
  for (const XmlNode& n : doc.nodes) {
    if (n.kind != NodeKind::element) continue;
    auto [it, fresh] =
        by_label.try_emplace(n.label, static_cast<std::int32_t>(p.blocks.size()));
    if (fresh) p.blocks.emplace_back();
    p.blocks[it->second].push_back(n.id);
    p.blockOf[n.id] = it->second;
  }
  return p;
}

// Splits each block by the block of the parent; the root keys on -1.
inline Partition refine_once(const Document& doc, const Partition& prev) {
  Partition next;
  next.blockOf.assign(doc.size(), -1);
  std::unordered_map<std::uint64_t, std::int32_t> by_key;
  by_key.reserve(prev.blocks.size() * 2);
  for (const XmlNode& n : doc.nodes) {
    if (n.kind != NodeKind::element) continue;
    const std::int64_t parent_block = n.parent ? prev.blockOf[*n.parent] : -1;
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(prev.blockOf[n.id])) << 32) |
        static_cast<std::uint32_t>(parent_block);
    auto [it, fresh] = by_key.try_emplace(key, static_cast<std::int32_t>(next.blocks.size()));
    if (fresh) next.blocks.emplace_back();
    next.blocks[it->second].push_back(n.id);
    next.blockOf[n.id] = it->second;
  }
  return next;
}

inline Partition bisimulation(const Document& doc, std::optional<std::uint32_t> k) {
  Partition p = label_partition(doc);
  std::uint32_t step = 0;
  for (;;) {
    if (k && step == *k) break;
    Partition next = refine_once(doc, p);
    if (next.blocks.size() == p.blocks.size()) {
      p.stable = true;
      break;
    }
    p = std::move(next);
    ++step;
  }
  p.steps = step;
  return p;
}

inline SummaryGraph graph_from_partition(const Document& doc, const Partition& p,
                                         SummaryKind kind, std::optional<std::uint32_t> k) {
  SummaryGraph g;
  g.kind = kind;
  g.k = k;
  g.docHash = doc_hash(doc);
  g.nodes.resize(p.blocks.size());
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    SummaryNode& s = g.nodes[b];
    s.sid = static_cast<SummaryId>(b);
    s.label = doc.nodes[p.blocks[b].front()].label;
    s.extent = p.blocks[b];
  }
  for (const XmlNode& n : doc.nodes) {
    if (n.kind != NodeKind::element || !n.parent) continue;
    g.nodes[p.blockOf[*n.parent]].childSids.push_back(
        static_cast<SummaryId>(p.blockOf[n.id]));
  }
  for (SummaryNode& s : g.nodes) {
    std::sort(s.childSids.begin(), s.childSids.end());
    s.childSids.erase(std::unique(s.childSids.begin(), s.childSids.end()), s.childSids.end());
  }
  g.rootSids.push_back(static_cast<SummaryId>(p.blockOf[doc.rootId]));
  return g;
}

}  // namespace detail

// P(0) groups element nodes by label; each further round splits blocks by the
// parent's block. Stops at k rounds or at the fixpoint, whichever is first.
inline Partition k_bisimulation(const Document& doc, std::uint32_t k) {
  return detail::bisimulation(doc, k);
}

// One summary node per distinct label path, built as a trie in document
// order (so sids follow the smallest member, as for partitions).
inline SummaryGraph build_dataguide(const Document& doc) {
  Partition p;
  p.blockOf.assign(doc.size(), -1);
  std::map<std::pair<std::int32_t, std::string_view>, std::int32_t> trie;
  for (const XmlNode& n : doc.nodes) {
    if (n.kind != NodeKind::element) continue;
    const std::int32_t parent_block = n.parent ? p.blockOf[*n.parent] : -1;
    auto [it, fresh] = trie.try_emplace({parent_block, n.label},
                                        static_cast<std::int32_t>(p.blocks.size()));
    if (fresh) p.blocks.emplace_back();
    p.blocks[it->second].push_back(n.id);
    p.blockOf[n.id] = it->second;
  }
  return detail::graph_from_partition(doc, p, SummaryKind::dataguide, std::nullopt);
}

inline SummaryGraph build_ak_index(const Document& doc, std::uint32_t k) {
  return detail::graph_from_partition(doc, k_bisimulation(doc, k), SummaryKind::a_k, k);
}

inline SummaryGraph build_one_index(const Document& doc) {
  return detail::graph_from_partition(doc, detail::bisimulation(doc, std::nullopt),
                                      SummaryKind::one_index, std::nullopt);
}

struct SummaryAnswer {
  std::vector<NodeId> candidates;  // sorted
  bool exact = false;
};

// DataGuide and 1-index group by full label path, so they are exact for any
// predicate-free query on a tree. A(k) is exact only when the query spine has
// no inner '//' and at most k child edges.
inline bool summary_is_exact(const SummaryGraph& idx, const PathQuery& q) {
  if (idx.kind != SummaryKind::a_k) return true;
  return !has_inner_descendant_axis(q) && pattern_length(q) <= idx.k.value_or(0);
}

inline SummaryAnswer eval_on_summary(const SummaryGraph& idx, const PathQuery& q) {
  if (q.has_predicates()) {
    throw Error(ErrorCode::PathSyntaxError,
                "summary evaluation takes predicate-free queries; use eval_twig");
  }
  const std::size_t n = idx.nodes.size();
  std::vector<char> current(n, 0);

  auto reach_descendants = [&](const std::vector<char>& from) {
    std::vector<char> out(n, 0);
    std::vector<SummaryId> stack;
    for (SummaryId s = 0; s < n; ++s) {
      if (from[s]) stack.push_back(s);
    }
    while (!stack.empty()) {
      const SummaryId s = stack.back();
      stack.pop_back();
      for (SummaryId c : idx.nodes[s].childSids) {
        if (!out[c]) {
          out[c] = 1;
          stack.push_back(c);
        }
      }
    }
    return out;
  };

  const Step& first = q.steps.front();
  if (first.axis == Axis::child) {
    for (SummaryId r : idx.rootSids) current[r] = 1;
  } else {
    std::fill(current.begin(), current.end(), 1);
  }
  for (SummaryId s = 0; s < n; ++s) {
    if (current[s] && !first.matches_label(idx.nodes[s].label)) current[s] = 0;
  }

  for (std::size_t i = 1; i < q.steps.size(); ++i) {
    const Step& step = q.steps[i];
    std::vector<char> next(n, 0);
    if (step.axis == Axis::child) {
      for (SummaryId s = 0; s < n; ++s) {
        if (!current[s]) continue;
        for (SummaryId c : idx.nodes[s].childSids) next[c] = 1;
      }
    } else {
      next = reach_descendants(current);
    }
    for (SummaryId s = 0; s < n; ++s) {
      if (next[s] && !step.matches_label(idx.nodes[s].label)) next[s] = 0;
    }
    current = std::move(next);
  }

  SummaryAnswer answer;
  for (SummaryId s = 0; s < n; ++s) {
    if (!current[s]) continue;
    const auto& ext = idx.nodes[s].extent;
    answer.candidates.insert(answer.candidates.end(), ext.begin(), ext.end());
  }
  std::sort(answer.candidates.begin(), answer.candidates.end());
  answer.exact = summary_is_exact(idx, q);
  return answer;
}

// Summary answer, validated against the document when the summary alone is
// not exact.
inline std::vector<NodeId> eval_simple_path(const Document& doc, const SummaryGraph& idx,
                                            const PathQuery& q) {
  SummaryAnswer a = eval_on_summary(idx, q);
  if (a.exact) return std::move(a.candidates);
  return validate_candidates(doc, q, a.candidates);
}

// ---- persistence -----------------------------------------------------------

inline constexpr int kSummaryFormatVersion = 1;

inline nlohmann::json summary_to_json(const SummaryGraph& g) {
  nlohmann::json j;
  j["format"] = "xidx-summary";
  j["version"] = kSummaryFormatVersion;
  j["kind"] = std::string(to_string(g.kind));
  j["k"] = g.k ? nlohmann::json(*g.k) : nlohmann::json(nullptr);
  j["docHash"] = g.docHash;
  j["rootSids"] = g.rootSids;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const SummaryNode& s : g.nodes) {
    nodes.push_back({{"sid", s.sid}, {"label", s.label}, {"extent", s.extent},
                     {"childSids", s.childSids}});
  }
  return j;
}

inline SummaryGraph summary_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "xidx-summary") {
      throw Error(ErrorCode::IndexFormat, "not a summary index file");
    }
    if (j.at("version").get<int>() != kSummaryFormatVersion) {
      throw Error(ErrorCode::IndexFormat, "unsupported summary format version");
    }
    SummaryGraph g;
    g.kind = summary_kind_from_string(j.at("kind").get<std::string>());
    if (!j.at("k").is_null()) g.k = j.at("k").get<std::uint32_t>();
    g.docHash = j.at("docHash").get<std::string>();
    g.rootSids = j.at("rootSids").get<std::vector<SummaryId>>();
    for (const auto& n : j.at("nodes")) {
      SummaryNode s;
      s.sid = n.at("sid").get<SummaryId>();
      s.label = n.at("label").get<std::string>();
      s.extent = n.at("extent").get<std::vector<NodeId>>();
      s.childSids = n.at("childSids").get<std::vector<SummaryId>>();
      if (s.sid != g.nodes.size()) throw Error(ErrorCode::IndexFormat, "sids must be dense");
      g.nodes.push_back(std::move(s));
    }
    for (const SummaryNode& s : g.nodes) {
      for (SummaryId c : s.childSids) {
        if (c >= g.nodes.size()) throw Error(ErrorCode::IndexFormat, "child sid out of range");
      }
    }
    for (SummaryId r : g.rootSids) {
      if (r >= g.nodes.size()) throw Error(ErrorCode::IndexFormat, "root sid out of range");
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IndexFormat, e.what());
  }
}

// Loads an index and checks it was built from `doc`.
inline SummaryGraph summary_from_json(const nlohmann::json& j, const Document& doc) {
  SummaryGraph g = summary_from_json(j);
  const std::string actual = doc_hash(doc);
  if (g.docHash != actual) {
    throw Error(ErrorCode::DocHashMismatch,
                "index built for document " + g.docHash + ", got " + actual);
  }
  for (const SummaryNode& s : g.nodes) {
    for (NodeId v : s.extent) {
      if (!doc.is_element(v)) throw Error(ErrorCode::IndexFormat, "extent member is not an element");
    }
  }
  return g;
}

}  // namespace xidx
