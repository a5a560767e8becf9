#pragma once

// XCube-style star warehouse: a facts document and a dimensions document,
// the fused join index that inlines every fact's dimension attributes into
// one cell, the plan rewriting that removes member lookups, and the two
// executors (join-based reference, index scan).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xidx/decimal.hpp"
#include "xidx/error.hpp"
#include "xidx/xml.hpp"

namespace xidx::wh {

// ---- model -----------------------------------------------------------------

struct DimensionMember {
  std::string dim;
  std::string memberId;
  std::string levelName;
  std::optional<std::string> parentId;
  std::map<std::string, std::string> attributes;

  friend bool operator==(const DimensionMember&, const DimensionMember&) = default;
};

class Dimension {
 public:
  Dimension() = default;
  explicit Dimension(std::string name) : name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }
  const std::vector<DimensionMember>& members() const noexcept { return members_; }

  const DimensionMember* find(std::string_view id) const {
    const auto it = byId_.find(std::string(id));
    return it == byId_.end() ? nullptr : &members_[it->second];
  }
  // Parent links resolved to member positions, -1 at the top.
  std::int64_t parent_index(std::size_t member) const { return parentIndex_[member]; }
  std::size_t index_of(const DimensionMember& m) const {
    return static_cast<std::size_t>(&m - members_.data());
  }

  void add(DimensionMember m) {
    if (byId_.count(m.memberId)) {
      throw Error(ErrorCode::DuplicateMemberId,
                  "member '" + m.memberId + "' repeated in dimension '" + name_ + "'");
    }
    byId_.emplace(m.memberId, members_.size());
    members_.push_back(std::move(m));
  }

  // Resolves parents; rejects dangling links, cycles and chains that visit a
  // level twice.
  void link() {
    parentIndex_.assign(members_.size(), -1);
    for (std::size_t i = 0; i < members_.size(); ++i) {
      const auto& p = members_[i].parentId;
      if (!p) continue;
      const auto it = byId_.find(*p);
      if (it == byId_.end()) {
        throw Error(ErrorCode::DanglingParent, "member '" + members_[i].memberId +
                                                   "' of dimension '" + name_ +
                                                   "' names missing parent '" + *p + "'");
      }
      parentIndex_[i] = static_cast<std::int64_t>(it->second);
    }
    for (std::size_t i = 0; i < members_.size(); ++i) {
      std::set<std::string_view> levels;
      for (std::int64_t cur = static_cast<std::int64_t>(i); cur >= 0; cur = parentIndex_[cur]) {
        if (!levels.insert(members_[cur].levelName).second) {
          throw Error(ErrorCode::SchemaViolation,
                      "ancestor chain of '" + members_[i].memberId + "' in dimension '" + name_ +
                          "' repeats level '" + members_[cur].levelName + "' or is cyclic");
        }
      }
    }
  }

  friend bool operator==(const Dimension& a, const Dimension& b) {
    return a.name_ == b.name_ && a.members_ == b.members_;
  }

 private:
  std::string name_;
  std::vector<DimensionMember> members_;
  std::unordered_map<std::string, std::size_t> byId_;
  std::vector<std::int64_t> parentIndex_;
};

using DimensionSet = std::map<std::string, Dimension>;

struct MeasureValue {
  std::string text;  // as written in the facts document
  Decimal value;

  friend bool operator==(const MeasureValue&, const MeasureValue&) = default;
};

struct FactCell {
  std::map<std::string, std::string> refs;  // dimension -> member id
  std::map<std::string, MeasureValue> measures;

  friend bool operator==(const FactCell&, const FactCell&) = default;
};

struct FactTable {
  std::vector<FactCell> cells;

  std::set<std::string> measure_names() const {
    std::set<std::string> out;
    for (const auto& c : cells) {
      for (const auto& [name, _] : c.measures) out.insert(name);
    }
    return out;
  }
};

// Every (dimension, level, attribute) triple and measure name a query may use.
struct Schema {
  std::map<std::string, std::map<std::string, std::set<std::string>>> attributes;
  std::set<std::string> dimensions;
  std::set<std::string> measures;

  bool has(std::string_view dim, std::string_view level, std::string_view attr) const {
    const auto d = attributes.find(std::string(dim));
    if (d == attributes.end()) return false;
    const auto l = d->second.find(std::string(level));
    return l != d->second.end() && l->second.count(std::string(attr)) > 0;
  }

  std::string canonical() const {
    std::string out;
    for (const auto& d : dimensions) out += "D|" + d + "\n";
    for (const auto& [d, levels] : attributes) {
      for (const auto& [l, attrs] : levels) {
        for (const auto& a : attrs) out += "A|" + d + "|" + l + "|" + a + "\n";
      }
    }
    for (const auto& m : measures) out += "M|" + m + "\n";
    return out;
  }

  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  friend bool operator==(const Schema&, const Schema&) = default;
};

inline Schema schema_of(const DimensionSet& dims, const FactTable& facts) {
  Schema s;
  for (const auto& [name, dim] : dims) {
    s.dimensions.insert(name);
    for (const auto& m : dim.members()) {
      auto& attrs = s.attributes[name][m.levelName];
      for (const auto& [a, _] : m.attributes) attrs.insert(a);
    }
  }
  s.measures = facts.measure_names();
  return s;
}

inline std::string inlined_key(std::string_view level, std::string_view attr) {
  std::string k(level);
  k += '.';
  k += attr;
  return k;
}

// ---- XML helpers -------------------------------------------------------------

namespace detail {

inline std::optional<std::string> attr(const Document& doc, NodeId id, std::string_view name) {
  for (NodeId c : doc.nodes[id].children) {
    const XmlNode& a = doc.nodes[c];
    if (a.kind != NodeKind::attribute) break;
    if (std::string_view(a.label).substr(1) == name) return a.text.value_or("");
  }
  return std::nullopt;
}

inline std::string required_attr(const Document& doc, NodeId id, std::string_view name) {
  auto v = attr(doc, id, name);
  if (!v) {
    throw Error(ErrorCode::SchemaViolation, "<" + doc.nodes[id].label + "> lacks attribute '" +
                                                std::string(name) + "'");
  }
  return *v;
}

// Element children, all of which must carry `expected` as label.
inline std::vector<NodeId> children_named(const Document& doc, NodeId id,
                                          std::initializer_list<std::string_view> expected) {
  std::vector<NodeId> out;
  for (NodeId c : doc.element_children(id)) {
    const auto& label = doc.nodes[c].label;
    if (std::find(expected.begin(), expected.end(), label) == expected.end()) {
      throw Error(ErrorCode::SchemaViolation, "unexpected element <" + label + "> inside <" +
                                                  doc.nodes[id].label + ">");
    }
    out.push_back(c);
  }
  return out;
}

inline void require_root(const Document& doc, std::string_view label) {
  if (doc.nodes[doc.rootId].label != label) {
    throw Error(ErrorCode::SchemaViolation, "expected root <" + std::string(label) + ">, got <" +
                                                doc.nodes[doc.rootId].label + ">");
  }
}

inline std::string esc(std::string_view s) {
  std::string out;
  xidx::detail::escape_into(out, s, true);
  return out;
}

inline MeasureValue parse_measure(const std::string& name, const std::string& text) {
  const auto v = Decimal::parse(text);
  if (!v) {
    throw Error(ErrorCode::NonNumericMeasure,
                "measure '" + name + "' has non-numeric value '" + text + "'");
  }
  return {text, *v};
}

}  // namespace detail

// ---- loading and serialization ---------------------------------------------

inline DimensionSet load_dimensions(const Document& doc) {
  detail::require_root(doc, "dimensionData");
  DimensionSet dims;
  for (NodeId dn : detail::children_named(doc, doc.rootId, {"dimension"})) {
    const std::string name = detail::required_attr(doc, dn, "name");
    if (dims.count(name)) {
      throw Error(ErrorCode::SchemaViolation, "dimension '" + name + "' declared twice");
    }
    Dimension dim(name);
    for (NodeId mn : detail::children_named(doc, dn, {"member"})) {
      DimensionMember m;
      m.dim = name;
      m.memberId = detail::required_attr(doc, mn, "id");
      m.levelName = detail::required_attr(doc, mn, "level");
      if (m.levelName.empty() || m.levelName.find('.') != std::string::npos) {
        throw Error(ErrorCode::SchemaViolation, "level name '" + m.levelName +
                                                    "' must be non-empty and contain no '.'");
      }
      if (auto p = detail::attr(doc, mn, "parent"); p && !p->empty()) m.parentId = *p;
      for (NodeId an : detail::children_named(doc, mn, {"attribute"})) {
        const std::string aname = detail::required_attr(doc, an, "name");
        if (!m.attributes.emplace(aname, detail::required_attr(doc, an, "value")).second) {
          throw Error(ErrorCode::SchemaViolation,
                      "attribute '" + aname + "' repeated on member '" + m.memberId + "'");
        }
      }
      dim.add(std::move(m));
    }
    dim.link();
    dims.emplace(name, std::move(dim));
  }
  return dims;
}

inline FactTable load_facts(const Document& doc, const DimensionSet& dims) {
  detail::require_root(doc, "CubeFacts");
  FactTable table;
  for (NodeId cn : detail::children_named(doc, doc.rootId, {"cell"})) {
    FactCell cell;
    for (NodeId e : detail::children_named(doc, cn, {"dimension", "measure"})) {
      if (doc.nodes[e].label == "dimension") {
        const std::string dim = detail::required_attr(doc, e, "dim");
        const std::string member = detail::required_attr(doc, e, "node");
        const auto d = dims.find(dim);
        if (d == dims.end()) {
          throw Error(ErrorCode::DanglingRef, "cell references unknown dimension '" + dim + "'");
        }
        if (!d->second.find(member)) {
          throw Error(ErrorCode::DanglingRef,
                      "cell references missing member '" + member + "' of '" + dim + "'");
        }
        if (!cell.refs.emplace(dim, member).second) {
          throw Error(ErrorCode::SchemaViolation, "cell references dimension '" + dim + "' twice");
        }
      } else {
        const std::string name = detail::required_attr(doc, e, "name");
        const std::string text = detail::required_attr(doc, e, "value");
        if (!cell.measures.emplace(name, detail::parse_measure(name, text)).second) {
          throw Error(ErrorCode::SchemaViolation, "measure '" + name + "' repeated in a cell");
        }
      }
    }
    for (const auto& [name, _] : dims) {
      if (!cell.refs.count(name)) {
        throw Error(ErrorCode::MissingDimensionRef, "cell " + std::to_string(table.cells.size()) +
                                                        " has no reference for '" + name + "'");
      }
    }
    table.cells.push_back(std::move(cell));
  }
  return table;
}

inline std::string dimensions_to_xml(const DimensionSet& dims) {
  std::string out = "<dimensionData>\n";
  for (const auto& [name, dim] : dims) {
    out += "  <dimension name=\"" + detail::esc(name) + "\">\n";
    for (const auto& m : dim.members()) {
      out += "    <member id=\"" + detail::esc(m.memberId) + "\" level=\"" +
             detail::esc(m.levelName) + "\"";
      if (m.parentId) out += " parent=\"" + detail::esc(*m.parentId) + "\"";
      if (m.attributes.empty()) {
        out += "/>\n";
        continue;
      }
      out += ">\n";
      for (const auto& [a, v] : m.attributes) {
        out += "      <attribute name=\"" + detail::esc(a) + "\" value=\"" + detail::esc(v) +
               "\"/>\n";
      }
      out += "    </member>\n";
    }
    out += "  </dimension>\n";
  }
  out += "</dimensionData>\n";
  return out;
}

inline std::string facts_to_xml(const FactTable& facts) {
  std::string out = "<CubeFacts>\n";
  for (const auto& cell : facts.cells) {
    out += "  <cell>\n";
    for (const auto& [dim, member] : cell.refs) {
      out += "    <dimension dim=\"" + detail::esc(dim) + "\" node=\"" + detail::esc(member) +
             "\"/>\n";
    }
    for (const auto& [name, mv] : cell.measures) {
      out += "    <measure name=\"" + detail::esc(name) + "\" value=\"" + detail::esc(mv.text) +
             "\"/>\n";
    }
    out += "  </cell>\n";
  }
  out += "</CubeFacts>\n";
  return out;
}

// ---- join index ----------------------------------------------------------------

struct InlinedColumn {
  std::string dim;
  std::string key;  // "level.attr"

  friend bool operator==(const InlinedColumn&, const InlinedColumn&) = default;
};

struct JoinIndexCell {
  std::map<std::string, std::string> refs;
  std::vector<std::optional<std::string>> inlined;  // aligned with JoinIndex::columns
  std::vector<std::optional<MeasureValue>> measures;  // aligned with JoinIndex::measureNames

  friend bool operator==(const JoinIndexCell&, const JoinIndexCell&) = default;
};

class JoinIndex {
 public:
  JoinIndex() = default;

  explicit JoinIndex(Schema schema) : schema_(std::move(schema)), schemaHash_(schema_.hash()) {
    for (const auto& [dim, levels] : schema_.attributes) {
      for (const auto& [level, attrs] : levels) {
        for (const auto& a : attrs) {
          columnOf_.emplace(std::make_pair(dim, inlined_key(level, a)), columns_.size());
          columns_.push_back({dim, inlined_key(level, a)});
        }
      }
    }
    measureNames_.assign(schema_.measures.begin(), schema_.measures.end());
  }

  const Schema& schema() const noexcept { return schema_; }
  const std::string& schema_hash() const noexcept { return schemaHash_; }
  const std::vector<InlinedColumn>& columns() const noexcept { return columns_; }
  const std::vector<std::string>& measure_names() const noexcept { return measureNames_; }
  const std::vector<JoinIndexCell>& cells() const noexcept { return cells_; }
  std::size_t size() const noexcept { return cells_.size(); }

  std::optional<std::size_t> column(std::string_view dim, std::string_view key) const {
    const auto it = columnOf_.find({std::string(dim), std::string(key)});
    if (it == columnOf_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> measure_slot(std::string_view name) const {
    const auto it = std::lower_bound(measureNames_.begin(), measureNames_.end(), name);
    if (it == measureNames_.end() || *it != name) return std::nullopt;
    return static_cast<std::size_t>(it - measureNames_.begin());
  }

  const std::optional<std::string>& inlined(const JoinIndexCell& cell, std::string_view dim,
                                            std::string_view key) const {
    static const std::optional<std::string> none;
    const auto c = column(dim, key);
    return c ? cell.inlined[*c] : none;
  }

  void add(JoinIndexCell cell) { cells_.push_back(std::move(cell)); }

 private:
  Schema schema_;
  std::string schemaHash_;
  std::vector<InlinedColumn> columns_;
  std::map<std::pair<std::string, std::string>, std::size_t> columnOf_;
  std::vector<std::string> measureNames_;
  std::vector<JoinIndexCell> cells_;
};

// One cell per fact. Each referenced member and all of its ancestors
// contribute their attributes under "level.attr".
inline JoinIndex build_join_index(const FactTable& facts, const DimensionSet& dims) {
  JoinIndex idx(schema_of(dims, facts));
  for (const FactCell& fact : facts.cells) {
    JoinIndexCell cell;
    cell.refs = fact.refs;
    cell.inlined.resize(idx.columns().size());
    for (const auto& [dimName, memberId] : fact.refs) {
      const Dimension& dim = dims.at(dimName);
      const DimensionMember* m = dim.find(memberId);
      for (std::int64_t cur = static_cast<std::int64_t>(dim.index_of(*m)); cur >= 0;
           cur = dim.parent_index(static_cast<std::size_t>(cur))) {
        const DimensionMember& member = dim.members()[static_cast<std::size_t>(cur)];
        for (const auto& [a, v] : member.attributes) {
          cell.inlined[*idx.column(dimName, inlined_key(member.levelName, a))] = v;
        }
      }
    }
    cell.measures.resize(idx.measure_names().size());
    for (const auto& [name, mv] : fact.measures) cell.measures[*idx.measure_slot(name)] = mv;
    idx.add(std::move(cell));
  }
  return idx;
}

inline std::string join_index_to_xml(const JoinIndex& idx) {
  std::string out = "<index schemaHash=\"" + idx.schema_hash() + "\">\n  <schema>\n";
  const Schema& s = idx.schema();
  for (const auto& d : s.dimensions) out += "    <dimension name=\"" + detail::esc(d) + "\"/>\n";
  for (const auto& [d, levels] : s.attributes) {
    for (const auto& [l, attrs] : levels) {
      for (const auto& a : attrs) {
        out += "    <key dim=\"" + detail::esc(d) + "\" level=\"" + detail::esc(l) +
               "\" attr=\"" + detail::esc(a) + "\"/>\n";
      }
    }
  }
  for (const auto& m : s.measures) out += "    <measure name=\"" + detail::esc(m) + "\"/>\n";
  out += "  </schema>\n";
  for (const JoinIndexCell& cell : idx.cells()) {
    out += "  <cell>\n";
    for (const auto& [dim, member] : cell.refs) {
      out += "    <dimension dim=\"" + detail::esc(dim) + "\" node=\"" + detail::esc(member) +
             "\">\n";
      for (std::size_t c = 0; c < idx.columns().size(); ++c) {
        if (idx.columns()[c].dim != dim || !cell.inlined[c]) continue;
        out += "      <attribute key=\"" + detail::esc(idx.columns()[c].key) + "\" value=\"" +
               detail::esc(*cell.inlined[c]) + "\"/>\n";
      }
      out += "    </dimension>\n";
    }
    for (std::size_t m = 0; m < idx.measure_names().size(); ++m) {
      if (!cell.measures[m]) continue;
      out += "    <measure name=\"" + detail::esc(idx.measure_names()[m]) + "\" value=\"" +
             detail::esc(cell.measures[m]->text) + "\"/>\n";
    }
    out += "  </cell>\n";
  }
  out += "</index>\n";
  return out;
}

inline JoinIndex load_join_index(const Document& doc) {
  detail::require_root(doc, "index");
  const auto kids = detail::children_named(doc, doc.rootId, {"schema", "cell"});
  if (kids.empty() || doc.nodes[kids.front()].label != "schema") {
    throw Error(ErrorCode::SchemaViolation, "index document must start with <schema>");
  }
  Schema schema;
  for (NodeId e : detail::children_named(doc, kids.front(), {"dimension", "key", "measure"})) {
    const auto& label = doc.nodes[e].label;
    if (label == "dimension") {
      schema.dimensions.insert(detail::required_attr(doc, e, "name"));
    } else if (label == "key") {
      schema.attributes[detail::required_attr(doc, e, "dim")]
                       [detail::required_attr(doc, e, "level")]
                           .insert(detail::required_attr(doc, e, "attr"));
    } else {
      schema.measures.insert(detail::required_attr(doc, e, "name"));
    }
  }
  if (detail::attr(doc, doc.rootId, "schemaHash").value_or("") != schema.hash()) {
    throw Error(ErrorCode::SchemaMismatch, "index schemaHash does not match its <schema>");
  }
  JoinIndex idx(std::move(schema));
  for (std::size_t i = 1; i < kids.size(); ++i) {
    if (doc.nodes[kids[i]].label != "cell") {
      throw Error(ErrorCode::SchemaViolation, "<schema> must appear once, before cells");
    }
    JoinIndexCell cell;
    cell.inlined.resize(idx.columns().size());
    cell.measures.resize(idx.measure_names().size());
    for (NodeId e : detail::children_named(doc, kids[i], {"dimension", "measure"})) {
      if (doc.nodes[e].label == "dimension") {
        const std::string dim = detail::required_attr(doc, e, "dim");
        if (!idx.schema().dimensions.count(dim)) {
          throw Error(ErrorCode::SchemaViolation, "cell uses undeclared dimension '" + dim + "'");
        }
        cell.refs[dim] = detail::required_attr(doc, e, "node");
        for (NodeId a : detail::children_named(doc, e, {"attribute"})) {
          const std::string key = detail::required_attr(doc, a, "key");
          const auto col = idx.column(dim, key);
          if (!col) throw Error(ErrorCode::SchemaViolation, "undeclared key '" + dim + "/" + key + "'");
          cell.inlined[*col] = detail::required_attr(doc, a, "value");
        }
      } else {
        const std::string name = detail::required_attr(doc, e, "name");
        const auto slot = idx.measure_slot(name);
        if (!slot) throw Error(ErrorCode::SchemaViolation, "undeclared measure '" + name + "'");
        cell.measures[*slot] = detail::parse_measure(name, detail::required_attr(doc, e, "value"));
      }
    }
    idx.add(std::move(cell));
  }
  return idx;
}

// ---- queries -----------------------------------------------------------------

enum class CompareOp : std::uint8_t { eq, ne, lt, le, gt, ge };
enum class AggregateFn : std::uint8_t { count, sum, avg, min, max };

inline std::string_view to_string(CompareOp op) noexcept {
  switch (op) {
    case CompareOp::eq: return "=";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return "?";
}

inline std::string_view to_string(AggregateFn fn) noexcept {
  switch (fn) {
    case AggregateFn::count: return "COUNT";
    case AggregateFn::sum: return "SUM";
    case AggregateFn::avg: return "AVG";
    case AggregateFn::min: return "MIN";
    case AggregateFn::max: return "MAX";
  }
  return "?";
}

inline CompareOp compare_op_from_string(std::string_view s) {
  for (auto op : {CompareOp::eq, CompareOp::ne, CompareOp::lt, CompareOp::le, CompareOp::gt,
                  CompareOp::ge}) {
    if (to_string(op) == s) return op;
  }
  if (s == "==") return CompareOp::eq;
  throw Error(ErrorCode::InvalidQuery, "unknown comparison '" + std::string(s) + "'");
}

inline AggregateFn aggregate_fn_from_string(std::string_view s) {
  std::string upper(s);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto fn : {AggregateFn::count, AggregateFn::sum, AggregateFn::avg, AggregateFn::min,
                  AggregateFn::max}) {
    if (to_string(fn) == upper) return fn;
  }
  throw Error(ErrorCode::InvalidQuery, "unknown aggregate '" + std::string(s) + "'");
}

// Numeric comparison when both sides are decimals, byte-wise otherwise.
inline bool compare_values(std::string_view lhs, CompareOp op, std::string_view rhs) {
  int cmp;
  const auto l = Decimal::parse(lhs);
  const auto r = l ? Decimal::parse(rhs) : std::nullopt;
  if (l && r) {
    cmp = *l < *r ? -1 : (*r < *l ? 1 : 0);
  } else {
    const int c = lhs.compare(rhs);
    cmp = c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  switch (op) {
    case CompareOp::eq: return cmp == 0;
    case CompareOp::ne: return cmp != 0;
    case CompareOp::lt: return cmp < 0;
    case CompareOp::le: return cmp <= 0;
    case CompareOp::gt: return cmp > 0;
    case CompareOp::ge: return cmp >= 0;
  }
  return false;
}

struct AttributeRef {
  std::string dim;
  std::string level;
  std::string attr;

  friend bool operator==(const AttributeRef&, const AttributeRef&) = default;
};

struct Selection {
  AttributeRef ref;
  CompareOp op = CompareOp::eq;
  std::string value;

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct Aggregate {
  AggregateFn fn = AggregateFn::count;
  std::string measure;  // ignored by COUNT, which counts cells

  friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct AnalyticQuery {
  std::vector<Selection> selections;
  std::vector<AttributeRef> groupBy;
  Aggregate aggregate;

  friend bool operator==(const AnalyticQuery&, const AnalyticQuery&) = default;
};

inline void validate(const AnalyticQuery& q, const Schema& schema) {
  auto check = [&](const AttributeRef& r) {
    if (!schema.has(r.dim, r.level, r.attr)) {
      throw Error(ErrorCode::UnknownAttribute,
                  "no attribute " + r.dim + "." + r.level + "." + r.attr + " in schema");
    }
  };
  for (const auto& s : q.selections) check(s.ref);
  for (const auto& g : q.groupBy) check(g);
  if (q.aggregate.fn != AggregateFn::count && !schema.measures.count(q.aggregate.measure)) {
    throw Error(ErrorCode::UnknownAttribute, "no measure '" + q.aggregate.measure + "'");
  }
}

inline nlohmann::json to_json(const AnalyticQuery& q) {
  nlohmann::json j;
  j["selections"] = nlohmann::json::array();
  for (const auto& s : q.selections) {
    j["selections"].push_back({{"dim", s.ref.dim}, {"level", s.ref.level}, {"attr", s.ref.attr},
                               {"op", std::string(to_string(s.op))}, {"value", s.value}});
  }
  j["groupBy"] = nlohmann::json::array();
  for (const auto& g : q.groupBy) {
    j["groupBy"].push_back({{"dim", g.dim}, {"level", g.level}, {"attr", g.attr}});
  }
  j["aggregate"] = {{"fn", std::string(to_string(q.aggregate.fn))},
                    {"measure", q.aggregate.measure}};
  return j;
}

inline AnalyticQuery query_from_json(const nlohmann::json& j) {
  try {
    AnalyticQuery q;
    auto ref = [](const nlohmann::json& e) {
      return AttributeRef{e.at("dim").get<std::string>(), e.at("level").get<std::string>(),
                          e.at("attr").get<std::string>()};
    };
    for (const auto& s : j.value("selections", nlohmann::json::array())) {
      const auto& v = s.at("value");
      q.selections.push_back({ref(s), compare_op_from_string(s.at("op").get<std::string>()),
                              v.is_string() ? v.get<std::string>() : v.dump()});
    }
    for (const auto& g : j.value("groupBy", nlohmann::json::array())) q.groupBy.push_back(ref(g));
    const auto& a = j.at("aggregate");
    q.aggregate.fn = aggregate_fn_from_string(a.at("fn").get<std::string>());
    q.aggregate.measure = a.value("measure", std::string("*"));
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidQuery, e.what());
  }
}

// ---- plans -------------------------------------------------------------------

// Logical operators. A join-based plan fetches attributes by resolving
// members; a rewritten plan reads inlined keys from index cells only.
struct PlanOp {
  enum class Kind : std::uint8_t {
    scan_facts,
    resolve_member,
    filter,
    group,
    scan_index,
    filter_inlined,
    group_inlined,
    aggregate,
  };
  Kind kind = Kind::scan_facts;
  std::string dim;
  std::string level;
  std::string attr;
  std::string key;  // "level.attr" for the *_inlined kinds
  CompareOp op = CompareOp::eq;
  std::string value;
  Aggregate aggregate;

  friend bool operator==(const PlanOp&, const PlanOp&) = default;
};

struct LogicalPlan {
  std::vector<PlanOp> ops;
  std::string schemaHash;
};

using RewrittenQuery = LogicalPlan;

inline std::string to_string(const PlanOp& op) {
  using K = PlanOp::Kind;
  switch (op.kind) {
    case K::scan_facts: return "ScanFacts";
    case K::resolve_member: return "ResolveMember(" + op.dim + " -> " + op.level + ")";
    case K::filter:
      return "Filter(" + op.dim + "." + op.level + "." + op.attr + " " +
             std::string(to_string(op.op)) + " '" + op.value + "')";
    case K::group: return "Group(" + op.dim + "." + op.level + "." + op.attr + ")";
    case K::scan_index: return "ScanIndex";
    case K::filter_inlined:
      return "FilterInlined(" + op.dim + "[" + op.key + "] " + std::string(to_string(op.op)) +
             " '" + op.value + "')";
    case K::group_inlined: return "GroupInlined(" + op.dim + "[" + op.key + "])";
    case K::aggregate:
      return "Aggregate(" + std::string(to_string(op.aggregate.fn)) + " " + op.aggregate.measure +
             ")";
  }
  return "?";
}

inline std::string to_string(const LogicalPlan& plan) {
  std::string out;
  for (const auto& op : plan.ops) {
    if (!out.empty()) out += " -> ";
    out += to_string(op);
  }
  return out;
}

inline std::size_t count_member_lookups(const LogicalPlan& plan) {
  return static_cast<std::size_t>(
      std::count_if(plan.ops.begin(), plan.ops.end(), [](const PlanOp& op) {
        return op.kind == PlanOp::Kind::resolve_member;
      }));
}

// True when every step reads index cells only: no fact scan, no member
// resolution, no attribute access that needs one.
inline bool reads_only_inlined(const LogicalPlan& plan) {
  return std::all_of(plan.ops.begin(), plan.ops.end(), [](const PlanOp& op) {
    switch (op.kind) {
      case PlanOp::Kind::scan_index:
      case PlanOp::Kind::aggregate: return true;
      case PlanOp::Kind::filter_inlined:
      case PlanOp::Kind::group_inlined: return op.key == inlined_key(op.level, op.attr);
      default: return false;
    }
  });
}

// The textbook star-join plan for q: every attribute access is preceded by a
// member resolution on its dimension.
inline LogicalPlan plan_with_joins(const AnalyticQuery& q, const Schema& schema) {
  validate(q, schema);
  LogicalPlan plan;
  plan.schemaHash = schema.hash();
  auto op = [](PlanOp::Kind kind, const std::string& dim = {}, const std::string& level = {},
               const std::string& attr = {}) {
    PlanOp o;
    o.kind = kind;
    o.dim = dim;
    o.level = level;
    o.attr = attr;
    return o;
  };
  plan.ops.push_back(op(PlanOp::Kind::scan_facts));
  for (const auto& s : q.selections) {
    plan.ops.push_back(op(PlanOp::Kind::resolve_member, s.ref.dim, s.ref.level));
    PlanOp f = op(PlanOp::Kind::filter, s.ref.dim, s.ref.level, s.ref.attr);
    f.op = s.op;
    f.value = s.value;
    plan.ops.push_back(std::move(f));
  }
  for (const auto& g : q.groupBy) {
    plan.ops.push_back(op(PlanOp::Kind::resolve_member, g.dim, g.level));
    plan.ops.push_back(op(PlanOp::Kind::group, g.dim, g.level, g.attr));
  }
  PlanOp agg = op(PlanOp::Kind::aggregate);
  agg.aggregate = q.aggregate;
  plan.ops.push_back(agg);
  return plan;
}

// Plan-to-plan rewriting: member resolutions are dropped, attribute accesses
// become reads of inlined keys, selections and the aggregate are kept as is.
inline RewrittenQuery rewrite_plan(const LogicalPlan& plan) {
  RewrittenQuery out;
  out.schemaHash = plan.schemaHash;
  for (const PlanOp& op : plan.ops) {
    PlanOp r = op;
    switch (op.kind) {
      case PlanOp::Kind::resolve_member: continue;
      case PlanOp::Kind::scan_facts: r.kind = PlanOp::Kind::scan_index; break;
      case PlanOp::Kind::filter:
        r.kind = PlanOp::Kind::filter_inlined;
        r.key = inlined_key(op.level, op.attr);
        break;
      case PlanOp::Kind::group:
        r.kind = PlanOp::Kind::group_inlined;
        r.key = inlined_key(op.level, op.attr);
        break;
      default: break;
    }
    out.ops.push_back(std::move(r));
  }
  return out;
}

inline RewrittenQuery rewrite_query(const AnalyticQuery& q, const Schema& schema) {
  return rewrite_plan(plan_with_joins(q, schema));
}

// ---- results -----------------------------------------------------------------

struct AggValue {
  std::optional<Decimal> exact;  // COUNT, SUM, MIN, MAX
  std::optional<double> approx;  // AVG

  bool is_null() const noexcept { return !exact && !approx; }
  friend bool operator==(const AggValue&, const AggValue&) = default;
};

struct ResultTable {
  AggregateFn fn = AggregateFn::count;
  std::map<std::vector<std::string>, AggValue> rows;

  friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

namespace detail {

struct Accumulator {
  std::int64_t cells = 0;
  std::int64_t valued = 0;
  Decimal sum;
  std::optional<Decimal> min;
  std::optional<Decimal> max;

  void add(const MeasureValue* mv) {
    ++cells;
    if (!mv) return;
    ++valued;
    sum += mv->value;
    if (!min || mv->value < *min) min = mv->value;
    if (!max || *max < mv->value) max = mv->value;
  }

  AggValue finish(AggregateFn fn) const {
    AggValue v;
    switch (fn) {
      case AggregateFn::count: v.exact = Decimal::from_int(cells); break;
      case AggregateFn::sum:
        if (valued) v.exact = sum;
        break;
      case AggregateFn::min: v.exact = min; break;
      case AggregateFn::max: v.exact = max; break;
      case AggregateFn::avg:
        if (valued) v.approx = sum.to_double() / static_cast<double>(valued);
        break;
    }
    return v;
  }
};

inline ResultTable finish(AggregateFn fn,
                          const std::map<std::vector<std::string>, Accumulator>& groups) {
  ResultTable t;
  t.fn = fn;
  for (const auto& [key, acc] : groups) t.rows.emplace(key, acc.finish(fn));
  return t;
}

}  // namespace detail

// Reference executor: attributes are fetched per fact by resolving the
// referenced member and walking its ancestor chain to the named level.
inline ResultTable execute_with_joins(const AnalyticQuery& q, const FactTable& facts,
                                      const DimensionSet& dims) {
  validate(q, schema_of(dims, facts));

  auto fetch = [&](const FactCell& cell, const AttributeRef& r) -> const std::string& {
    const Dimension& dim = dims.at(r.dim);
    const DimensionMember* m = dim.find(cell.refs.at(r.dim));
    for (std::int64_t cur = static_cast<std::int64_t>(dim.index_of(*m)); cur >= 0;
         cur = dim.parent_index(static_cast<std::size_t>(cur))) {
      const DimensionMember& member = dim.members()[static_cast<std::size_t>(cur)];
      if (member.levelName != r.level) continue;
      const auto a = member.attributes.find(r.attr);
      if (a == member.attributes.end()) break;
      return a->second;
    }
    throw Error(ErrorCode::EmptyLevel, "no " + r.level + "." + r.attr + " above member '" +
                                           cell.refs.at(r.dim) + "' of '" + r.dim + "'");
  };

  std::map<std::vector<std::string>, detail::Accumulator> groups;
  for (const FactCell& cell : facts.cells) {
    bool keep = true;
    for (const auto& s : q.selections) {
      if (!compare_values(fetch(cell, s.ref), s.op, s.value)) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    std::vector<std::string> key;
    key.reserve(q.groupBy.size());
    for (const auto& g : q.groupBy) key.push_back(fetch(cell, g));
    const auto mv = cell.measures.find(q.aggregate.measure);
    groups[std::move(key)].add(mv == cell.measures.end() ? nullptr : &mv->second);
  }
  return detail::finish(q.aggregate.fn, groups);
}

// Single scan over index cells; keys are bound to columns once per plan.
inline ResultTable execute_on_index(const RewrittenQuery& plan, const JoinIndex& idx) {
  if (plan.schemaHash != idx.schema_hash()) {
    throw Error(ErrorCode::SchemaMismatch, "plan built for schema " + plan.schemaHash +
                                               ", index has " + idx.schema_hash());
  }
  struct BoundFilter {
    std::size_t column;
    CompareOp op;
    const std::string* value;
  };
  std::vector<BoundFilter> filters;
  std::vector<std::size_t> groupColumns;
  std::optional<Aggregate> aggregate;
  auto bind = [&](const PlanOp& op) {
    const auto c = idx.column(op.dim, op.key);
    if (!c) throw Error(ErrorCode::SchemaMismatch, "index has no column " + op.dim + "[" + op.key + "]");
    return *c;
  };
  for (const PlanOp& op : plan.ops) {
    switch (op.kind) {
      case PlanOp::Kind::scan_index: break;
      case PlanOp::Kind::filter_inlined: filters.push_back({bind(op), op.op, &op.value}); break;
      case PlanOp::Kind::group_inlined: groupColumns.push_back(bind(op)); break;
      case PlanOp::Kind::aggregate: aggregate = op.aggregate; break;
      default:
        throw Error(ErrorCode::SchemaMismatch,
                    "plan step " + to_string(op) + " needs member lookups; rewrite it first");
    }
  }
  if (!aggregate) throw Error(ErrorCode::SchemaMismatch, "plan has no aggregate");
  const auto measure = idx.measure_slot(aggregate->measure);

  auto value_at = [&](const JoinIndexCell& cell, std::size_t column) -> const std::string& {
    const auto& v = cell.inlined[column];
    if (!v) {
      const auto& col = idx.columns()[column];
      throw Error(ErrorCode::EmptyLevel, "no " + col.key + " above member '" +
                                             cell.refs.at(col.dim) + "' of '" + col.dim + "'");
    }
    return *v;
  };

  std::map<std::vector<std::string>, detail::Accumulator> groups;
  for (const JoinIndexCell& cell : idx.cells()) {
    bool keep = true;
    for (const auto& f : filters) {
      if (!compare_values(value_at(cell, f.column), f.op, *f.value)) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    std::vector<std::string> key;
    key.reserve(groupColumns.size());
    for (std::size_t c : groupColumns) key.push_back(value_at(cell, c));
    const MeasureValue* mv = measure && cell.measures[*measure] ? &*cell.measures[*measure] : nullptr;
    groups[std::move(key)].add(mv);
  }
  return detail::finish(aggregate->fn, groups);
}

// COUNT/MIN/MAX and integral sums must match exactly; fractional sums and
// averages within `rel_tol`. On mismatch `diff` (if given) explains the first.
inline bool results_equivalent(const ResultTable& a, const ResultTable& b, double rel_tol,
                               std::string* diff = nullptr) {
  auto report = [&](const std::string& why) {
    if (diff) *diff = why;
    return false;
  };
  if (a.fn != b.fn) return report("aggregate functions differ");
  if (a.rows.size() != b.rows.size()) {
    return report("row counts differ: " + std::to_string(a.rows.size()) + " vs " +
                  std::to_string(b.rows.size()));
  }
  auto close = [&](double x, double y) {
    return std::fabs(x - y) <= rel_tol * std::max({1e-300, std::fabs(x), std::fabs(y)});
  };
  for (auto ia = a.rows.begin(), ib = b.rows.begin(); ia != a.rows.end(); ++ia, ++ib) {
    std::string key;
    for (const auto& k : ia->first) key += "[" + k + "]";
    if (ia->first != ib->first) return report("group keys differ at " + key);
    const AggValue& x = ia->second;
    const AggValue& y = ib->second;
    if (x.is_null() != y.is_null()) return report("null mismatch at " + key);
    if (x.is_null()) continue;
    bool same;
    if (x.approx || y.approx) {
      same = x.approx && y.approx && close(*x.approx, *y.approx);
    } else if (a.fn == AggregateFn::sum && !(x.exact->is_integer() && y.exact->is_integer())) {
      same = close(x.exact->to_double(), y.exact->to_double());
    } else {
      same = *x.exact == *y.exact;
    }
    if (!same) return report("values differ at " + key);
  }
  return true;
}

inline nlohmann::json to_json(const ResultTable& t) {
  nlohmann::json j;
  j["aggregate"] = std::string(to_string(t.fn));
  j["rows"] = nlohmann::json::array();
  for (const auto& [key, v] : t.rows) {
    nlohmann::json value = nullptr;
    if (v.exact) value = v.exact->to_string();
    if (v.approx) value = *v.approx;
    j["rows"].push_back({{"key", key}, {"value", value}});
  }
  return j;
}

}  // namespace xidx::wh
