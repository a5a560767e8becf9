#pragma once

// Path expressions over element nodes:
//
//   query     := ("/" | "//") step (("/" | "//") step)*
//   step      := (NAME | "*") predicate*
//   predicate := "[" relquery "]" | "[@" NAME "=" STRING "]"
//   relquery  := ("."? ("/" | "//") step | step) (("/" | "//") step)*
//
// A bare leading step inside a predicate is a child step. Predicates are
// existential. Name tests and "*" only ever match element nodes.

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "xidx/error.hpp"
#include "xidx/xml.hpp"

namespace xidx {

enum class Axis : std::uint8_t { child, descendant };

struct Predicate;

struct Step {
  Axis axis = Axis::child;
  std::string test;  // element name or "*"
  std::vector<Predicate> predicates;

  bool matches_label(std::string_view label) const noexcept {
    return test == "*" || test == label;
  }
  friend bool operator==(const Step&, const Step&) = default;
};

struct PathQuery {
  std::vector<Step> steps;
  bool anchored = true;

  bool has_predicates() const noexcept {
    return std::any_of(steps.begin(), steps.end(),
                       [](const Step& s) { return !s.predicates.empty(); });
  }
  friend bool operator==(const PathQuery&, const PathQuery&) = default;
};

struct Predicate {
  enum class Kind : std::uint8_t { branch, attribute_equals };
  Kind kind = Kind::branch;
  PathQuery branch;  // relative to the step's node; `anchored` unused
  std::string attribute;
  std::string value;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

// Child-axis edges along the spine; an anchored query also counts the edge
// from the document node to the root element.
inline std::size_t pattern_length(const PathQuery& q) {
  std::size_t n = q.anchored ? 1 : 0;
  for (std::size_t i = 1; i < q.steps.size(); ++i) {
    if (q.steps[i].axis == Axis::child) ++n;
  }
  return n;
}

inline bool has_inner_descendant_axis(const PathQuery& q) {
  for (std::size_t i = 1; i < q.steps.size(); ++i) {
    if (q.steps[i].axis == Axis::descendant) return true;
  }
  return false;
}

inline PathQuery strip_predicates(PathQuery q) {
  for (auto& s : q.steps) s.predicates.clear();
  return q;
}

namespace detail {

class PathParser {
 public:
  explicit PathParser(std::string_view text) : in_(text) {}

  PathQuery parse() {
    PathQuery q;
    skip_space();
    if (!starts_with("/")) fail("query must start with '/' or '//'");
    q.anchored = !starts_with("//");
    parse_steps(q, false);
    skip_space();
    if (pos_ != in_.size()) fail("unexpected trailing input");
    return q;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::PathSyntaxError, why, pos_);
  }
  bool starts_with(std::string_view s) const noexcept {
    return in_.substr(pos_, s.size()) == s;
  }
  void skip_space() {
    while (pos_ < in_.size() && (in_[pos_] == ' ' || in_[pos_] == '\t')) ++pos_;
  }

  std::optional<Axis> parse_axis() {
    skip_space();
    if (starts_with("//")) {
      pos_ += 2;
      return Axis::descendant;
    }
    if (starts_with("/")) {
      ++pos_;
      return Axis::child;
    }
    return std::nullopt;
  }

  std::string parse_name() {
    skip_space();
    const std::size_t begin = pos_;
    if (pos_ >= in_.size() || !is_name_start(static_cast<unsigned char>(in_[pos_]))) {
      fail("expected a name");
    }
    while (pos_ < in_.size() && is_name_char(static_cast<unsigned char>(in_[pos_]))) ++pos_;
    return std::string(in_.substr(begin, pos_ - begin));
  }

  std::string parse_string() {
    skip_space();
    if (pos_ >= in_.size() || (in_[pos_] != '"' && in_[pos_] != '\'')) {
      fail("expected a quoted string");
    }
    const char quote = in_[pos_++];
    const auto end = in_.find(quote, pos_);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string s(in_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return s;
  }

  Step parse_step(Axis axis) {
    Step step;
    step.axis = axis;
    skip_space();
    if (starts_with("*")) {
      ++pos_;
      step.test = "*";
    } else {
      step.test = parse_name();
    }
    for (;;) {
      skip_space();
      if (!starts_with("[")) break;
      ++pos_;
      skip_space();
      Predicate p;
      if (starts_with("@")) {
        ++pos_;
        p.kind = Predicate::Kind::attribute_equals;
        p.attribute = parse_name();
        skip_space();
        if (!starts_with("=")) fail("expected '=' in attribute predicate");
        ++pos_;
        p.value = parse_string();
      } else {
        p.kind = Predicate::Kind::branch;
        p.branch.anchored = false;
        parse_steps(p.branch, true);
      }
      skip_space();
      if (!starts_with("]")) fail("expected ']'");
      ++pos_;
      step.predicates.push_back(std::move(p));
    }
    return step;
  }

  void parse_steps(PathQuery& q, bool relative) {
    if (relative) {
      skip_space();
      if (starts_with(".")) {
        ++pos_;
        skip_space();
        if (!starts_with("/")) fail("expected '/' or '//' after '.'");
      }
      const auto axis = parse_axis();
      q.steps.push_back(parse_step(axis.value_or(Axis::child)));
    }
    for (;;) {
      const std::size_t before = pos_;
      const auto axis = parse_axis();
      if (!axis) {
        pos_ = before;
        break;
      }
      q.steps.push_back(parse_step(*axis));
    }
    if (q.steps.empty()) fail("empty path");
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

inline void append_steps(std::string& out, const PathQuery& q, bool relative) {
  for (std::size_t i = 0; i < q.steps.size(); ++i) {
    const Step& s = q.steps[i];
    if (relative && i == 0) out += '.';
    out += s.axis == Axis::child ? "/" : "//";
    out += s.test;
    for (const Predicate& p : s.predicates) {
      out += '[';
      if (p.kind == Predicate::Kind::attribute_equals) {
        out += '@';
        out += p.attribute;
        out += "=\"";
        out += p.value;
        out += '"';
      } else {
        append_steps(out, p.branch, true);
      }
      out += ']';
    }
  }
}

}  // namespace detail

inline PathQuery parse_path(std::string_view text) {
  return detail::PathParser(text).parse();
}

inline std::string to_string(const PathQuery& q) {
  std::string out;
  detail::append_steps(out, q, false);
  return out;
}

namespace detail {

inline bool attribute_equals(const Document& doc, NodeId id, std::string_view name,
                             std::string_view value) {
  for (NodeId c : doc.nodes[id].children) {
    const XmlNode& a = doc.nodes[c];
    if (a.kind != NodeKind::attribute) break;
    if (std::string_view(a.label).substr(1) == name) return a.text.value_or("") == value;
  }
  return false;
}

// Recursive-descent evaluation from a context node, memoized per
// (step, node) so repeated descendant steps stay polynomial.
class NaiveEvaluator {
 public:
  explicit NaiveEvaluator(const Document& doc) : doc_(doc) {}

  std::vector<NodeId> evaluate(const PathQuery& q) {
    std::vector<char> hit(doc_.size(), 0);
    std::vector<std::vector<char>> seen(q.steps.size(), std::vector<char>(doc_.size(), 0));
    descend_from_document(q, hit, seen);
    std::vector<NodeId> out;
    for (NodeId i = 0; i < hit.size(); ++i) {
      if (hit[i]) out.push_back(i);
    }
    return out;
  }

  bool satisfies(NodeId id, const Step& step) {
    if (!doc_.is_element(id) || !step.matches_label(doc_.nodes[id].label)) return false;
    for (const Predicate& p : step.predicates) {
      if (p.kind == Predicate::Kind::attribute_equals) {
        if (!attribute_equals(doc_, id, p.attribute, p.value)) return false;
      } else if (!exists_from(id, p.branch, 0)) {
        return false;
      }
    }
    return true;
  }

 private:
  void descend_from_document(const PathQuery& q, std::vector<char>& hit,
                             std::vector<std::vector<char>>& seen) {
    const Step& first = q.steps.front();
    if (first.axis == Axis::child) {
      visit(doc_.rootId, q, 0, hit, seen);
    } else {
      for (NodeId id = 0; id < doc_.size(); ++id) visit(id, q, 0, hit, seen);
    }
  }

  void visit(NodeId id, const PathQuery& q, std::size_t i, std::vector<char>& hit,
             std::vector<std::vector<char>>& seen) {
    if (seen[i][id]) return;
    seen[i][id] = 1;
    if (!satisfies(id, q.steps[i])) return;
    if (i + 1 == q.steps.size()) {
      hit[id] = 1;
      return;
    }
    for_each_axis_node(id, q.steps[i + 1].axis,
                       [&](NodeId next) { visit(next, q, i + 1, hit, seen); return false; });
  }

  bool exists_from(NodeId context, const PathQuery& rel, std::size_t i) {
    return for_each_axis_node(context, rel.steps[i].axis, [&](NodeId next) {
      if (!satisfies(next, rel.steps[i])) return false;
      return i + 1 == rel.steps.size() || exists_from(next, rel, i + 1);
    });
  }

  // Calls fn on element nodes reachable by `axis`; stops early when fn
  // returns true and reports whether it did.
  template <typename Fn>
  bool for_each_axis_node(NodeId context, Axis axis, Fn&& fn) {
    if (axis == Axis::child) {
      for (NodeId c : doc_.nodes[context].children) {
        if (doc_.nodes[c].kind == NodeKind::element && fn(c)) return true;
      }
      return false;
    }
    std::vector<NodeId> stack(doc_.nodes[context].children.rbegin(),
                              doc_.nodes[context].children.rend());
    while (!stack.empty()) {
      const NodeId c = stack.back();
      stack.pop_back();
      if (doc_.nodes[c].kind != NodeKind::element) continue;
      if (fn(c)) return true;
      const auto& ch = doc_.nodes[c].children;
      stack.insert(stack.end(), ch.rbegin(), ch.rend());
    }
    return false;
  }

  const Document& doc_;
};

}  // namespace detail

// Ground truth: exact matches by traversing the whole tree. Sorted node ids.
inline std::vector<NodeId> eval_naive(const Document& doc, const PathQuery& q) {
  return detail::NaiveEvaluator(doc).evaluate(q);
}

// Keeps the candidates whose ancestry matches q, checked backwards from each
// candidate along its parent chain. Result is eval_naive(doc, q) ∩ candidates.
inline std::vector<NodeId> validate_candidates(const Document& doc, const PathQuery& q,
                                               const std::vector<NodeId>& candidates) {
  detail::NaiveEvaluator checker(doc);
  const std::size_t n = q.steps.size();
  // memo[i][node]: 0 unknown, 1 no, 2 yes; whether node can play step i.
  std::vector<std::vector<std::uint8_t>> memo(n);

  auto matches_at = [&](auto&& self, NodeId id, std::size_t i) -> bool {
    auto& m = memo[i];
    if (m.empty()) m.assign(doc.size(), 0);
    if (m[id]) return m[id] == 2;
    bool ok = checker.satisfies(id, q.steps[i]);
    if (ok) {
      const auto parent = doc.nodes[id].parent;
      if (i == 0) {
        ok = q.steps[0].axis == Axis::descendant || !parent;
      } else if (q.steps[i].axis == Axis::child) {
        ok = parent && self(self, *parent, i - 1);
      } else {
        ok = false;
        for (auto a = parent; a && !ok; a = doc.nodes[*a].parent) ok = self(self, *a, i - 1);
      }
    }
    m[id] = ok ? 2 : 1;
    return ok;
  };

  std::vector<NodeId> out;
  for (NodeId c : candidates) {
    if (c < doc.size() && doc.is_element(c) && matches_at(matches_at, c, n - 1)) {
      out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace xidx
