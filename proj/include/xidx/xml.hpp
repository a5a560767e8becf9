#pragma once

// Ordered labeled trees parsed from an XML subset, plus region numbering and
// label paths. See docs/xml-subset.md for the accepted input language.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xidx/error.hpp"

namespace xidx {

using NodeId = std::uint32_t;
using DocId = std::int32_t;

enum class NodeKind : std::uint8_t { element, attribute, text };

struct XmlNode {
  NodeId id = 0;
  std::string label;  // element name, "@name" for attributes, "#text" for text
  NodeKind kind = NodeKind::element;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  std::optional<std::string> text;  // attribute value or character data
};

// Node ids are dense and follow document order (pre-order, attributes before
// other children), so id order equals region start order.
struct Document {
  DocId docId = 0;
  std::vector<XmlNode> nodes;
  NodeId rootId = 0;

  std::size_t size() const noexcept { return nodes.size(); }

  const XmlNode& node(NodeId id) const {
    if (id >= nodes.size()) {
      throw Error(ErrorCode::UnknownNode, "node " + std::to_string(id) +
                                              " not in document of size " +
                                              std::to_string(nodes.size()));
    }
    return nodes[id];
  }

  bool is_element(NodeId id) const noexcept {
    return id < nodes.size() && nodes[id].kind == NodeKind::element;
  }

  std::size_t element_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const XmlNode& n) {
          return n.kind == NodeKind::element;
        }));
  }

  std::vector<NodeId> element_children(NodeId id) const {
    std::vector<NodeId> out;
    for (NodeId c : nodes[id].children) {
      if (nodes[c].kind == NodeKind::element) out.push_back(c);
    }
    return out;
  }
};

struct RegionCode {
  DocId docId = 0;
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  std::uint32_t level = 0;

  friend bool operator==(const RegionCode&, const RegionCode&) = default;
};

using RegionMap = std::vector<RegionCode>;

struct LabelPath {
  std::vector<std::string> labels;

  friend bool operator==(const LabelPath&, const LabelPath&) = default;
  friend auto operator<=>(const LabelPath&, const LabelPath&) = default;

  std::string to_string() const {
    std::string out;
    for (const auto& l : labels) {
      out += '/';
      out += l;
    }
    return out;
  }
};

// Accepts nodes in any insertion order and produces a Document whose ids are
// renumbered into document order.
class DocumentBuilder {
 public:
  using Handle = std::size_t;

  Handle add_root(std::string label) {
    root_ = pending_.size();
    pending_.push_back({std::move(label), NodeKind::element, std::nullopt, {}, {}});
    return *root_;
  }

  Handle add_element(Handle parent, std::string label) {
    return add(parent, std::move(label), NodeKind::element, std::nullopt);
  }

  Handle add_attribute(Handle owner, std::string name, std::string value) {
    return add(owner, "@" + std::move(name), NodeKind::attribute, std::move(value));
  }

  Handle add_text(Handle owner, std::string text) {
    return add(owner, "#text", NodeKind::text, std::move(text));
  }

  bool has_root() const noexcept { return root_.has_value(); }

  Document build(DocId docId) const {
    if (!root_) throw Error(ErrorCode::MalformedXml, "document has no root element");
    Document doc;
    doc.docId = docId;
    doc.nodes.reserve(pending_.size());
    // Iterative pre-order; children pushed in reverse to pop in order.
    std::vector<std::pair<Handle, std::optional<NodeId>>> stack{{*root_, std::nullopt}};
    while (!stack.empty()) {
      auto [h, parent] = stack.back();
      stack.pop_back();
      const Pending& p = pending_[h];
      const auto id = static_cast<NodeId>(doc.nodes.size());
      XmlNode n;
      n.id = id;
      n.label = p.label;
      n.kind = p.kind;
      n.parent = parent;
      n.text = p.text;
      doc.nodes.push_back(std::move(n));
      if (parent) doc.nodes[*parent].children.push_back(id);
      const auto ordered = ordered_children(p);
      for (auto it = ordered.rbegin(); it != ordered.rend(); ++it) {
        stack.emplace_back(*it, id);
      }
    }
    doc.rootId = 0;
    return doc;
  }

 private:
  struct Pending {
    std::string label;
    NodeKind kind;
    std::optional<std::string> text;
    std::vector<Handle> attributes;
    std::vector<Handle> content;
  };

  Handle add(Handle owner, std::string label, NodeKind kind,
             std::optional<std::string> text) {
    if (owner >= pending_.size() || pending_[owner].kind != NodeKind::element) {
      throw Error(ErrorCode::UnknownNode, "builder owner is not an element");
    }
    const Handle h = pending_.size();
    pending_.push_back({std::move(label), kind, std::move(text), {}, {}});
    if (kind == NodeKind::attribute) {
      pending_[owner].attributes.push_back(h);
    } else {
      pending_[owner].content.push_back(h);
    }
    return h;
  }

  static std::vector<Handle> ordered_children(const Pending& p) {
    std::vector<Handle> out = p.attributes;
    out.insert(out.end(), p.content.begin(), p.content.end());
    return out;
  }

  std::vector<Pending> pending_;
  std::optional<Handle> root_;
};

namespace detail {

inline bool is_name_start(unsigned char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
         c == ':' || c >= 0x80;
}

inline bool is_name_char(unsigned char c) noexcept {
  return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

inline bool is_space(unsigned char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class XmlParser {
 public:
  explicit XmlParser(std::string_view input) : in_(input) {}

  Document parse(DocId docId) {
    if (in_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
    skip_misc();
    if (at_end()) fail("no root element");
    if (peek() != '<') fail("content before root element");
    parse_element_tree();
    skip_misc();
    if (!at_end()) fail("content after root element");
    return builder_.build(docId);
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::MalformedXml, why, pos_);
  }
  [[noreturn]] void refuse(const std::string& why) const {
    throw Error(ErrorCode::UnsupportedConstruct, why, pos_);
  }

  bool at_end() const noexcept { return pos_ >= in_.size(); }
  char peek() const noexcept { return in_[pos_]; }
  bool starts_with(std::string_view s) const noexcept {
    return in_.substr(pos_, s.size()) == s;
  }

  void skip_space() {
    while (!at_end() && is_space(static_cast<unsigned char>(peek()))) ++pos_;
  }

  void skip_until(std::string_view terminator, const char* what) {
    const auto found = in_.find(terminator, pos_);
    if (found == std::string_view::npos) fail(std::string("unterminated ") + what);
    pos_ = found + terminator.size();
  }

  // Whitespace, comments, processing instructions; DOCTYPE is refused.
  void skip_misc() {
    for (;;) {
      skip_space();
      if (starts_with("<!--")) {
        pos_ += 4;
        skip_until("-->", "comment");
      } else if (starts_with("<?")) {
        pos_ += 2;
        skip_until("?>", "processing instruction");
      } else if (starts_with("<!DOCTYPE")) {
        refuse("DOCTYPE declarations are not supported");
      } else {
        return;
      }
    }
  }

  std::string parse_name() {
    const std::size_t begin = pos_;
    if (at_end() || !is_name_start(static_cast<unsigned char>(peek()))) {
      fail("expected a name");
    }
    while (!at_end() && is_name_char(static_cast<unsigned char>(peek()))) ++pos_;
    return std::string(in_.substr(begin, pos_ - begin));
  }

  void parse_reference(std::string& out) {
    const std::size_t begin = pos_;
    ++pos_;  // '&'
    const auto semi = in_.find(';', pos_);
    if (semi == std::string_view::npos || semi - pos_ > 16) {
      pos_ = begin;
      fail("unterminated entity reference");
    }
    const std::string_view ref = in_.substr(pos_, semi - pos_);
    if (ref == "amp") {
      out += '&';
    } else if (ref == "lt") {
      out += '<';
    } else if (ref == "gt") {
      out += '>';
    } else if (ref == "quot") {
      out += '"';
    } else if (ref == "apos") {
      out += '\'';
    } else if (!ref.empty() && ref[0] == '#') {
      std::uint32_t cp = 0;
      const bool hex = ref.size() > 1 && ref[1] == 'x';
      const std::string_view digits = ref.substr(hex ? 2 : 1);
      if (digits.empty()) fail("empty character reference");
      for (char c : digits) {
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else fail("bad character reference");
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
        if (cp > 0x10FFFF) fail("character reference out of range");
      }
      if (cp == 0) fail("character reference to NUL");
      append_utf8(out, cp);
    } else {
      pos_ = begin;
      refuse("entity reference '&" + std::string(ref) +
             ";' requires a DTD or external entity");
    }
    pos_ = semi + 1;
  }

  std::string parse_attribute_value() {
    if (at_end() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value");
    const char quote = peek();
    ++pos_;
    std::string value;
    for (;;) {
      if (at_end()) fail("unterminated attribute value");
      const char c = peek();
      if (c == quote) {
        ++pos_;
        return value;
      }
      if (c == '<') fail("'<' in attribute value");
      if (c == '&') {
        parse_reference(value);
      } else {
        value += c;
        ++pos_;
      }
    }
  }

  // Parses a start tag; returns true when the element is self-closing.
  bool parse_start_tag(DocumentBuilder::Handle h) {
    std::vector<std::string> seen;
    for (;;) {
      const std::size_t before = pos_;
      skip_space();
      if (at_end()) fail("unterminated start tag");
      if (starts_with("/>")) {
        pos_ += 2;
        return true;
      }
      if (peek() == '>') {
        ++pos_;
        return false;
      }
      if (pos_ == before) fail("expected whitespace before attribute");
      std::string name = parse_name();
      skip_space();
      if (at_end() || peek() != '=') fail("expected '=' after attribute name");
      ++pos_;
      skip_space();
      std::string value = parse_attribute_value();
      if (std::find(seen.begin(), seen.end(), name) != seen.end()) {
        fail("duplicate attribute '" + name + "'");
      }
      seen.push_back(name);
      builder_.add_attribute(h, std::move(name), std::move(value));
    }
  }

  void flush_text(DocumentBuilder::Handle owner, std::string& text) {
    const bool blank = std::all_of(text.begin(), text.end(), [](char c) {
      return is_space(static_cast<unsigned char>(c));
    });
    if (!blank) builder_.add_text(owner, std::move(text));
    text.clear();
  }

  void parse_element_tree() {
    struct Open {
      DocumentBuilder::Handle handle;
      std::string name;
    };
    std::vector<Open> open;
    std::string text;

    auto open_element = [&](bool is_root) {
      ++pos_;  // '<'
      std::string name = parse_name();
      const auto h = is_root ? builder_.add_root(name)
                             : builder_.add_element(open.back().handle, name);
      if (!parse_start_tag(h)) open.push_back({h, std::move(name)});
    };

    open_element(true);
    while (!open.empty()) {
      if (at_end()) fail("unclosed element '" + open.back().name + "'");
      const char c = peek();
      if (c == '<') {
        if (starts_with("<!--")) {
          pos_ += 4;
          skip_until("-->", "comment");
        } else if (starts_with("<![CDATA[")) {
          pos_ += 9;
          const auto end = in_.find("]]>", pos_);
          if (end == std::string_view::npos) fail("unterminated CDATA section");
          text.append(in_.substr(pos_, end - pos_));
          pos_ = end + 3;
        } else if (starts_with("<?")) {
          pos_ += 2;
          skip_until("?>", "processing instruction");
        } else if (starts_with("<!")) {
          refuse("markup declarations are not supported");
        } else if (starts_with("</")) {
          flush_text(open.back().handle, text);
          pos_ += 2;
          const std::size_t name_pos = pos_;
          const std::string name = parse_name();
          if (name != open.back().name) {
            pos_ = name_pos;
            fail("end tag '" + name + "' does not match '" + open.back().name + "'");
          }
          skip_space();
          if (at_end() || peek() != '>') fail("expected '>' in end tag");
          ++pos_;
          open.pop_back();
        } else {
          flush_text(open.back().handle, text);
          open_element(false);
        }
      } else if (c == '&') {
        parse_reference(text);
      } else {
        if (c == '>' && pos_ >= 2 && in_.substr(pos_ - 2, 2) == "]]") {
          fail("']]>' in character data");
        }
        text += c;
        ++pos_;
      }
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  DocumentBuilder builder_;
};

inline void escape_into(std::string& out, std::string_view s, bool attribute) {
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"':
        if (attribute) out += "&quot;";
        else out += c;
        break;
      default: out += c;
    }
  }
}

}  // namespace detail

inline Document parse_document(std::string_view bytes, DocId docId = 0) {
  return detail::XmlParser(bytes).parse(docId);
}

// Canonical serialization: no inter-element whitespace, attributes in child
// order, double-quoted values. Re-parsing yields an isomorphic tree.
inline std::string serialize(const Document& doc) {
  std::string out;
  out.reserve(doc.size() * 16);
  struct Frame {
    NodeId id;
    std::size_t next;
  };
  std::vector<Frame> stack;
  auto open = [&](NodeId id) {
    const XmlNode& n = doc.nodes[id];
    out += '<';
    out += n.label;
    std::size_t first_content = 0;
    for (; first_content < n.children.size(); ++first_content) {
      const XmlNode& a = doc.nodes[n.children[first_content]];
      if (a.kind != NodeKind::attribute) break;
      out += ' ';
      out.append(a.label, 1);
      out += "=\"";
      detail::escape_into(out, a.text.value_or(""), true);
      out += '"';
    }
    if (first_content == n.children.size()) {
      out += "/>";
      return;
    }
    out += '>';
    stack.push_back({id, first_content});
  };
  open(doc.rootId);
  while (!stack.empty()) {
    Frame& f = stack.back();
    const XmlNode& n = doc.nodes[f.id];
    if (f.next == n.children.size()) {
      out += "</";
      out += n.label;
      out += '>';
      stack.pop_back();
      continue;
    }
    const NodeId c = n.children[f.next++];
    const XmlNode& child = doc.nodes[c];
    if (child.kind == NodeKind::text) {
      detail::escape_into(out, child.text.value_or(""), false);
    } else if (child.kind == NodeKind::element) {
      open(c);
    }
  }
  return out;
}

// 64-bit FNV-1a over the canonical serialization, as 16 hex digits.
inline std::string doc_hash(const Document& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize(doc)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// One counter, bumped on entry (start) and on exit (end) of every node in a
// depth-first document-order walk. Starts at 1, so max end == 2 * size().
inline RegionMap assign_regions(const Document& doc) {
  RegionMap regions(doc.size());
  std::uint32_t counter = 0;
  struct Frame {
    NodeId id;
    std::size_t next;
  };
  std::vector<Frame> stack;
  regions[doc.rootId] = {doc.docId, ++counter, 0, 0};
  stack.push_back({doc.rootId, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    const XmlNode& n = doc.nodes[f.id];
    if (f.next == n.children.size()) {
      regions[f.id].end = ++counter;
      stack.pop_back();
      continue;
    }
    const NodeId c = n.children[f.next++];
    regions[c] = {doc.docId, ++counter, 0, regions[f.id].level + 1};
    stack.push_back({c, 0});
  }
  return regions;
}

inline LabelPath label_path(const Document& doc, NodeId id) {
  LabelPath path;
  std::optional<NodeId> cur = doc.node(id).id;
  while (cur) {
    path.labels.push_back(doc.nodes[*cur].label);
    cur = doc.nodes[*cur].parent;
  }
  std::reverse(path.labels.begin(), path.labels.end());
  return path;
}

inline std::uint32_t depth_of(const Document& doc, NodeId id) {
  std::uint32_t d = 0;
  for (auto p = doc.node(id).parent; p; p = doc.nodes[*p].parent) ++d;
  return d;
}

// Height of the element tree (root alone has height 0).
inline std::uint32_t element_height(const Document& doc) {
  std::vector<std::uint32_t> depth(doc.size(), 0);
  std::uint32_t h = 0;
  for (const XmlNode& n : doc.nodes) {
    if (n.parent) depth[n.id] = depth[*n.parent] + 1;
    if (n.kind == NodeKind::element) h = std::max(h, depth[n.id]);
  }
  return h;
}

}  // namespace xidx
