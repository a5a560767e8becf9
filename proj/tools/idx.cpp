// idx: command-line front end for the xidx indexing library.
//
// Exit codes: 0 ok, 1 usage, 2 input error, 3 correctness failure.
// IDX_LOG=trace|debug|info|warn|error|off sets stderr verbosity (default warn).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "xidx/xidx.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitCorrectness = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << data;
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("'" + path + "' is not valid JSON: " + e.what());
  }
}

xidx::Document load_doc(const std::string& path) {
  spdlog::debug("parsing {}", path);
  return xidx::parse_document(read_file(path));
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("idx");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("IDX_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

int cmd_parse(const std::string& in, bool stats) {
  const xidx::Document doc = load_doc(in);
  if (!stats) {
    std::cout << xidx::serialize(doc) << '\n';
    return kExitOk;
  }
  std::size_t attributes = 0, texts = 0;
  for (const auto& n : doc.nodes) {
    attributes += n.kind == xidx::NodeKind::attribute;
    texts += n.kind == xidx::NodeKind::text;
  }
  const auto dg = xidx::build_dataguide(doc);
  nlohmann::json j = {{"nodes", doc.size()},
                      {"elements", doc.element_count()},
                      {"attributes", attributes},
                      {"texts", texts},
                      {"height", xidx::element_height(doc)},
                      {"distinctLabels", xidx::gen::distinct_labels(doc).size()},
                      {"distinctLabelPaths", dg.nodes.size()},
                      {"docHash", xidx::doc_hash(doc)}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_build(const std::string& kind, std::uint32_t k, const std::string& in,
              const std::string& out) {
  const xidx::Document doc = load_doc(in);
  xidx::SummaryGraph g;
  switch (xidx::summary_kind_from_string(kind)) {
    case xidx::SummaryKind::dataguide: g = xidx::build_dataguide(doc); break;
    case xidx::SummaryKind::a_k: g = xidx::build_ak_index(doc, k); break;
    case xidx::SummaryKind::one_index: g = xidx::build_one_index(doc); break;
  }
  spdlog::info("built {} with {} summary nodes over {} elements", xidx::to_string(g.kind),
               g.nodes.size(), doc.element_count());
  write_file(out, xidx::summary_to_json(g).dump() + "\n");
  return kExitOk;
}

int cmd_query(const std::string& index, const std::string& docPath, const std::string& path,
              bool validate) {
  const xidx::Document doc = load_doc(docPath);
  const xidx::SummaryGraph g = xidx::summary_from_json(read_json(index), doc);
  const xidx::PathQuery q = xidx::parse_path(path);
  std::vector<xidx::NodeId> nodes;
  bool exact = true;
  bool validated = false;
  if (q.has_predicates()) {
    nodes = xidx::eval_twig(doc, g, q);
  } else {
    auto a = xidx::eval_on_summary(g, q);
    exact = a.exact;
    nodes = std::move(a.candidates);
    if (!exact && validate) {
      nodes = xidx::validate_candidates(doc, q, nodes);
      validated = true;
    }
  }
  nlohmann::json j = {{"query", xidx::to_string(q)}, {"exact", exact || validated},
                      {"summaryExact", exact},    {"validated", validated},
                      {"count", nodes.size()},    {"nodes", nodes}};
  std::cout << j.dump() << '\n';
  return kExitOk;
}

int cmd_wh_build(const std::string& facts, const std::string& dims, const std::string& out) {
  const auto d = xidx::wh::load_dimensions(load_doc(dims));
  const auto f = xidx::wh::load_facts(load_doc(facts), d);
  const auto idx = xidx::wh::build_join_index(f, d);
  spdlog::info("join index: {} cells, {} inlined columns", idx.size(), idx.columns().size());
  write_file(out, xidx::wh::join_index_to_xml(idx));
  return kExitOk;
}

int cmd_wh_query(const std::string& qpath, const std::string& facts, const std::string& dims,
                 const std::string& index, bool explain) {
  const auto q = xidx::wh::query_from_json(read_json(qpath));
  xidx::wh::ResultTable result;
  nlohmann::json j;
  if (!index.empty()) {
    const auto idx = xidx::wh::load_join_index(load_doc(index));
    const auto plan = xidx::wh::rewrite_query(q, idx.schema());
    if (explain) j["plan"] = xidx::wh::to_string(plan);
    result = xidx::wh::execute_on_index(plan, idx);
  } else {
    const auto d = xidx::wh::load_dimensions(load_doc(dims));
    const auto f = xidx::wh::load_facts(load_doc(facts), d);
    if (explain) j["plan"] = xidx::wh::to_string(xidx::wh::plan_with_joins(q, xidx::wh::schema_of(d, f)));
    result = xidx::wh::execute_with_joins(q, f, d);
  }
  j["result"] = xidx::wh::to_json(result);
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_bench(const std::string& config, const std::string& out, const std::string& jsonOut) {
  const auto report = xidx::bench::run_bench(read_json(config));
  write_file(out, xidx::bench::to_csv(report));
  if (!jsonOut.empty()) write_file(jsonOut, xidx::bench::to_json(report).dump(2) + "\n");
  for (const auto& r : report.rows) {
    if (r.flagged) {
      spdlog::warn("{} query {}: index slower than joins (speedup {:.3f})", r.scenario, r.query,
                   *r.speedup);
    }
  }
  for (const auto& f : report.failures) spdlog::error("{}", f.diff);
  return report.failures.empty() ? kExitOk : kExitCorrectness;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"XML structural indices, structural joins and warehouse join index"};
  app.require_subcommand(1);

  auto* parse = app.add_subcommand("parse", "Parse an XML file");
  std::string parseIn;
  bool stats = false;
  parse->add_option("input", parseIn, "XML file")->required();
  parse->add_flag("--stats", stats, "Print document statistics instead of the canonical form");

  auto* build = app.add_subcommand("build", "Build a structural summary index");
  std::string kind = "dataguide", buildIn, buildOut;
  std::uint32_t k = 1;
  build->add_option("--kind", kind, "dataguide | ak | one")
      ->check(CLI::IsMember({"dataguide", "ak", "one"}));
  build->add_option("--k", k, "A(k) resolution");
  build->add_option("input", buildIn, "XML file")->required();
  build->add_option("-o,--output", buildOut, "Index JSON file")->required();

  auto* query = app.add_subcommand("query", "Evaluate a path query through an index");
  std::string qIndex, qDoc, qPath;
  bool validate = false;
  query->add_option("--index", qIndex, "Index JSON file")->required();
  query->add_option("--doc", qDoc, "XML file the index was built from")->required();
  query->add_option("--path", qPath, "Path expression, e.g. /a/b//c")->required();
  query->add_flag("--validate", validate, "Validate inexact summary answers against the data");

  auto* whc = app.add_subcommand("wh", "Warehouse join index");
  whc->require_subcommand(1);
  auto* whBuild = whc->add_subcommand("build-index", "Build index.xml from facts and dimensions");
  std::string whFacts, whDims, whOut;
  whBuild->add_option("--facts", whFacts, "facts.xml")->required();
  whBuild->add_option("--dims", whDims, "dimensions.xml")->required();
  whBuild->add_option("-o,--output", whOut, "index.xml")->required();

  auto* whQuery = whc->add_subcommand("query", "Run an analytic query");
  std::string whQ, whQFacts, whQDims, whQIndex;
  bool explain = false;
  whQuery->add_option("--q", whQ, "Query JSON")->required();
  auto* optFacts = whQuery->add_option("--facts", whQFacts, "facts.xml (join execution)");
  auto* optDims = whQuery->add_option("--dims", whQDims, "dimensions.xml (join execution)");
  auto* optIndex = whQuery->add_option("--index", whQIndex, "index.xml (index execution)");
  optFacts->needs(optDims);
  optDims->needs(optFacts);
  optIndex->excludes(optFacts)->excludes(optDims);
  whQuery->add_flag("--explain", explain, "Include the executed plan");

  auto* genc = app.add_subcommand("gen", "Generate synthetic corpora");
  genc->require_subcommand(1);
  auto* genTree = genc->add_subcommand("tree", "Random labeled tree");
  xidx::gen::TreeGenParams tp;
  std::string treeOut;
  genTree->add_option("--nodes", tp.nodeCount, "Element count");
  genTree->add_option("--max-depth", tp.maxDepth, "Deepest level (root is 0)");
  genTree->add_option("--max-fanout", tp.maxFanout, "Children per node");
  genTree->add_option("--labels", tp.labelAlphabetSize, "Label alphabet size");
  genTree->add_option("--seed", tp.seed, "Random seed");
  genTree->add_option("-o,--output", treeOut, "Output file (default stdout)");

  auto* genStar = genc->add_subcommand("star", "Random star schema warehouse");
  xidx::gen::StarGenParams sp;
  std::string factsOut, dimsOut;
  genStar->add_option("--facts", sp.factCount, "Fact count");
  genStar->add_option("--dimensions", sp.dimensionCount, "Dimension count");
  genStar->add_option("--levels", sp.levelsPerDimension, "Levels per dimension");
  genStar->add_option("--members", sp.membersPerLevel, "Members per level");
  genStar->add_option("--attributes", sp.attributesPerLevel, "Attributes per level");
  genStar->add_option("--measures", sp.measureCount, "Measures per fact");
  genStar->add_option("--seed", sp.seed, "Random seed");
  genStar->add_option("--facts-out", factsOut, "facts.xml output")->required();
  genStar->add_option("--dims-out", dimsOut, "dimensions.xml output")->required();

  auto* bench = app.add_subcommand("bench", "Run the benchmark harness");
  std::string benchConfig, benchOut, benchJson;
  bench->add_option("--config", benchConfig, "Config JSON")->required();
  bench->add_option("-o,--output", benchOut, "CSV report")->required();
  bench->add_option("--json", benchJson, "Also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*parse) return cmd_parse(parseIn, stats);
    if (*build) return cmd_build(kind, k, buildIn, buildOut);
    if (*query) return cmd_query(qIndex, qDoc, qPath, validate);
    if (*whBuild) return cmd_wh_build(whFacts, whDims, whOut);
    if (*whQuery) {
      if (whQIndex.empty() && whQFacts.empty()) {
        std::cerr << "wh query: give --index or both --facts and --dims\n";
        return kExitUsage;
      }
      return cmd_wh_query(whQ, whQFacts, whQDims, whQIndex, explain);
    }
    if (*genTree) {
      write_file(treeOut, xidx::serialize(xidx::gen::generate_tree(tp)) + "\n");
      return kExitOk;
    }
    if (*genStar) {
      const auto docs = xidx::gen::generate_star(sp);
      write_file(factsOut, docs.factsXml);
      write_file(dimsOut, docs.dimensionsXml);
      return kExitOk;
    }
    if (*bench) return cmd_bench(benchConfig, benchOut, benchJson);
  } catch (const xidx::Error& e) {
    spdlog::error("{}", e.what());
    return e.code() == xidx::ErrorCode::CorrectnessFailure ? kExitCorrectness : kExitInput;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  }
  return kExitUsage;
}
