#pragma once

// Correctness-gated benchmark harness. Every timed answer is compared with
// its oracle before a row is recorded; a mismatch aborts that scenario.
// Column layout and JSON schema are described in docs/bench-format.md.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xidx/error.hpp"
#include "xidx/generate.hpp"
#include "xidx/path_query.hpp"
#include "xidx/summary.hpp"
#include "xidx/twig.hpp"
#include "xidx/warehouse.hpp"

namespace xidx::bench {

inline const std::vector<std::string>& known_scenarios() {
  static const std::vector<std::string> names = {"path-naive", "path-dataguide", "path-ak",
                                                 "twig-join",  "wh-join",        "wh-index"};
  return names;
}

struct BenchConfig {
  std::vector<std::string> scenarios;
  std::uint32_t warmup = 1;
  std::uint32_t repetitions = 5;
  std::uint32_t queries = 10;
  std::uint64_t seed = 1;
  std::uint32_t k = 2;
  std::string twigIndex = "dataguide";
  bool parallel = false;
  gen::TreeGenParams tree;
  gen::StarGenParams star;
};

struct BenchRow {
  std::string scenario;
  std::uint32_t query = 0;
  std::string queryText;
  std::uint64_t corpusSize = 0;
  std::string indexKind;
  double buildMillis = 0;
  double queryMillisMedian = 0;
  double queryMillisP95 = 0;
  std::uint64_t resultCount = 0;
  bool exact = true;
  bool checked = false;
  std::optional<double> speedup;  // wh-index rows: wh-join median / wh-index median
  bool flagged = false;           // speedup below 1.0
};

struct ScenarioFailure {
  std::string scenario;
  std::string diff;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<ScenarioFailure> failures;
};

inline BenchConfig config_from_json(const nlohmann::json& j) {
  try {
    BenchConfig c;
    c.scenarios = j.value("scenarios", std::vector<std::string>{});
    for (const auto& s : c.scenarios) {
      const auto& known = known_scenarios();
      if (std::find(known.begin(), known.end(), s) == known.end()) {
        throw Error(ErrorCode::ConfigError, "unknown scenario '" + s + "'");
      }
    }
    c.warmup = j.value("warmup", c.warmup);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.queries = j.value("queries", c.queries);
    c.seed = j.value("seed", c.seed);
    c.k = j.value("k", c.k);
    c.twigIndex = j.value("twigIndex", c.twigIndex);
    c.parallel = j.value("parallel", c.parallel);
    if (c.twigIndex != "dataguide" && c.twigIndex != "ak" && c.twigIndex != "one") {
      throw Error(ErrorCode::ConfigError, "twigIndex must be dataguide, ak or one");
    }
    if (c.repetitions == 0) throw Error(ErrorCode::ConfigError, "repetitions must be positive");
    if (j.contains("tree")) {
      const auto& t = j["tree"];
      c.tree.nodeCount = t.value("nodeCount", c.tree.nodeCount);
      c.tree.maxDepth = t.value("maxDepth", c.tree.maxDepth);
      c.tree.maxFanout = t.value("maxFanout", c.tree.maxFanout);
      c.tree.labelAlphabetSize = t.value("labelAlphabetSize", c.tree.labelAlphabetSize);
      c.tree.seed = t.value("seed", c.tree.seed);
    }
    if (j.contains("star")) {
      const auto& s = j["star"];
      c.star.factCount = s.value("factCount", c.star.factCount);
      c.star.dimensionCount = s.value("dimensionCount", c.star.dimensionCount);
      c.star.levelsPerDimension = s.value("levelsPerDimension", c.star.levelsPerDimension);
      c.star.membersPerLevel = s.value("membersPerLevel", c.star.membersPerLevel);
      c.star.attributesPerLevel = s.value("attributesPerLevel", c.star.attributesPerLevel);
      c.star.measureCount = s.value("measureCount", c.star.measureCount);
      c.star.seed = s.value("seed", c.star.seed);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double millis_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Nearest-rank percentile over a copy of the samples.
inline double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct Timing {
  double median = 0;
  double p95 = 0;
};

template <typename Fn>
Timing time_query(const BenchConfig& c, Fn&& fn) {
  for (std::uint32_t i = 0; i < c.warmup; ++i) fn();
  std::vector<double> samples;
  samples.reserve(c.repetitions);
  for (std::uint32_t i = 0; i < c.repetitions; ++i) {
    const auto t0 = Clock::now();
    fn();
    samples.push_back(millis_since(t0));
  }
  return {median(samples), percentile(samples, 0.95)};
}

// Runs one row per query, concurrently when the config asks for it. Each
// task owns its timing samples; rows are merged in query order.
inline std::vector<BenchRow> run_queries(const BenchConfig& c, std::uint32_t count,
                                         const std::function<BenchRow(std::uint32_t)>& one) {
  std::vector<BenchRow> rows;
  if (!c.parallel) {
    for (std::uint32_t i = 0; i < count; ++i) rows.push_back(one(i));
    return rows;
  }
  std::vector<std::future<BenchRow>> tasks;
  for (std::uint32_t i = 0; i < count; ++i) tasks.push_back(std::async(std::launch::async, one, i));
  for (auto& t : tasks) rows.push_back(t.get());
  return rows;
}

inline std::string ids_diff(const std::vector<NodeId>& got, const std::vector<NodeId>& want) {
  std::ostringstream os;
  os << "got " << got.size() << " nodes, oracle " << want.size() << " nodes";
  std::vector<NodeId> extra, missing;
  std::set_difference(got.begin(), got.end(), want.begin(), want.end(), std::back_inserter(extra));
  std::set_difference(want.begin(), want.end(), got.begin(), got.end(), std::back_inserter(missing));
  if (!extra.empty()) os << "; first extra node " << extra.front();
  if (!missing.empty()) os << "; first missing node " << missing.front();
  return os.str();
}

class Runner {
 public:
  explicit Runner(const BenchConfig& c) : c_(c) {}

  BenchReport run() {
    BenchReport report;
    for (const auto& s : c_.scenarios) {
      try {
        auto rows = run_scenario(s);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::CorrectnessFailure) throw;
        report.failures.push_back({s, e.what()});
      }
    }
    attach_speedups(report);
    return report;
  }

 private:
  const Document& tree() {
    if (!tree_) tree_ = gen::generate_tree(c_.tree);
    return *tree_;
  }

  const gen::StarModel& star() {
    if (!star_) {
      star_ = gen::generate_star_model(c_.star);
      gen::Rng rng(c_.seed ^ 0x5eed);
      const wh::Schema schema = wh::schema_of(star_->dims, star_->facts);
      for (std::uint32_t i = 0; i < c_.queries; ++i) {
        analytic_.push_back(gen::random_analytic_query(star_->dims, schema, rng));
      }
    }
    return *star_;
  }

  std::vector<PathQuery> path_queries(bool twig) {
    gen::Rng rng(c_.seed ^ (twig ? 0x7e1cULL : 0xa11ULL));
    std::vector<PathQuery> qs;
    for (std::uint32_t i = 0; i < c_.queries; ++i) {
      qs.push_back(twig ? gen::random_twig(tree(), rng, 2, 4)
                        : gen::random_anchored_query(tree(), rng));
    }
    return qs;
  }

  [[noreturn]] static void fail(const std::string& scenario, std::uint32_t q,
                                const std::string& text, const std::string& diff) {
    throw Error(ErrorCode::CorrectnessFailure,
                scenario + " query " + std::to_string(q) + " (" + text + "): " + diff);
  }

  std::vector<BenchRow> run_scenario(const std::string& s) {
    if (s == "path-naive" || s == "path-dataguide" || s == "path-ak" || s == "twig-join") {
      return run_path(s);
    }
    return run_warehouse(s);
  }

  std::vector<BenchRow> run_path(const std::string& s) {
    const Document& doc = tree();
    const auto qs = path_queries(s == "twig-join");
    std::optional<SummaryGraph> idx;
    double build = 0;
    std::string kind = "none";
    const auto t0 = Clock::now();
    if (s == "path-dataguide" || (s == "twig-join" && c_.twigIndex == "dataguide")) {
      idx = build_dataguide(doc);
    } else if (s == "path-ak" || (s == "twig-join" && c_.twigIndex == "ak")) {
      idx = build_ak_index(doc, c_.k);
    } else if (s == "twig-join") {
      idx = build_one_index(doc);
    }
    if (idx) {
      build = millis_since(t0);
      kind = std::string(to_string(idx->kind));
      if (idx->kind == SummaryKind::a_k) kind += "(" + std::to_string(c_.k) + ")";
    }
    const RegionMap regions = assign_regions(doc);
    const auto all = gen::element_ids(doc);

    return run_queries(c_, static_cast<std::uint32_t>(qs.size()), [&](std::uint32_t i) {
      const PathQuery& q = qs[i];
      const std::string text = to_string(q);
      BenchRow row = make_row(s, i, text, doc.element_count(), kind, build);
      std::vector<NodeId> answer;
      std::vector<NodeId> oracle;
      Timing t;
      if (s == "path-naive") {
        t = time_query(c_, [&] { answer = eval_naive(doc, q); });
        oracle = validate_candidates(doc, q, all);
      } else if (s == "twig-join") {
        t = time_query(c_, [&] { answer = eval_twig(doc, *idx, q, regions); });
        oracle = eval_naive(doc, q);
      } else {
        t = time_query(c_, [&] {
          auto a = eval_on_summary(*idx, q);
          row.exact = a.exact;
          answer = a.exact ? std::move(a.candidates) : validate_candidates(doc, q, a.candidates);
        });
        oracle = eval_naive(doc, q);
      }
      if (answer != oracle) fail(s, i, text, ids_diff(answer, oracle));
      row.queryMillisMedian = t.median;
      row.queryMillisP95 = t.p95;
      row.resultCount = answer.size();
      row.checked = true;
      return row;
    });
  }

  static BenchRow make_row(const std::string& s, std::uint32_t i, const std::string& text,
                           std::uint64_t corpus, const std::string& kind, double build) {
    BenchRow row;
    row.scenario = s;
    row.query = i;
    row.queryText = text;
    row.corpusSize = corpus;
    row.indexKind = kind;
    row.buildMillis = build;
    return row;
  }

  std::vector<BenchRow> run_warehouse(const std::string& s) {
    const gen::StarModel& m = star();
    const auto t0 = Clock::now();
    const wh::JoinIndex idx = wh::build_join_index(m.facts, m.dims);
    const double build = millis_since(t0);
    const bool indexed = s == "wh-index";

    return run_queries(c_, static_cast<std::uint32_t>(analytic_.size()), [&](std::uint32_t i) {
      const wh::AnalyticQuery& q = analytic_[i];
      const std::string text = to_json(q).dump();
      BenchRow row = make_row(s, i, text, m.facts.cells.size(), indexed ? "join_index" : "none",
                              indexed ? build : 0.0);
      wh::ResultTable answer;
      Timing t;
      if (indexed) {
        t = time_query(c_, [&] {
          answer = wh::execute_on_index(wh::rewrite_query(q, idx.schema()), idx);
        });
      } else {
        t = time_query(c_, [&] { answer = wh::execute_with_joins(q, m.facts, m.dims); });
      }
      const wh::ResultTable oracle =
          indexed ? wh::execute_with_joins(q, m.facts, m.dims)
                  : wh::execute_on_index(wh::rewrite_query(q, idx.schema()), idx);
      std::string diff;
      if (!wh::results_equivalent(answer, oracle, 1e-9, &diff)) fail(s, i, text, diff);
      row.queryMillisMedian = t.median;
      row.queryMillisP95 = t.p95;
      row.resultCount = answer.rows.size();
      row.checked = true;
      return row;
    });
  }

  static void attach_speedups(BenchReport& report) {
    for (BenchRow& r : report.rows) {
      if (r.scenario != "wh-index") continue;
      for (const BenchRow& j : report.rows) {
        if (j.scenario != "wh-join" || j.query != r.query) continue;
        if (r.queryMillisMedian > 0) {
          r.speedup = j.queryMillisMedian / r.queryMillisMedian;
          r.flagged = *r.speedup < 1.0;
        }
      }
    }
  }

  const BenchConfig& c_;
  std::optional<Document> tree_;
  std::optional<gen::StarModel> star_;
  std::vector<wh::AnalyticQuery> analytic_;
};

}  // namespace detail

inline BenchReport run_bench(const BenchConfig& config) { return detail::Runner(config).run(); }

inline BenchReport run_bench(const nlohmann::json& config) {
  return run_bench(config_from_json(config));
}

inline std::string csv_header() {
  return "scenario,query,corpus_size,index_kind,build_ms,query_ms_median,query_ms_p95,"
         "result_count,exact,check,speedup,flag";
}

inline std::string to_csv(const BenchReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << csv_header() << '\n';
  for (const BenchRow& row : r.rows) {
    os << row.scenario << ',' << row.query << ',' << row.corpusSize << ',' << row.indexKind << ','
       << row.buildMillis << ',' << row.queryMillisMedian << ',' << row.queryMillisP95 << ','
       << row.resultCount << ',' << (row.exact ? "true" : "false") << ','
       << (row.checked ? "pass" : "none") << ',';
    if (row.speedup) os << *row.speedup;
    os << ',' << (row.flagged ? "slower" : "") << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const BenchReport& r) {
  nlohmann::json j;
  j["version"] = 1;
  j["rows"] = nlohmann::json::array();
  for (const BenchRow& row : r.rows) {
    j["rows"].push_back({{"scenario", row.scenario},
                         {"query", row.query},
                         {"query_text", row.queryText},
                         {"corpus_size", row.corpusSize},
                         {"index_kind", row.indexKind},
                         {"build_ms", row.buildMillis},
                         {"query_ms_median", row.queryMillisMedian},
                         {"query_ms_p95", row.queryMillisP95},
                         {"result_count", row.resultCount},
                         {"exact", row.exact},
                         {"check", row.checked ? "pass" : "none"},
                         {"speedup", row.speedup ? nlohmann::json(*row.speedup) : nlohmann::json()},
                         {"flag", row.flagged ? "slower" : ""}});
  }
  j["failures"] = nlohmann::json::array();
  for (const auto& f : r.failures) j["failures"].push_back({{"scenario", f.scenario}, {"diff", f.diff}});
  return j;
}

}  // namespace xidx::bench
