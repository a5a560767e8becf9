#include <gtest/gtest.h>

#include <set>

#include "xidx/generate.hpp"
#include "xidx/summary.hpp"
#include "xidx/warehouse.hpp"

namespace xidx::wh {
namespace {

constexpr const char* kDims = R"(<dimensionData>
  <dimension name="store">
    <member id="S1" level="shop" parent="C1"><attribute name="name" value="Part-Dieu"/></member>
    <member id="S2" level="shop" parent="C2"><attribute name="name" value="Vieux Port"/></member>
    <member id="C1" level="city"><attribute name="name" value="Lyon"/></member>
    <member id="C2" level="city"><attribute name="name" value="Marseille"/></member>
  </dimension>
  <dimension name="time">
    <member id="T1" level="day"><attribute name="date" value="2024-01-02"/></member>
    <member id="T2" level="day"><attribute name="date" value="2024-01-03"/></member>
  </dimension>
</dimensionData>)";

constexpr const char* kOneFact = R"(<CubeFacts>
  <cell><dimension dim="store" node="S1"/><dimension dim="time" node="T1"/><measure name="amount" value="5.0"/></cell>
</CubeFacts>)";

DimensionSet example_dims() { return load_dimensions(parse_document(kDims)); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ConfigError;
}

AnalyticQuery sum_by_city() {
  AnalyticQuery q;
  q.groupBy.push_back({"store", "city", "name"});
  q.aggregate = {AggregateFn::sum, "amount"};
  return q;
}

// Attribute lookup by following parentId strings through a flat member map.
std::optional<std::string> lookup_by_id_walk(const DimensionSet& dims, const std::string& dim,
                                             std::string member, const std::string& level,
                                             const std::string& attr) {
  std::map<std::string, const DimensionMember*> byId;
  for (const auto& m : dims.at(dim).members()) byId[m.memberId] = &m;
  for (int guard = 0; guard < 64; ++guard) {
    const DimensionMember* m = byId.at(member);
    if (m->levelName == level) {
      auto it = m->attributes.find(attr);
      return it == m->attributes.end() ? std::nullopt : std::optional(it->second);
    }
    if (!m->parentId) return std::nullopt;
    member = *m->parentId;
  }
  return std::nullopt;
}

TEST(Decimal, ParseAndPrint) {
  EXPECT_EQ(Decimal::parse("5.0")->to_string(), "5");
  EXPECT_EQ(Decimal::parse("-0.25")->to_string(), "-0.25");
  EXPECT_EQ(Decimal::parse("12.340")->to_string(), "12.34");
  EXPECT_TRUE(Decimal::parse("1.5")->is_integer() == false);
  EXPECT_TRUE(Decimal::parse("7")->is_integer());
  EXPECT_FALSE(Decimal::parse("abc"));
  EXPECT_FALSE(Decimal::parse("1.2.3"));
  EXPECT_FALSE(Decimal::parse(""));
  EXPECT_FALSE(Decimal::parse("."));
  EXPECT_EQ(*Decimal::parse("1e3"), Decimal::from_int(1000));
  EXPECT_EQ(*Decimal::parse("0.1") + *Decimal::parse("0.2"), *Decimal::parse("0.3"));
}

TEST(Decimal, SumIsOrderIndependent) {
  gen::Rng rng(3);
  std::vector<Decimal> xs;
  for (int i = 0; i < 500; ++i) {
    xs.push_back(*Decimal::parse(std::to_string(rng.below(100000)) + "." + std::to_string(rng.below(1000))));
  }
  Decimal fwd, bwd;
  for (const auto& x : xs) fwd += x;
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) bwd += *it;
  EXPECT_EQ(fwd, bwd);
}

TEST(LoadDimensions, ExampleChain) {
  const DimensionSet dims = example_dims();
  const Dimension& store = dims.at("store");
  ASSERT_EQ(store.members().size(), 4u);
  const DimensionMember* s1 = store.find("S1");
  ASSERT_NE(s1, nullptr);
  EXPECT_EQ(s1->parentId, "C1");
  EXPECT_EQ(store.members()[static_cast<std::size_t>(store.parent_index(store.index_of(*s1)))].memberId, "C1");
}

TEST(LoadDimensions, Errors) {
  EXPECT_EQ(code_of([] {
              load_dimensions(parse_document(
                  R"(<dimensionData><dimension name="d"><member id="a" level="x" parent="zz"/></dimension></dimensionData>)"));
            }),
            ErrorCode::DanglingParent);
  EXPECT_EQ(code_of([] {
              load_dimensions(parse_document(
                  R"(<dimensionData><dimension name="d"><member id="a" level="x"/><member id="a" level="y"/></dimension></dimensionData>)"));
            }),
            ErrorCode::DuplicateMemberId);
  EXPECT_EQ(code_of([] {
              load_dimensions(parse_document(
                  R"(<dimensionData><dimension name="d"><member id="a" level="x" parent="b"/><member id="b" level="y" parent="a"/></dimension></dimensionData>)"));
            }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] { load_dimensions(parse_document("<dims/>")); }), ErrorCode::SchemaViolation);
  EXPECT_EQ(code_of([] {
              load_dimensions(parse_document(
                  R"(<dimensionData><dimension name="d"><member id="a"/></dimension></dimensionData>)"));
            }),
            ErrorCode::SchemaViolation);
}

TEST(LoadDimensions, GeneratedRoundTrip) {
  const auto m = gen::generate_star_model({10, 3, 3, 6, 2, 2, 8});
  const DimensionSet again = load_dimensions(parse_document(dimensions_to_xml(m.dims)));
  EXPECT_EQ(again, m.dims);
  EXPECT_EQ(load_facts(parse_document(facts_to_xml(m.facts)), again).cells, m.facts.cells);
}

TEST(LoadFacts, ExampleAndErrors) {
  const DimensionSet dims = example_dims();
  const FactTable f = load_facts(parse_document(kOneFact), dims);
  ASSERT_EQ(f.cells.size(), 1u);
  EXPECT_EQ(f.cells[0].measures.at("amount").value, Decimal::from_int(5));

  EXPECT_EQ(code_of([&] {
              load_facts(parse_document(R"(<CubeFacts><cell><dimension dim="store" node="S1"/></cell></CubeFacts>)"), dims);
            }),
            ErrorCode::MissingDimensionRef);
  EXPECT_EQ(code_of([&] {
              load_facts(parse_document(R"(<CubeFacts><cell><dimension dim="store" node="S9"/><dimension dim="time" node="T1"/></cell></CubeFacts>)"), dims);
            }),
            ErrorCode::DanglingRef);
  EXPECT_EQ(code_of([&] {
              load_facts(parse_document(R"(<CubeFacts><cell><dimension dim="shelf" node="S1"/></cell></CubeFacts>)"), dims);
            }),
            ErrorCode::DanglingRef);
  EXPECT_EQ(code_of([&] {
              load_facts(parse_document(R"(<CubeFacts><cell><dimension dim="store" node="S1"/><dimension dim="time" node="T1"/><measure name="amount" value="lots"/></cell></CubeFacts>)"), dims);
            }),
            ErrorCode::NonNumericMeasure);
}

TEST(LoadFacts, GeneratedCountPreserved) {
  const auto docs = gen::generate_star({1000, 3, 3, 8, 2, 2, 1});
  const DimensionSet dims = load_dimensions(parse_document(docs.dimensionsXml));
  EXPECT_EQ(load_facts(parse_document(docs.factsXml), dims).cells.size(), 1000u);
}

TEST(JoinIndex, InlinesAncestorAttributes) {
  const DimensionSet dims = example_dims();
  const JoinIndex idx = build_join_index(load_facts(parse_document(kOneFact), dims), dims);
  ASSERT_EQ(idx.size(), 1u);
  EXPECT_EQ(idx.inlined(idx.cells()[0], "store", "city.name"), "Lyon");
  EXPECT_EQ(idx.inlined(idx.cells()[0], "store", "shop.name"), "Part-Dieu");
  EXPECT_EQ(idx.inlined(idx.cells()[0], "time", "day.date"), "2024-01-02");
  EXPECT_FALSE(idx.inlined(idx.cells()[0], "store", "day.date"));
}

TEST(JoinIndex, EmptyWarehouse) {
  const DimensionSet dims = example_dims();
  const JoinIndex idx = build_join_index(FactTable{}, dims);
  EXPECT_EQ(idx.size(), 0u);
  EXPECT_TRUE(execute_on_index(rewrite_query(AnalyticQuery{}, idx.schema()), idx).rows.empty());
}

TEST(JoinIndex, CompleteAgainstIdWalk) {
  const auto m = gen::generate_star_model({300, 3, 3, 5, 2, 2, 4});
  const JoinIndex idx = build_join_index(m.facts, m.dims);
  ASSERT_EQ(idx.size(), m.facts.cells.size());
  const Schema& s = idx.schema();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& cell = idx.cells()[i];
    for (const auto& [d, levels] : s.attributes) {
      for (const auto& [l, attrs] : levels) {
        for (const auto& a : attrs) {
          ASSERT_EQ(idx.inlined(cell, d, inlined_key(l, a)),
                    lookup_by_id_walk(m.dims, d, m.facts.cells[i].refs.at(d), l, a));
        }
      }
    }
  }
}

TEST(JoinIndex, XmlRoundTripAndSchemaGuard) {
  const auto m = gen::generate_star_model({200, 3, 3, 4, 2, 2, 6});
  const JoinIndex idx = build_join_index(m.facts, m.dims);
  const JoinIndex back = load_join_index(parse_document(join_index_to_xml(idx)));
  EXPECT_EQ(back.schema_hash(), idx.schema_hash());
  EXPECT_EQ(back.cells(), idx.cells());

  std::string tampered = join_index_to_xml(idx);
  tampered.replace(tampered.find("schemaHash=\"") + 12, 4, "zzzz");
  EXPECT_EQ(code_of([&] { load_join_index(parse_document(tampered)); }), ErrorCode::SchemaMismatch);
}

TEST(Rewrite, SelectionBecomesInlinedPredicate) {
  const DimensionSet dims = example_dims();
  const Schema schema = schema_of(dims, load_facts(parse_document(kOneFact), dims));
  AnalyticQuery q;
  q.selections.push_back({{"store", "city", "name"}, CompareOp::eq, "Lyon"});
  const RewrittenQuery r = rewrite_query(q, schema);
  ASSERT_EQ(r.ops.size(), 3u);
  EXPECT_EQ(r.ops[0].kind, PlanOp::Kind::scan_index);
  EXPECT_EQ(r.ops[1].kind, PlanOp::Kind::filter_inlined);
  EXPECT_EQ(r.ops[1].dim, "store");
  EXPECT_EQ(r.ops[1].key, "city.name");
  EXPECT_EQ(r.ops[1].value, "Lyon");
  EXPECT_EQ(r.ops[2].kind, PlanOp::Kind::aggregate);
  EXPECT_EQ(count_member_lookups(plan_with_joins(q, schema)), 1u);
  EXPECT_EQ(count_member_lookups(r), 0u);
}

TEST(Rewrite, NoSelectionsIsFullScan) {
  const DimensionSet dims = example_dims();
  const Schema schema = schema_of(dims, load_facts(parse_document(kOneFact), dims));
  const RewrittenQuery r = rewrite_query(sum_by_city(), schema);
  ASSERT_EQ(r.ops.size(), 3u);
  EXPECT_EQ(r.ops[1].kind, PlanOp::Kind::group_inlined);
  EXPECT_EQ(r.ops[2].aggregate, sum_by_city().aggregate);
}

TEST(Rewrite, UnknownAttribute) {
  const DimensionSet dims = example_dims();
  const Schema schema = schema_of(dims, FactTable{});
  AnalyticQuery q;
  q.groupBy.push_back({"store", "region", "name"});
  EXPECT_EQ(code_of([&] { rewrite_query(q, schema); }), ErrorCode::UnknownAttribute);
  q.groupBy.clear();
  q.aggregate = {AggregateFn::sum, "amount"};
  EXPECT_EQ(code_of([&] { rewrite_query(q, schema); }), ErrorCode::UnknownAttribute);
}

TEST(Rewrite, RandomPlansAreJoinFree) {
  const auto m = gen::generate_star_model({50, 3, 3, 6, 2, 2, 12});
  const Schema schema = schema_of(m.dims, m.facts);
  gen::Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const AnalyticQuery q = gen::random_analytic_query(m.dims, schema, rng);
    const RewrittenQuery r = rewrite_query(q, schema);
    ASSERT_EQ(count_member_lookups(r), 0u) << to_string(r);
    ASSERT_TRUE(reads_only_inlined(r)) << to_string(r);
    ASSERT_EQ(count_member_lookups(plan_with_joins(q, schema)), q.selections.size() + q.groupBy.size());
  }
}

TEST(Execute, SingleFactExample) {
  const DimensionSet dims = example_dims();
  const FactTable facts = load_facts(parse_document(kOneFact), dims);
  const ResultTable joined = execute_with_joins(sum_by_city(), facts, dims);
  ASSERT_EQ(joined.rows.size(), 1u);
  EXPECT_EQ(joined.rows.at({"Lyon"}).exact, Decimal::from_int(5));
  const JoinIndex idx = build_join_index(facts, dims);
  EXPECT_EQ(execute_on_index(rewrite_query(sum_by_city(), idx.schema()), idx), joined);
}

TEST(Execute, SelectionExcludingEverything) {
  const DimensionSet dims = example_dims();
  const FactTable facts = load_facts(parse_document(kOneFact), dims);
  AnalyticQuery q = sum_by_city();
  q.selections.push_back({{"store", "city", "name"}, CompareOp::eq, "Paris"});
  EXPECT_TRUE(execute_with_joins(q, facts, dims).rows.empty());
  const JoinIndex idx = build_join_index(facts, dims);
  EXPECT_TRUE(execute_on_index(rewrite_query(q, idx.schema()), idx).rows.empty());
}

TEST(Execute, NullPolicyForMissingMeasures) {
  const DimensionSet dims = example_dims();
  const FactTable facts = load_facts(parse_document(R"(<CubeFacts>
    <cell><dimension dim="store" node="S1"/><dimension dim="time" node="T1"/><measure name="amount" value="2"/></cell>
    <cell><dimension dim="store" node="S1"/><dimension dim="time" node="T2"/></cell>
    <cell><dimension dim="store" node="S2"/><dimension dim="time" node="T2"/><measure name="qty" value="1"/></cell>
  </CubeFacts>)"), dims);
  const JoinIndex idx = build_join_index(facts, dims);
  for (auto fn : {AggregateFn::count, AggregateFn::sum, AggregateFn::avg, AggregateFn::min, AggregateFn::max}) {
    AnalyticQuery q = sum_by_city();
    q.aggregate.fn = fn;
    const ResultTable joined = execute_with_joins(q, facts, dims);
    EXPECT_EQ(execute_on_index(rewrite_query(q, idx.schema()), idx), joined);
    const AggValue& lyon = joined.rows.at({"Lyon"});
    const AggValue& marseille = joined.rows.at({"Marseille"});
    if (fn == AggregateFn::count) {
      EXPECT_EQ(lyon.exact, Decimal::from_int(2));
      EXPECT_EQ(marseille.exact, Decimal::from_int(1));
    } else {
      EXPECT_TRUE(marseille.is_null());
      if (fn == AggregateFn::avg) {
        EXPECT_DOUBLE_EQ(*lyon.approx, 2.0);
      } else {
        EXPECT_EQ(lyon.exact, Decimal::from_int(2));
      }
    }
  }
}

TEST(Execute, EmptyLevel) {
  const DimensionSet dims = load_dimensions(parse_document(R"(<dimensionData>
    <dimension name="p"><member id="x" level="leaf"/><member id="y" level="leaf" parent="g"/><member id="g" level="group"><attribute name="n" value="G"/></member></dimension>
  </dimensionData>)"));
  const FactTable facts = load_facts(parse_document(
      R"(<CubeFacts><cell><dimension dim="p" node="x"/></cell></CubeFacts>)"), dims);
  AnalyticQuery q;
  q.groupBy.push_back({"p", "group", "n"});
  EXPECT_EQ(code_of([&] { execute_with_joins(q, facts, dims); }), ErrorCode::EmptyLevel);
  const JoinIndex idx = build_join_index(facts, dims);
  EXPECT_EQ(code_of([&] { execute_on_index(rewrite_query(q, idx.schema()), idx); }), ErrorCode::EmptyLevel);
}

TEST(Execute, CountOverGeneratedFacts) {
  const auto m = gen::generate_star_model({1000, 3, 3, 8, 2, 2, 1});
  const ResultTable t = execute_with_joins(AnalyticQuery{}, m.facts, m.dims);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows.at({}).exact, Decimal::from_int(1000));
}

TEST(Execute, SumMatchesHandComputedTotals) {
  const auto m = gen::generate_star_model({500, 2, 2, 4, 1, 2, 9});
  AnalyticQuery q;
  q.groupBy.push_back({"d0", "L1", "a0"});
  q.aggregate = {AggregateFn::sum, "m1"};
  std::map<std::string, double> expected;
  for (const auto& cell : m.facts.cells) {
    const auto key = lookup_by_id_walk(m.dims, "d0", cell.refs.at("d0"), "L1", "a0");
    expected[*key] += std::stod(cell.measures.at("m1").text);
  }
  const ResultTable t = execute_with_joins(q, m.facts, m.dims);
  ASSERT_EQ(t.rows.size(), expected.size());
  for (const auto& [k, v] : expected) EXPECT_NEAR(t.rows.at({k}).exact->to_double(), v, 1e-6);
}

TEST(Execute, IndexMatchesJoinsOnRandomQueries) {
  const auto m = gen::generate_star_model({1000, 3, 3, 8, 2, 2, 1});
  const JoinIndex idx = build_join_index(m.facts, m.dims);
  gen::Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    const AnalyticQuery q = gen::random_analytic_query(m.dims, idx.schema(), rng);
    const ResultTable a = execute_with_joins(q, m.facts, m.dims);
    const ResultTable b = execute_on_index(rewrite_query(q, idx.schema()), idx);
    std::string diff;
    ASSERT_TRUE(results_equivalent(a, b, 1e-9, &diff)) << diff << "\n" << to_json(q).dump();
  }
}

TEST(Execute, IndexRejectsForeignOrUnrewrittenPlans) {
  const auto m = gen::generate_star_model({20, 2, 2, 3, 1, 1, 2});
  const JoinIndex idx = build_join_index(m.facts, m.dims);
  const auto other = gen::generate_star_model({20, 2, 2, 3, 2, 1, 2});
  const JoinIndex otherIdx = build_join_index(other.facts, other.dims);
  AnalyticQuery q;
  q.groupBy.push_back({"d0", "L0", "a0"});
  EXPECT_EQ(code_of([&] { execute_on_index(rewrite_query(q, otherIdx.schema()), idx); }),
            ErrorCode::SchemaMismatch);
  EXPECT_EQ(code_of([&] { execute_on_index(plan_with_joins(q, idx.schema()), idx); }),
            ErrorCode::SchemaMismatch);
}

TEST(Query, JsonRoundTripAndErrors) {
  const auto m = gen::generate_star_model({10, 3, 3, 4, 2, 2, 5});
  const Schema schema = schema_of(m.dims, m.facts);
  gen::Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const AnalyticQuery q = gen::random_analytic_query(m.dims, schema, rng);
    EXPECT_EQ(query_from_json(nlohmann::json::parse(to_json(q).dump())), q);
  }
  EXPECT_EQ(code_of([] { query_from_json(nlohmann::json::parse(R"({"aggregate":{"fn":"MEDIAN"}})")); }),
            ErrorCode::InvalidQuery);
  EXPECT_EQ(code_of([] { query_from_json(nlohmann::json::parse(R"({"selections":[{"dim":"d"}],"aggregate":{"fn":"COUNT"}})")); }),
            ErrorCode::InvalidQuery);
}

TEST(CompareValues, NumericWhenBothNumeric) {
  EXPECT_TRUE(compare_values("9", CompareOp::lt, "10"));
  EXPECT_FALSE(compare_values("b9", CompareOp::lt, "b10"));
  EXPECT_TRUE(compare_values("1.0", CompareOp::eq, "1"));
  EXPECT_TRUE(compare_values("abc", CompareOp::ne, "abd"));
}

TEST(ResultsEquivalent, Tolerances) {
  ResultTable a, b;
  a.fn = b.fn = AggregateFn::sum;
  a.rows[{"x"}].exact = *Decimal::parse("0.3");
  b.rows[{"x"}].exact = *Decimal::parse("0.300000001");
  EXPECT_FALSE(results_equivalent(a, b, 1e-9));
  EXPECT_TRUE(results_equivalent(a, b, 1e-6));
  a.rows[{"x"}].exact = Decimal::from_int(3);
  b.rows[{"x"}].exact = Decimal::from_int(4);
  EXPECT_FALSE(results_equivalent(a, b, 0.5));
}

// Serializing cells into one document and summarizing it with a 1-index
// collapses every cell into one node: the per-cell reference combinations
// survive only in the data.
TEST(FigureOne, OneIndexLosesDimensionCombinations) {
  const auto docs = gen::generate_star({40, 3, 2, 4, 1, 1, 3});
  const Document factsDoc = parse_document(docs.factsXml);
  const SummaryGraph one = build_one_index(factsDoc);
  std::size_t cellNodes = 0;
  for (const auto& s : one.nodes) {
    if (label_path(factsDoc, s.extent.front()).to_string() == "/CubeFacts/cell") ++cellNodes;
  }
  EXPECT_EQ(cellNodes, 1u);

  const FactTable facts = load_facts(factsDoc, load_dimensions(parse_document(docs.dimensionsXml)));
  std::set<std::map<std::string, std::string>> combos;
  for (const auto& c : facts.cells) combos.insert(c.refs);
  EXPECT_GE(combos.size(), 2u);
}

}  // namespace
}  // namespace xidx::wh
