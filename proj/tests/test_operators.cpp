#include <gtest/gtest.h>

#include "support.hpp"

using namespace pt_test;

namespace {

using Rows = std::vector<std::vector<Value>>;

Dataset drop(const Dataset& d, std::vector<FeatureName> f) { return drop_features(d, f); }

}  // namespace

// Tables below are the printed results of the worked examples.

TEST(WorkedExample, SelectThenProjectNullFreeFeatures) {
  auto s = select(customers(), parse_expr("Age < 30"));
  auto p = project(s, parse_feature_predicate("nullrate < 0.000001"));
  EXPECT_EQ(p.schema(), (std::vector<FeatureName>{"CId", "Gender", "Age"}));
  EXPECT_EQ(rows_of(p), (Rows{{113, "F", 24}, {241, "M", 28}}));
  EXPECT_EQ(std::vector<RowId>(p.row_ids().begin(), p.row_ids().end()), (std::vector<RowId>{0, 1}));
}

TEST(WorkedExample, VerticalAugmentationAgeRange) {
  VaSpec v;
  v.y = {"ageRange"};
  v.expr = parse_expr("if(Age < 25, 'young', 'adult')");
  auto d = vaugment(customers(), v);
  EXPECT_EQ(d.column("ageRange"), (Column{Value("young"), Value("adult"), N, Value("adult")}));
}

TEST(WorkedExample, HorizontalAugmentationAverageAgeByGender) {
  RowIdAllocator alloc;
  alloc.reserve_through(3);
  auto r = haugment(customers(), HaSpec{{"Gender"}, Aggregate::avg, "Age"}, &alloc);
  EXPECT_EQ(rows_of(r.data), (Rows{{113, "F", 24, 98567},
                                   {241, "M", 28, N},
                                   {375, "C", N, 32768},
                                   {578, "F", 44, 32768},
                                   {N, "F", 34, N},
                                   {N, "M", 28, N}}));
  ASSERT_EQ(r.groups.size(), 2u);
  EXPECT_EQ(r.groups[0], (Group{4, {0, 3}}));
  EXPECT_EQ(r.groups[1], (Group{5, {1}}));
}

TEST(WorkedExample, ImputeMostFrequentZip) {
  TransformSpec t;
  t.fn = TransformFn::fillna_most_frequent;
  t.x = {"Zip"};
  auto d = transform(customers(), t);
  EXPECT_EQ(d.column("Zip"), (Column{98567, 32768, 32768, 32768}));
}

TEST(WorkedExample, InnerJoinOnCustomerId) {
  auto d = join(customers(), customer_names(), JoinSpec{JoinType::inner, {{"CId", "CId"}}});
  EXPECT_EQ(d.schema(), (std::vector<FeatureName>{"CId", "Gender", "Age", "Zip", "Name"}));
  EXPECT_EQ(rows_of(d), (Rows{{241, "M", 28, N, "Jim"}, {578, "F", 44, 32768, "Mary"}}));
}

TEST(WorkedExample, AppendPadsMissingFeatures) {
  auto d = append(customers(), customer_names());
  EXPECT_EQ(d.schema(), (std::vector<FeatureName>{"CId", "Gender", "Age", "Zip", "Name"}));
  EXPECT_EQ(rows_of(d), (Rows{{113, "F", 24, 98567, N},
                              {241, "M", 28, N, N},
                              {375, "C", N, 32768, N},
                              {578, "F", 44, 32768, N},
                              {241, N, N, N, "Jim"},
                              {578, N, N, N, "Mary"}}));
}

TEST(Project, EmptySchemaIsAnError) {
  EXPECT_THROW(project(customers(), parse_feature_predicate("nullrate < 0")), ValidationError);
  EXPECT_THROW(drop(customers(), {"Nope"}), UnknownFeature);
}

TEST(Select, KeepsRowIdsAndOrder) {
  auto d = select(customers(), parse_expr("Zip == 32768"));
  EXPECT_EQ(std::vector<RowId>(d.row_ids().begin(), d.row_ids().end()), (std::vector<RowId>{2, 3}));
}

TEST(Vaugment, OneHotSplitStringIndex) {
  VaSpec oh;
  oh.fn = VaFunction::one_hot;
  oh.x = {"Gender"};
  auto d = vaugment(customers(), oh);
  EXPECT_EQ(d.schema(), (std::vector<FeatureName>{"CId", "Gender", "Age", "Zip", "Gender_C", "Gender_F", "Gender_M"}));
  EXPECT_EQ(d.column("Gender_F"), (Column{1, 0, 0, 1}));

  auto s = Dataset::from_rows({"ps"}, {{"male:single"}, {N}, {"female"}});
  VaSpec sp;
  sp.fn = VaFunction::split;
  sp.x = {"ps"};
  sp.y = {"sex", "status"};
  auto t = vaugment(s, sp);
  EXPECT_EQ(t.column("sex"), (Column{Value("male"), N, Value("female")}));
  EXPECT_EQ(t.column("status"), (Column{Value("single"), N, N}));

  VaSpec si;
  si.fn = VaFunction::string_index;
  si.x = {"Gender"};
  si.y = {"g"};
  EXPECT_EQ(vaugment(customers(), si).column("g"), (Column{1, 2, 0, 1}));
}

TEST(Vaugment, RejectsExistingOutput) {
  VaSpec v;
  v.y = {"Age"};
  v.expr = parse_expr("1");
  EXPECT_THROW(vaugment(customers(), v), ValidationError);
}

TEST(Haugment, AggregatesAndNullKeys) {
  auto d = Dataset::from_rows({"k", "v"}, {{1, 2}, {1, 4}, {N, 9}, {2, N}, {2, N}});
  auto sum = haugment(d, HaSpec{{"k"}, Aggregate::sum, "v"});
  ASSERT_EQ(sum.groups.size(), 1u);  // group 2 has only Null targets
  EXPECT_EQ(sum.data.at(5, 1), Value(6));
  auto cnt = haugment(d, HaSpec{{"k"}, Aggregate::count, "v"});
  ASSERT_EQ(cnt.groups.size(), 2u);
  EXPECT_EQ(cnt.data.at(6, 1), Value(2));
  auto mx = haugment(d, HaSpec{{}, Aggregate::max, "v"});
  ASSERT_EQ(mx.groups.size(), 1u);
  EXPECT_EQ(mx.data.at(5, 1), Value(9));
  EXPECT_EQ(mx.groups[0].ginput.size(), 5u);
  EXPECT_THROW(haugment(d, HaSpec{{"k"}, Aggregate::avg, "k"}), ValidationError);
  auto s = Dataset::from_rows({"k", "v"}, {{1, "x"}});
  EXPECT_THROW(haugment(s, HaSpec{{"k"}, Aggregate::avg, "v"}), TypeError);
}

TEST(Transform, Functions) {
  auto d = Dataset::from_rows({"x", "s"}, {{1, " a "}, {N, "b"}, {3, N}, {5, "b"}});
  auto run = [&](TransformFn fn, const char* f, auto&& tweak) {
    TransformSpec t;
    t.fn = fn;
    t.x = {f};
    tweak(t);
    return transform(d, t).column(f);
  };
  auto none = [](TransformSpec&) {};
  EXPECT_EQ(run(TransformFn::fillna_mean, "x", none), (Column{1, 3, 3, 5}));
  EXPECT_EQ(run(TransformFn::fillna_constant, "x", [](TransformSpec& t) { t.constant = Value(0); }), (Column{1, 0, 3, 5}));
  EXPECT_EQ(run(TransformFn::binarize, "x", [](TransformSpec& t) { t.threshold = 2; }), (Column{0, N, 1, 1}));
  EXPECT_EQ(run(TransformFn::normalize_minmax, "x", none), (Column{0.0, N, 0.5, 1.0}));
  EXPECT_EQ(run(TransformFn::discretize, "x", [](TransformSpec& t) { t.bins = 2; }), (Column{0, N, 1, 1}));
  EXPECT_EQ(run(TransformFn::strip, "s", none), (Column{Value("a"), Value("b"), N, Value("b")}));
  EXPECT_EQ(run(TransformFn::string_index, "s", none), (Column{0, 1, N, 1}));
  EXPECT_EQ(run(TransformFn::value_map, "s", [](TransformSpec& t) { t.mapping = {{"b", Value("B")}}; }),
            (Column{Value(" a "), Value("B"), N, Value("B")}));
  EXPECT_EQ(run(TransformFn::expr, "x", [](TransformSpec& t) { t.expr = parse_expr("@ * 10"); }), (Column{10, N, 30, 50}));
  auto z = run(TransformFn::normalize_zscore, "x", none);
  EXPECT_DOUBLE_EQ(z[0].as_number() + z[3].as_number(), 0.0);
  EXPECT_THROW(run(TransformFn::fillna_mean, "s", none), TypeError);
}

TEST(Join, TypesPadsAndCollisions) {
  auto l = Dataset::from_rows({"k", "v"}, {{1, "a"}, {2, "b"}, {N, "c"}});
  auto r = Dataset::from_rows({"k", "v"}, {{2, "x"}, {2, "y"}, {3, "z"}, {N, "n"}});
  auto full = join(l, r, JoinSpec{JoinType::full, {{"k", "k"}}});
  EXPECT_EQ(full.schema(), (std::vector<FeatureName>{"k", "v_l", "v_r"}));
  EXPECT_EQ(rows_of(full),
            (Rows{{1, "a", N}, {2, "b", "x"}, {2, "b", "y"}, {N, "c", N}, {3, N, "z"}, {N, N, "n"}}));
  EXPECT_EQ(join(l, r, JoinSpec{JoinType::inner, {{"k", "k"}}}).rows(), 2u);
  EXPECT_EQ(join(l, r, JoinSpec{JoinType::left, {{"k", "k"}}}).rows(), 4u);
  EXPECT_EQ(join(l, r, JoinSpec{JoinType::right, {{"k", "k"}}}).rows(), 4u);
  auto r2 = Dataset::from_rows({"kk", "w"}, {{1, 7}});
  auto diffnames = join(l, r2, JoinSpec{JoinType::inner, {{"k", "kk"}}});
  EXPECT_EQ(diffnames.schema(), (std::vector<FeatureName>{"k", "v", "kk", "w"}));
  EXPECT_THROW(join(l, r, JoinSpec{JoinType::inner, {}}), ValidationError);
  EXPECT_THROW(join(l, r, JoinSpec{JoinType::inner, {{"q", "k"}}}), UnknownFeature);
}

TEST(Apply, AllocatesFreshIds) {
  RowIdAllocator alloc;
  alloc.reserve_through(9);
  auto c = customers(), n = customer_names();
  auto out = apply_operator(AppendSpec{}, {&c, &n}, &alloc).data;
  EXPECT_EQ(out.row_ids()[0], 10u);
  EXPECT_EQ(alloc.peek(), 16u);
  EXPECT_THROW(apply_operator(AppendSpec{}, {&c}), ValidationError);
}

TEST(Describe, NamesOperators) {
  TransformSpec t;
  t.fn = TransformFn::fillna_most_frequent;
  t.x = {"Zip"};
  EXPECT_NE(describe(t).find("fillna"), std::string::npos);
  EXPECT_NE(describe(JoinSpec{JoinType::left, {{"a", "a"}}}).find("left"), std::string::npos);
}
