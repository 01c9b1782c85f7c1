#include <gtest/gtest.h>

#include "support.hpp"

using namespace pt_test;

namespace {

Dataset one_row(Value n1, Value n2, Value s1) {
  return Dataset::from_rows({"n1", "n2", "s1"}, {{std::move(n1), std::move(n2), std::move(s1)}});
}

Value eval1(const std::string& text, const Dataset& d) {
  BoundExpr b(parse_expr(text), d.schema());
  return b.eval(d, 0);
}

bool test1(const std::string& text, const Dataset& d) {
  BoundExpr b(parse_expr(text), d.schema());
  return b.test(d, 0);
}

}  // namespace

TEST(Expr, ArithmeticAndPrecedence) {
  auto d = one_row(6, 4, "x");
  EXPECT_EQ(eval1("n1 + n2 * 2", d), Value(14));
  EXPECT_EQ(eval1("(n1 + n2) * 2", d), Value(20));
  EXPECT_EQ(eval1("n1 - n2 - 1", d), Value(1));
  EXPECT_EQ(eval1("n1 % 4", d), Value(2));
  EXPECT_EQ(eval1("-n1 + 1", d), Value(-5));
  EXPECT_EQ(eval1("abs(n2 - n1)", d), Value(2));
  EXPECT_EQ(eval1("len(s1)", d), Value(1));
}

TEST(Expr, BooleanPrecedenceNotAndOr) {
  auto d = one_row(1, 2, "a");
  // not binds tighter than and, and tighter than or.
  EXPECT_TRUE(test1("true or false and false", d));
  EXPECT_FALSE(test1("not true and true", d));
  EXPECT_TRUE(test1("not (n1 > n2) and s1 == 'a'", d));
}

TEST(Expr, NullPropagatesAndFailsRowTests) {
  auto d = one_row(N, 2, N);
  EXPECT_TRUE(eval1("n1 + 1", d).is_null());
  EXPECT_TRUE(eval1("n1 < 30", d).is_null());
  EXPECT_FALSE(test1("n1 < 30", d));
  EXPECT_FALSE(test1("n1 >= 30", d));
  EXPECT_FALSE(test1("s1 == 'a'", d));
  EXPECT_TRUE(test1("n1 is null", d));
  EXPECT_FALSE(test1("n2 is null", d));
  EXPECT_TRUE(test1("n2 is not null", d));
}

TEST(Expr, IfBuiltin) {
  EXPECT_EQ(eval1("if(n1 is null, 0, 1)", one_row(N, 1, "a")), Value(0));
  EXPECT_EQ(eval1("if(n1 is null, 0, 1)", one_row(3, 1, "a")), Value(1));
}

TEST(Expr, StringLiteralsAndQuotedNames) {
  auto d = Dataset::from_rows({"first name"}, {{"O'Neil"}});
  EXPECT_TRUE(test1("`first name` == 'O''Neil'", d));
}

TEST(Expr, CrossTypeComparisonIsTypeError) {
  auto d = one_row(1, 2, "a");
  EXPECT_THROW(eval1("n1 < s1", d), TypeError);
  EXPECT_THROW(eval1("s1 + 1", d), TypeError);
}

TEST(Expr, SyntaxErrors) {
  EXPECT_THROW(parse_expr(""), SyntaxError);
  EXPECT_THROW(parse_expr("n1 <"), SyntaxError);
  EXPECT_THROW(parse_expr("(n1"), SyntaxError);
  EXPECT_THROW(parse_expr("foo(1)"), SyntaxError);
  EXPECT_THROW(parse_expr("abs(1, 2)"), SyntaxError);
  EXPECT_THROW(parse_expr("'unterminated"), SyntaxError);
}

TEST(Expr, UnknownFeatureAtBind) {
  auto d = one_row(1, 2, "a");
  EXPECT_THROW(BoundExpr(parse_expr("missing > 1"), d.schema()), UnknownFeature);
}

TEST(Expr, ReferencedFeatures) {
  auto f = referenced_features(parse_expr("n1 + abs(n2) > 3 and s1 is null"));
  std::sort(f.begin(), f.end());
  EXPECT_EQ(f, (std::vector<FeatureName>{"n1", "n2", "s1"}));
}

TEST(Expr, PrintIsCanonical) {
  EXPECT_EQ(print_expr(parse_expr("a+b*c")), print_expr(parse_expr("a + (b * c)")));
  EXPECT_NE(print_expr(parse_expr("(a+b)*c")), print_expr(parse_expr("a+b*c")));
}

TEST(FeaturePredicate, NullRateAndNames) {
  auto d = customers();
  auto keep = parse_feature_predicate("nullrate < 0.000001");
  std::vector<FeatureName> kept;
  for (const auto& f : d.schema())
    if (eval_feature_predicate(keep, d, f)) kept.push_back(f);
  EXPECT_EQ(kept, (std::vector<FeatureName>{"CId", "Gender"}));
  auto names = parse_feature_predicate("not name in (Zip, 'Age') and nullrate < 1");
  EXPECT_TRUE(eval_feature_predicate(names, d, "CId"));
  EXPECT_FALSE(eval_feature_predicate(names, d, "Zip"));
  EXPECT_FALSE(eval_feature_predicate(names, d, "Age"));
  EXPECT_THROW(parse_feature_predicate("nullrate < 2"), SyntaxError);
  EXPECT_THROW(parse_feature_predicate("name in ()"), SyntaxError);
  EXPECT_EQ(parse_feature_predicate(print_feature_predicate(names)), names);
}
