#include "stefan/expression.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace stefan;

TEST(Expression, Arithmetic) {
    EXPECT_DOUBLE_EQ(Expression::parse("1 + 2 * 3")(0, 0), 7.0);
    EXPECT_DOUBLE_EQ(Expression::parse("(1 + 2) * 3")(0, 0), 9.0);
    EXPECT_DOUBLE_EQ(Expression::parse("2 ^ 3 ^ 2")(0, 0), 512.0);
    EXPECT_DOUBLE_EQ(Expression::parse("-2 ^ 2")(0, 0), -4.0);
    EXPECT_DOUBLE_EQ(Expression::parse("8 / 4 / 2")(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(Expression::parse("1e-3 * 2.5E2")(0, 0), 0.25);
}

TEST(Expression, CoordinatesAndFunctions) {
    auto e = Expression::parse("2 + cos(3*pi*y)");
    for (double y : {0.0, 0.2, 1.0 / 3.0, 0.7})
        EXPECT_DOUBLE_EQ(e(y, 0), 2 + std::cos(3 * std::numbers::pi * y));
    auto t = Expression::parse("1 + tau*exp(-y) + sqrt(abs(-4)) + log(1) + sin(0)");
    EXPECT_DOUBLE_EQ(t(0.5, 2.0), 1 + 2 * std::exp(-0.5) + 2);
    EXPECT_TRUE(t.depends_on("tau"));
    EXPECT_FALSE(e.depends_on("tau"));
}

TEST(Expression, ParametersAndSubstitution) {
    auto e = Expression::parse("1 + zeta*(1 + cos(3*pi*y))");
    EXPECT_EQ(e.free_parameters(), std::set<std::string>{"zeta"});
    EXPECT_THROW(e(0, 0), ConfigError);
    auto bound = e.substitute({{"zeta", 1.1}});
    EXPECT_TRUE(bound.free_parameters().empty());
    EXPECT_DOUBLE_EQ(bound(0.0, 0), 1 + 1.1 * 2);
    EXPECT_DOUBLE_EQ(bound(1.0 / 3.0, 0), 1 + 1.1 * (1 + std::cos(std::numbers::pi)));
    // re-parsing the printed form gives the same function
    auto again = Expression::parse(bound.source());
    for (double y : {0.0, 0.3, 0.9}) EXPECT_DOUBLE_EQ(again(y, 0), bound(y, 0));
}

TEST(Expression, ConstantFolding) {
    auto e = Expression::parse("a * 2 + b").substitute({{"a", 1.5}, {"b", 0.25}});
    EXPECT_TRUE(e.is_constant());
    EXPECT_DOUBLE_EQ(e(0, 0), 3.25);
    EXPECT_FALSE(Expression::parse("y").is_constant());
}

TEST(Expression, ParseErrorsReportColumn) {
    for (const char* bad : {"1 +", "2 * (3", "cos 3", "foo(1)", "1 2", "", "3 $ 4"}) {
        try {
            Expression::parse(bad);
            FAIL() << bad;
        } catch (const ConfigError& e) {
            EXPECT_EQ(e.tag(), "config.parse") << bad;
            EXPECT_NE(std::string(e.what()).find("column"), std::string::npos) << e.what();
        }
    }
}
