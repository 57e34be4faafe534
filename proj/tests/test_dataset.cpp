#include <doctest.h>

#include <cmath>
#include <sstream>

#include "icescope/dataset.hpp"

using namespace icescope;

TEST_CASE("read_csv parses a small table and removes the response") {
    std::istringstream in("x1,y\n0,1\n1,3\n2,5\n");
    const auto data = read_csv(in, "y");
    CHECK(data.n_cols() == 1);
    CHECK(data.n_rows() == 3);
    CHECK(data.column(0).name == "x1");
    CHECK(data.response()[2] == 5.0);
    CHECK(data.response_name() == "y");
}

TEST_CASE("read_csv keeps column order") {
    std::istringstream in("b,y,a\n1,2,3\n4,5,6\n");
    const auto data = read_csv(in, "y");
    REQUIRE(data.n_cols() == 2);
    CHECK(data.column(0).name == "b");
    CHECK(data.column(1).name == "a");
    CHECK(data.at(1, 1) == 6.0);
}

TEST_CASE("read_csv rejects NA and names row and column") {
    std::istringstream in("x1,y\n0,1\nNA,3\n");
    try {
        read_csv(in, "y");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("x1") != std::string::npos);
        CHECK(msg.find("row 2") != std::string::npos);
    }
}

TEST_CASE("read_csv rejects duplicate headers, ragged rows, missing response") {
    std::istringstream dup("x1,x1,y\n0,1,2\n1,2,3\n");
    CHECK_THROWS_AS(read_csv(dup, "y"), DataError);
    std::istringstream ragged("x1,y\n0,1\n1\n");
    CHECK_THROWS_AS(read_csv(ragged, "y"), DataError);
    std::istringstream missing("x1,x2\n0,1\n1,2\n");
    CHECK_THROWS_AS(read_csv(missing, "y"), DataError);
    std::istringstream inf("x1,y\n0,1\ninf,2\n");
    CHECK_THROWS_AS(read_csv(inf, "y"), DataError);
}

TEST_CASE("FeatureMatrix invariants") {
    CHECK_THROWS_AS(FeatureMatrix({{"a", {1.0}}}, {1.0}), DataError);
    CHECK_THROWS_AS(FeatureMatrix({{"a", {1.0, 2.0}}, {"a", {1.0, 2.0}}}, {1.0, 2.0}), DataError);
    CHECK_THROWS_AS(FeatureMatrix({{"", {1.0, 2.0}}}, {1.0, 2.0}), DataError);
    CHECK_THROWS_AS(FeatureMatrix({{"a", {1.0, NAN}}}, {1.0, 2.0}), DataError);
    CHECK_THROWS_AS(FeatureMatrix({{"a", {1.0, 2.0, 3.0}}}, {1.0, 2.0}), DataError);
}

TEST_CASE("ColumnSplit") {
    const FeatureMatrix data({{"a", {1, 2}}, {"b", {3, 4}}, {"c", {5, 6}}}, {0, 1});
    const auto split = ColumnSplit::for_feature(data, "b");
    CHECK(split.s_index == 1);
    CHECK(split.c_indices == std::vector<std::size_t>{0, 2});
    CHECK_THROWS(ColumnSplit::for_feature(data, "zzz"));
    ColumnSplit bad{0, {0, 1, 2}};
    CHECK_THROWS(bad.validate(3));
}

TEST_CASE("simulate criss_cross draws three uniform predictors") {
    const auto data = simulate({SimModel::criss_cross, 1000, 42, 1.0});
    REQUIRE(data.n_cols() == 3);
    CHECK(data.n_rows() == 1000);
    for (std::size_t j = 0; j < 3; ++j) {
        for (double v : data.values(j)) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("simulate noiseless matches the mean function exactly") {
    for (auto model : {SimModel::criss_cross, SimModel::additive_parabola, SimModel::extrapolation_quadrant}) {
        const auto data = simulate({model, 300, 7, 0.0});
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            const auto row = data.row(i);
            CHECK(data.response()[i] == sim_mean(model, row));
        }
    }
    const auto cc = simulate({SimModel::criss_cross, 500, 3, 0.0});
    for (std::size_t i = 0; i < cc.n_rows(); ++i) {
        const double x1 = cc.at(i, 0), x2 = cc.at(i, 1), x3 = cc.at(i, 2);
        CHECK(cc.response()[i] - (0.2 * x1 - 5 * x2 + 10 * x2 * (x3 >= 0 ? 1.0 : 0.0)) == 0.0);
    }
}

TEST_CASE("extrapolation quadrant is empty for every seed") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto data = simulate({SimModel::extrapolation_quadrant, 1000, seed, 0.1});
        std::size_t inside = 0;
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            if (data.at(i, 0) > 0 && data.at(i, 1) > 0) ++inside;
        }
        CHECK(inside == 0);
    }
}

TEST_CASE("simulate is byte-identical under a fixed seed") {
    std::ostringstream a, b, c;
    write_csv(a, simulate({SimModel::criss_cross, 200, 11, 1.0}));
    write_csv(b, simulate({SimModel::criss_cross, 200, 11, 1.0}));
    write_csv(c, simulate({SimModel::criss_cross, 200, 12, 1.0}));
    CHECK(a.str() == b.str());
    CHECK(a.str() != c.str());
}

TEST_CASE("write_csv round-trips exactly") {
    const auto data = simulate({SimModel::additive_parabola, 100, 5, 1.0});
    std::ostringstream out;
    write_csv(out, data);
    std::istringstream in(out.str());
    const auto back = read_csv(in, "y");
    CHECK(back.names() == data.names());
    CHECK(back.row_major() == data.row_major());
    for (std::size_t i = 0; i < data.n_rows(); ++i) CHECK(back.response()[i] == data.response()[i]);
}

TEST_CASE("parse_sim_model accepts dashed names and rejects unknown ones") {
    CHECK(parse_sim_model("criss-cross") == SimModel::criss_cross);
    CHECK(parse_sim_model("additive_parabola") == SimModel::additive_parabola);
    CHECK(parse_sim_model("extrapolation-quadrant") == SimModel::extrapolation_quadrant);
    CHECK_THROWS(parse_sim_model("friedman1"));
}
