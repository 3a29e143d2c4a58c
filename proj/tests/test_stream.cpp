#include "support.hpp"

#include "gemhp/error.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace gemhp;
using namespace gemhp::testing;

namespace {

EventStream roundtrip(const EventStream& s, const MarkSpace& space) {
    std::stringstream ss;
    write_stream(ss, s, space);
    return read_stream(ss);
}

EventStream parse(const std::string& text) {
    std::istringstream is(text);
    return read_stream(is);
}

} // namespace

TEST(StreamFormat, BitExactRoundTrip) {
    const auto spec = hawkes_spec();
    SimulationOptions o;
    o.horizon = 200;
    o.seed = 17;
    auto s = simulate(spec, theta({1.0, 0.5, 1.3}), o);
    s.config_hash = "00ff00ff00ff00ff";
    const auto back = roundtrip(s, spec.marks);
    ASSERT_EQ(back.size(), s.size());
    EXPECT_EQ(back.horizon, s.horizon);
    EXPECT_EQ(back.x0, s.x0);
    EXPECT_EQ(back.seed, s.seed);
    EXPECT_EQ(back.config_hash, s.config_hash);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(back.records[i].t, s.records[i].t);
        EXPECT_EQ(back.records[i].k, s.records[i].k);
        EXPECT_EQ(back.records[i].x, s.records[i].x);
    }
    const ThetaVector th = theta({0.9, 0.4, 1.1});
    EXPECT_EQ(log_likelihood(s, spec, th).total, log_likelihood(back, spec, th).total);
}

TEST(StreamFormat, DiscreteMarksAreIntegers) {
    const auto spec = queue_spec();
    const auto s = make_stream(10.0, {{1.0, 0, {6.0}}, {2.5, 1, {5.0}}}, 3, {5.0});
    std::stringstream ss;
    write_stream(ss, s, spec.marks);
    const std::string text = ss.str();
    EXPECT_NE(text.find("\"x\": 6}"), std::string::npos) << text;
    EXPECT_NE(text.find("\"x0\": 5"), std::string::npos) << text;
    const auto back = read_stream(ss);
    EXPECT_EQ(back.records[1].x, Mark{5.0});
}

TEST(StreamFormat, RejectsMalformedInput) {
    EXPECT_THROW((void)parse(""), Error);
    EXPECT_THROW((void)parse("{\"T\": 1, \"d\": 1}\n"), Error);
    EXPECT_THROW((void)parse("{\"T\": 1, \"d\": 1, \"x0\": 0, \"extra\": 1}\n"), Error);
    EXPECT_THROW((void)parse("{\"T\": 1, \"d\": 1, \"x0\": 0}\n{\"t\": 0.5, \"k\": 0}\n"), Error);
    EXPECT_THROW((void)parse("{\"T\": 1, \"d\": 1, \"x0\": 0}\nnot json\n"), Error);
}

TEST(StreamValidate, OrderingLabelsAndMarks) {
    const auto space = MarkSpace::continuous(1);
    EXPECT_NO_THROW(make_stream(2.0, {{0.5, 0, {1.0}}, {1.0, 0, {0.0}}}).validate(space));
    EXPECT_THROW(make_stream(2.0, {{1.0, 0, {1.0}}, {1.0, 0, {0.0}}}).validate(space), Error);
    EXPECT_THROW(make_stream(2.0, {{1.0, 0, {1.0}}, {0.5, 0, {0.0}}}).validate(space), Error);
    EXPECT_THROW(make_stream(2.0, {{0.0, 0, {1.0}}}).validate(space), Error);
    EXPECT_THROW(make_stream(2.0, {{2.5, 0, {1.0}}}).validate(space), Error);
    EXPECT_THROW(make_stream(2.0, {{0.5, 1, {1.0}}}).validate(space), Error);
    EXPECT_THROW(make_stream(2.0, {{0.5, 0, {1.0, 2.0}}}).validate(space), Error);
    EXPECT_THROW(make_stream(2.0, {{0.5, 0, {1.5}}}, 1, {0.0}).validate(MarkSpace::discrete()), Error);
}
