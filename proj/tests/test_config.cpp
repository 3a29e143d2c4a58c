#include "support.hpp"

#include "gemhp/error.hpp"

#include <gtest/gtest.h>

using namespace gemhp;
using namespace gemhp::testing;

namespace {

const char* kBase = R"({"schema": "gemhp/model-v1", "components": 1,
    "parameters": [{"name": "nu", "lower": 0.1, "upper": 2, "value": 1}],
    "baselines": [{"form": "constant", "coef": ["nu"]}] EXTRA })";

std::string with(const std::string& extra) {
    std::string s = kBase;
    s.replace(s.find("EXTRA"), 5, extra);
    return s;
}

ErrorKind kind_of(const std::string& text) {
    try {
        (void)parse_model(text);
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::Internal;
}

} // namespace

TEST(ModelConfig, MinimalPoisson) {
    const auto spec = parse_model(with(""));
    EXPECT_EQ(spec.d, 1);
    EXPECT_EQ(spec.n_params(), 1);
    EXPECT_EQ(spec.marks.kind, MarkSpace::Kind::Categorical);
    EXPECT_TRUE(spec.kernels.empty());
}

TEST(ModelConfig, StrictKeys) {
    EXPECT_EQ(kind_of(with(R"(, "bogus": 1)")), ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of(with(R"(, "link": {"type": "linear", "cap": 2})")), ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of(with(R"(, "kernels": [{"target": 0, "source": 0, "terms": [{"poly": [1], "r": 1, "q": 0}]}])")),
              ErrorKind::InvalidInput);
}

TEST(ModelConfig, SchemaAndJsonErrors) {
    std::string wrong = with("");
    wrong.replace(wrong.find("model-v1"), 8, "model-v9");
    EXPECT_EQ(kind_of(wrong), ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of("{not json"), ErrorKind::InvalidInput);
}

TEST(ModelConfig, UnknownParameterReference) {
    EXPECT_EQ(kind_of(with(R"(, "kernels": [{"target": 0, "source": 0, "terms": [{"poly": ["zz"], "r": 1}]}])")),
              ErrorKind::InvalidInput);
}

TEST(ModelConfig, FullDocument) {
    const auto spec = parse_model(R"({"schema": "gemhp/model-v1", "components": 2,
        "parameters": [{"name": "nu", "lower": 0.1, "upper": 2}, {"name": "a", "lower": 0.01, "upper": 1, "value": 0.2}],
        "marks": {"space": {"kind": "continuous", "dim": 1},
                  "kernels": [{"family": "gaussian-ar1", "mean": 0, "coef": 0.5, "sd": 1},
                              {"family": "iid-gaussian", "mean": 1, "sd": 2}]},
        "baselines": [{"form": "constant", "coef": ["nu"]}, {"form": "affine", "coef": [0.5, 0.1]}],
        "kernels": [{"target": 1, "source": 0, "terms": [{"poly": ["a"], "r": 2, "c": 0.1, "d": 0.2, "xi": 3}],
                     "boost": {"form": "log1p", "coef": [1, 0.5]}}],
        "link": {"type": "saturating", "cap": 4},
        "floors": {"r_min": 0.01},
        "probe": [[0.0], [2.0]],
        "x0": [0.5]})");
    EXPECT_EQ(spec.d, 2);
    EXPECT_DOUBLE_EQ(spec.initial()(0), 1.05);
    EXPECT_EQ(spec.link.kind, Link::Kind::Saturating);
    EXPECT_EQ(spec.probe.size(), 2u);
    EXPECT_EQ(spec.x0, Mark{0.5});
    EXPECT_EQ(spec.mark_kernels[1].family, MarkFamily::IidGaussian);
    EXPECT_DOUBLE_EQ(spec.floors.r_min, 0.01);
}

TEST(ModelConfig, LoadModelNamesPath) {
    try {
        (void)load_model("/nonexistent/model.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/model.json"), std::string::npos);
        EXPECT_TRUE(e.is_input_error());
    }
}

TEST(Hash, Fnv1a) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}
