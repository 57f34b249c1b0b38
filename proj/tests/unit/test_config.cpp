#include <gtest/gtest.h>

#include "actscore/app/config.hpp"

using namespace actscore;
using namespace actscore::app;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const auto c = parse_config("");
  EXPECT_EQ(effective_config_text(c), effective_config_text(RunConfig{}));
  EXPECT_EQ(c.alpha(), (std::vector<double>{0.3, 0.3, 0.3, 0.3}));
  EXPECT_EQ(c.mode, ssl::SelectionMode::score);
  EXPECT_EQ(c.score.basis, scoring::ThresholdBasis::mean);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1}));
  EXPECT_FALSE(c.ssl_learning_rate.has_value());
}

TEST(Config, PerClassAlphaOverride) {
  const auto c = parse_config("alpha.1=0.5\nalpha.default=0.3\n");
  EXPECT_EQ(c.alpha(), (std::vector<double>{0.3, 0.5, 0.3, 0.3}));
  EXPECT_EQ(c.policy().alpha, c.alpha());
}

TEST(Config, CommentsWhitespaceAndLists) {
  const auto c = parse_config("# run\n  seeds = 3, 4,5  \n\nbin_edges=-2,-1,0 # coarse\nmode=softmax\nssl_lr=2e-4\n");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_EQ(c.bin_edges, (std::vector<double>{-2, -1, 0}));
  EXPECT_EQ(c.mode, ssl::SelectionMode::softmax);
  EXPECT_EQ(c.ssl_learning_rate, 2e-4);
}

TEST(Config, InvalidModeNamesChoices) {
  const auto e = error_of("mode=banana");
  EXPECT_NE(e.find("banana"), std::string::npos);
  EXPECT_NE(e.find("score"), std::string::npos);
  EXPECT_NE(e.find("softmax"), std::string::npos);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("noise=0.5\n\nbogus=1\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of("noise=0.5\nno equals sign\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("batch_size=0").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("lr=fast").find("lr"), std::string::npos);
}

TEST(Config, RangeChecks) {
  EXPECT_FALSE(error_of("alpha.default=1.5").empty());
  EXPECT_FALSE(error_of("alpha.7=0.5").empty());
  EXPECT_FALSE(error_of("keep_prob=0").empty());
  EXPECT_FALSE(error_of("split.train=0.6\nsplit.additional=0.6").empty());
  EXPECT_FALSE(error_of("bin_edges=0,-1").empty());
  EXPECT_FALSE(error_of("divisor=0").empty());
  EXPECT_FALSE(error_of("ssl_lr=-1").empty());
  EXPECT_FALSE(error_of("num_classes=1").empty());
}

TEST(Config, EffectiveTextRoundTrips) {
  const auto c = parse_config(
      "num_classes=3\nalpha.2=0.45\nnoise=0.65\nthreshold_basis=sum\nnorm=l2\nscope=global\nssl_lr=0.0003\n"
      "seeds=9,8\nlr=0.002\n");
  const auto text = effective_config_text(c);
  EXPECT_EQ(effective_config_text(parse_config(text)), text);
  EXPECT_NE(text.find("alpha.2=0.45\n"), std::string::npos);
  EXPECT_NE(text.find("noise=0.65\n"), std::string::npos);
  EXPECT_NE(fnv1a64(text), fnv1a64(effective_config_text(RunConfig{})));
}

TEST(Config, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, BinQuantiles) {
  EXPECT_EQ(parse_config("").bin_quantiles, 0u);
  const auto c = parse_config("bin_quantiles=10");
  EXPECT_EQ(c.bin_quantiles, 10u);
  EXPECT_NE(effective_config_text(c).find("bin_quantiles=10\n"), std::string::npos);
}
