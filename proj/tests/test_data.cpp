#include "esuot/data.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <sstream>

using namespace esuot;
using namespace esuot::data;

namespace {

int count_label(const Dataset& d, int y) {
  return static_cast<int>(std::count(d.labels->begin(), d.labels->end(), y));
}

}  // namespace

TEST(Generate, SameSeedSameData) {
  SyntheticSpec s;
  s.angle_deg = 45.0;
  s.seed = 3;
  const auto [a0, a1] = generate(s);
  const auto [b0, b1] = generate(s);
  EXPECT_EQ(a0.features, b0.features);
  EXPECT_EQ(a1.features, b1.features);
  EXPECT_EQ(*a0.labels, *b0.labels);
  s.seed = 4;
  EXPECT_NE(generate(s).first.features, a0.features);
}

TEST(Generate, RotationPreservesNorms) {
  Rng rng(1);
  const Matrix x = standard_normal(rng, 50, 2);
  const Matrix r = rotate(x, 45.0);
  EXPECT_LT((x.rowwise().norm() - r.rowwise().norm()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(rotate((Matrix(1, 2) << 1, 0).finished(), 90.0)(0, 1), 1.0, 1e-15);
  EXPECT_LT((rotate(x, 360.0) - x).norm(), 1e-12);
}

TEST(Generate, ZeroAngleMoonsMatchSourceDistribution) {
  SyntheticSpec s;
  s.n = 4000;
  s.seed = 2;
  const auto [src, tgt] = generate(s);
  EXPECT_LT((src.features.colwise().mean() - tgt.features.colwise().mean()).norm(), 0.05);
  EXPECT_EQ(src.features.cols(), 2);
  EXPECT_EQ(src.size(), 4000);
}

TEST(Generate, GaussianShiftMovesTheMean) {
  SyntheticSpec s;
  s.family = Family::GaussianShift;
  s.shift = {4.0, 0.0};
  s.noise = 1.0;
  s.n = 4000;
  const auto [src, tgt] = generate(s);
  const RowVector diff = tgt.features.colwise().mean() - src.features.colwise().mean();
  EXPECT_NEAR(diff(0), 4.0, 0.1);
  EXPECT_NEAR(diff(1), 0.0, 0.1);
}

TEST(Generate, PortraitsLikeIsEightDimensional) {
  SyntheticSpec s;
  s.family = Family::PortraitsLikeDrift;
  s.noise = 1.0;
  s.angle_deg = 30.0;
  const auto [src, tgt] = generate(s);
  EXPECT_EQ(src.dim(), 8);
  EXPECT_EQ(tgt.dim(), 8);
  EXPECT_TRUE(family_uses_angle(s.family));
  EXPECT_FALSE(family_uses_angle(Family::GaussianShift));
}

TEST(Generate, RejectsBadSpecs) {
  SyntheticSpec s;
  s.n = 1;
  EXPECT_THROW(generate(s), ConfigError);
  EXPECT_THROW(parse_family("swiss_roll"), ConfigError);
  for (auto f : {Family::TwoMoonsRotation, Family::GaussianShift, Family::GaussianRingShift, Family::PortraitsLikeDrift})
    EXPECT_EQ(parse_family(to_string(f)), f);
}

TEST(LabelShift, ExactClassCounts) {
  SyntheticSpec s;
  s.n = 500;
  const Dataset d = generate(s).first;
  for (double prior : {0.0, 0.3, 0.5, 1.0}) {
    const Dataset r = resample_label_shift(d, {prior, 1000, 9});
    EXPECT_EQ(r.size(), 1000);
    EXPECT_EQ(count_label(r, 1), static_cast<int>(std::lround(prior * 1000)));
  }
  EXPECT_THROW(resample_label_shift(d, {1.5, 10, 1}), ConfigError);
  EXPECT_THROW(resample_label_shift(d.unlabeled(), {0.5, 10, 1}), ContractError);
}

TEST(LabelShift, MissingClassCannotBeDrawn) {
  Dataset d{Matrix::Zero(3, 2), std::vector<int>{0, 0, 0}};
  EXPECT_THROW(resample_label_shift(d, {0.5, 10, 1}), ContractError);
  EXPECT_NO_THROW(resample_label_shift(d, {0.0, 10, 1}));
}

TEST(Csv, RoundTripIsExact) {
  SyntheticSpec s;
  s.n = 50;
  s.angle_deg = 12.5;
  const Dataset d = generate(s).second;
  std::stringstream ss;
  write_table(ss, dataset_to_table(d));
  const Dataset back = dataset_from_table(read_table(ss));
  EXPECT_EQ(back.features, d.features);
  EXPECT_EQ(*back.labels, *d.labels);
  EXPECT_EQ(back.domain_index, 1);
}

TEST(Csv, UnlabeledRoundTrip) {
  Dataset d{(Matrix(2, 2) << 0.1, 0.2, 0.3, 0.4).finished(), std::nullopt};
  std::stringstream ss;
  write_table(ss, dataset_to_table(d));
  EXPECT_NE(ss.str().find("0.10000000000000001,0.20000000000000001,,0"), std::string::npos);
  EXPECT_FALSE(dataset_from_table(read_table(ss)).labeled());
}

TEST(Csv, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "esuot_test_roundtrip.csv";
  Dataset d{(Matrix(2, 3) << 1, 2, 3, 4, 5, 6).finished(), std::vector<int>{1, 0}};
  save_csv(d, path.string());
  const Dataset back = load_csv(path.string());
  EXPECT_EQ(back.features, d.features);
  std::filesystem::remove(path);
  EXPECT_THROW(load_csv((std::filesystem::temp_directory_path() / "esuot_no_such.csv").string()), DataError);
}

TEST(Csv, AcceptsCrlfAndBom) {
  std::stringstream ss("\xEF\xBB\xBF" "f0,label,domain\r\n1.5,1,0\r\n-2,0,0\r\n");
  const Dataset d = dataset_from_table(read_table(ss));
  EXPECT_DOUBLE_EQ(d.features(1, 0), -2.0);
  EXPECT_EQ((*d.labels)[0], 1);
}

TEST(Csv, ParseErrorsNameTheLine) {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    std::stringstream ss(text);
    try {
      dataset_from_table(read_table(ss));
    } catch (const ParseError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  EXPECT_TRUE(fails_with("f0,label,domain\n1,0,0\n2,0\n", "line 3"));
  EXPECT_TRUE(fails_with("f0,label,domain\n1,0,0\nabc,1,0\n", "line 3"));
  EXPECT_TRUE(fails_with("f0,label,domain\n1,x,0\n", "line 2"));
  EXPECT_TRUE(fails_with("x0,label,domain\n1,0,0\n", "line 1"));
  EXPECT_TRUE(fails_with("f0,label,domain\n1,,0\n2,1,0\n", "partially empty"));
  EXPECT_TRUE(fails_with("f0,label,domain\nnan,1,0\n", "non-finite"));
  EXPECT_TRUE(fails_with("", "missing header"));
}

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_DOUBLE_EQ(parse_double("+1e-3", 1), 1e-3);
  EXPECT_THROW(parse_double("1.0x", 4), ParseError);
  EXPECT_THROW(parse_int("", 4), ParseError);
}
