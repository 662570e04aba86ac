#include <gtest/gtest.h>

#include <locale>
#include <sstream>

#include "advflow/errors.hpp"
#include "advflow/evaluation.hpp"
#include "support.hpp"

using namespace advflow;

namespace {

Dataset random_digits(std::size_t n, std::uint64_t seed) {
  Dataset d(8, 8, 1, 10);
  RngStream rng(seed, "digits");
  std::vector<std::uint8_t> px(d.image_bytes());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& b : px) b = static_cast<std::uint8_t>(rng.below(256));
    d.add(px, static_cast<int>(i % 10));
  }
  return d;
}

std::vector<SuiteEntry> short_suite(const Budget& b) {
  auto suite = default_suite(b, 3);
  for (auto& e : suite) e.config.steps = std::min(e.config.steps, 3);
  return suite;
}

}  // namespace

TEST(RoundedAccuracy, Rounding) {
  EXPECT_EQ(rounded_accuracy(0, 10), 0.0);
  EXPECT_EQ(rounded_accuracy(1, 3), 33.3);
  EXPECT_EQ(rounded_accuracy(2, 3), 66.7);
  EXPECT_EQ(rounded_accuracy(7, 7), 100.0);
  EXPECT_THROW(rounded_accuracy(1, 0), ArgumentError);
}

TEST(DefaultSuite, Layout) {
  const Budget b{16.0 / 255.0, 0.3};
  const auto suite = default_suite(b, 1);
  ASSERT_EQ(suite.size(), 4u);
  EXPECT_EQ(suite[0].name, "FGSM");
  EXPECT_EQ(suite[0].config.steps, 1);
  EXPECT_FALSE(suite[0].config.random_start);
  EXPECT_DOUBLE_EQ(suite[0].config.pixel_step, b.pixel);
  EXPECT_EQ(suite[1].name, "PGD20");
  EXPECT_EQ(suite[1].config.steps, 20);
  EXPECT_DOUBLE_EQ(suite[1].config.pixel_step, 4.0 / 255.0);
  EXPECT_EQ(suite[1].config.budget.spatial, 0.0);
  EXPECT_EQ(suite[2].name, "Spatial");
  EXPECT_DOUBLE_EQ(suite[2].config.spatial_step, 0.15);
  EXPECT_EQ(suite[2].config.budget.pixel, 0.0);
  EXPECT_EQ(suite[3].name, "Joint");
  EXPECT_EQ(suite[3].kind, AttackKind::joint_sp);
  for (const auto& e : suite) EXPECT_EQ(e.config.mode, AttackMode::untargeted);
}

TEST(EvaluateSuite, RowPerEntryPlusPristine) {
  const auto net = advflow::testing::small_net(8, 8, 1, 2);
  const Dataset d = random_digits(30, 2);
  const auto suite = short_suite({0.1, 0.3});
  const EvalReport r = evaluate_suite(net, d, suite);
  ASSERT_EQ(r.rows.size(), suite.size() + 1);
  EXPECT_EQ(r.rows[0].attack, "Pristine");
  for (std::size_t i = 0; i < suite.size(); ++i) {
    EXPECT_EQ(r.rows[i + 1].attack, suite[i].name);
    EXPECT_EQ(r.rows[i + 1].examples, 30u);
    EXPECT_LE(r.rows[i + 1].accuracy, r.rows[0].accuracy);
    EXPECT_EQ(r.rows[i + 1].seconds, 0.0);
  }
}

TEST(EvaluateSuite, ZeroBudgetMatchesPristine) {
  const auto net = advflow::testing::small_net(8, 8, 1, 3);
  const Dataset d = random_digits(40, 3);
  const EvalReport r = evaluate_suite(net, d, short_suite({0.0, 0.0}));
  for (const auto& row : r.rows) EXPECT_EQ(row.accuracy, r.rows[0].accuracy) << row.attack;
}

TEST(EvaluateSuite, IndependentOfWorkers) {
  const auto net = advflow::testing::small_net(8, 8, 1, 4);
  const Dataset d = random_digits(50, 4);
  const auto suite = short_suite({0.1, 0.3});
  EvalOptions one, many;
  one.chunk = many.chunk = 7;
  many.workers = 4;
  EXPECT_EQ(evaluate_suite(net, d, suite, one), evaluate_suite(net, d, suite, many));
}

TEST(EvaluateSuite, EmptySuiteGivesPristineOnly) {
  const auto net = advflow::testing::small_net(8, 8, 1, 5);
  const EvalReport r = evaluate_suite(net, random_digits(10, 5), {});
  ASSERT_EQ(r.rows.size(), 1u);
  std::ostringstream out;
  write_report(EvalReport{}, out);
  EXPECT_EQ(out.str(), "attack,eps_pixel,eps_spatial,steps,accuracy,examples,seconds\n");
}

TEST(EvaluateSuite, UntrainedNetworkIsNearChance) {
  const std::filesystem::path root = ADVFLOW_SOURCE_DIR;
  const Dataset test = load_dataset(root / "data/digits_test.advd", Split::test).head(1000);
  Architecture a;
  const Classifier net(init_params(a, 17));
  const EvalReport r = evaluate_suite(net, test, {});
  EXPECT_NEAR(r.rows[0].accuracy, 10.0, 3.0);
}

TEST(Blackbox, SameModelEqualsWhitebox) {
  const auto net = advflow::testing::small_net(8, 8, 1, 6);
  const Dataset d = random_digits(20, 6);
  const auto suite = short_suite({0.1, 0.3});
  EXPECT_EQ(blackbox_eval(net, net, d, suite), evaluate_suite(net, d, suite));
}

TEST(Blackbox, PristineRowIsTargetAccuracy) {
  const auto target = advflow::testing::small_net(8, 8, 1, 7);
  const auto source = advflow::testing::small_net(8, 8, 1, 8);
  const Dataset d = random_digits(20, 7);
  const EvalReport bb = blackbox_eval(target, source, d, short_suite({0.1, 0.3}));
  EXPECT_EQ(bb.rows[0], evaluate_suite(target, d, {}).rows[0]);
}

TEST(Sweep, OneRowPerValue) {
  const auto net = advflow::testing::small_net(8, 8, 1, 9);
  const Dataset d = random_digits(20, 9);
  const auto suite = short_suite({0.1, 0.3});
  const std::vector<double> values{0.0, 0.05, 0.1};
  const EvalReport r = budget_sweep(net, d, suite[1], SweepAxis::pixel, values);
  ASSERT_EQ(r.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.rows[i].eps_pixel, values[i]);
  EXPECT_EQ(r.rows[0].accuracy, evaluate_suite(net, d, {}).rows[0].accuracy);
  const EvalReport s = budget_sweep(net, d, suite[2], SweepAxis::spatial, values);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s.rows[i].eps_spatial, values[i]);
}

TEST(Report, CsvRoundTrip) {
  EvalReport r;
  r.rows.push_back({"Pristine", 0.0, 0.0, 0, 97.0, 500, 0.0});
  r.rows.push_back({"Joint", 16.0 / 255.0, 0.28, 20, 10.0, 500, 0.0});
  std::ostringstream out;
  write_report(r, out);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_report(in), r);
  EXPECT_NE(out.str().find("Joint,0.06274509803921569,0.28,20,10.0,500,0.000\n"), std::string::npos);
}

TEST(Report, ParseRejectsMalformedInput) {
  std::istringstream bad_header("attack,eps\n");
  EXPECT_THROW(parse_report(bad_header), FormatError);
  std::istringstream bad_row("attack,eps_pixel,eps_spatial,steps,accuracy,examples,seconds\nX,abc,0,1,2,3,4\n");
  EXPECT_THROW(parse_report(bad_row), FormatError);
}

TEST(Report, LocaleIndependent) {
  struct CommaDecimal : std::numpunct<char> {
    char do_decimal_point() const override { return ','; }
    char do_thousands_sep() const override { return '.'; }
    std::string do_grouping() const override { return "\3"; }
  };
  EvalReport r;
  r.rows.push_back({"PGD20", 0.5, 0.25, 20, 12.5, 10000, 1.25});
  std::ostringstream before;
  write_report(r, before);
  const std::locale comma(std::locale::classic(), new CommaDecimal);
  const std::locale old = std::locale::global(comma);
  std::ostringstream after;
  after.imbue(comma);
  write_report(r, after);
  std::locale::global(old);
  EXPECT_EQ(before.str(), after.str());
  EXPECT_NE(after.str().find("PGD20,0.5,0.25,20,12.5,10000,1.250"), std::string::npos);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(std::stod(format_number(2.0 / 255.0)), 2.0 / 255.0);
  EXPECT_EQ(format_fixed(66.66, 1), "66.7");
}

TEST(TensorArchive, RoundTrip) {
  RngStream rng(1, "t");
  const Image x = advflow::testing::random_image(3, 4, 2, rng);
  const std::vector<NamedTensor> ts{to_tensor("x.0", x), to_tensor("flow.0", zero_flow(3, 4))};
  const auto bytes = encode_tensor_archive(ts);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "ADVTENS1");
  const auto back = decode_tensor_archive(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "x.0");
  EXPECT_EQ(back[0].shape, (std::vector<int>{3, 4, 2}));
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_EQ(back[0].values[i], static_cast<double>(static_cast<float>(x[i])));
  EXPECT_THROW(decode_tensor_archive(std::span(bytes).first(bytes.size() - 1)), FormatError);
}
