#include <gtest/gtest.h>

#include <filesystem>

#include "advflow/data.hpp"
#include "advflow/errors.hpp"
#include "support.hpp"

using namespace advflow;

namespace {

Dataset sample_dataset(std::size_t n, int h = 5, int w = 4, int c = 3, int classes = 7) {
  Dataset d(h, w, c, classes);
  RngStream rng(3, "data");
  std::vector<std::uint8_t> px(d.image_bytes());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& b : px) b = static_cast<std::uint8_t>(rng.below(256));
    d.add(px, static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
  }
  return d;
}

}  // namespace

TEST(DatasetFormat, RoundTrip) {
  const Dataset d = sample_dataset(11);
  const auto bytes = encode_dataset(d);
  EXPECT_EQ(bytes.size(), 8 + 20 + 11 * d.image_bytes() + 11);
  EXPECT_EQ(decode_dataset(bytes), d);
}

TEST(DatasetFormat, EmptyDatasetRoundTrips) {
  const Dataset d(4, 4, 1, 10);
  const Dataset back = decode_dataset(encode_dataset(d));
  EXPECT_TRUE(back.empty());
  EXPECT_EQ(back, d);
}

TEST(DatasetFormat, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "advflow_test_data.advd";
  const Dataset d = sample_dataset(3);
  save_dataset(d, path);
  EXPECT_EQ(load_dataset(path, Split::test).split(), Split::test);
  EXPECT_EQ(load_dataset(path).size(), 3u);
  std::filesystem::remove(path);
  EXPECT_ANY_THROW(load_dataset(path));
}

TEST(DatasetFormat, BadMagicReportsOffsetZero) {
  auto bytes = encode_dataset(sample_dataset(2));
  bytes[3] = 'X';
  try {
    decode_dataset(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(DatasetFormat, TruncationAndTrailingBytes) {
  const auto bytes = encode_dataset(sample_dataset(4));
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{12}, std::size_t{27}, bytes.size() - 1}) {
    EXPECT_THROW(decode_dataset(std::span(bytes).first(cut)), FormatError) << cut;
  }
  auto longer = bytes;
  longer.push_back(0);
  try {
    decode_dataset(longer);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), bytes.size());
  }
}

TEST(DatasetFormat, LabelOutOfRangeIsRejected) {
  auto bytes = encode_dataset(sample_dataset(4));
  bytes.back() = 9;
  try {
    decode_dataset(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), bytes.size() - 1);
  }
}

TEST(Dataset, AddValidates) {
  Dataset d(2, 2, 1, 3);
  const std::vector<std::uint8_t> ok(4, 0), bad(5, 0);
  EXPECT_THROW(d.add(bad, 0), ShapeError);
  EXPECT_THROW(d.add(ok, 3), ArgumentError);
  EXPECT_THROW(d.add(ok, -1), ArgumentError);
  EXPECT_THROW(Dataset(0, 2, 1, 3), ShapeError);
  EXPECT_THROW(Dataset(2, 2, 1, 1), ArgumentError);
}

TEST(Dataset, HeadKeepsPrefix) {
  const Dataset d = sample_dataset(10);
  const Dataset h = d.head(4);
  ASSERT_EQ(h.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(h.label(i), d.label(i));
    EXPECT_TRUE(std::ranges::equal(h.pixels(i), d.pixels(i)));
  }
  EXPECT_EQ(d.head(100), d);
}

TEST(Normalize, EndpointsAndMidpoint) {
  const std::vector<std::uint8_t> px{0, 255, 128};
  const Image x = normalize(px, 1, 3, 1);
  EXPECT_EQ(x[0], -1.0);
  EXPECT_EQ(x[1], 1.0);
  EXPECT_NEAR(x[2], 1.0 / 255.0, 1e-15);
  EXPECT_THROW(normalize(px, 2, 2, 1), ShapeError);
}

TEST(Normalize, DenormalizeInverts) {
  std::vector<std::uint8_t> all(256);
  for (int i = 0; i < 256; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  EXPECT_EQ(denormalize(normalize(all, 16, 16, 1)), all);
}

TEST(Normalize, DenormalizeRoundsAndSaturates) {
  const Image x(1, 3, 1, std::vector<double>{-1.5, 2.0, -1.0 + 2.0 * 10.4 / 255.0});
  EXPECT_EQ(denormalize(x), (std::vector<std::uint8_t>{0, 255, 10}));
}

TEST(Augment, CentredCropIsIdentity) {
  RngStream rng(1, "t");
  const Image x = advflow::testing::random_image(6, 5, 2, rng);
  EXPECT_EQ(padded_crop(x, 3, 3, 3), x);
}

TEST(Augment, CropShiftsAndPadsWithMinusOne) {
  RngStream rng(2, "t");
  const Image x = advflow::testing::random_image(4, 4, 1, rng);
  const Image c = padded_crop(x, 2, 0, 1);
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx) {
      const int sy = y - 2, sx = xx - 1;
      const double want = (sy >= 0 && sy < 4 && sx >= 0 && sx < 4) ? x(sy, sx, 0) : -1.0;
      EXPECT_EQ(c(y, xx, 0), want);
    }
  EXPECT_THROW(padded_crop(x, 2, 5, 0), ArgumentError);
}

TEST(Augment, FlipIsAnInvolution) {
  RngStream rng(3, "t");
  const Image x = advflow::testing::random_image(3, 5, 3, rng);
  const Image f = flip_horizontal(x);
  EXPECT_EQ(f(1, 0, 2), x(1, 4, 2));
  EXPECT_EQ(flip_horizontal(f), x);
}

TEST(Augment, PreservesShapeAndRange) {
  RngStream data(4, "t");
  const Image x = advflow::testing::random_image(8, 8, 3, data);
  AugmentFlags flags;
  flags.flip = true;
  RngStream rng(5, "augment");
  for (int k = 0; k < 50; ++k) {
    const Image a = augment(x, rng, flags);
    ASSERT_EQ(a.height(), 8);
    ASSERT_EQ(a.depth(), 3);
    for (double v : a.values()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Augment, DisabledIsIdentity) {
  RngStream data(6, "t");
  const Image x = advflow::testing::random_image(8, 8, 1, data);
  RngStream rng(7, "augment");
  EXPECT_EQ(augment(x, rng, AugmentFlags{false, false, 4}), x);
}

TEST(Augment, DeterministicForEqualStreams) {
  RngStream data(8, "t");
  const Image x = advflow::testing::random_image(8, 8, 1, data);
  RngStream a(9, "augment", 17), b(9, "augment", 17);
  EXPECT_EQ(augment(x, a, AugmentFlags{}), augment(x, b, AugmentFlags{}));
}

TEST(BundledData, DigitsSplitsLoad) {
  const std::filesystem::path root = ADVFLOW_SOURCE_DIR;
  const Dataset train = load_dataset(root / "data/digits_train.advd");
  const Dataset test = load_dataset(root / "data/digits_test.advd", Split::test);
  EXPECT_EQ(train.size(), 8004u);
  EXPECT_EQ(test.size(), 1996u);
  EXPECT_EQ(train.height(), 28);
  EXPECT_EQ(train.channels(), 1);
  EXPECT_EQ(train.num_classes(), 10);
}
