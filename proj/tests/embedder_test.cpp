#include "hsta/embedder.hpp"
#include "test_support.hpp"

namespace hsta {
namespace {

EmbedderConfig geometry(std::size_t h, std::size_t w, std::size_t ch, std::size_t p, std::size_t t) {
  EmbedderConfig c;
  c.height = h;
  c.width = w;
  c.channels = ch;
  c.patch = p;
  c.tubelet = t;
  return c;
}

std::size_t nonzero_rows(const Tensor& x) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    bool any = false;
    for (std::size_t c = 0; c < x.cols(); ++c) any |= x(i, c) != 0.0;
    count += any;
  }
  return count;
}

TEST(Embedder, TokenCounts) {
  const EmbedderConfig c;
  EXPECT_EQ(c.video_tokens(6), 48u);
  EXPECT_EQ(c.special_tokens(), 16u);
  for (std::size_t p : {1, 2, 4}) {
    for (std::size_t t : {1, 2}) {
      const EmbedderConfig g = geometry(8, 12, 2, p, t);
      Rng rng(p * 10 + t);
      const EmbedderParams params = EmbedderParams::init(g, 4, 5, rng);
      const TokenState v = embed_video(uniform_tensor({4, 8, 12, 2}, 1.0, rng), g, params);
      EXPECT_EQ(v.features.rows(), (4 / t) * (8 / p) * (12 / p));
      const TokenState s =
          embed_special(uniform_tensor({8, 12, 2}, 1.0, rng), uniform_tensor({8, 12, 2}, 1.0, rng), g, params);
      EXPECT_EQ(s.features.rows(), (8 / p) * (12 / p));
      EXPECT_EQ(s.modality, Modality::special);
    }
  }
}

TEST(Embedder, IndivisibleExtentsListed) {
  try {
    geometry(30, 32, 1, 8, 2).validate(5);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("30"), std::string::npos) << msg;
    EXPECT_NE(msg.find("5"), std::string::npos) << msg;
    EXPECT_EQ(msg.find("width"), std::string::npos) << msg;
  }
}

TEST(Embedder, ZeroClipGivesZeroTokensAndSeedCls) {
  const EmbedderConfig c;
  Rng rng(1);
  EmbedderParams p = EmbedderParams::init(c, 6, 8, rng);
  p.video_pos.value.fill(0);
  p.special_pos.value.fill(0);
  const TokenState v = embed_video(Tensor({6, 32, 32, 1}), c, p);
  EXPECT_EQ(v.features, Tensor({48, 8}));
  EXPECT_EQ(v.cls, p.video_cls.value);
  const TokenState s = embed_special(Tensor({32, 32, 1}), Tensor({32, 32, 1}), c, p);
  EXPECT_EQ(s.features, Tensor({16, 8}));
  EXPECT_EQ(s.cls, p.special_cls.value);
}

TEST(Embedder, SinglePixelActivatesOneTokenInScanOrder) {
  const EmbedderConfig c = geometry(8, 8, 1, 4, 2);
  Rng rng(2);
  EmbedderParams p = EmbedderParams::init(c, 4, 3, rng);
  p.video_pos.value.fill(0);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        Tensor clip({4, 8, 8, 1});
        clip[(t * 8 + y) * 8 + x] = 1.0;
        const TokenState v = embed_video(clip, c, p);
        ASSERT_EQ(nonzero_rows(v.features), 1u);
        const std::size_t token = (t / 2) * 4 + (y / 4) * 2 + x / 4;
        const std::size_t feature = ((t % 2) * 4 + y % 4) * 4 + x % 4;
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(v.features(token, k), p.video_proj.value(feature, k));
      }
    }
  }
}

TEST(Embedder, TubeletLayout) {
  Tensor frames({2, 4, 4, 1});
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = static_cast<double>(i);
  const Tensor tub = extract_tubelets(frames, 2, 2);
  ASSERT_EQ(tub.shape(), (Shape{4, 8}));
  // token 1 = row block 0, column block 1: pixels (t, y, x) with x in {2, 3}.
  const std::vector<double> expect = {2, 3, 6, 7, 18, 19, 22, 23};
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(tub(1, k), expect[k]);
}

TEST(Embedder, LinearInPixelsWithoutPositions) {
  const EmbedderConfig c = geometry(8, 8, 2, 4, 2);
  Rng rng(3);
  EmbedderParams p = EmbedderParams::init(c, 4, 6, rng);
  p.video_pos.value.fill(0);
  p.special_pos.value.fill(0);
  const Tensor x = uniform_tensor({4, 8, 8, 2}, 1.0, rng);
  Tensor ax = x;
  ax.arr() *= 2.5;
  Tensor expect = embed_video(x, c, p).features;
  expect.arr() *= 2.5;
  EXPECT_LE(max_abs_diff(embed_video(ax, c, p).features, expect), 1e-12);
}

TEST(Embedder, SpecialFramesAreOrderSensitive) {
  const EmbedderConfig c = geometry(8, 8, 1, 4, 2);
  Rng rng(4);
  const EmbedderParams p = EmbedderParams::init(c, 4, 6, rng);
  const Tensor a = uniform_tensor({8, 8, 1}, 1.0, rng), b = uniform_tensor({8, 8, 1}, 1.0, rng);
  EXPECT_FALSE(embed_special(a, b, c, p).features == embed_special(b, a, c, p).features);
  EXPECT_EQ(embed_special(a, a, c, p).features, embed_special(a, a, c, p).features);
  EXPECT_EQ(stack_special_frames(a, b).shape(), (Shape{2, 8, 8, 1}));
}

TEST(Embedder, WrongClipShapeRejected) {
  const EmbedderConfig c = geometry(8, 8, 1, 4, 2);
  Rng rng(5);
  const EmbedderParams p = EmbedderParams::init(c, 4, 6, rng);
  EXPECT_THROW(embed_video(Tensor({2, 8, 8, 1}), c, p), DimensionError);
}

}  // namespace
}  // namespace hsta
