// Copyright 2026 The K-CROSS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cmath>
#include <filesystem>

#include "gtest/gtest.h"
#include "kcross/errors.hpp"
#include "kcross/phantom.hpp"
#include "kcross/segmentation.hpp"

namespace kcross::seg {
namespace {

TEST(SegmentationTest, BrightEllipseAreaWithinFivePercent) {
  const auto registry = SegmenterRegistry::WithDefaults();
  const phantom::Ellipse shapes[] = {{32, 30, 9, 14, 0.3, 1.0},
                                     {20, 40, 6, 6, 0.0, 1.0},
                                     {35, 28, 12, 7, -0.7, 1.0}};
  for (const std::string id : {"fixed_threshold", "otsu_band"}) {
    const auto backend = registry.Get(id);
    for (const auto& e : shapes) {
      Image im = phantom::RenderEllipse(64, e, 0.9);
      for (auto& p : im.pixels) p += 0.05;
      const LesionMask mask = backend->Segment(im);
      double area = 0.0;
      for (auto v : mask.mask) area += v;
      EXPECT_NEAR(area, e.Area(), 0.05 * e.Area()) << id;
    }
  }
}

TEST(SegmentationTest, FindsPhantomTumor) {
  OtsuBandSegmenter seg;
  for (int seed = 0; seed < 10; ++seed) {
    const auto s = phantom::Generate(
        phantom::RandomSpec(seed, phantom::Degradation::kGaussianBlur, 0.0, false));
    const LesionMask m = seg.Segment(s.target);
    double inter = 0.0, uni = 0.0;
    for (std::size_t i = 0; i < m.mask.size(); ++i) {
      const bool a = m.mask[i] != 0, b = s.mask_truth.pixels[i] != 0.0;
      inter += a && b;
      uni += a || b;
    }
    EXPECT_GT(inter / uni, 0.6) << "seed " << seed;
  }
}

TEST(SegmentationTest, AllZeroImageGivesEmptyMask) {
  const Image zero(32, 32, 0.0);
  for (const auto& id : SegmenterRegistry::WithDefaults().ids()) {
    const LesionMask m = SegmenterRegistry::WithDefaults().Get(id)->Segment(zero);
    EXPECT_TRUE(m.empty()) << id;
    EXPECT_EQ(m.coverage(), 0.0);
  }
}

TEST(SegmentationTest, DeterministicAndCounted) {
  OtsuBandSegmenter seg;
  const auto s = phantom::Generate(
      phantom::RandomSpec(2, phantom::Degradation::kAdditiveNoise, 0.5, false));
  const auto checksum = seg.ParameterChecksum();
  EXPECT_EQ(seg.Segment(s.synthesized), seg.Segment(s.synthesized));
  EXPECT_EQ(seg.calls(), 2);
  seg.ResetCalls();
  EXPECT_EQ(seg.calls(), 0);
  EXPECT_EQ(seg.ParameterChecksum(), checksum);
}

TEST(SegmentationTest, Errors) {
  try {
    SegmenterRegistry::WithDefaults().Get("nnunet");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("otsu_band"), std::string::npos);
  }
  Image bad(8, 8, 0.5);
  bad(3, 3) = std::nan("");
  try {
    OtsuBandSegmenter().Segment(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSegmentation);
  }
}

TEST(SegmentationTest, LargestComponentKeepsBiggest) {
  LesionMask m{5, 5, std::vector<std::uint8_t>(25, 0)};
  m.mask[0] = 1;
  for (int i : {12, 13, 17, 18}) m.mask[i] = 1;
  const LesionMask out = LargestComponent(m);
  EXPECT_EQ(out.mask[0], 0);
  EXPECT_DOUBLE_EQ(out.coverage(), 4.0 / 25.0);
}

TEST(SegmentationTest, PatchExtraction) {
  Image im(16, 16, 0.2);
  LesionMask m{16, 16, std::vector<std::uint8_t>(256, 0)};
  for (int y = 4; y < 8; ++y)
    for (int x = 6; x < 10; ++x) {
      m.mask[y * 16 + x] = 1;
      im(y, x) = 0.8;
    }
  const Image p = ExtractLesionPatch(im, m, 8);
  ASSERT_EQ(p.rows, 8);
  for (double v : p.pixels) EXPECT_NEAR(v, 0.8, 1e-12);
  const Image z = ExtractLesionPatch(im, LesionMask{16, 16, std::vector<std::uint8_t>(256, 0)}, 8);
  for (double v : z.pixels) EXPECT_EQ(v, 0.0);
}

TEST(SegmentationTest, MaskPngRoundTrip) {
  const auto s = phantom::Generate(
      phantom::RandomSpec(8, phantom::Degradation::kGaussianBlur, 0.0, false));
  const LesionMask m = OtsuBandSegmenter().Segment(s.target);
  const auto path = std::filesystem::temp_directory_path() / "kcross_mask_test.png";
  SaveMaskPng(path.string(), m);
  EXPECT_EQ(LoadMaskPng(path.string()), m);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace kcross::seg
