#include "mua/datamodel.hpp"

#include <gtest/gtest.h>

using namespace mua;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no mua::Error thrown";
  return ErrorCode::Io;
}

SpectralLibrary constant_library(Index bands, Index count, double v = 0.5) {
  return SpectralLibrary(Matrix::Constant(bands, count, v));
}

}  // namespace

TEST(Datamodel, MatchingBandsValidate) {
  const HyperspectralImage img(2, 3, Matrix::Constant(224, 6, 0.2));
  EXPECT_NO_THROW(validate_pair(img, constant_library(224, 240)));
}

TEST(Datamodel, BandMismatchDetected) {
  const HyperspectralImage img(2, 3, Matrix::Constant(188, 6, 0.2));
  EXPECT_EQ(code_of([&] { validate_pair(img, constant_library(224, 240)); }),
            ErrorCode::BandMismatch);
}

TEST(Datamodel, MinimalShapesAccepted) {
  const HyperspectralImage img(1, 1, Matrix::Constant(1, 1, 0.3));
  EXPECT_NO_THROW(validate_pair(img, constant_library(1, 1)));
  EXPECT_NO_THROW(AbundanceMatrix(Matrix::Zero(1, 1)));
}

TEST(Datamodel, MalformedImagesRejected) {
  EXPECT_EQ(code_of([] { HyperspectralImage(2, 3, Matrix::Zero(4, 5)); }),
            ErrorCode::InvalidShape);
  EXPECT_EQ(code_of([] { HyperspectralImage(0, 3, Matrix::Zero(4, 0)); }),
            ErrorCode::InvalidShape);
  EXPECT_EQ(code_of([] { HyperspectralImage(1, 1, Matrix::Zero(0, 1)); }),
            ErrorCode::InvalidShape);
}

TEST(Datamodel, LibraryEntriesMustBeReflectances) {
  Matrix m = Matrix::Constant(3, 2, 0.5);
  m(1, 1) = 1.5;
  EXPECT_EQ(code_of([&] { SpectralLibrary{m}; }), ErrorCode::InvalidShape);
  m(1, 1) = -0.1;
  EXPECT_EQ(code_of([&] { SpectralLibrary{m}; }), ErrorCode::InvalidShape);
  m.col(1).setZero();
  EXPECT_EQ(code_of([&] { SpectralLibrary{m}; }), ErrorCode::InvalidShape);
  EXPECT_EQ(code_of([] { SpectralLibrary(Matrix::Constant(3, 2, 0.5), std::vector<int>{1}); }),
            ErrorCode::InvalidShape);
}

TEST(Datamodel, SegmentMapRenumbersDensely) {
  const auto seg = SegmentMap::from_labels({7, 7, 2, 9, 2});
  EXPECT_EQ(seg.segment_count(), 3);
  EXPECT_EQ(seg.labels(), (std::vector<Index>{0, 0, 1, 2, 1}));
  EXPECT_EQ(seg.sizes(), (std::vector<Index>{2, 2, 1}));
}

TEST(Datamodel, SegmentMapRejectsBadLabels) {
  EXPECT_EQ(code_of([] { SegmentMap({0, 2, 2}, 3); }), ErrorCode::InvalidShape);  // empty 1
  EXPECT_EQ(code_of([] { SegmentMap({0, 3}, 2); }), ErrorCode::InvalidShape);
  EXPECT_EQ(code_of([] { SegmentMap({0, 1}, 3); }), ErrorCode::InvalidShape);
  EXPECT_EQ(code_of([] { SegmentMap::from_labels({}); }), ErrorCode::InvalidShape);
  EXPECT_EQ(code_of([] { SegmentMap::from_labels({0, -1}); }), ErrorCode::InvalidArgument);
}

TEST(Datamodel, IdentitySegmentMap) {
  const auto seg = SegmentMap::identity(4);
  EXPECT_EQ(seg.segment_count(), 4);
  for (Index n = 0; n < 4; ++n) EXPECT_EQ(seg.label(n), n);
}

TEST(Datamodel, ConfigValidation) {
  MuaConfig c;
  EXPECT_EQ(code_of([&] { c.validate(100); }), ErrorCode::InvalidArgument);  // unset weights
  c.lambda_c = 0.03;
  c.lambda = 0.1;
  c.beta = 30;
  EXPECT_NO_THROW(c.validate(100));
  c.region_size = 10;
  EXPECT_EQ(code_of([&] { c.validate(100); }), ErrorCode::RegionTooLarge);
  c.region_size = 1;
  EXPECT_EQ(code_of([&] { c.validate(100); }), ErrorCode::InvalidArgument);
  c.region_size = 6;
  c.beta = -1;
  EXPECT_EQ(code_of([&] { c.validate(100); }), ErrorCode::InvalidArgument);
  c.beta = 0;
  c.solver.mu = 0;
  EXPECT_EQ(code_of([&] { c.validate(100); }), ErrorCode::InvalidArgument);
}

TEST(Datamodel, TransformNames) {
  for (const auto t : {TransformKind::Slic, TransformKind::Kmeans, TransformKind::Grid})
    EXPECT_EQ(parse_transform(to_string(t)), t);
  EXPECT_EQ(code_of([] { parse_transform("bpt"); }), ErrorCode::InvalidArgument);
}

TEST(Datamodel, ErrorCategories) {
  EXPECT_FALSE(is_io_error(ErrorCode::BandMismatch));
  EXPECT_TRUE(is_io_error(ErrorCode::TruncatedData));
  EXPECT_TRUE(is_io_error(ErrorCode::NonNumeric));
}
