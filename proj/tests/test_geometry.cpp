#include "pcdistill/geometry.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "pcdistill/rng.hpp"

using namespace pcdistill;

namespace {

CalibratedCamera simple_camera(double f = 100.0, double c = 32.0, int size = 64, int stride = 4) {
  CalibratedCamera cam;
  cam.intrinsics = Mat3::identity();
  cam.intrinsics.at(0, 0) = f;
  cam.intrinsics.at(1, 1) = f;
  cam.intrinsics.at(0, 2) = c;
  cam.intrinsics.at(1, 2) = c;
  cam.image_height = size;
  cam.image_width = size;
  cam.patch_stride = stride;
  cam.validate();
  return cam;
}

Mat4 random_rigid(Rng& rng) {
  // Compose rotations about all three axes plus a translation.
  const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-1.2, 1.2), c = rng.uniform(-3.0, 3.0);
  Mat3 rz = Mat3::rotation_z(a);
  Mat3 ry = Mat3::identity();
  ry.at(0, 0) = std::cos(b);
  ry.at(0, 2) = std::sin(b);
  ry.at(2, 0) = -std::sin(b);
  ry.at(2, 2) = std::cos(b);
  Mat3 rx = Mat3::identity();
  rx.at(1, 1) = std::cos(c);
  rx.at(1, 2) = -std::sin(c);
  rx.at(2, 1) = std::sin(c);
  rx.at(2, 2) = std::cos(c);
  const Vec3 t{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
  return Mat4::from_rt(rz * ry * rx, t);
}

TEST(ProjectPoint, OpticalAxisHitsPrincipalPoint) {
  const auto cam = simple_camera();
  const auto p = project_point({0, 0, 5}, cam);
  ASSERT_TRUE(p.has_value());
  EXPECT_DOUBLE_EQ(p->u, 32.0);
  EXPECT_DOUBLE_EQ(p->v, 32.0);
  EXPECT_DOUBLE_EQ(p->depth, 5.0);
}

TEST(ProjectPoint, DirectEvaluation) {
  const auto cam = simple_camera();
  const auto p = project_point({1, 0, 5}, cam);
  ASSERT_TRUE(p.has_value());
  EXPECT_DOUBLE_EQ(p->u, 52.0);  // 100 * 1/5 + 32
  EXPECT_DOUBLE_EQ(p->v, 32.0);
  EXPECT_DOUBLE_EQ(p->depth, 5.0);
}

TEST(ProjectPoint, BehindCameraIsAbsent) {
  const auto cam = simple_camera();
  EXPECT_FALSE(project_point({0, 0, -1}, cam).has_value());
  EXPECT_FALSE(project_point({0, 0, 0}, cam).has_value());
}

TEST(ProjectPoint, BoundaryPixelExcluded) {
  const auto cam = simple_camera();
  // u = 100 * 1.6/5 + 32 = 64 = W exactly: excluded by the half-open domain.
  EXPECT_FALSE(project_point({1.6, 0, 5}, cam).has_value());
  EXPECT_TRUE(project_point({1.59, 0, 5}, cam).has_value());
}

TEST(ProjectPoint, RoundTripThroughUnprojection) {
  Rng rng(7);
  const auto cam = simple_camera(80.0, 32.0);
  int tested = 0;
  for (int i = 0; i < 20000; ++i) {
    const Vec3 p{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(0.2, 30)};
    const auto proj = project_point(p, cam);
    if (!proj) continue;
    ++tested;
    const Vec3 back = unproject_pixel(proj->u, proj->v, proj->depth, cam);
    EXPECT_NEAR(back.x, p.x, 1e-9);
    EXPECT_NEAR(back.y, p.y, 1e-9);
    EXPECT_NEAR(back.z, p.z, 1e-9);
  }
  EXPECT_GT(tested, 5000);
}

TEST(ProjectPoint, RoundTripWithNontrivialExtrinsics) {
  Rng rng(11);
  auto cam = simple_camera(60.0, 32.0);
  cam.extrinsics = random_rigid(rng);
  for (int i = 0; i < 20000; ++i) {
    const Vec3 p{rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20)};
    const auto proj = project_point(p, cam);
    if (!proj) continue;
    const Vec3 back = unproject_pixel(proj->u, proj->v, proj->depth, cam);
    EXPECT_NEAR(back.x, p.x, 1e-9);
    EXPECT_NEAR(back.y, p.y, 1e-9);
    EXPECT_NEAR(back.z, p.z, 1e-9);
  }
}

TEST(BuildCorrespondences, SinglePointOnAxis) {
  const auto cam = simple_camera();
  PointCloud pc;
  pc.points.push_back({0, 0, 5, 0.5});
  const auto corr = build_correspondences(pc, {cam});
  ASSERT_EQ(corr.size(), 1u);
  EXPECT_EQ(corr[0].point_index, 0u);
  EXPECT_EQ(corr[0].camera_index, 0u);
  EXPECT_EQ(corr[0].patch_row, 32 / 4);
  EXPECT_EQ(corr[0].patch_col, 32 / 4);
}

TEST(BuildCorrespondences, PointBehindOnlyCamera) {
  const auto cam = simple_camera();
  PointCloud pc;
  pc.points.push_back({0, 0, -5, 0.5});
  EXPECT_TRUE(build_correspondences(pc, {cam}).empty());
}

TEST(BuildCorrespondences, MatchesBruteForceFrustumOracle) {
  Rng rng(3);
  auto cam_front = simple_camera(80.0);
  auto cam_back = simple_camera(80.0);
  // Second camera faces the opposite direction (180 degree yaw).
  cam_back.extrinsics = Mat4::from_rt(Mat3::rotation_z(3.14159265358979323846), {0.3, -0.2, 0.1});
  const std::vector<CalibratedCamera> cams{cam_front, cam_back};

  PointCloud pc;
  for (int i = 0; i < 100; ++i)
    pc.points.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10),
                         rng.uniform(0, 1)});

  // Independent oracle: enumerate every (point, camera) pair and apply the
  // frustum conditions directly.
  std::size_t expected = 0;
  for (const auto& cam : cams) {
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const Vec3 pc_cam = cam.extrinsics.apply_point(pc.xyz(i));
      if (pc_cam.z <= kDepthEpsilon) continue;
      const Vec3 uvw = cam.intrinsics.apply(pc_cam);
      const double u = uvw.x / pc_cam.z, v = uvw.y / pc_cam.z;
      if (u >= 0 && u < cam.image_width && v >= 0 && v < cam.image_height) ++expected;
    }
  }
  EXPECT_EQ(build_correspondences(pc, cams).size(), expected);
  EXPECT_GT(expected, 0u);
}

TEST(BuildCorrespondences, CountInvariantUnderPermutation) {
  Rng rng(5);
  const auto cam = simple_camera(80.0);
  PointCloud pc;
  for (int i = 0; i < 200; ++i)
    pc.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 20),
                         rng.uniform(0, 1)});
  const auto base = build_correspondences(pc, {cam});

  std::vector<std::size_t> perm(pc.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  PointCloud shuffled;
  for (std::size_t i : perm) shuffled.points.push_back(pc.points[i]);
  EXPECT_EQ(build_correspondences(shuffled, {cam}).size(), base.size());
}

TEST(BuildCorrespondences, PatchIndicesStayInGrid) {
  Rng rng(9);
  const auto cam = simple_camera(40.0);
  PointCloud pc;
  for (int i = 0; i < 5000; ++i)
    pc.points.push_back({rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30),
                         rng.uniform(0, 1)});
  for (const auto& c : build_correspondences(pc, {cam})) {
    EXPECT_GE(c.patch_row, 0);
    EXPECT_GE(c.patch_col, 0);
    EXPECT_LT(c.patch_row, cam.patch_rows());
    EXPECT_LT(c.patch_col, cam.patch_cols());
    EXPECT_EQ(c.patch_row, static_cast<int>(std::floor(c.v / cam.patch_stride)));
    EXPECT_EQ(c.patch_col, static_cast<int>(std::floor(c.u / cam.patch_stride)));
  }
}

TEST(BuildCorrespondences, NoCamerasRejected) {
  PointCloud pc;
  pc.points.push_back({0, 0, 5, 0.5});
  EXPECT_THROW(build_correspondences(pc, {}), std::invalid_argument);
}

TEST(TransformCloud, IdentityIsBitwiseEqual) {
  Rng rng(1);
  PointCloud pc;
  for (int i = 0; i < 50; ++i)
    pc.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5),
                         rng.uniform(0, 1)});
  pc.labels.assign(50, 2);
  const auto out = transform_cloud(pc, Mat4::identity());
  EXPECT_EQ(out.points, pc.points);
  EXPECT_EQ(out.labels, pc.labels);
}

TEST(TransformCloud, PureTranslation) {
  PointCloud pc;
  pc.points.push_back({1, 1, 1, 0.25});
  const auto out = transform_cloud(pc, Mat4::translation({1, 2, 3}));
  EXPECT_DOUBLE_EQ(out.points[0][0], 2.0);
  EXPECT_DOUBLE_EQ(out.points[0][1], 3.0);
  EXPECT_DOUBLE_EQ(out.points[0][2], 4.0);
  EXPECT_DOUBLE_EQ(out.points[0][3], 0.25);
}

TEST(TransformCloud, QuarterTurnAboutZ) {
  PointCloud pc;
  pc.points.push_back({1, 0, 0, 0.0});
  const auto out = transform_cloud(pc, Mat4::from_rt(Mat3::rotation_z(M_PI / 2), {0, 0, 0}));
  EXPECT_NEAR(out.points[0][0], 0.0, 1e-12);
  EXPECT_NEAR(out.points[0][1], 1.0, 1e-12);
  EXPECT_NEAR(out.points[0][2], 0.0, 1e-12);
}

TEST(TransformCloud, NonRigidRejected) {
  PointCloud pc;
  pc.points.push_back({1, 0, 0, 0.0});
  Mat4 t = Mat4::identity();
  t.at(0, 0) = 2.0;  // scaling
  EXPECT_THROW(transform_cloud(pc, t), std::invalid_argument);
}

TEST(TransformCloud, InverseRoundTrip) {
  Rng rng(13);
  PointCloud pc;
  for (int i = 0; i < 128; ++i)
    pc.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5),
                         rng.uniform(0, 1)});
  const Mat4 t = random_rigid(rng);
  const auto back = transform_cloud(transform_cloud(pc, t), t.inverse_rigid());
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (int a = 0; a < 4; ++a) EXPECT_NEAR(back.points[i][a], pc.points[i][a], 1e-9);
}

}  // namespace
