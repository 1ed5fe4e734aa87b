#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hic/motion/tasks.hpp"
#include "test_util.hpp"

using namespace hic;

namespace {

std::size_t zeros(const Mask& m) { return static_cast<std::size_t>(std::count(m.begin(), m.end(), 0)); }

}  // namespace

TEST_CASE("unify_pose2d appends a zero z slice") {
    const auto one = unify_pose2d(NdBuffer({1, 1, 2}, {1, 2}));
    CHECK(one.values() == NdBuffer({1, 1, 3}, {1, 2, 0}));
    CHECK(one.modality() == Modality::Pose2D);

    CHECK(unify_pose2d(NdBuffer({2, 2, 2})).values() == NdBuffer({2, 2, 3}));

    Rng rng(1);
    NdBuffer p({2, 3, 2});
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng.normal();
    const auto u = unify_pose2d(p);
    CHECK(u.values().shape() == Shape{2, 3, 3});
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t j = 0; j < 3; ++j) CHECK(u.values().at(f, j, 2) == 0.0);

    CHECK_THROWS_AS(unify_pose2d(NdBuffer{}), DimensionError);
}

TEST_CASE("reorganize_mesh_params groups rotations per joint") {
    const Mat theta = (Mat(1, 6) << 1, 2, 3, 4, 5, 6).finished();
    const auto m = reorganize_mesh_params(theta, Vec::Zero(kShapeParams));
    CHECK(m.values() == NdBuffer({1, 2, 3}, {1, 2, 3, 4, 5, 6}));
    CHECK(m.values().at(0, 1, 0) == 4.0);

    Rng rng(2);
    const Mat smpl = test::random_mat(rng, 1, 72);
    Vec beta(kShapeParams);
    beta.setLinSpaced(-1.0, 1.0);
    const auto frame = reorganize_mesh_params(smpl, beta);
    CHECK(frame.values().shape() == Shape{1, 24, 3});
    CHECK(frame.beta() == beta);

    const Mat seq = test::random_mat(rng, 5, 72);
    CHECK(flatten_mesh_params(reorganize_mesh_params(seq, beta)) == seq);

    CHECK_THROWS_AS(reorganize_mesh_params(Mat::Zero(1, 7), beta), DimensionError);
}

TEST_CASE("pad_virtual_joints appends zero joints") {
    Rng rng(3);
    const auto pose = test::random_sequence(rng, 4, 17);
    const auto padded = pad_virtual_joints(pose, 24);
    CHECK(padded.joints() == 24);
    CHECK(padded.native_joint_count() == 17);
    for (std::size_t f = 0; f < 4; ++f)
        for (std::size_t j = 17; j < 24; ++j)
            for (std::size_t c = 0; c < 3; ++c) CHECK(padded.values().at(f, j, c) == 0.0);
    CHECK(pad_virtual_joints(pose, 17) == pose);
    CHECK_THROWS_AS(pad_virtual_joints(pose, 16), DimensionError);

    // Padded joints add nothing to per-joint sums.
    const double before = pose.values().flat().cwiseAbs().sum();
    const double after = padded.values().flat().cwiseAbs().sum();
    CHECK(before == after);
}

TEST_CASE("sequence invariants are enforced") {
    NdBuffer v({1, 2, 3}, {0, 0, 1, 0, 0, 0});
    CHECK_THROWS_AS(MotionSequence(v, Modality::Pose2D, 2), DomainError);
    Vec beta = Vec::Ones(kShapeParams);
    CHECK_THROWS_AS(MotionSequence(NdBuffer({1, 1, 3}), Modality::Pose3D, 1, beta), DomainError);
    CHECK_THROWS_AS(MotionSequence(NdBuffer({1, 2, 3}, {0, 0, 0, 1, 0, 0}), Modality::Pose3D, 1), DomainError);
}

TEST_CASE("time mask examples") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto m = make_time_mask(16, 0.4, seed);
        REQUIRE(m.size() == 16);
        CHECK(zeros(m) == 6);
        CHECK(m.front() == 1);
        CHECK(m.back() == 1);
    }
    CHECK(zeros(make_time_mask(16, 0.0, 9)) == 0);
    CHECK(make_time_mask(3, 0.9, 9) == Mask{1, 0, 1});
    CHECK_THROWS_AS(make_time_mask(1, 0.4, 0), DimensionError);
    CHECK_THROWS_AS(make_time_mask(8, 1.5, 0), DomainError);
    CHECK(make_time_mask(16, 0.4, 77) == make_time_mask(16, 0.4, 77));
}

TEST_CASE("time mask law over random triples") {
    Rng rng(99);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t F = 2 + rng.uniform_index(40);
        const double ratio = rng.uniform();
        const auto m = make_time_mask(F, ratio, rng.next_u64());
        const auto expected = std::min<std::size_t>(static_cast<std::size_t>(std::floor(ratio * F + 1e-9)), F - 2);
        REQUIRE(zeros(m) == expected);
        REQUIRE(m.front() == 1);
        REQUIRE(m.back() == 1);
    }
}

TEST_CASE("joint mask examples") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto m = make_joint_mask(24, 0, 0.4, seed);
        CHECK(zeros(m) == 9);
        CHECK(m[0] == 1);
    }
    CHECK(zeros(make_joint_mask(24, 0, 0.0, 1)) == 0);
    CHECK(make_joint_mask(2, 0, 1.0, 1) == Mask{1, 0});
    CHECK_THROWS_AS(make_joint_mask(5, 5, 0.4, 1), IndexError);

    const auto native = make_joint_mask(24, 0, 0.4, 5, 17);
    CHECK(zeros(native) == 6);
    for (std::size_t j = 17; j < 24; ++j) CHECK(native[j] == 1);
}

TEST_CASE("derive_task follows the domain table") {
    Rng rng(4);
    const auto clip = test::random_clip(rng, 8, 5);
    const std::size_t F = 4;

    const auto mp = derive_task(clip, TaskId::MP_P, 1);
    CHECK(mp.query_input == clip.pose3d.window(0, F));
    CHECK(mp.query_target == clip.pose3d.window(F, F));

    const auto pe = derive_task(clip, TaskId::PE, 1);
    CHECK(pe.query_input == clip.pose2d.window(0, F));
    CHECK(pe.query_target == clip.pose3d.window(0, F));
    CHECK(pe.query_target.beta().isZero(0.0));

    const auto mib = derive_task(clip, TaskId::MIB_M, 1);
    REQUIRE(mib.time_mask.has_value());
    CHECK(mib.query_target == clip.mesh.window(0, F));
    CHECK(mib.query_target.beta() == clip.mesh.beta());
    CHECK(mib.query_input == apply_time_mask(clip.mesh.window(0, F), *mib.time_mask));

    const auto fmr = derive_task(clip, TaskId::FMR, 1);
    CHECK(fmr.query_input == clip.pose2d.window(0, F));
    CHECK(fmr.query_target == clip.mesh.window(F, F));

    CHECK_THROWS_AS(derive_task(clip, static_cast<TaskId>(42), 1), DomainError);
}

TEST_CASE("derive_task shapes and mask application for every domain") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto clip = test::random_clip(rng, 2 * (2 + rng.uniform_index(6)), 1 + rng.uniform_index(8));
        const std::size_t F = clip.frames() / 2, J = clip.joints();
        for (TaskId id : kAllTasks) {
            const auto s = derive_task(clip, id, rng.next_u64());
            CHECK(s.query_input.values().shape() == Shape{F, J, 3});
            CHECK(s.query_target.values().shape() == Shape{F, J, 3});
            const TaskSpec& spec = task_spec(id);
            const auto source = clip.get(spec.input).window(0, F);
            for (std::size_t f = 0; f < F; ++f)
                for (std::size_t j = 0; j < J; ++j) {
                    const bool masked = (s.time_mask && !(*s.time_mask)[f]) || (s.joint_mask && !(*s.joint_mask)[j]);
                    for (std::size_t c = 0; c < 3; ++c)
                        CHECK(s.query_input.values().at(f, j, c) == (masked ? 0.0 : source.values().at(f, j, c)));
                }
            CHECK(s.query_target.beta().isZero(0.0) == !is_mesh_output(id));
        }
    }
}

TEST_CASE("task names parse in both spellings") {
    CHECK(parse_task("MP(P)") == TaskId::MP_P);
    CHECK(parse_task("mib_m") == TaskId::MIB_M);
    CHECK(parse_task_list("PE,MP(P),MIB_P") == std::vector<TaskId>{TaskId::PE, TaskId::MP_P, TaskId::MIB_P});
    CHECK_THROWS_AS(parse_task("XYZ"), DomainError);
}

TEST_CASE("canonical T-body is all zero mesh parameters") {
    const auto t = canonical_tbody(1, 1);
    CHECK(t.values() == NdBuffer({1, 1, 3}, {0, 0, 0}));
    CHECK(t.modality() == Modality::MeshParams);
    CHECK(t.beta().isZero(0.0));
}
