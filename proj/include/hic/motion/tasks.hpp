#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "hic/motion/motion.hpp"

namespace hic {

// The ten in-context domains. Order is the table order used in files and logs.
enum class TaskId : std::uint8_t { PE, FPE, MR, FMR, MP_P, MIB_P, JC_P, MP_M, MIB_M, JC_M };

inline constexpr std::size_t kTaskCount = 10;
inline constexpr std::array<TaskId, kTaskCount> kAllTasks = {TaskId::PE,   TaskId::FPE,   TaskId::MR,   TaskId::FMR,
                                                             TaskId::MP_P, TaskId::MIB_P, TaskId::JC_P, TaskId::MP_M,
                                                             TaskId::MIB_M, TaskId::JC_M};

enum class Window : std::uint8_t { Current, Future };
enum class MaskKind : std::uint8_t { None, Time, Joint };

struct TaskSpec {
    TaskId id;
    std::string_view name;  // "MP(P)" etc.
    Modality input;
    Window input_window;
    Modality output;
    Window output_window;
    MaskKind mask;
};

const TaskSpec& task_spec(TaskId id);
std::string_view task_name(TaskId id);
// Accepts "MP(P)", "MP_P", "mp_p" spellings.
TaskId parse_task(std::string_view name);
// Comma separated list of task names.
std::vector<TaskId> parse_task_list(std::string_view list);
inline bool is_mesh_output(TaskId id) { return task_spec(id).output == Modality::MeshParams; }

// 1 = kept, 0 = masked.
using Mask = std::vector<std::uint8_t>;

inline constexpr double kDefaultMaskRatio = 0.4;

// First and last frames are never masked; exactly min(floor(ratio*F), F-2) zeros.
Mask make_time_mask(std::size_t frames, double ratio, std::uint64_t seed);
// Root is never masked; exactly min(floor(ratio*N), N-1) zeros among the first
// N joints (N = native_joints when given, else J). Virtual joints stay 1.
Mask make_joint_mask(std::size_t joints, std::size_t root, double ratio, std::uint64_t seed,
                     std::optional<std::size_t> native_joints = std::nullopt);

MotionSequence apply_time_mask(const MotionSequence& m, const Mask& mask);
MotionSequence apply_joint_mask(const MotionSequence& m, const Mask& mask);

struct TaskSample {
    TaskId domain;
    MotionSequence query_input;
    // Carries the target shape parameters for mesh-output domains.
    MotionSequence query_target;
    std::optional<Mask> time_mask;
    std::optional<Mask> joint_mask;
};

// Builds the F-frame query pair of one domain from a 2F-frame clip.
TaskSample derive_task(const MotionClip& clip, TaskId domain, std::uint64_t seed, double mask_ratio = kDefaultMaskRatio);

}  // namespace hic
