#include "hic/motion/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "hic/numeric/rng.hpp"

namespace hic {
namespace {

using enum Modality;
using enum Window;

constexpr std::array<TaskSpec, kTaskCount> kTable = {{
    {TaskId::PE, "PE", Pose2D, Current, Pose3D, Current, MaskKind::None},
    {TaskId::FPE, "FPE", Pose2D, Current, Pose3D, Future, MaskKind::None},
    {TaskId::MR, "MR", Pose2D, Current, MeshParams, Current, MaskKind::None},
    {TaskId::FMR, "FMR", Pose2D, Current, MeshParams, Future, MaskKind::None},
    {TaskId::MP_P, "MP(P)", Pose3D, Current, Pose3D, Future, MaskKind::None},
    {TaskId::MIB_P, "MIB(P)", Pose3D, Current, Pose3D, Current, MaskKind::Time},
    {TaskId::JC_P, "JC(P)", Pose3D, Current, Pose3D, Current, MaskKind::Joint},
    {TaskId::MP_M, "MP(M)", MeshParams, Current, MeshParams, Future, MaskKind::None},
    {TaskId::MIB_M, "MIB(M)", MeshParams, Current, MeshParams, Current, MaskKind::Time},
    {TaskId::JC_M, "JC(M)", MeshParams, Current, MeshParams, Current, MaskKind::Joint},
}};

std::string canonical(std::string_view name) {
    std::string out;
    for (char ch : name) {
        if (ch == '(' || ch == ')' || ch == '_' || ch == ' ') continue;
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    }
    return out;
}

std::size_t mask_count(double ratio, std::size_t n, std::size_t maskable) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw DomainError("mask ratio must lie in [0,1], got " + std::to_string(ratio));
    const auto wanted = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    return std::min(wanted, maskable);
}

}  // namespace

const TaskSpec& task_spec(TaskId id) {
    const auto i = static_cast<std::size_t>(id);
    if (i >= kTaskCount) throw DomainError("unknown domain id " + std::to_string(i));
    return kTable[i];
}

std::string_view task_name(TaskId id) { return task_spec(id).name; }

TaskId parse_task(std::string_view name) {
    const std::string key = canonical(name);
    for (const TaskSpec& s : kTable)
        if (canonical(s.name) == key) return s.id;
    throw DomainError("unknown domain '" + std::string(name) + "'");
}

std::vector<TaskId> parse_task_list(std::string_view list) {
    std::vector<TaskId> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const std::size_t end = std::min(list.find(',', start), list.size());
        const std::string_view item = list.substr(start, end - start);
        if (!item.empty()) out.push_back(parse_task(item));
        start = end + 1;
    }
    if (out.empty()) throw DomainError("empty domain list");
    return out;
}

Mask make_time_mask(std::size_t frames, double ratio, std::uint64_t seed) {
    if (frames < 2) throw DimensionError("time mask needs at least 2 frames, got " + std::to_string(frames));
    const std::size_t zeros = mask_count(ratio, frames, frames - 2);
    Mask mask(frames, 1);
    Rng rng(seed);
    for (std::size_t i : rng.sample_without_replacement(frames - 2, zeros)) mask[i + 1] = 0;
    return mask;
}

Mask make_joint_mask(std::size_t joints, std::size_t root, double ratio, std::uint64_t seed,
                     std::optional<std::size_t> native_joints) {
    if (joints == 0) throw DimensionError("joint mask needs at least one joint");
    const std::size_t native = native_joints.value_or(joints);
    if (native == 0 || native > joints)
        throw DimensionError("native joint count " + std::to_string(native) + " outside [1," + std::to_string(joints) + "]");
    if (root >= native) throw IndexError("root joint " + std::to_string(root) + " out of range [0," + std::to_string(native) + ")");
    const std::size_t zeros = mask_count(ratio, native, native - 1);
    std::vector<std::size_t> eligible;
    for (std::size_t j = 0; j < native; ++j)
        if (j != root) eligible.push_back(j);
    Mask mask(joints, 1);
    Rng rng(seed);
    for (std::size_t i : rng.sample_without_replacement(eligible.size(), zeros)) mask[eligible[i]] = 0;
    return mask;
}

MotionSequence apply_time_mask(const MotionSequence& m, const Mask& mask) {
    if (mask.size() != m.frames()) throw DimensionError("time mask length does not match frame count");
    NdBuffer v = m.values();
    for (std::size_t f = 0; f < m.frames(); ++f)
        if (!mask[f])
            for (std::size_t j = 0; j < m.joints(); ++j)
                for (std::size_t c = 0; c < kChannels; ++c) v.at(f, j, c) = 0.0;
    return MotionSequence(std::move(v), m.modality(), m.native_joint_count(), m.beta());
}

MotionSequence apply_joint_mask(const MotionSequence& m, const Mask& mask) {
    if (mask.size() != m.joints()) throw DimensionError("joint mask length does not match joint count");
    NdBuffer v = m.values();
    for (std::size_t f = 0; f < m.frames(); ++f)
        for (std::size_t j = 0; j < m.joints(); ++j)
            if (!mask[j])
                for (std::size_t c = 0; c < kChannels; ++c) v.at(f, j, c) = 0.0;
    return MotionSequence(std::move(v), m.modality(), m.native_joint_count(), m.beta());
}

TaskSample derive_task(const MotionClip& clip, TaskId domain, std::uint64_t seed, double mask_ratio) {
    const TaskSpec& spec = task_spec(domain);
    clip.validate();
    if (clip.frames() < 2 || clip.frames() % 2 != 0)
        throw DimensionError("clip '" + clip.id + "' must have an even 2F >= 2 frame count, got " +
                             std::to_string(clip.frames()));
    const std::size_t F = clip.frames() / 2;
    auto window = [&](Modality m, Window w) { return clip.get(m).window(w == Window::Current ? 0 : F, F); };

    MotionSequence input = window(spec.input, spec.input_window);
    MotionSequence target = window(spec.output, spec.output_window);
    TaskSample sample{domain, input, target, std::nullopt, std::nullopt};
    if (spec.mask == MaskKind::Time) {
        sample.time_mask = make_time_mask(F, mask_ratio, mix_seed(seed, 1));
        sample.query_input = apply_time_mask(input, *sample.time_mask);
    } else if (spec.mask == MaskKind::Joint) {
        sample.joint_mask =
            make_joint_mask(input.joints(), kRootJoint, mask_ratio, mix_seed(seed, 2), input.native_joint_count());
        sample.query_input = apply_joint_mask(input, *sample.joint_mask);
    }
    return sample;
}

}  // namespace hic
