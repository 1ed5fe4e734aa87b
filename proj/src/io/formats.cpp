#include "hic/io/formats.hpp"

namespace hic {
namespace {

using nlohmann::json;

template <typename T>
T field(const json& m, const char* key) {
    if (!m.contains(key)) throw FormatError(std::string("manifest lacks '") + key + "'", kHeaderBytes);
    try {
        return m.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError(std::string("manifest field '") + key + "' has the wrong type", kHeaderBytes);
    }
}

std::size_t payload_offset(std::string_view bytes, const Container& c) { return bytes.size() - c.payload.size(); }

void put_sequence(ByteWriter& w, const MotionSequence& m) {
    for (std::size_t i = 0; i < m.values().size(); ++i) w.f32(m.values()[i]);
}

void put_beta(ByteWriter& w, const Vec& beta) {
    for (Eigen::Index i = 0; i < beta.size(); ++i) w.f32(beta(i));
}

NdBuffer get_values(ByteReader& r, std::size_t frames, std::size_t joints) {
    NdBuffer v({frames, joints, kChannels});
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = r.f32();
    return v;
}

Vec get_beta(ByteReader& r) {
    Vec beta(kShapeParams);
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta(i) = r.f32();
    return beta;
}

// Rewraps content errors from sequence validation with the offending byte offset.
template <typename Fn>
auto at_offset(std::size_t offset, Fn&& fn) {
    try {
        return fn();
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(e.what(), offset);
    }
}

Modality modality_field(const json& m, const char* key) {
    const auto name = field<std::string>(m, key);
    try {
        return parse_modality(name);
    } catch (const Error&) {
        throw FormatError("unknown modality '" + name + "'", kHeaderBytes);
    }
}

std::optional<TaskId> domain_field(const json& m) {
    if (!m.contains("domain") || m["domain"].is_null()) return std::nullopt;
    const auto name = field<std::string>(m, "domain");
    try {
        return parse_task(name);
    } catch (const Error&) {
        throw FormatError("unknown domain '" + name + "'", kHeaderBytes);
    }
}

std::string finish(json manifest, std::string payload) {
    manifest["payload_bytes"] = payload.size();
    return encode_container({std::move(manifest), std::move(payload)});
}

}  // namespace

std::string encode_dataset(const Dataset& dataset) {
    dataset.validate();
    const std::size_t clip_frames = dataset.clips[0].frames(), joints = dataset.joints();
    json m;
    m["kind"] = "dataset";
    m["version"] = kFormatVersion;
    m["frames"] = dataset.window();
    m["clip_frames"] = clip_frames;
    m["joints"] = joints;
    m["channels"] = kChannels;
    m["shape_params"] = kShapeParams;
    m["clip_count"] = dataset.clips.size();
    m["root_joint"] = kRootJoint;
    m["unit_to_mm"] = dataset.unit_to_mm;
    json clips = json::array();
    ByteWriter w;
    for (const MotionClip& c : dataset.clips) {
        clips.push_back({{"id", c.id},
                         {"source", c.source},
                         {"native_joints", c.pose3d.native_joint_count()},
                         {"modalities", {"pose2d", "pose3d", "mesh"}}});
        put_sequence(w, c.pose2d);
        put_sequence(w, c.pose3d);
        put_sequence(w, c.mesh);
        put_beta(w, c.mesh.beta());
    }
    m["clips"] = std::move(clips);
    return finish(std::move(m), w.take());
}

Dataset decode_dataset(std::string_view bytes) {
    const Container c = decode_container(bytes, "dataset");
    const json& m = c.manifest;
    const auto frames = field<std::size_t>(m, "clip_frames");
    const auto joints = field<std::size_t>(m, "joints");
    const auto count = field<std::size_t>(m, "clip_count");
    if (field<std::size_t>(m, "channels") != kChannels || field<std::size_t>(m, "shape_params") != kShapeParams)
        throw FormatError("unsupported channel or shape-parameter count", kHeaderBytes);
    if (field<std::size_t>(m, "root_joint") != kRootJoint)
        throw FormatError("root joint must be " + std::to_string(kRootJoint), kHeaderBytes);
    if (frames == 0 || joints == 0 || count == 0 || field<std::size_t>(m, "frames") * 2 != frames)
        throw FormatError("manifest frame, joint or clip counts are inconsistent", kHeaderBytes);
    const std::size_t per_clip = (3 * frames * joints * kChannels + kShapeParams) * 4;
    if (c.payload.size() != count * per_clip)
        throw FormatError("payload is " + std::to_string(c.payload.size()) + " bytes, layout implies " +
                              std::to_string(count * per_clip),
                          payload_offset(bytes, c));
    const json clips = field<json>(m, "clips");
    if (!clips.is_array() || clips.size() != count)
        throw FormatError("clip table does not match clip_count", kHeaderBytes);

    Dataset d;
    d.unit_to_mm = field<double>(m, "unit_to_mm");
    const std::size_t base = payload_offset(bytes, c);
    ByteReader r(c.payload, base);
    for (std::size_t i = 0; i < count; ++i) {
        const json& e = clips[i];
        const auto modalities = field<std::vector<std::string>>(e, "modalities");
        if (modalities != std::vector<std::string>{"pose2d", "pose3d", "mesh"})
            throw FormatError("clip " + std::to_string(i) + " must carry pose2d, pose3d and mesh", kHeaderBytes);
        const auto native = field<std::size_t>(e, "native_joints");
        const std::size_t at = base + i * per_clip;
        NdBuffer p2 = get_values(r, frames, joints);
        NdBuffer p3 = get_values(r, frames, joints);
        NdBuffer mesh = get_values(r, frames, joints);
        Vec beta = get_beta(r);
        d.clips.push_back(at_offset(at, [&] {
            return MotionClip{MotionSequence(std::move(p2), Modality::Pose2D, native),
                              MotionSequence(std::move(p3), Modality::Pose3D, native),
                              MotionSequence(std::move(mesh), Modality::MeshParams, native, beta),
                              field<std::string>(e, "id"), field<std::string>(e, "source")};
        }));
    }
    at_offset(base, [&] {
        d.validate();
        return 0;
    });
    return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    write_file_atomic(path, encode_dataset(dataset));
}

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

std::string encode_anchors(const AnchorFile& file) {
    const AnchorSet& set = file.set;
    if (set.size() == 0) throw StateError("anchor set is empty");
    const std::size_t frames = set.frames(), joints = set.joints(), hidden = set.hidden();
    if (!set.soft.empty() && set.soft.size() != set.size())
        throw StateError("soft anchors do not match hard anchors");
    json m;
    m["kind"] = "anchors";
    m["version"] = kFormatVersion;
    m["frames"] = frames;
    m["joints"] = joints;
    m["channels"] = kChannels;
    m["hidden"] = hidden;
    m["count"] = set.size();
    m["requested_k"] = set.requested_k;
    m["method"] = sampling_method_name(set.method);
    m["tie_break"] = set.tie_break;
    m["corpus_fingerprint"] = hex64(set.corpus_fingerprint);
    m["step_values"] = set.step_values;
    json domains = json::array();
    for (TaskId d : file.recipe.domains) domains.push_back(std::string(task_name(d)));
    m["corpus_domains"] = std::move(domains);
    m["corpus_seed"] = file.recipe.seed;
    m["mask_ratio"] = file.recipe.mask_ratio;
    json entries = json::array();
    ByteWriter w;
    for (const Anchor& a : set.anchors) {
        if (a.input.frames() != frames || a.input.joints() != joints || a.target.frames() != frames ||
            a.target.joints() != joints)
            throw DimensionError("anchors disagree on frames/joints");
        entries.push_back({{"domain", a.domain ? json(std::string(task_name(*a.domain))) : json(nullptr)},
                           {"source_index", a.source_index},
                           {"input_modality", modality_name(a.input.modality())},
                           {"input_native", a.input.native_joint_count()},
                           {"target_modality", modality_name(a.target.modality())},
                           {"target_native", a.target.native_joint_count()}});
        put_sequence(w, a.input);
        put_beta(w, a.input.beta());
        put_sequence(w, a.target);
        put_beta(w, a.target.beta());
    }
    for (const SoftAnchor& s : set.soft) {
        if (static_cast<std::size_t>(s.w1.rows()) != frames * joints || s.w1.cols() != 1 || s.w2.rows() != 1 ||
            static_cast<std::size_t>(s.w2.cols()) != hidden)
            throw DimensionError("soft anchor factor shapes are inconsistent");
        for (Eigen::Index i = 0; i < s.w1.size(); ++i) w.f64(s.w1.data()[i]);
        for (Eigen::Index i = 0; i < s.w2.size(); ++i) w.f64(s.w2.data()[i]);
    }
    m["anchors"] = std::move(entries);
    return finish(std::move(m), w.take());
}

AnchorFile decode_anchors(std::string_view bytes) {
    const Container c = decode_container(bytes, "anchors");
    const json& m = c.manifest;
    const auto frames = field<std::size_t>(m, "frames");
    const auto joints = field<std::size_t>(m, "joints");
    const auto hidden = field<std::size_t>(m, "hidden");
    const auto count = field<std::size_t>(m, "count");
    if (field<std::size_t>(m, "channels") != kChannels) throw FormatError("unsupported channel count", kHeaderBytes);
    if (frames == 0 || joints == 0) throw FormatError("anchor frames and joints must be positive", kHeaderBytes);
    const std::size_t hard = 2 * (frames * joints * kChannels + kShapeParams) * 4;
    const std::size_t soft = hidden == 0 ? 0 : (frames * joints + hidden) * 8;
    const std::size_t base = payload_offset(bytes, c);
    if (c.payload.size() != count * (hard + soft))
        throw FormatError("payload is " + std::to_string(c.payload.size()) + " bytes, layout implies " +
                              std::to_string(count * (hard + soft)),
                          base);
    const json entries = field<json>(m, "anchors");
    if (!entries.is_array() || entries.size() != count)
        throw FormatError("anchor table does not match count", kHeaderBytes);

    AnchorFile file;
    AnchorSet& set = file.set;
    set.requested_k = field<std::size_t>(m, "requested_k");
    try {
        set.method = parse_sampling_method(field<std::string>(m, "method"));
    } catch (const DomainError&) {
        throw FormatError("unknown sampling method", kHeaderBytes);
    }
    set.tie_break = field<std::string>(m, "tie_break");
    set.corpus_fingerprint = parse_hex64(field<std::string>(m, "corpus_fingerprint"));
    set.step_values = field<std::vector<double>>(m, "step_values");
    for (const auto& name : field<std::vector<std::string>>(m, "corpus_domains")) {
        try {
            file.recipe.domains.push_back(parse_task(name));
        } catch (const Error&) {
            throw FormatError("unknown domain '" + name + "'", kHeaderBytes);
        }
    }
    file.recipe.seed = field<std::uint64_t>(m, "corpus_seed");
    file.recipe.mask_ratio = field<double>(m, "mask_ratio");

    ByteReader r(c.payload, base);
    for (std::size_t i = 0; i < count; ++i) {
        const json& e = entries[i];
        NdBuffer in = get_values(r, frames, joints);
        Vec in_beta = get_beta(r);
        NdBuffer out = get_values(r, frames, joints);
        Vec out_beta = get_beta(r);
        set.anchors.push_back(at_offset(base + i * hard, [&] {
            return Anchor{MotionSequence(std::move(in), modality_field(e, "input_modality"),
                                         field<std::size_t>(e, "input_native"), in_beta),
                          MotionSequence(std::move(out), modality_field(e, "target_modality"),
                                         field<std::size_t>(e, "target_native"), out_beta),
                          domain_field(e), field<std::int64_t>(e, "source_index")};
        }));
    }
    if (hidden > 0)
        for (std::size_t i = 0; i < count; ++i) {
            SoftAnchor s{Mat(static_cast<Eigen::Index>(frames * joints), 1), Mat(1, static_cast<Eigen::Index>(hidden))};
            for (Eigen::Index k = 0; k < s.w1.size(); ++k) s.w1.data()[k] = r.f64();
            for (Eigen::Index k = 0; k < s.w2.size(); ++k) s.w2.data()[k] = r.f64();
            set.soft.push_back(std::move(s));
        }
    return file;
}

void write_anchors(const std::filesystem::path& path, const AnchorFile& file) {
    write_file_atomic(path, encode_anchors(file));
}

AnchorFile read_anchors(const std::filesystem::path& path) { return decode_anchors(read_file(path)); }

std::string encode_checkpoint(const Checkpoint& c) {
    const XFusionConfig& cfg = c.config;
    json m;
    m["kind"] = "checkpoint";
    m["version"] = kFormatVersion;
    m["frames"] = cfg.frames;
    m["joints"] = cfg.joints;
    m["hidden"] = cfg.hidden;
    m["layers"] = cfg.layers;
    m["shape_params"] = cfg.shape_params;
    m["spatial_first"] = cfg.spatial_first;
    m["compress_bias_init"] = cfg.compress_bias_init;
    m["steps"] = c.steps;
    m["anchor_fingerprint"] = hex64(c.anchor_fingerprint);
    m["soft_anchors"] = c.soft.size();
    const XFusionParams expected = zero_params(cfg);
    std::vector<Mat> shapes = flatten(expected);
    json params = json::array();
    ByteWriter w;
    std::size_t i = 0;
    visit_params(c.params, [&](const std::string& name, const Mat& p) {
        if (i >= shapes.size() || p.rows() != shapes[i].rows() || p.cols() != shapes[i].cols())
            throw DimensionError("parameter " + name + " does not match the checkpoint config");
        ++i;
        params.push_back({{"name", name}, {"rows", p.rows()}, {"cols", p.cols()}});
        for (Eigen::Index k = 0; k < p.size(); ++k) w.f64(p.data()[k]);
    });
    if (i != shapes.size()) throw DimensionError("parameter count does not match the checkpoint config");
    for (const SoftAnchor& s : c.soft) {
        if (static_cast<std::size_t>(s.w1.rows()) != cfg.locations() || s.w1.cols() != 1 || s.w2.rows() != 1 ||
            static_cast<std::size_t>(s.w2.cols()) != cfg.hidden)
            throw DimensionError("soft anchor factor shapes do not match the checkpoint config");
        for (Eigen::Index k = 0; k < s.w1.size(); ++k) w.f64(s.w1.data()[k]);
        for (Eigen::Index k = 0; k < s.w2.size(); ++k) w.f64(s.w2.data()[k]);
    }
    m["parameters"] = std::move(params);
    return finish(std::move(m), w.take());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    const Container c = decode_container(bytes, "checkpoint");
    const json& m = c.manifest;
    Checkpoint out;
    XFusionConfig& cfg = out.config;
    cfg.frames = field<std::size_t>(m, "frames");
    cfg.joints = field<std::size_t>(m, "joints");
    cfg.hidden = field<std::size_t>(m, "hidden");
    cfg.layers = field<std::size_t>(m, "layers");
    cfg.shape_params = field<std::size_t>(m, "shape_params");
    cfg.spatial_first = field<bool>(m, "spatial_first");
    cfg.compress_bias_init = field<double>(m, "compress_bias_init");
    out.steps = field<std::size_t>(m, "steps");
    out.anchor_fingerprint = parse_hex64(field<std::string>(m, "anchor_fingerprint"));
    const auto soft_count = field<std::size_t>(m, "soft_anchors");
    out.params = at_offset(kHeaderBytes, [&] { return zero_params(cfg); });

    const json params = field<json>(m, "parameters");
    std::size_t expected_bytes = soft_count * (cfg.locations() + cfg.hidden) * 8;
    expected_bytes += parameter_count(out.params) * 8;
    const std::size_t base = payload_offset(bytes, c);
    if (c.payload.size() != expected_bytes)
        throw FormatError("payload is " + std::to_string(c.payload.size()) + " bytes, layout implies " +
                              std::to_string(expected_bytes),
                          base);
    ByteReader r(c.payload, base);
    std::size_t i = 0;
    visit_params(out.params, [&](const std::string& name, Mat& p) {
        if (!params.is_array() || i >= params.size() || field<std::string>(params[i], "name") != name ||
            field<Eigen::Index>(params[i], "rows") != p.rows() || field<Eigen::Index>(params[i], "cols") != p.cols())
            throw FormatError("parameter table entry " + std::to_string(i) + " does not match " + name, kHeaderBytes);
        ++i;
        for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = r.f64();
    });
    for (std::size_t s = 0; s < soft_count; ++s) {
        SoftAnchor a{Mat(static_cast<Eigen::Index>(cfg.locations()), 1), Mat(1, static_cast<Eigen::Index>(cfg.hidden))};
        for (Eigen::Index k = 0; k < a.w1.size(); ++k) a.w1.data()[k] = r.f64();
        for (Eigen::Index k = 0; k < a.w2.size(); ++k) a.w2.data()[k] = r.f64();
        out.soft.push_back(std::move(a));
    }
    return out;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    write_file_atomic(path, encode_checkpoint(c));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace hic
