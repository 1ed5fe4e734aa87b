#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hic/io/container.hpp"
#include "hic/prompting/prompting.hpp"
#include "hic/xfusion/params.hpp"

namespace hic {

// Motion values are stored as 32-bit floats; values that are not exactly
// representable are rounded on write.
std::string encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::string_view bytes);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

// How the anchor corpus was derived, so a dataset can be checked against it.
struct CorpusRecipe {
    std::vector<TaskId> domains;
    std::uint64_t seed = 0;
    double mask_ratio = kDefaultMaskRatio;
};

struct AnchorFile {
    AnchorSet set;
    CorpusRecipe recipe;
};

// Hard anchors as 32-bit floats, soft factors as 64-bit doubles.
std::string encode_anchors(const AnchorFile& file);
AnchorFile decode_anchors(std::string_view bytes);
void write_anchors(const std::filesystem::path& path, const AnchorFile& file);
AnchorFile read_anchors(const std::filesystem::path& path);

struct Checkpoint {
    XFusionConfig config;
    XFusionParams params;
    std::vector<SoftAnchor> soft;  // trained soft factors, index-aligned with the anchor file
    std::uint64_t anchor_fingerprint = 0;
    std::size_t steps = 0;
};

std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::string_view bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace hic
