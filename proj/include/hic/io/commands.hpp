#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "hic/io/config.hpp"
#include "hic/io/formats.hpp"

namespace hic {

using Path = std::filesystem::path;

// Library side of the command-line verbs. Reports go to `out`, warnings to `err`.

Dataset cmd_synth(const RunConfig& config, const Path& out_path, std::ostream& out);

// Corpus = every clip under every configured domain; soft factors sized by config.model.hidden.
// Prints the per-step max-min values for SPS.
AnchorFile cmd_sample_anchors(const RunConfig& config, const Path& dataset_path, const Path& out_path,
                              std::ostream& out);

// Points (x, 0, 0) for x in {1, 2, 10}, one frame and one joint each.
Corpus scalar_toy_corpus();
AnchorFile cmd_sample_toy(const RunConfig& config, const Path& out_path, std::ostream& out);

struct RetrieveQuery {
    // Exactly one source: an anchor's own input, a scalar toy point, or a derived dataset task.
    std::optional<std::size_t> anchor;
    std::optional<double> scalar;
    std::optional<Path> dataset;
    std::size_t clip = 0;
    TaskId domain = TaskId::PE;
    bool domain_filter = false;
};

RetrievedPrompt cmd_retrieve(const RunConfig& config, const Path& anchors_path, const RetrieveQuery& query,
                             std::ostream& out, std::ostream& err);

TaskSample cmd_derive(const RunConfig& config, const Path& dataset_path, std::size_t clip, TaskId domain,
                      std::ostream& out);

// Writes one JSON object per step to `log`.
Checkpoint cmd_train(const RunConfig& config, const Path& dataset_path, const Path& anchors_path,
                     const Path& out_path, std::ostream& log, std::ostream& err);

EvalTable cmd_eval(const RunConfig& config, const Path& dataset_path, const Path& anchors_path,
                   const Path& checkpoint_path, std::ostream& out, std::ostream& err);

// Full network and loss at F=4, J=5, H=8, two layers. True when max rel err < 1e-4.
bool cmd_gradcheck(const RunConfig& config, std::ostream& out);

}  // namespace hic
