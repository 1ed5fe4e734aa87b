#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hic/motion/tasks.hpp"

namespace hic {

// -(1/(F*J)) * sum over frames and joints of the per-joint Euclidean distance.
// Non-positive, symmetric, zero exactly for identical sequences.
double similarity(const MotionSequence& x, const MotionSequence& y);
double similarity(const NdBuffer& x, const NdBuffer& y);

// One element of the pooled sampling corpus: a task input with its target.
struct CorpusEntry {
    MotionSequence input;
    MotionSequence target;
    TaskId domain;
};
using Corpus = std::vector<CorpusEntry>;

struct Anchor {
    MotionSequence input;
    MotionSequence target;
    std::optional<TaskId> domain;  // empty for the T-body
    std::int64_t source_index;     // corpus position, -1 for the T-body
};

// U_k = w1 * w2: w1 is (F*J) x 1 (one weight per location), w2 is 1 x H.
struct SoftAnchor {
    Mat w1;
    Mat w2;
};

enum class SamplingMethod : std::uint8_t { Sps, Random, Cluster };
std::string sampling_method_name(SamplingMethod m);
SamplingMethod parse_sampling_method(const std::string& name);

inline constexpr const char* kLowestIndexTieBreak = "lowest-index";
inline constexpr std::size_t kDefaultAnchorCount = 800;

struct AnchorSet {
    std::vector<Anchor> anchors;  // anchors[0] is the T-body
    std::vector<SoftAnchor> soft;  // empty until initialize_soft_anchors
    std::size_t requested_k = 0;
    SamplingMethod method = SamplingMethod::Sps;
    std::string tie_break = kLowestIndexTieBreak;
    std::uint64_t corpus_fingerprint = 0;
    // SPS audit trail: the selected min-over-unsampled MaxSim value at each step k >= 2.
    std::vector<double> step_values;

    std::size_t size() const noexcept { return anchors.size(); }
    std::size_t frames() const { return anchors.at(0).input.frames(); }
    std::size_t joints() const { return anchors.at(0).input.joints(); }
    std::size_t hidden() const { return soft.empty() ? 0 : static_cast<std::size_t>(soft[0].w2.cols()); }
};

std::uint64_t corpus_fingerprint(const Corpus& corpus);

// W1 = 0 and W2 ~ N(0, 0.02^2) for every anchor, so each U_k starts at zero.
void initialize_soft_anchors(AnchorSet& set, std::size_t hidden, std::uint64_t seed);

// U = W1 W2 as an (F*J) x H matrix.
Mat soft_anchor_value(const SoftAnchor& soft);

// max_k sim(x, A_k) and the smallest k attaining it.
std::pair<double, std::size_t> max_sim(const MotionSequence& x, const AnchorSet& anchors);

// Max-min similarity prompt sampling. Starts from the T-body and repeatedly
// adds the unsampled sequence whose best similarity to the current anchors is
// smallest; stops at K anchors or when the corpus is exhausted. Ties go to the
// lowest corpus index.
AnchorSet sps_sample(const Corpus& corpus, std::size_t k);

// Baselines. Both keep the T-body at index 0 and draw K-1 corpus members.
AnchorSet random_sample(const Corpus& corpus, std::size_t k, std::uint64_t seed);
AnchorSet cluster_sample(const Corpus& corpus, std::size_t k, std::uint64_t seed, std::size_t iterations = 50);

struct RetrievedPrompt {
    std::size_t index;
    double similarity;
    // Best minus second-best similarity; empty with a single candidate.
    std::optional<double> margin;
};

// argmax_k sim(query, A_k) with lowest-index ties. With domain_filter, only
// anchors of that domain (and the T-body) are candidates.
RetrievedPrompt retrieve_prompt(const MotionSequence& query, const AnchorSet& anchors,
                                std::optional<TaskId> domain_filter = std::nullopt);

// Worst-case retrieval similarity: min over queries of max_k sim(query, A_k).
double coverage(std::span<const MotionSequence> queries, const AnchorSet& anchors);

}  // namespace hic
