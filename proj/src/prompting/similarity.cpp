#include <cstring>

#include "hic/numeric/rng.hpp"
#include "hic/prompting/prompting.hpp"

namespace hic {

double similarity(const NdBuffer& x, const NdBuffer& y) {
    if (x.shape() != y.shape())
        throw DimensionError("similarity shape mismatch: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    if (x.rank() != 3 || x.extent(2) != kChannels)
        throw DimensionError("similarity expects [F,J,3] sequences, got " + shape_str(x.shape()));
    const std::size_t locations = x.extent(0) * x.extent(1);
    const auto a = x.matrix(locations, kChannels);
    const auto b = y.matrix(locations, kChannels);
    double total = 0.0;
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(locations); ++r) total += (a.row(r) - b.row(r)).norm();
    // 0.0 minus rather than unary minus keeps self-similarity at +0.
    return 0.0 - total / static_cast<double>(locations);
}

double similarity(const MotionSequence& x, const MotionSequence& y) { return similarity(x.values(), y.values()); }

std::pair<double, std::size_t> max_sim(const MotionSequence& x, const AnchorSet& anchors) {
    if (anchors.anchors.empty()) throw StateError("max_sim over an empty anchor set");
    double best = similarity(x, anchors.anchors[0].input);
    std::size_t best_k = 0;
    for (std::size_t k = 1; k < anchors.anchors.size(); ++k) {
        const double s = similarity(x, anchors.anchors[k].input);
        if (s > best) {
            best = s;
            best_k = k;
        }
    }
    return {best, best_k};
}

RetrievedPrompt retrieve_prompt(const MotionSequence& query, const AnchorSet& anchors, std::optional<TaskId> domain_filter) {
    if (anchors.anchors.empty()) throw StateError("retrieval from an empty anchor set");
    std::optional<std::size_t> best;
    double best_sim = 0.0;
    std::optional<double> second;
    for (std::size_t k = 0; k < anchors.anchors.size(); ++k) {
        const Anchor& a = anchors.anchors[k];
        if (domain_filter && a.domain && *a.domain != *domain_filter) continue;
        const double s = similarity(query, a.input);
        if (!best || s > best_sim) {
            if (best) second = best_sim;
            best = k;
            best_sim = s;
        } else if (!second || s > *second) {
            second = s;
        }
    }
    RetrievedPrompt out{*best, best_sim, std::nullopt};
    if (second) out.margin = best_sim - *second;
    return out;
}

double coverage(std::span<const MotionSequence> queries, const AnchorSet& anchors) {
    if (queries.empty()) throw StateError("coverage over an empty query set");
    if (anchors.anchors.empty()) throw StateError("coverage over an empty anchor set");
    double worst = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const double s = max_sim(queries[i], anchors).first;
        if (i == 0 || s < worst) worst = s;
    }
    return worst;
}

std::uint64_t corpus_fingerprint(const Corpus& corpus) {
    // FNV-1a over domain ids and the raw bytes of every input and target value.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const CorpusEntry& e : corpus) {
        const auto d = static_cast<std::uint8_t>(e.domain);
        feed(&d, 1);
        for (const MotionSequence* m : {&e.input, &e.target})
            feed(m->values().flat().data(), m->values().size() * sizeof(double));
    }
    return h;
}

void initialize_soft_anchors(AnchorSet& set, std::size_t hidden, std::uint64_t seed) {
    if (hidden == 0) throw DomainError("hidden size must be positive");
    Rng rng(seed);
    set.soft.clear();
    const auto locations = static_cast<Eigen::Index>(set.frames() * set.joints());
    for (std::size_t k = 0; k < set.anchors.size(); ++k) {
        SoftAnchor s{Mat::Zero(locations, 1), Mat(1, static_cast<Eigen::Index>(hidden))};
        for (Eigen::Index h = 0; h < s.w2.cols(); ++h) s.w2(0, h) = 0.02 * rng.normal();
        set.soft.push_back(std::move(s));
    }
}

Mat soft_anchor_value(const SoftAnchor& soft) { return soft.w1 * soft.w2; }

std::string sampling_method_name(SamplingMethod m) {
    switch (m) {
        case SamplingMethod::Sps: return "sps";
        case SamplingMethod::Random: return "random";
        case SamplingMethod::Cluster: return "cluster";
    }
    return "?";
}

SamplingMethod parse_sampling_method(const std::string& name) {
    if (name == "sps") return SamplingMethod::Sps;
    if (name == "random") return SamplingMethod::Random;
    if (name == "cluster") return SamplingMethod::Cluster;
    throw DomainError("unknown sampling method '" + name + "' (expected sps, random or cluster)");
}

}  // namespace hic
