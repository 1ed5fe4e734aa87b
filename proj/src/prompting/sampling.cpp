#include <limits>

#include "hic/numeric/rng.hpp"
#include "hic/prompting/prompting.hpp"

namespace hic {
namespace {

void check_corpus_shapes(const Corpus& corpus) {
    for (const CorpusEntry& e : corpus)
        if (e.input.values().shape() != corpus[0].input.values().shape() ||
            e.target.values().shape() != corpus[0].input.values().shape())
            throw DimensionError("corpus sequences are not shape-unified: " + shape_str(corpus[0].input.values().shape()) +
                                 " vs " + shape_str(e.input.values().shape()));
}

AnchorSet start_set(const Corpus& corpus, std::size_t k, SamplingMethod method) {
    if (k < 1) throw DomainError("anchor count K must be at least 1");
    if (corpus.empty()) throw StateError("cannot sample anchors from an empty corpus");
    check_corpus_shapes(corpus);
    AnchorSet set;
    set.requested_k = k;
    set.method = method;
    set.corpus_fingerprint = corpus_fingerprint(corpus);
    MotionSequence tbody = canonical_tbody(corpus[0].input.frames(), corpus[0].input.joints());
    set.anchors.push_back({tbody, tbody, std::nullopt, -1});
    return set;
}

void add_member(AnchorSet& set, const Corpus& corpus, std::size_t i) {
    set.anchors.push_back({corpus[i].input, corpus[i].target, corpus[i].domain, static_cast<std::int64_t>(i)});
}

}  // namespace

AnchorSet sps_sample(const Corpus& corpus, std::size_t k) {
    AnchorSet set = start_set(corpus, k, SamplingMethod::Sps);
    const std::size_t n = corpus.size();
    // best[i] = MaxSim(X_i, A), refreshed only against the newest anchor.
    std::vector<double> best(n);
    std::vector<bool> sampled(n, false);
    for (std::size_t i = 0; i < n; ++i) best[i] = similarity(corpus[i].input, set.anchors[0].input);

    for (std::size_t step = 2; step <= k && set.anchors.size() < n + 1; ++step) {
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i)
            if (!sampled[i] && (pick == n || best[i] < best[pick])) pick = i;
        set.step_values.push_back(best[pick]);
        sampled[pick] = true;
        add_member(set, corpus, pick);
        for (std::size_t i = 0; i < n; ++i)
            if (!sampled[i]) best[i] = std::max(best[i], similarity(corpus[i].input, corpus[pick].input));
    }
    return set;
}

AnchorSet random_sample(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
    AnchorSet set = start_set(corpus, k, SamplingMethod::Random);
    if (k - 1 > corpus.size())
        throw DomainError("random sampling of " + std::to_string(k - 1) + " members from a corpus of " +
                          std::to_string(corpus.size()));
    Rng rng(seed);
    for (std::size_t i : rng.sample_without_replacement(corpus.size(), k - 1)) add_member(set, corpus, i);
    return set;
}

AnchorSet cluster_sample(const Corpus& corpus, std::size_t k, std::uint64_t seed, std::size_t iterations) {
    AnchorSet set = start_set(corpus, k, SamplingMethod::Cluster);
    const std::size_t n = corpus.size();
    const std::size_t clusters = k - 1;
    if (clusters > n)
        throw DomainError("cluster sampling of " + std::to_string(clusters) + " members from a corpus of " +
                          std::to_string(n));
    if (clusters == 0) return set;

    const auto dim = static_cast<Eigen::Index>(corpus[0].input.values().size());
    Mat points(static_cast<Eigen::Index>(n), dim);
    for (std::size_t i = 0; i < n; ++i) points.row(static_cast<Eigen::Index>(i)) = corpus[i].input.values().flat().transpose();

    Rng rng(seed);
    Mat centroids(static_cast<Eigen::Index>(clusters), dim);
    const auto init = rng.sample_without_replacement(n, clusters);
    for (std::size_t c = 0; c < clusters; ++c) centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(init[c]));

    auto nearest = [&](const auto& row, const Mat& candidates) {
        Eigen::Index arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < candidates.rows(); ++c) {
            const double d = (candidates.row(c) - row).squaredNorm();
            if (d < best) {
                best = d;
                arg = c;
            }
        }
        return arg;
    };

    std::vector<Eigen::Index> assignment(n);
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) assignment[i] = nearest(points.row(static_cast<Eigen::Index>(i)), centroids);
        Mat sums = Mat::Zero(centroids.rows(), dim);
        std::vector<std::size_t> counts(clusters, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(assignment[i]) += points.row(static_cast<Eigen::Index>(i));
            ++counts[static_cast<std::size_t>(assignment[i])];
        }
        for (std::size_t c = 0; c < clusters; ++c)
            if (counts[c] > 0) centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
    }

    std::vector<bool> used(n, false);
    for (std::size_t c = 0; c < clusters; ++c) {
        std::size_t arg = n;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            const double d = (points.row(static_cast<Eigen::Index>(i)) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
            if (d < best) {
                best = d;
                arg = i;
            }
        }
        used[arg] = true;
        add_member(set, corpus, arg);
    }
    return set;
}

}  // namespace hic
