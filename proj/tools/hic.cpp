#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hic/io/commands.hpp"

using namespace hic;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string dataset, anchors, out, checkpoint, method, domains, log;
    std::optional<std::size_t> k, anchor, clip;
    std::optional<double> scalar;
    std::string domain = "PE";
    bool domain_filter = false;
    bool toy = false;
};

RunConfig resolve(const Options& o) {
    RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
    nlohmann::json overrides = nlohmann::json::object();
    if (o.seed) overrides["seed"] = *o.seed;
    if (o.k) overrides["k"] = *o.k;
    if (!o.method.empty()) overrides["method"] = o.method;
    if (!o.domains.empty()) overrides["domains"] = o.domains;
    if (o.domain_filter) overrides["domain_filter_retrieval"] = true;
    apply_config(overrides, c);
    return c;
}

TaskId parse_domain(const std::string& name) {
    try {
        return parse_task(name);
    } catch (const DomainError& e) {
        throw ConfigError("domain", e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"In-context human motion toolkit"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "Flat JSON config file");
        sub->add_option("--seed", o.seed, "Master seed");
        sub->add_option("--domains", o.domains, "Comma list of task ids, e.g. PE,MP(P)");
        sub->add_flag("--domain-filter-retrieval", o.domain_filter, "Retrieve only anchors of the query's domain");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    common(synth);
    synth->add_option("--out", o.out, "Dataset file")->required();

    auto* sample = app.add_subcommand("sample-anchors", "Select hard anchors from a dataset");
    common(sample);
    sample->add_option("--dataset", o.dataset, "Dataset file");
    sample->add_option("--out", o.out, "Anchor file")->required();
    sample->add_option("--method", o.method, "sps, random or cluster");
    sample->add_option("--k", o.k, "Number of anchors including the T-body");
    sample->add_flag("--toy", o.toy, "Use the scalar corpus {1, 2, 10}");

    auto* retrieve = app.add_subcommand("retrieve", "Find the best prompt for a query");
    common(retrieve);
    retrieve->add_option("--anchors", o.anchors, "Anchor file")->required();
    retrieve->add_option("--anchor", o.anchor, "Query with the input of this anchor");
    retrieve->add_option("--value", o.scalar, "Query with the scalar toy point (x, 0, 0)");
    retrieve->add_option("--dataset", o.dataset, "Query with a task derived from this dataset");
    retrieve->add_option("--clip", o.clip, "Clip index for --dataset");
    retrieve->add_option("--domain", o.domain, "Task id for --dataset");

    auto* derive = app.add_subcommand("derive", "Derive one task sample and print its summary");
    common(derive);
    derive->add_option("--dataset", o.dataset, "Dataset file")->required();
    derive->add_option("--clip", o.clip, "Clip index");
    derive->add_option("--domain", o.domain, "Task id");

    auto* train = app.add_subcommand("train", "Train the network and soft anchors");
    common(train);
    train->add_option("--dataset", o.dataset, "Dataset file")->required();
    train->add_option("--anchors", o.anchors, "Anchor file")->required();
    train->add_option("--out", o.out, "Checkpoint file")->required();
    train->add_option("--log", o.log, "JSON-lines training log (default stdout)");

    auto* eval = app.add_subcommand("eval", "Per-domain metrics of a checkpoint");
    common(eval);
    eval->add_option("--dataset", o.dataset, "Dataset file")->required();
    eval->add_option("--anchors", o.anchors, "Anchor file")->required();
    eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full network");
    common(gradcheck);

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig config = resolve(o);
        if (synth->parsed()) {
            cmd_synth(config, o.out, std::cout);
        } else if (sample->parsed()) {
            if (o.toy)
                cmd_sample_toy(config, o.out, std::cout);
            else if (o.dataset.empty())
                throw ConfigError("dataset", "required unless --toy is given");
            else
                cmd_sample_anchors(config, o.dataset, o.out, std::cout);
        } else if (retrieve->parsed()) {
            RetrieveQuery q;
            q.anchor = o.anchor;
            q.scalar = o.scalar;
            if (!o.dataset.empty()) q.dataset = o.dataset;
            q.clip = o.clip.value_or(0);
            q.domain = parse_domain(o.domain);
            q.domain_filter = config.train.domain_filter_retrieval;
            cmd_retrieve(config, o.anchors, q, std::cout, std::cerr);
        } else if (derive->parsed()) {
            cmd_derive(config, o.dataset, o.clip.value_or(0), parse_domain(o.domain), std::cout);
        } else if (train->parsed()) {
            if (o.log.empty()) {
                cmd_train(config, o.dataset, o.anchors, o.out, std::cout, std::cerr);
            } else {
                std::ofstream log(o.log);
                if (!log) throw IoError("cannot open " + o.log);
                cmd_train(config, o.dataset, o.anchors, o.out, log, std::cerr);
            }
        } else if (eval->parsed()) {
            cmd_eval(config, o.dataset, o.anchors, o.checkpoint, std::cout, std::cerr);
        } else if (gradcheck->parsed()) {
            return cmd_gradcheck(config, std::cout) ? 0 : 3;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
