// pdfd: synthesize data, build semantic embeddings, train the decomposition
// network, and evaluate zero-shot sketch-to-image retrieval.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdfd/cli.hpp"

namespace {

struct FlagSpec {
    const char* flag;
    const char* key;
    const char* help;
};

// every option funnels through the same key=value path the config file uses
const std::vector<FlagSpec> kStringFlags = {
    {"--features", "features", "feature file (PDFDFEAT1/PDFDFEATB1)"},
    {"--split", "split", "zero-shot split JSON"},
    {"--wordvecs", "wordvecs", "word vector table"},
    {"--taxonomy", "taxonomy", "class taxonomy (child<TAB>parent[<TAB>count])"},
    {"--out", "out", "output directory"},
    {"--checkpoint", "checkpoint", "model checkpoint"},
    {"--hierarchy", "hierarchy", "hierarchical similarity: path | jiang-conrath"},
    {"--metric", "metric", "ranking metric: cosine | euclidean"},
    {"--feature-format", "feature_format", "synth output: text | binary"},
    {"--d-ret", "d_ret", "retrieval feature dimension"},
    {"--hidden", "hidden", "hidden width of every network"},
    {"--lr", "lr", "Adam learning rate"},
    {"--beta1", "beta1", "Adam beta1"},
    {"--beta2", "beta2", "Adam beta2"},
    {"--epsilon", "epsilon", "Adam epsilon"},
    {"--batch-size", "batch_size", "pairs per training batch"},
    {"--epochs", "epochs", "training epochs"},
    {"--seed", "seed", "run seed (PDFD_SEED overrides)"},
    {"--disc-steps", "disc_steps", "discriminator steps per generator step"},
    {"--clip-norm", "clip_norm", "global gradient-norm clip"},
    {"--checkpoint-every", "checkpoint_every", "checkpoint every N epochs"},
    {"--max-steps", "max_steps", "stop after N optimizer steps (0 = off)"},
    {"--lambda-adv", "lambda_adv", "adversarial loss weight"},
    {"--lambda-ccls", "lambda_ccls", "category classification weight"},
    {"--lambda-rec", "lambda_rec", "cross-reconstruction weight"},
    {"--lambda-mcls", "lambda_mcls", "modality classification weight"},
    {"--itq-iters", "itq_iters", "ITQ iterations"},
    {"--bits", "bits", "binary code length"},
    {"--n-classes", "n_classes", "synth: number of classes"},
    {"--per-class", "per_class", "synth: samples per class per modality"},
    {"--d-vis", "d_vis", "synth: visual feature dimension"},
    {"--latent-dim", "latent_dim", "synth: latent prototype dimension"},
    {"--offset-scale", "offset_scale", "synth: modality offset scale"},
    {"--noise-scale", "noise_scale", "synth: additive noise scale"},
    {"--seen-fraction", "seen_fraction", "synth: fraction of seen classes"},
};

struct CommandArgs {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::vector<std::string> ablate;
    bool create = false;
    bool binary = false;
    bool non_saturating = false;
    bool no_progressive = false;
};

void add_common(CLI::App* cmd, CommandArgs& args) {
    cmd->add_option("--config", args.config_path, "key = value config file");
    for (const auto& spec : kStringFlags)
        cmd->add_option(spec.flag, args.values[spec.key], spec.help);
    cmd->add_flag("--create", args.create, "create the output directory");
}

pdfd::RunConfig assemble(const CLI::App* cmd, const CommandArgs& args) {
    std::map<std::string, std::string> overrides;
    for (const auto& spec : kStringFlags)
        if (cmd->count(spec.flag) > 0) overrides[spec.key] = args.values.at(spec.key);
    if (args.create) overrides["create"] = "true";
    if (args.binary) overrides["binary"] = "true";
    if (args.non_saturating) overrides["non_saturating"] = "true";
    if (args.no_progressive) overrides["progressive"] = "false";

    pdfd::RunConfig cfg = pdfd::make_run_config(args.config_path, overrides);
    for (const auto& term : args.ablate) {
        if (term == "adv") cfg.weights.lambda_adv = 0.0;
        else if (term == "ccls") cfg.weights.lambda_ccls = 0.0;
        else if (term == "rec") cfg.weights.lambda_rec = 0.0;
        else if (term == "mcls") cfg.weights.lambda_mcls = 0.0;
        else throw pdfd::ConfigError("--ablate: unknown loss term '" + term + "'");
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Progressive domain-independent feature decomposition for "
                 "zero-shot sketch-based image retrieval"};
    app.require_subcommand(1);

    CommandArgs synth_args, train_args, eval_args, embed_args;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, synth_args);

    CLI::App* train = app.add_subcommand("train", "train the decomposition network");
    add_common(train, train_args);
    train->add_option("--ablate", train_args.ablate,
                      "zero a loss term: adv | ccls | rec | mcls (repeatable)");
    train->add_flag("--non-saturating", train_args.non_saturating,
                    "non-saturating generator objective");
    train->add_flag("--no-progressive", train_args.no_progressive,
                    "direct visual-to-retrieval projection (ablation baseline)");

    CLI::App* eval = app.add_subcommand("eval", "evaluate zero-shot retrieval");
    add_common(eval, eval_args);
    eval->add_flag("--binary", eval_args.binary, "ITQ-binarize and rank by Hamming");

    CLI::App* embed = app.add_subcommand("embed", "dump semantic embeddings to CSV");
    add_common(embed, embed_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return pdfd::cli::run_synth(assemble(synth, synth_args));
        if (train->parsed()) return pdfd::cli::run_train(assemble(train, train_args));
        if (eval->parsed()) return pdfd::cli::run_eval(assemble(eval, eval_args));
        if (embed->parsed()) return pdfd::cli::run_embed(assemble(embed, embed_args));
    } catch (const pdfd::ContractViolation& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 4;
    } catch (const pdfd::ConfigError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const pdfd::ParseError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 3;
    } catch (const pdfd::DataError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
