#include "q3r/errors.hpp"
#include "q3r/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

// Exit codes: 0 success, 1 usage error, 2 bad config or data, 3 numerical or
// internal failure.
int main(int argc, char** argv) {
    CLI::App app{"Low-rank-inducing training with a quadratic reweighted rank "
                 "regularizer"};
    app.require_subcommand(1);

    std::string config_path, out_flag, ckpt_path, retain, targets, grid;

    CLI::App* train = app.add_subcommand("train", "Train a model from a config file");
    train->add_option("config", config_path, "config file")->required();
    train->add_option("--out", out_flag, "output directory override");

    CLI::App* truncate =
        app.add_subcommand("truncate", "Rank-truncate a checkpoint and evaluate");
    truncate->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
    truncate->add_option("--retain", retain, "comma list of retention fractions");
    truncate->add_option("--targets", targets,
                         "dense | attention | dense_attention");
    truncate->add_option("--out", out_flag, "output directory override");

    CLI::App* sweep = app.add_subcommand("sweep", "Grid sweep over lambda and period");
    sweep->add_option("config", config_path, "base config file")->required();
    sweep->add_option("--grid", grid, "e.g. lambda=0.001,0.01;period=5,25,100")
        ->required();
    sweep->add_option("--out", out_flag, "output directory override");

    q3r::RecoveryConfig rc;
    CLI::App* recover = app.add_subcommand("recover", "Low-rank matrix recovery");
    recover->add_option("--d1", rc.d1, "rows");
    recover->add_option("--d2", rc.d2, "cols");
    recover->add_option("--rank", rc.rank, "planted rank");
    recover->add_option("--oversample", rc.oversampling, "measurement oversampling");
    recover->add_option("--lambda", rc.lambda, "regularization strength");
    recover->add_option("--target-rank", rc.r_target, "target rank, 0 = planted");
    recover->add_option("--iters", rc.iters, "iteration budget");
    recover->add_option("--seed", rc.seed, "rng seed");
    recover->add_option("--out", out_flag, "output directory override");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("checkpoint", ckpt_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (train->parsed())
            return q3r::cmd_train(config_path, out_flag);
        if (truncate->parsed())
            return q3r::cmd_truncate(ckpt_path, retain, targets, out_flag);
        if (sweep->parsed())
            return q3r::cmd_sweep(config_path, grid, out_flag);
        if (recover->parsed())
            return q3r::cmd_recover(rc, out_flag);
        if (eval->parsed())
            return q3r::cmd_eval(ckpt_path);
    } catch (const q3r::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const q3r::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
