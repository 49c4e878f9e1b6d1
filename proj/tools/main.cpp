// Command line front end: train, eval, ablate, gen-synthetic, report.

#include <iostream>

#include "CLI11.hpp"
#include "jnn/error.hpp"
#include "jnn/parallel.hpp"
#include "jnn/synthetic.hpp"
#include "jnn/train.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string checkpoint_path;
    std::string out_dir;
    int64_t seed = -1;
    std::string preset;
    std::string mask;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_checkpoint) {
    cmd->add_option("--config", o.config_path, "run configuration file")->required();
    if (needs_checkpoint)
        cmd->add_option("--checkpoint", o.checkpoint_path, "checkpoint file")->required();
    cmd->add_option("--out", o.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", o.seed, "rng seed (overrides config)");
    cmd->add_option("--preset", o.preset, "architecture preset: paper|desk")
        ->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--mask", o.mask, "joint layer mask, e.g. \"1,2,4\"");
    cmd->add_option("--threads", o.threads, "worker threads (0 = auto)");
}

jnn::RunConfig make_config(const CommonOpts& o) {
    jnn::RunConfig c = jnn::load_config(o.config_path);
    if (!o.out_dir.empty()) c.out_dir = o.out_dir;
    if (o.seed >= 0) c.seed = static_cast<uint64_t>(o.seed);
    if (!o.preset.empty()) c.preset = o.preset == "paper" ? jnn::Preset::Paper : jnn::Preset::Desk;
    if (!o.mask.empty()) c.mask = jnn::parse_mask(o.mask);
    if (o.threads > 0) c.threads = o.threads;
    jnn::apply_defaults(c);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"joint twin-branch networks for one-shot recognition and detection"};
    app.require_subcommand(1);

    CommonOpts train_o, eval_o, ablate_o;
    std::string ablate_masks;

    CLI::App* train_cmd = app.add_subcommand("train", "train a model from a config");
    add_common(train_cmd, train_o, false);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common(eval_cmd, eval_o, true);

    CLI::App* ablate_cmd =
        app.add_subcommand("ablate", "train/evaluate a list of joint-layer masks");
    add_common(ablate_cmd, ablate_o, false);
    ablate_cmd->add_option("--masks", ablate_masks,
                           "semicolon-separated mask list, e.g. \"1;1,2;1,2,4\" "
                           "(default: the standard ten combinations)");

    std::string gen_out = "synthetic";
    int gen_classes = 8, gen_images = 20, gen_size = 96, gen_min_inst = 1, gen_max_inst = 2;
    int gen_clutter = 6;
    int64_t gen_seed = 7;
    CLI::App* gen_cmd = app.add_subcommand("gen-synthetic", "write a synthetic shapes dataset");
    gen_cmd->add_option("--out", gen_out, "output directory");
    gen_cmd->add_option("--classes", gen_classes, "number of classes (4..16)");
    gen_cmd->add_option("--images-per-class", gen_images, "images per class");
    gen_cmd->add_option("--image-size", gen_size, "square image size in pixels");
    gen_cmd->add_option("--min-instances", gen_min_inst, "min glyphs per image");
    gen_cmd->add_option("--max-instances", gen_max_inst, "max glyphs per image");
    gen_cmd->add_option("--clutter", gen_clutter, "distractor rectangles per image");
    gen_cmd->add_option("--seed", gen_seed, "rng seed");

    std::string report_results, report_out = "report";
    CLI::App* report_cmd = app.add_subcommand("report", "emit plot-ready CSV curves");
    report_cmd->add_option("--results", report_results, "results.json from eval")->required();
    report_cmd->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            const jnn::RunConfig c = make_config(train_o);
            const jnn::TrainResult r = jnn::run_training(c);
            std::cout << "final loss " << r.epoch_losses.back() << "\ncheckpoint "
                      << r.checkpoint_path.string() << "\n";
        } else if (eval_cmd->parsed()) {
            const jnn::RunConfig c = make_config(eval_o);
            jnn::run_eval(c, eval_o.checkpoint_path);
        } else if (ablate_cmd->parsed()) {
            const jnn::RunConfig c = make_config(ablate_o);
            std::vector<std::array<bool, 5>> masks;
            if (ablate_masks.empty()) {
                masks = jnn::ablation_masks();
            } else {
                std::stringstream ss(ablate_masks);
                std::string tok;
                while (std::getline(ss, tok, ';'))
                    if (!tok.empty()) masks.push_back(jnn::parse_mask(tok));
            }
            jnn::run_ablation(c, masks);
        } else if (gen_cmd->parsed()) {
            jnn::SyntheticShapeConfig sc;
            sc.out_dir = gen_out;
            sc.num_classes = gen_classes;
            sc.images_per_class = gen_images;
            sc.image_size = gen_size;
            sc.min_instances = gen_min_inst;
            sc.max_instances = gen_max_inst;
            sc.clutter = gen_clutter;
            std::mt19937_64 rng(static_cast<uint64_t>(gen_seed));
            const jnn::SyntheticDataset ds = jnn::generate_synthetic(sc, rng);
            std::cout << "manifest " << ds.manifest_path.string() << "\nsplit "
                      << ds.split_path.string() << "\n";
        } else if (report_cmd->parsed()) {
            jnn::write_report(report_results, report_out);
            std::cout << "report written to " << report_out << "\n";
        }
    } catch (const jnn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
