#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "jnn/checkpoint.hpp"
#include "jnn/synthetic.hpp"
#include "jnn/train.hpp"

using namespace jnn;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
    const auto p = std::filesystem::temp_directory_path() / ("jnn_harness_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

SyntheticDataset tiny_dataset(const std::filesystem::path& dir, uint64_t seed = 7) {
    SyntheticShapeConfig c;
    c.out_dir = dir;
    c.num_classes = 6;
    c.images_per_class = 3;
    c.image_size = 64;
    c.max_instances = 1;
    std::mt19937_64 rng(seed);
    return generate_synthetic(c, rng);
}

RunConfig tiny_detection_config(const std::filesystem::path& data_dir,
                                const std::filesystem::path& out_dir) {
    RunConfig c;
    c.task = Task::Detection;
    c.preset = Preset::Desk;
    c.manifest = data_dir / "manifest.txt";
    c.split = data_dir / "split.txt";
    c.out_dir = out_dir;
    c.epochs = 2;
    c.batch_size = 2;
    c.batches_per_epoch = 2;
    c.eval_pairs = 20;
    c.max_targets_per_class = 2;
    c.seed = 11;
    apply_defaults(c);
    return c;
}

Tensor random_input(int c, int h, int w, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    Tensor t({1, c, h, w});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = d(rng);
    return t;
}

}  // namespace

TEST_CASE("config file parsing, overrides and digest drift") {
    const auto dir = temp_dir("config");
    tiny_dataset(dir / "data");
    {
        std::ofstream f(dir / "run.cfg");
        f << "task = detection\npreset = desk\nseed = 5\n"
          << "[data]\nmanifest = data/manifest.txt\nsplit = data/split.txt\n"
          << "[optimizer]\nlr = 0.001\nepochs = 3\nbatch_size = 4\n"
          << "[loss]\nlambda_coord = 4\nlambda_noobj = 0.25\n"
          << "[detector]\nmask = 1,3\nanchors = 3\npriors = 1x1,2x2,3x3\n";
    }
    RunConfig c = load_config(dir / "run.cfg");
    apply_defaults(c);
    CHECK(c.task == Task::Detection);
    CHECK(c.seed == 5);
    CHECK(c.lr == 0.001);
    CHECK(c.epochs == 3);
    CHECK(c.loss_weights.coord == 4.0);
    CHECK(c.loss_weights.noobj == 0.25);
    CHECK(c.mask == std::array<bool, 5>{true, false, true, false, false});
    CHECK(c.anchors == 3);
    CHECK(std::filesystem::exists(c.manifest));

    const uint64_t d1 = config_digest(c);
    RunConfig c2 = c;
    c2.mask = parse_mask("1,2,4");
    CHECK(config_digest(c2) != d1);
    RunConfig c3 = c;
    c3.lr = 0.5;  // optimizer settings do not change the architecture
    CHECK(config_digest(c3) == d1);

    SUBCASE("unknown keys are rejected") {
        std::ofstream f(dir / "bad.cfg");
        f << "task = detection\nnot_a_key = 1\n";
        f.close();
        CHECK_THROWS_AS(load_config(dir / "bad.cfg"), DataError);
    }
    SUBCASE("anchors/prior count mismatch is rejected") {
        RunConfig bad = c;
        bad.anchors = 4;
        CHECK_THROWS_AS(apply_defaults(bad), DataError);
    }
}

TEST_CASE("checkpoint round-trip is bitwise exact") {
    const auto dir = temp_dir("ckpt");
    const NetSpec spec = detector_spec(Preset::Desk, parse_mask("1,2"), 5);
    JointModel model(spec, 21);
    model.set_training(false);
    const Tensor q = random_input(3, 56, 56, 1);
    const Tensor t = random_input(3, 112, 112, 2);
    const Tensor before = model.forward(q, t);

    const uint64_t digest = fnv1a(spec.to_text());
    save_checkpoint(dir / "m.ckpt", model, digest, 17, "rngstate");

    JointModel restored(spec, 999);  // different init, will be overwritten
    restored.set_training(false);
    const CheckpointMeta meta = load_checkpoint(dir / "m.ckpt", restored, digest);
    CHECK(meta.epoch == 17);
    CHECK(meta.rng_state == "rngstate");
    const Tensor after = restored.forward(q, t);
    REQUIRE(after.numel() == before.numel());
    for (int64_t i = 0; i < after.numel(); ++i) CHECK(after[i] == before[i]);
}

TEST_CASE("checkpoint rejects truncation, digest drift and wrong architecture") {
    const auto dir = temp_dir("ckpt_bad");
    const NetSpec spec = detector_spec(Preset::Desk, parse_mask("1,2"), 5);
    JointModel model(spec, 21);
    const uint64_t digest = fnv1a(spec.to_text());
    save_checkpoint(dir / "m.ckpt", model, digest, 1, "s");

    SUBCASE("digest mismatch reports both digests") {
        JointModel other(spec, 1);
        CHECK_THROWS_WITH_AS(load_checkpoint(dir / "m.ckpt", other, digest + 1),
                             doctest::Contains("digest mismatch"), IoError);
    }
    SUBCASE("truncated file loads nothing") {
        std::ifstream in(dir / "m.ckpt", std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
        in.close();
        std::ofstream out(dir / "short.ckpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        out.close();

        JointModel other(spec, 333);
        const Tensor q = random_input(3, 56, 56, 1);
        const Tensor t = random_input(3, 112, 112, 2);
        other.set_training(false);
        const Tensor before = other.forward(q, t);
        CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt", other, digest), IoError);
        const Tensor after = other.forward(q, t);  // model untouched
        for (int64_t i = 0; i < after.numel(); ++i) CHECK(after[i] == before[i]);
    }
    SUBCASE("different architecture is refused") {
        const NetSpec other_spec = detector_spec(Preset::Desk, parse_mask("1,4"), 5);
        JointModel other(other_spec, 1);
        CHECK_THROWS_AS(load_checkpoint(dir / "m.ckpt", other, digest), IoError);
    }
}

TEST_CASE("tiny detection training run: finite losses, reproducible, evaluable") {
    const auto data = temp_dir("train_data");
    tiny_dataset(data);
    const auto out1 = temp_dir("train_out1");
    const auto out2 = temp_dir("train_out2");

    RunConfig c1 = tiny_detection_config(data, out1);
    const TrainResult r1 = run_training(c1, true);
    CHECK(r1.epoch_losses.size() == 2);
    for (double l : r1.epoch_losses) CHECK(std::isfinite(l));
    CHECK(std::filesystem::exists(r1.checkpoint_path));
    CHECK(std::filesystem::exists(out1 / "losses.csv"));

    RunConfig c2 = tiny_detection_config(data, out2);
    const TrainResult r2 = run_training(c2, true);
    REQUIRE(r1.epoch_losses.size() == r2.epoch_losses.size());
    for (size_t i = 0; i < r1.epoch_losses.size(); ++i)
        CHECK(r1.epoch_losses[i] == r2.epoch_losses[i]);  // bitwise reproducible

    SUBCASE("eval twice gives identical reports") {
        const double m1 = run_eval(c1, r1.checkpoint_path, true);
        auto read = [&](const std::filesystem::path& p) {
            std::ifstream f(p);
            return std::string(std::istreambuf_iterator<char>(f), {});
        };
        const std::string metrics1 = read(out1 / "metrics.txt");
        const double m2 = run_eval(c1, r1.checkpoint_path, true);
        CHECK(m1 == m2);
        CHECK(read(out1 / "metrics.txt") == metrics1);
        CHECK(std::filesystem::exists(out1 / "results.json"));

        write_report(out1 / "results.json", out1 / "report");
        CHECK(std::filesystem::exists(out1 / "report" / "pr.csv"));
    }
}

TEST_CASE("tiny recognition training run logs finite losses") {
    const auto data = temp_dir("recog_data");
    tiny_dataset(data);
    const auto out = temp_dir("recog_out");
    RunConfig c;
    c.task = Task::Recognition;
    c.preset = Preset::Desk;
    c.recognizer_input = 64;
    c.manifest = data / "manifest.txt";
    c.split = data / "split.txt";
    c.out_dir = out;
    c.epochs = 2;
    c.batch_size = 4;
    c.batches_per_epoch = 2;
    c.eval_pairs = 30;
    c.seed = 3;
    apply_defaults(c);
    const TrainResult r = run_training(c, true);
    CHECK(r.epoch_losses.size() == 2);
    for (double l : r.epoch_losses) CHECK(std::isfinite(l));

    const double acc = run_eval(c, r.checkpoint_path, true);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    write_report(out / "results.json", out / "report");
    CHECK(std::filesystem::exists(out / "report" / "roc.csv"));
}

TEST_CASE("ablation over two masks emits one row per mask, reproducibly") {
    const auto data = temp_dir("ablate_data");
    tiny_dataset(data);
    const auto out = temp_dir("ablate_out");
    RunConfig c = tiny_detection_config(data, out);
    c.epochs = 1;
    c.batches_per_epoch = 1;
    const std::vector<std::array<bool, 5>> masks{parse_mask("1"), parse_mask("1,2")};
    const auto rows = run_ablation(c, masks, true);
    REQUIRE(rows.size() == 2);
    CHECK(std::filesystem::exists(out / "ablation.txt"));

    const auto rows2 = run_ablation(c, masks, true);
    CHECK(rows[0].map == rows2[0].map);
    CHECK(rows[1].map == rows2[1].map);

    CHECK_THROWS_AS(run_ablation(c, {parse_mask("1")}, true), DataError);
}

TEST_CASE("training refuses a split that overlaps") {
    const auto data = temp_dir("overlap_data");
    const SyntheticDataset ds = tiny_dataset(data);
    // corrupt the split: copy one train class into test
    ClassSplit s = load_split(ds.split_path);
    s.test.insert(*s.train.begin());
    write_split(data / "bad_split.txt", s);
    RunConfig c = tiny_detection_config(data, temp_dir("overlap_out"));
    c.split = data / "bad_split.txt";
    CHECK_THROWS_AS(run_training(c, true), DataError);
}
