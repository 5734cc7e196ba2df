#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

// End-to-end checks of the command-line surface; GLIMPSE_CLI is injected by
// the build as the absolute path of the built binary.

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(GLIMPSE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string temp_dir() {
  static int counter = 0;
  const auto dir =
      std::filesystem::temp_directory_path() / ("glimpse_cli_test_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("no arguments prints usage and exits nonzero") { CHECK(run("") == 2); }

TEST_CASE("unknown flags are rejected") {
  CHECK(run("synth --nonsense 3") == 2);
  CHECK(run("--bogus") == 2);
}

TEST_CASE("help exits zero") { CHECK(run("--help") == 0); }

TEST_CASE("synth -> train -> eval -> viz -> reglimpse smoke run") {
  const std::string dir = temp_dir();
  const std::string data = dir + "/data";
  CHECK(run("synth --out " + data +
            " --grid 3 --feat-dim 4 --classes 2 --clip-len 5 --train-clips 6 --test-clips 4"
            " --noise-sigma 0.3 --seed 3") == 0);
  CHECK(std::filesystem::exists(data + "/manifest.tsv"));
  CHECK(std::filesystem::exists(data + "/resolved_config.txt"));

  const std::string trained = dir + "/run";
  CHECK(run("train --manifest " + data + "/manifest.tsv --out " + trained +
            " --mode attention --hidden-dim 6 --layers 1 --dropout 0 --epochs 2 --batch 3"
            " --block-len 5 --gamma 0 --alpha 0.01 --seed 4") == 0);
  CHECK(std::filesystem::exists(trained + "/checkpoint.grnn"));
  CHECK(std::filesystem::exists(trained + "/loss_curve.tsv"));
  CHECK(std::filesystem::exists(trained + "/resolved_config.txt"));

  const std::string eval_dir = dir + "/eval";
  CHECK(run("eval --manifest " + data + "/manifest.tsv --checkpoint " + trained +
            "/checkpoint.grnn --out " + eval_dir) == 0);
  CHECK(std::filesystem::exists(eval_dir + "/report.txt"));
  CHECK(std::filesystem::exists(eval_dir + "/scores.tsv"));

  const std::string viz_dir = dir + "/viz";
  CHECK(run("viz --checkpoint " + trained + "/checkpoint.grnn --cube " + data +
            "/test_0000.fcub --out " + viz_dir + " --upsample 2") == 0);
  CHECK(std::filesystem::exists(viz_dir + "/attn_b000_t000.pgm"));
  CHECK(std::filesystem::exists(viz_dir + "/attn_b000_t004.txt"));

  const std::string rg_dir = dir + "/rg";
  CHECK(run("reglimpse --checkpoint " + trained + "/checkpoint.grnn --cube " + data +
            "/test_0000.fcub --out " + rg_dir + " --steps 3 --lr 0.05") == 0);
  CHECK(std::filesystem::exists(rg_dir + "/reoptimized.grnn"));
  CHECK(std::filesystem::exists(rg_dir + "/loss_curve.tsv"));
  CHECK(std::filesystem::exists(rg_dir + "/before_b000_t000.pgm"));
  CHECK(std::filesystem::exists(rg_dir + "/after_b000_t000.pgm"));

  SUBCASE("re-running synth with the same seed reproduces the cubes bit-exactly") {
    const std::string data2 = dir + "/data2";
    CHECK(run("synth --out " + data2 +
              " --grid 3 --feat-dim 4 --classes 2 --clip-len 5 --train-clips 6 --test-clips 4"
              " --noise-sigma 0.3 --seed 3") == 0);
    auto bytes_of = [](const std::string& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    };
    CHECK(bytes_of(data + "/train_0000.fcub") == bytes_of(data2 + "/train_0000.fcub"));
    CHECK(bytes_of(data + "/manifest.tsv") == bytes_of(data2 + "/manifest.tsv"));
  }
  SUBCASE("the numeric exit code flags a gradient check above threshold") {
    // an impossible threshold forces the numeric-failure path
    CHECK(run("gradcheck --out " + dir + "/gc_fail --block-len 2 --threshold 1e-18") == 4);
  }
  SUBCASE("data errors get the data exit code") {
    CHECK(run("eval --manifest " + dir + "/missing.tsv --checkpoint " + trained +
              "/checkpoint.grnn --out " + dir + "/e2") == 3);
    CHECK(run("viz --checkpoint " + data + "/test_0000.fcub --cube " + data +
              "/test_0000.fcub --out " + dir + "/e3") == 3);
  }
}

TEST_CASE("gradcheck command passes on the default tiny configuration") {
  const std::string dir = temp_dir();
  CHECK(run("gradcheck --out " + dir + " --seeds 1") == 0);
  CHECK(std::filesystem::exists(dir + "/resolved_config.txt"));
}

TEST_CASE("config files supply flags and the command line overrides them") {
  const std::string dir = temp_dir();
  {
    std::ofstream cfg(dir + "/synth.cfg");
    cfg << "# comment line\n"
        << "grid=3\nfeat-dim=4\nclasses=2\nclip-len=5\n"
        << "train-clips=4\ntest-clips=2\nnoise-sigma=0.25\nseed=11\n"
        << "out=" << dir << "/from_file\n";
  }
  CHECK(run("synth --config " + dir + "/synth.cfg") == 0);
  CHECK(std::filesystem::exists(dir + "/from_file/manifest.tsv"));

  // command line wins over the file
  CHECK(run("synth --config " + dir + "/synth.cfg --out " + dir + "/override --seed 5") == 0);
  std::ifstream resolved(dir + "/override/resolved_config.txt");
  std::string text((std::istreambuf_iterator<char>(resolved)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("seed=5") != std::string::npos);
  CHECK(text.find("grid=3") != std::string::npos);

  // unknown keys and missing files are config errors
  {
    std::ofstream cfg(dir + "/bad.cfg");
    cfg << "bogus=1\n";
  }
  CHECK(run("synth --config " + dir + "/bad.cfg --out " + dir + "/x") == 2);
  CHECK(run("synth --config " + dir + "/nope.cfg --out " + dir + "/x") == 2);
  CHECK(run("train") == 2);  // required flag absent
}

TEST_CASE("training runs are reproducible from their resolved configuration") {
  const std::string dir = temp_dir();
  const std::string data = dir + "/data";
  REQUIRE(run("synth --out " + data +
              " --grid 3 --feat-dim 4 --classes 2 --clip-len 5 --train-clips 4 --test-clips 2"
              " --noise-sigma 0.3 --seed 9") == 0);
  const std::string flags = " --manifest " + data + "/manifest.tsv --hidden-dim 5 --layers 1"
                            " --dropout 0.4 --epochs 2 --batch 2 --block-len 5 --seed 6";
  REQUIRE(run("train --out " + dir + "/a" + flags) == 0);
  REQUIRE(run("train --out " + dir + "/b" + flags) == 0);
  auto bytes_of = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(bytes_of(dir + "/a/checkpoint.grnn") == bytes_of(dir + "/b/checkpoint.grnn"));
  CHECK(bytes_of(dir + "/a/loss_curve.tsv") == bytes_of(dir + "/b/loss_curve.tsv"));
}
