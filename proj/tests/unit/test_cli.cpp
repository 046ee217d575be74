#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sam/snapshot.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "sam_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Run samcli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt";
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string(SAMCLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<nlohmann::json> metrics_without_time(const fs::path& p) {
  std::vector<nlohmann::json> v;
  for (const std::string& l : lines(slurp(p))) {
    nlohmann::json j = nlohmann::json::parse(l);
    j.erase("wall_time");
    v.push_back(j);
  }
  return v;
}

const std::string kSmall =
    "--task copy --model sam --quiet --set hidden=12 --set slots=16 --set word_size=8 --set heads=1 "
    "--set minibatch=2 --set workers=1 --set max_level=3 --set checkpoint_every=4 ";

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(samcli("").code == 2);
  CHECK(samcli("gradcheck --no-such-flag").code == 2);
  CHECK(samcli("bench --models lstm-only --slots 64").code == 2);
  const Run bad = samcli("train --out " + (scratch() / "bad").string() + " --set learning_rate=-1 --minibatches 1");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("learning_rate") != std::string::npos);
  CHECK(samcli("--help").code == 0);
}

TEST_CASE("gradcheck passes, and a corrupted gradient exits 1") {
  const Run ok = samcli("gradcheck --model sam --slots 16 --level 2");
  CHECK(ok.code == 0);
  CHECK(ok.out.rfind("PASS", 0) == 0);
  const Run bad = samcli("gradcheck --model sam --slots 16 --level 2 --corrupt");
  CHECK(bad.code == 1);
  CHECK(bad.out.rfind("FAIL", 0) == 0);
}

TEST_CASE("bench prints one CSV row per model and size with skip markers") {
  const Run r = samcli("bench --models sam-ann,dam --slots 64,128 --steps 5 --trials 1 --minibatch 1 --dense-ceiling 64");
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "schema,model,slots,status,ms_per_pass,journal_bytes_per_step,peak_bytes");
  CHECK(rows[1].rfind("1,sam-ann,64,ok,", 0) == 0);
  CHECK(rows[2].rfind("1,sam-ann,128,ok,", 0) == 0);
  CHECK(rows[3].rfind("1,dam,64,ok,", 0) == 0);
  CHECK(rows[4] == "1,dam,128,skipped,,,");
}

TEST_CASE("train is deterministic, resumable, and its checkpoint evaluates") {
  const fs::path a = scratch() / "a";
  const fs::path b = scratch() / "b";
  const fs::path c = scratch() / "c";
  REQUIRE(samcli("train " + kSmall + "--minibatches 8 --out " + a.string()).code == 0);
  REQUIRE(samcli("train " + kSmall + "--minibatches 8 --out " + b.string()).code == 0);
  const auto ma = metrics_without_time(a / "metrics.ndjson");
  CHECK(ma.size() == 8);
  CHECK(ma == metrics_without_time(b / "metrics.ndjson"));

  REQUIRE(samcli("train " + kSmall + "--minibatches 4 --out " + c.string()).code == 0);
  REQUIRE(samcli("train " + kSmall + "--minibatches 8 --resume --out " + c.string()).code == 0);
  CHECK(metrics_without_time(c / "metrics.ndjson") == ma);
  const sam::Container resumed = sam::Container::load((c / "checkpoint.bin").string(), "checkpoint");
  const sam::Container straight = sam::Container::load((a / "checkpoint.bin").string(), "checkpoint");
  CHECK(resumed.get_vector("params") == straight.get_vector("params"));
  CHECK(resumed.get_vector("rmsprop.velocity") == straight.get_vector("rmsprop.velocity"));

  const std::string ckpt = (a / "checkpoint.bin").string();
  const Run e = samcli("eval --checkpoint " + ckpt + " --levels 1,4 --episodes 5");
  REQUIRE(e.code == 0);
  const auto rows = lines(e.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "level,mean_bit_error,std_error,episodes");
  CHECK(rows[1].rfind("1,", 0) == 0);
  CHECK(rows[2].rfind("4,", 0) == 0);
  const Run larger = samcli("eval --checkpoint " + ckpt + " --levels 4 --episodes 5 --slots 64");
  CHECK(larger.code == 0);
  CHECK(lines(larger.out).size() == 2);
  CHECK(samcli("eval --checkpoint " + ckpt + " --levels 0").code == 2);
  CHECK(samcli("eval --checkpoint " + ckpt + " --bits 6").code == 2);
  CHECK(samcli("eval --checkpoint " + (scratch() / "missing.bin").string()).code == 2);
}
