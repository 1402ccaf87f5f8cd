#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mvhom/archive.hpp"
#include "mvhom/commands.hpp"
#include "mvhom/errors.hpp"

using namespace mvhom;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kSmall = R"([grid]
n = 128
[coefficient]
family = layered
[cell]
m = 32
[noise]
modes = 8
[stepper]
dt = 1e-3
T = 0.02
[ensemble]
members = 2
[run]
replicas = 2
epsilon = 1/4, 1/8
seed = 11
)";

struct Scratch {
  fs::path root;
  Scratch() {
    root = fs::temp_directory_path() / ("mvhom_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() { fs::remove_all(root); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(root / name) << text;
    return root / name;
  }
};

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mvhom");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return files;
}

}  // namespace

TEST_CASE("exit code contract") {
  CHECK(exit_code(ErrorKind::Parse) == 2);
  CHECK(exit_code(ErrorKind::Validation) == 2);
  CHECK(exit_code(ErrorKind::Io) == 2);
  CHECK(exit_code(ErrorKind::Integrity) == 4);
  CHECK(exit_code(ErrorKind::SolverDiverged) == 3);
  CHECK(exit_code(ErrorKind::StepRejected) == 3);
  CHECK(exit_code(ErrorKind::NonFinite) == 3);

  const auto j = json::parse(error_json(ValidationError("run.epsilon", "list must be strictly decreasing")));
  CHECK(j["error"] == "ValidationError");
  CHECK(j["key"] == "run.epsilon");
  CHECK(j["exit_code"] == 2);
  const auto p = json::parse(error_json(ParseError(7, "unknown key")));
  CHECK(p["line"] == 7);
}

TEST_CASE("sha256 and blobs") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Blob b{{2, 3}, {1, 2, 3, 4, 5, 6.5}};
  const auto bytes = encode_blob(b);
  const auto back = decode_blob(bytes, "x.bin");
  CHECK(back.shape == b.shape);
  CHECK(back.data == b.data);
  CHECK_THROWS_AS(decode_blob(bytes.substr(0, bytes.size() - 3), "x.bin"), IntegrityError);
  CHECK_THROWS_AS(decode_blob("NOPE", "x.bin"), IntegrityError);
  CHECK_THROWS_AS(encode_blob(Blob{{4}, {1.0}}), DomainError);
}

TEST_CASE("cell on the constant family gives c times the identity") {
  Scratch s;
  const auto cfg = s.write("c.ini", "[grid]\ndim = 2\nn = 64\n[coefficient]\nfamily = constant\nc = 3\n"
                                    "[cell]\nm = 16\n[run]\nepsilon = 1/4\n[noise]\nmodes = 16\n");
  const auto r = cli({"cell", cfg.string(), "--out", (s.root / "cell").string()});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["tensor"] == json::parse("[[3.0, 0.0], [0.0, 3.0]]"));
  const auto cell = json::parse(read_file(s.root / "cell/cell.json"));
  CHECK(cell["max_abs_corrector"].get<double>() <= 1e-10);
  CHECK(fs::exists(s.root / "cell/correctors/slice000_k1.csv"));
}

TEST_CASE("reruns are byte identical and report regenerates") {
  Scratch s;
  const auto cfg = s.write("small.ini", kSmall);
  for (const std::string cmd : {"simulate", "ladder", "corrector", "cell"}) {
    CAPTURE(cmd);
    const auto a = cli({cmd, cfg.string(), "--out", (s.root / (cmd + "_a")).string(), "--plot-data"});
    if (a.code != 0) {
      // simulate and cell take no --plot-data
      REQUIRE(a.code == 2);
      REQUIRE(cli({cmd, cfg.string(), "--out", (s.root / (cmd + "_a")).string()}).code == 0);
      REQUIRE(cli({cmd, cfg.string(), "--out", (s.root / (cmd + "_b")).string(), "--workers", "2"}).code == 0);
    } else {
      REQUIRE(cli({cmd, cfg.string(), "--out", (s.root / (cmd + "_b")).string(), "--plot-data", "--workers", "2"}).code == 0);
    }
    auto fa = tree(s.root / (cmd + "_a")), fb = tree(s.root / (cmd + "_b"));
    fa.erase("run_info.json");
    fb.erase("run_info.json");
    CHECK(fa == fb);
    CHECK(fa.count("manifest.json") == 1);

    // every referenced file exists and matches its digest
    const auto m = json::parse(fa.at("manifest.json"));
    for (const auto& [name, digest] : m["files"].items()) CHECK(sha256_hex(fa.at(name)) == digest);

    // derived files are reproduced from raw arrays
    const fs::path dir = s.root / (cmd + "_a");
    for (const auto& d : m["derived"]) fs::remove(dir / d.get<std::string>());
    REQUIRE(cli({"report", dir.string()}).code == 0);
    auto regen = tree(dir);
    regen.erase("run_info.json");
    CHECK(regen == fa);
  }
}

TEST_CASE("report detects damaged archives") {
  Scratch s;
  const auto cfg = s.write("small.ini", kSmall);
  const fs::path dir = s.root / "sim";
  REQUIRE(cli({"simulate", cfg.string(), "--out", dir.string()}).code == 0);

  const std::string final_bin = read_file(dir / "raw/final.bin");
  std::ofstream(dir / "raw/final.bin", std::ios::binary | std::ios::trunc) << final_bin.substr(0, final_bin.size() / 2);
  auto r = cli({"report", dir.string()});
  CHECK(r.code == 4);
  auto j = json::parse(r.err);
  CHECK(j["error"] == "IntegrityError");
  CHECK(j["file"] == "raw/final.bin");

  fs::remove(dir / "raw/final.bin");
  r = cli({"report", dir.string()});
  CHECK(r.code == 4);
  j = json::parse(r.err);
  CHECK(j["file"] == "raw/final.bin");
  CHECK(j["message"].get<std::string>().find("digest") != std::string::npos);

  fs::remove(dir / "manifest.json");
  CHECK(cli({"report", dir.string()}).code == 4);
}

TEST_CASE("configuration failures exit with code 2") {
  Scratch s;
  const auto bad = s.write("bad.ini", "[run]\nepsilon = 1/8, 1/4\n");
  auto r = cli({"ladder", bad.string(), "--out", (s.root / "x").string()});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["key"] == "run.epsilon");
  CHECK_FALSE(fs::exists(s.root / "x"));

  r = cli({"simulate", (s.root / "missing.ini").string()});
  CHECK(r.code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({}).code == 2);
}

TEST_CASE("check and dump") {
  Scratch s;
  const auto cfg = s.write("small.ini", kSmall);
  const auto r = cli({"check", cfg.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("# digest ") != std::string::npos);
  CHECK(cli({"check", cfg.string(), "--seed", "12"}).out != r.out);

  const auto d = cli({"dump", cfg.string(), "--eps", "0.125"});
  REQUIRE(d.code == 0);
  std::istringstream lines(d.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "x1,a11");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 127);
  CHECK(cli({"dump", cfg.string(), "--eps", "1/8", "--t", "1/2"}).out ==
        cli({"dump", cfg.string(), "--eps", "0.125", "--t", "0.5"}).out);
  CHECK(cli({"dump", cfg.string(), "--eps", "1/0"}).code == 2);
  REQUIRE(cli({"dump", cfg.string(), "--out", (s.root / "a.csv").string()}).code == 0);
  CHECK(read_file(s.root / "a.csv").rfind("x1,a11\n", 0) == 0);
}

TEST_CASE("output root from the environment") {
  Scratch s;
  const auto cfg = s.write("small.ini", kSmall);
  ::setenv("MVHOM_OUTPUT_ROOT", (s.root / "runs").string().c_str(), 1);
  const auto r = cli({"cell", cfg.string()});
  ::unsetenv("MVHOM_OUTPUT_ROOT");
  REQUIRE(r.code == 0);
  const fs::path dir = json::parse(r.out)["dir"].get<std::string>();
  CHECK(dir.parent_path() == s.root / "runs");
  CHECK(dir.filename().string().rfind("cell-", 0) == 0);
}
