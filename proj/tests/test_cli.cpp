#include <gtest/gtest.h>
#include <openssl/evp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bbconic/cli.hpp"

using namespace bbconic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
  nlohmann::json json() const { return nlohmann::json::parse(out); }
};

Outcome invoke(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"bbconic"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = 0;
  const auto cfg = parse_args(static_cast<int>(argv.size()), argv.data(), code, out, err);
  if (cfg) code = run(*cfg, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "bbconic_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string one_shot_sha256(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

nlohmann::json strip_millis(nlohmann::json j) {
  for (auto& s : j["stages"]) s.erase("millis");
  return j;
}

std::string failing_stage(const nlohmann::json& j) {
  for (const auto& s : j["stages"]) {
    if (s["verdict"] == "fail") return s["name"];
  }
  return "";
}

}  // namespace

TEST(Cli, RoundtripPassesAllTenStages) {
  const auto r = invoke({"roundtrip", "--q", "7", "--seed", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.json();
  EXPECT_EQ(j["verdict"], "pass");
  ASSERT_EQ(j["stages"].size(), 10u);
  const std::vector<std::string> names{"forward_build",    "cplanes",       "axiom3",      "parallel_classes",
                                       "infinity_data",    "t_infinity",    "spread",      "regularity",
                                       "arc_certificate",  "uniqueness"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(j["stages"][i]["name"], names[i]);
    EXPECT_EQ(j["stages"][i]["verdict"], "pass");
  }
  EXPECT_EQ(j["stages"][1]["counts"]["cplanes"], 56);
  EXPECT_EQ(j["stages"][6]["counts"]["spread_lines"], 50);
}

TEST(Cli, ReportSchema) {
  const auto j = invoke({"roundtrip", "--q", "7", "--seed", "3"}).json();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"config", "digests", "stages", "verdict", "version"}));
  EXPECT_EQ(j["version"], BBCONIC_VERSION);
  EXPECT_EQ(j["config"]["q"], 7);
  EXPECT_EQ(j["config"]["seed"], 3);
  EXPECT_EQ(j["config"]["mode"], "roundtrip");
  for (const auto& s : j["stages"]) {
    EXPECT_TRUE(s.contains("name"));
    EXPECT_TRUE(s["counts"].is_object());
    EXPECT_TRUE(s["witness"].is_null());
    EXPECT_TRUE(s["millis"].is_number());
  }
}

TEST(Cli, OutputIsDeterministicApartFromTimings) {
  const auto a = invoke({"roundtrip", "--q", "7", "--seed", "5", "--threads", "1"}).json();
  const auto b = invoke({"roundtrip", "--q", "7", "--seed", "5", "--threads", "4"}).json();
  EXPECT_EQ(strip_millis(a), strip_millis(b));
}

TEST(Cli, ConfigErrorsExitTwo) {
  auto r = invoke({"roundtrip", "--q", "6"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("q must be odd"), std::string::npos);
  EXPECT_TRUE(r.out.empty());

  EXPECT_EQ(invoke({"roundtrip", "--q", "5"}).code, 2);
  EXPECT_EQ(invoke({"roundtrip"}).code, 2);
  EXPECT_EQ(invoke({"roundtrip", "--q", "15"}).code, 2);
  EXPECT_EQ(invoke({"roundtrip", "--q", "7", "--p", "7"}).code, 2);
  EXPECT_EQ(invoke({"roundtrip", "--q", "7", "--format", "xml"}).code, 2);
  EXPECT_EQ(invoke({"sideways", "--q", "7"}).code, 2);
  EXPECT_EQ(invoke({"roundtrip", "--q", "7", "--bogus"}).code, 2);
  EXPECT_EQ(invoke({"negative-control", "--q", "7"}).code, 2);
  EXPECT_EQ(invoke({"reconstruct", "--q", "7"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, ModulusOverride) {
  auto r = invoke({"roundtrip", "--q", "9", "--modulus", "1,0,1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.json()["config"]["modulus"], "1,0,1");

  r = invoke({"roundtrip", "--q", "9", "--modulus", "2,0,1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("reducible"), std::string::npos);
  EXPECT_EQ(invoke({"roundtrip", "--q", "9", "--modulus", "1,x,1"}).code, 2);

  r = invoke({"roundtrip", "--p", "3", "--k", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.json()["config"]["q"], 9);
}

TEST(Cli, ExploratorySmallFieldsGiveNoVerdict) {
  auto r = invoke({"roundtrip", "--q", "5", "--exploratory"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.json()["verdict"], "no-verdict");

  r = invoke({"roundtrip", "--q", "3", "--exploratory"});
  EXPECT_EQ(r.code, 0);
  const auto j = r.json();
  EXPECT_EQ(j["verdict"], "no-verdict");
  EXPECT_EQ(j["stages"][1]["verdict"], "warn");
  EXPECT_EQ(j["stages"][9]["verdict"], "skipped");
}

TEST(Cli, ForwardDumpReconstructsWithSameCounts) {
  const auto dump = scratch("fwd_q7_s2.txt");
  auto f = invoke({"forward", "--q", "7", "--seed", "2", "--dump", dump.string()});
  ASSERT_EQ(f.code, 0) << f.err;
  const std::string text = slurp(dump);
  EXPECT_EQ(text.rfind("q=7 poly=", 0), 0u);
  EXPECT_EQ(f.json()["digests"]["dump"], one_shot_sha256(text));

  auto rec = invoke({"reconstruct", "--in", dump.string()});
  ASSERT_EQ(rec.code, 0) << rec.err;
  auto trip = invoke({"roundtrip", "--q", "7", "--seed", "2"});
  const auto rj = rec.json();
  const auto tj = trip.json();
  EXPECT_EQ(rj["digests"]["input"], one_shot_sha256(text));
  ASSERT_EQ(rj["stages"].size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(rj["stages"][i]["name"], tj["stages"][i + 1]["name"]);
    auto counts = tj["stages"][i + 1]["counts"];
    counts.erase("matches_input_conic");
    counts.erase("spread_equals_regular");
    EXPECT_EQ(rj["stages"][i]["counts"], counts) << rj["stages"][i]["name"];
  }
}

TEST(Cli, CorruptedDumps) {
  const auto dump = scratch("corrupt_src.txt");
  ASSERT_EQ(invoke({"forward", "--q", "7", "--dump", dump.string()}).code, 0);
  std::vector<std::string> lines;
  {
    std::ifstream in(dump);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  auto write = [&](const std::string& name, const std::vector<std::string>& ls) {
    const auto p = scratch(name);
    std::ofstream os(p);
    for (const auto& l : ls) os << l << '\n';
    return p.string();
  };

  auto moved = lines;
  for (int c = 1; c < 7; ++c) {
    const std::string candidate = "0,0,0,1," + std::to_string(c);
    if (std::find(lines.begin(), lines.end(), candidate) == lines.end()) {
      moved[10] = candidate;
      break;
    }
  }
  ASSERT_NE(moved[10], lines[10]);
  auto r = invoke({"reconstruct", "--in", write("moved.txt", moved)});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(failing_stage(r.json()), "cplanes");
  EXPECT_NE(r.err.find("cplanes"), std::string::npos);

  auto garbled = lines;
  garbled[5] = "1,2,three,4,5";
  EXPECT_EQ(invoke({"reconstruct", "--in", write("garbled.txt", garbled)}).code, 2);
  auto dropped = lines;
  dropped.pop_back();
  EXPECT_EQ(invoke({"reconstruct", "--in", write("dropped.txt", dropped)}).code, 2);

  EXPECT_EQ(invoke({"reconstruct", "--in", dump.string(), "--q", "9"}).code, 2);
  EXPECT_EQ(invoke({"reconstruct", "--in", dump.string(), "--modulus", "3,1"}).code, 2);
  EXPECT_EQ(invoke({"reconstruct", "--in", scratch("missing.txt").string()}).code, 2);
}

TEST(Cli, NegativeControlsFailAtTheirStage) {
  for (const auto& [control, stage] : std::vector<std::pair<std::string, std::string>>{
           {"displace", "cplanes"}, {"hall", "regularity"}, {"corrupt-arc", "arc_certificate"}}) {
    const auto r = invoke({"negative-control", "--q", "7", "--control", control});
    EXPECT_EQ(r.code, 1) << control;
    const auto j = r.json();
    EXPECT_EQ(j["config"]["expected_failure"], stage);
    EXPECT_EQ(failing_stage(j), stage) << control;
    for (const auto& s : j["stages"]) {
      if (s["verdict"] == "fail") {
        EXPECT_FALSE(s["witness"]["object"].get<std::string>().empty()) << control;
      }
    }
  }
  const auto hall = invoke({"negative-control", "--q", "7", "--control", "hall"}).json();
  EXPECT_EQ(hall["stages"][2]["counts"]["klein_regular"], 0);
  EXPECT_EQ(hall["stages"][2]["counts"]["oracles_agree"], 1);
  const auto arc = invoke({"negative-control", "--q", "7", "--control", "corrupt-arc"}).json();
  EXPECT_EQ(arc["stages"][2]["witness"]["error"], "NotAnArc");
}

TEST(Cli, CPlaneArcMode) {
  const auto r = invoke({"lemma1", "--q", "7", "--seed", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto c = r.json()["stages"][1]["counts"];
  EXPECT_EQ(c["cplanes"], 56);
  EXPECT_EQ(c["on_zero_planes"], c["interior"]);
  EXPECT_EQ(c["baer_checked"], 10);
}

TEST(Cli, TextFormatAndOutFile) {
  const auto out = scratch("report.txt");
  const auto r = invoke({"roundtrip", "--q", "7", "--format", "text", "--out", out.string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  const std::string text = slurp(out);
  EXPECT_NE(text.find("[pass] uniqueness"), std::string::npos);
  EXPECT_NE(text.find("verdict: pass"), std::string::npos);
}

TEST(Cli, RelativePathsResolveAgainstOutDir) {
  const auto dir = scratch("outdir");
  fs::remove_all(dir);
  ::setenv("BBCONIC_OUT_DIR", dir.c_str(), 1);
  const auto r = invoke({"forward", "--q", "7", "--seed", "1", "--out", "rep.json"});
  ::unsetenv("BBCONIC_OUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "rep.json"));
  EXPECT_TRUE(fs::exists(dir / "C_q7_seed1.txt"));
}
