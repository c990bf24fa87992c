#pragma once

// Command-line harness: configuration, the five run modes, and the report
// writers. Kept header-only so the tests can drive it in-process.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bbconic/bruckbose.hpp"
#include "bbconic/parallel.hpp"
#include "bbconic/reconstruct.hpp"
#include "bbconic/report.hpp"

#ifndef BBCONIC_VERSION
#define BBCONIC_VERSION "0.0.0"
#endif

namespace bbconic {

enum class Mode { forward, reconstruct, roundtrip, lemma1, negative_control };
enum class Control { displace, hall, corrupt_arc };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::forward: return "forward";
    case Mode::reconstruct: return "reconstruct";
    case Mode::roundtrip: return "roundtrip";
    case Mode::lemma1: return "lemma1";
    case Mode::negative_control: return "negative-control";
  }
  return "?";
}

inline const char* to_string(Control c) {
  switch (c) {
    case Control::displace: return "displace";
    case Control::hall: return "hall";
    case Control::corrupt_arc: return "corrupt-arc";
  }
  return "?";
}

/// Stage at which each negative control is expected to fail.
inline const char* expected_failure(Control c) {
  switch (c) {
    case Control::displace: return "cplanes";
    case Control::hall: return "regularity";
    case Control::corrupt_arc: return "arc_certificate";
  }
  return "?";
}

struct RunConfig {
  Mode mode = Mode::roundtrip;
  std::optional<unsigned> q;
  std::optional<unsigned> p;
  std::optional<unsigned> k;
  std::optional<std::string> modulus;  // "c0,c1,...,1", low degree first
  std::uint64_t seed = 0;
  std::optional<std::string> input;
  std::optional<std::string> output;
  std::optional<std::string> dump;
  unsigned threads = default_threads();
  bool json = true;
  bool exploratory = false;
  bool full_checks = true;
  std::optional<Control> control;
};

struct RunResult {
  PipelineReport report;
  FieldSpec spec;
  nlohmann::ordered_json digests = nlohmann::ordered_json::object();
  int exit_code = 0;
};

namespace cli_detail {

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

/// Relative output paths land in $BBCONIC_OUT_DIR when it is set.
inline std::string output_path(const std::string& path) {
  const char* dir = std::getenv("BBCONIC_OUT_DIR");
  std::filesystem::path p(path);
  if (dir && *dir && p.is_relative()) p = std::filesystem::path(dir) / p;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p.string();
}

inline std::vector<unsigned> parse_modulus(const std::string& text) {
  std::vector<unsigned> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      out.push_back(static_cast<unsigned>(v));
    } catch (const std::exception&) {
      throw ConfigError("modulus must be a comma-separated coefficient list, got '" + text + "'");
    }
  }
  return out;
}

inline void check_order(unsigned q, bool exploratory) {
  if (q % 2 == 0) throw ConfigError("q must be odd");
  if (q < 7 && !exploratory) throw ConfigError("q must be at least 7 unless --exploratory is given");
}

/// Field from --q or --p/--k, with an optional modulus override.
inline FieldSpec field_spec(const RunConfig& cfg) {
  FieldSpec spec;
  if (cfg.q) {
    if (cfg.p || cfg.k) throw ConfigError("give either --q or --p/--k, not both");
    check_order(*cfg.q, cfg.exploratory);
    spec = FieldSpec::for_order(*cfg.q);
  } else if (cfg.p) {
    const unsigned k = cfg.k.value_or(1);
    unsigned q = 1;
    for (unsigned i = 0; i < k; ++i) q *= *cfg.p;
    check_order(q, cfg.exploratory);
    spec = FieldSpec::canonical(*cfg.p, k);
  } else {
    throw ConfigError("missing --q (or --p/--k)");
  }
  if (cfg.modulus) {
    spec.modulus = parse_modulus(*cfg.modulus);
    Field::make(spec);
  }
  return spec;
}

inline std::vector<ProjPoint> displaced(const BruckBoseFrame& frame, std::vector<ProjPoint> c, Counts& counts) {
  const ProjectiveSpace& pg4 = frame.pg4();
  std::vector<char> in(pg4.point_count(), 0);
  for (const auto& x : c) in[pg4.id_of(x)] = 1;
  const std::size_t victim = c.size() / 2;
  for (PointId id = 0; id < pg4.point_count(); ++id) {
    const ProjPoint x = pg4.point_at(id);
    if (x[4] != 0 && !in[id]) {
      counts.set("displaced_index", static_cast<std::int64_t>(victim));
      counts.set("new_point_id", id);
      c[victim] = x;
      return c;
    }
  }
  throw ConfigError("no affine point is free");
}

/// Moves one conic point onto the secant through the first two, so that
/// some affine plane meets C in three points.
inline std::vector<ProjPoint> corrupted_arc(const BruckBoseFrame& frame, const TangentConic& tc, Counts& counts) {
  const ProjectiveSpace& plane = frame.plane();
  auto affine = tc.affine;
  const Subspace secant = plane.span({affine[0], affine[1]});
  for (const auto& p : plane.points_of(secant)) {
    if (p[2] != 0 && std::find(affine.begin(), affine.end(), p) == affine.end()) {
      const std::size_t victim = affine.size() - 1;
      affine[victim] = p;
      counts.set("replaced_index", static_cast<std::int64_t>(victim));
      std::vector<ProjPoint> c;
      for (const auto& x : affine) c.push_back(frame.point_down(x));
      return c;
    }
  }
  throw ConfigError("secant has no free affine point");
}

inline void append(PipelineReport& into, const PipelineReport& from) {
  for (const auto& s : from.stages) into.stages.push_back(s);
}

}  // namespace cli_detail

/// Executes one run; never throws for bad input, which becomes exit code 2.
inline RunResult execute(const RunConfig& cfg, std::ostream& err) {
  RunResult res;
  res.report.exploratory = cfg.exploratory;
  try {
    std::optional<CDump> dump_in;
    if (cfg.mode == Mode::reconstruct) {
      if (!cfg.input) throw ConfigError("reconstruct needs --in");
      dump_in = read_c_dump(*cfg.input, cfg.q);
      res.spec = dump_in->spec;
      cli_detail::check_order(res.spec.order(), cfg.exploratory);
      if (cfg.modulus && cli_detail::parse_modulus(*cfg.modulus) != res.spec.modulus) {
        throw ConfigError("modulus differs from the dump header");
      }
      res.digests["input"] = cli_detail::sha256_file(*cfg.input);
    } else {
      res.spec = cli_detail::field_spec(cfg);
    }
    if (cfg.mode == Mode::negative_control && !cfg.control) throw ConfigError("negative-control needs --control");

    const BruckBoseFrame frame(Field::make(res.spec));
    PipelineOptions po;
    po.recon.threads = cfg.threads ? cfg.threads : 1;
    po.recon.full_checks = cfg.full_checks;
    po.exploratory = cfg.exploratory;
    StageRunner run(res.report);
    const TangentConic tc = random_tangent_conic(frame, cfg.seed);
    std::vector<ProjPoint> c;
    auto build = [&](Counts& k) {
      c = build_C(frame, tc);
      k.set("c_points", static_cast<std::int64_t>(c.size()));
      k.set("seed", static_cast<std::int64_t>(cfg.seed));
    };
    auto write_dump = [&](const std::string& path) {
      const std::string resolved = cli_detail::output_path(path);
      std::ofstream os(resolved);
      if (!os) throw ConfigError("cannot write " + resolved);
      write_c_dump(os, res.spec, cfg.seed, c);
      os.close();
      res.digests["dump"] = cli_detail::sha256_file(resolved);
    };

    switch (cfg.mode) {
      case Mode::forward: {
        run.run("forward_build", build);
        write_dump(cfg.dump.value_or("C_q" + std::to_string(res.spec.order()) + "_seed" + std::to_string(cfg.seed) + ".txt"));
        break;
      }
      case Mode::roundtrip: {
        const auto rep = run_pipeline(frame, {}, &tc, po);
        cli_detail::append(res.report, rep);
        if (cfg.dump) {
          c = build_C(frame, tc);
          write_dump(*cfg.dump);
        }
        break;
      }
      case Mode::reconstruct: {
        cli_detail::append(res.report, run_pipeline(frame, dump_in->points, nullptr, po));
        break;
      }
      case Mode::lemma1: {
        run.run("forward_build", build);
        run.run("cplane_arcs", [&](Counts& k) {
          Lemma1Options lo;
          lo.threads = po.recon.threads;
          lo.c_override = &c;
          const auto r = verify_lemma1(frame, tc, lo);
          k.set("c_points", static_cast<std::int64_t>(r.c_points));
          k.set("cplanes", static_cast<std::int64_t>(r.cplanes));
          k.set("pairs_covered_once", static_cast<std::int64_t>(r.pairs_covered_once));
          k.set("affine_off_conic", static_cast<std::int64_t>(r.affine_off_conic));
          k.set("on_zero_planes", static_cast<std::int64_t>(r.on_zero_planes));
          k.set("on_two_planes", static_cast<std::int64_t>(r.on_two_planes));
          k.set("interior", static_cast<std::int64_t>(r.interior));
          k.set("exterior", static_cast<std::int64_t>(r.exterior));
          k.set("baer_checked", static_cast<std::int64_t>(r.baer_checked));
          k.set("baer_closure_agreements", static_cast<std::int64_t>(r.baer_closure_agreements));
        });
        break;
      }
      case Mode::negative_control: {
        switch (*cfg.control) {
          case Control::displace: {
            run.run("forward_build", build);
            run.run("displace", [&](Counts& k) { c = cli_detail::displaced(frame, c, k); });
            if (!run.halted()) cli_detail::append(res.report, run_pipeline(frame, c, nullptr, po));
            break;
          }
          case Control::hall: {
            Spread s;
            run.run("regular_spread", [&](Counts& k) {
              s.lines = frame.spread_reg();
              s.distinguished = frame.infinite_index(tc.p_inf);
              s.source.assign(s.lines.size(), 0);
              s.source[s.distinguished] = -1;
              spread_owner(frame.sigma(), s.lines);
              k.set("spread_lines", static_cast<std::int64_t>(s.lines.size()));
            });
            run.run("hall_perturbation", [&](Counts& k) {
              s = hall_perturbation(frame.sigma(), s);
              spread_owner(frame.sigma(), s.lines);
              std::int64_t replaced = 0;
              for (auto src : s.source) replaced += src == -2;
              k.set("replaced_lines", replaced);
            });
            run.run("regularity", [&](Counts& k) {
              const auto closure = regulus_closure(frame.sigma(), s, po.recon.threads);
              const auto klein = klein_regularity(frame.sigma(), s.lines);
              k.set("regulus_pairs", static_cast<std::int64_t>(closure.pairs));
              k.set("regulus_passes", static_cast<std::int64_t>(closure.passes));
              k.set("klein_span_dimension", klein.span.dimension());
              k.set("klein_regular", klein.regular ? 1 : 0);
              k.set("oracles_agree", klein.regular == closure.closed() ? 1 : 0);
              if (!closure.closed()) throw ClosureViolation("regulus through t∞ leaves the spread", closure.witness);
              if (!klein.regular) throw RegularityViolation("Klein image is not an elliptic quadric section");
            });
            break;
          }
          case Control::corrupt_arc: {
            run.run("forward_build", build);
            run.run("corrupt", [&](Counts& k) { c = cli_detail::corrupted_arc(frame, tc, k); });
            run.run("arc_certificate", [&](Counts& k) {
              Spread s;
              s.lines = frame.spread_reg();
              s.distinguished = frame.infinite_index(tc.p_inf);
              s.source.assign(s.lines.size(), 0);
              rebuild_plane_and_certify_arc(frame, c, s, true, nullptr, &k);
            });
            break;
          }
        }
        break;
      }
    }
    res.exit_code = res.report.verdict() == Verdict::fail ? 1 : 0;
  } catch (const Error& e) {
    err << "error: " << e.what();
    if (!e.witness().empty()) err << " [" << e.witness() << "]";
    err << '\n';
    res.exit_code = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    res.exit_code = 2;
  }
  return res;
}

inline nlohmann::ordered_json config_json(const RunConfig& cfg, const FieldSpec& spec) {
  nlohmann::ordered_json c;
  c["mode"] = to_string(cfg.mode);
  c["q"] = spec.order();
  c["p"] = spec.p;
  c["k"] = spec.k;
  c["modulus"] = spec.modulus_string();
  c["seed"] = cfg.seed;
  c["checks"] = cfg.full_checks ? "full" : "core";
  c["exploratory"] = cfg.exploratory;
  c["control"] = cfg.control ? nlohmann::ordered_json(to_string(*cfg.control)) : nlohmann::ordered_json(nullptr);
  c["expected_failure"] =
      cfg.control ? nlohmann::ordered_json(expected_failure(*cfg.control)) : nlohmann::ordered_json(nullptr);
  c["input"] = cfg.input ? nlohmann::ordered_json(*cfg.input) : nlohmann::ordered_json(nullptr);
  return c;
}

inline nlohmann::ordered_json report_json(const RunConfig& cfg, const RunResult& res) {
  nlohmann::ordered_json j;
  j["config"] = config_json(cfg, res.spec);
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : res.report.stages) {
    nlohmann::ordered_json st;
    st["name"] = s.name;
    st["verdict"] = to_string(s.verdict);
    st["counts"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s.counts.items()) st["counts"][k] = v;
    if (s.error.empty()) {
      st["witness"] = nullptr;
    } else {
      st["witness"] = {{"error", s.error}, {"message", s.message}, {"object", s.witness}};
    }
    st["millis"] = s.millis;
    j["stages"].push_back(std::move(st));
  }
  j["verdict"] = to_string(res.report.verdict());
  j["version"] = BBCONIC_VERSION;
  j["digests"] = res.digests;
  return j;
}

inline std::string report_text(const RunConfig& cfg, const RunResult& res) {
  std::ostringstream os;
  os << "bbconic " << BBCONIC_VERSION << "  mode=" << to_string(cfg.mode) << " q=" << res.spec.order()
     << " modulus=" << res.spec.modulus_string() << " seed=" << cfg.seed;
  if (cfg.control) os << " control=" << to_string(*cfg.control);
  os << '\n';
  for (const auto& s : res.report.stages) {
    os << "  [" << to_string(s.verdict) << "] " << s.name << " (" << std::fixed << std::setprecision(1) << s.millis << " ms)";
    for (const auto& [k, v] : s.counts.items()) os << ' ' << k << '=' << v;
    os << '\n';
    if (!s.error.empty()) {
      os << "      " << s.error << ": " << s.message << '\n';
      if (!s.witness.empty()) os << "      witness: " << s.witness << '\n';
    }
  }
  for (const auto& [k, v] : res.digests.items()) os << "  sha256 " << k << ' ' << v.get<std::string>() << '\n';
  os << "verdict: " << to_string(res.report.verdict()) << '\n';
  return os.str();
}

/// Runs and writes the report to --out (or `out`); returns the exit code.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const RunResult res = execute(cfg, err);
  if (res.exit_code == 2) return 2;
  const std::string body = cfg.json ? report_json(cfg, res).dump(2) + "\n" : report_text(cfg, res);
  if (cfg.output) {
    const std::string path = cli_detail::output_path(*cfg.output);
    std::ofstream os(path);
    if (!os) {
      err << "error: cannot write " << path << '\n';
      return 2;
    }
    os << body;
  } else {
    out << body;
  }
  if (const auto* f = res.report.first_failure(); f && res.exit_code == 1) {
    err << "failed at stage " << f->name << ": " << f->error << ": " << f->message << '\n';
  }
  return res.exit_code;
}

/// Parses argv into a config. Returns nullopt with `code` set when the
/// process should exit right away (help, or a usage error).
inline std::optional<RunConfig> parse_args(int argc, const char* const* argv, int& code, std::ostream& out,
                                           std::ostream& err) {
  CLI::App app{"Bruck-Bose conic reconstruction and verification"};
  app.set_version_flag("--version", std::string(BBCONIC_VERSION));
  RunConfig cfg;
  std::string mode, format = "json", checks = "full", control;
  unsigned q = 0, p = 0, k = 0;
  std::string modulus, input, output, dump;
  app.add_option("mode", mode, "forward | reconstruct | roundtrip | lemma1 | negative-control")
      ->required()
      ->check(CLI::IsMember({"forward", "reconstruct", "roundtrip", "lemma1", "negative-control"}));
  app.add_option("--q", q, "field order (odd prime power)");
  app.add_option("--p", p, "characteristic, with --k");
  app.add_option("--k", k, "extension degree, with --p");
  app.add_option("--modulus", modulus, "irreducible modulus c0,c1,...,1 overriding the canonical one");
  app.add_option("--seed", cfg.seed, "conic seed; 0 is x^2 = yz");
  app.add_option("--in", input, "C-point dump for reconstruct");
  app.add_option("--out", output, "report path (default stdout)");
  app.add_option("--dump", dump, "where forward/roundtrip write the C-point dump");
  app.add_option("--threads", cfg.threads, "worker threads (default: all cores)");
  app.add_option("--format", format, "json | text")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--checks", checks, "core | full")->check(CLI::IsMember({"core", "full"}));
  app.add_option("--control", control, "displace | hall | corrupt-arc")
      ->check(CLI::IsMember({"displace", "hall", "corrupt-arc"}));
  app.add_flag("--exploratory", cfg.exploratory, "allow q = 3, 5; failures become warnings");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    code = app.exit(e, out, err) == 0 ? 0 : 2;
    return std::nullopt;
  }
  if (mode == "forward") cfg.mode = Mode::forward;
  if (mode == "reconstruct") cfg.mode = Mode::reconstruct;
  if (mode == "roundtrip") cfg.mode = Mode::roundtrip;
  if (mode == "lemma1") cfg.mode = Mode::lemma1;
  if (mode == "negative-control") cfg.mode = Mode::negative_control;
  if (app.count("--q")) cfg.q = q;
  if (app.count("--p")) cfg.p = p;
  if (app.count("--k")) cfg.k = k;
  if (app.count("--modulus")) cfg.modulus = modulus;
  if (app.count("--in")) cfg.input = input;
  if (app.count("--out")) cfg.output = output;
  if (app.count("--dump")) cfg.dump = dump;
  cfg.json = format == "json";
  cfg.full_checks = checks == "full";
  if (control == "displace") cfg.control = Control::displace;
  if (control == "hall") cfg.control = Control::hall;
  if (control == "corrupt-arc") cfg.control = Control::corrupt_arc;
  code = 0;
  return cfg;
}

}  // namespace bbconic
