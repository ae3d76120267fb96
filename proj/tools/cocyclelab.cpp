// cocyclelab command-line tool.
// Exit codes: 0 ok, 2 usage, 3 numerical refusal, 4 certification failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cocyclelab/gap_opening.hpp"
#include "cocyclelab/parallel.hpp"
#include "cocyclelab/rotation_number.hpp"
#include "cocyclelab/sections.hpp"
#include "cocyclelab/spectrum.hpp"
#include "cocyclelab/towers.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cocyclelab;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 2, kRefusal = 3, kCertification = 4 };

struct Refusal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  for (const auto& t : split(s, ',')) v.push_back(std::stod(t));
  return v;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---- output bookkeeping ----

struct Run {
  std::string command;
  fs::path out = ".";
  json config = json::object();
  json grids = json::object();
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  std::ofstream open(const std::string& name) {
    fs::create_directories(out);
    outputs.push_back(name);
    std::ofstream f(out / name);
    if (!f) throw std::runtime_error("cannot write " + (out / name).string());
    return f;
  }

  void manifest() {
    std::ostringstream hx;
    hx << std::hex << fnv1a(command + config.dump());
    json m;
    m["tool"] = "cocyclelab";
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = config;
    m["config_hash"] = hx.str();
    m["grids"] = grids;
    m["seeds"] = json::array();
    m["threads"] = thread_count();
    m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m["outputs"] = outputs;
    fs::create_directories(out);
    std::ofstream(out / "manifest.json") << m.dump(2) << "\n";
  }
};

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

// ---- shared options ----

struct Common {
  std::string system = "rotation:golden";
  std::string v = "zero";
  std::string out = ".";
  double x0 = 0.0;
};

void add_common(CLI::App* sub, Common& c, bool potential = true, bool out = true) {
  sub->add_option("--system", c.system, "base system, e.g. rotation:golden, rotation:1/2, skewshift:golden")
      ->capture_default_str();
  if (potential) sub->add_option("--v", c.v, "potential: zero, const:c, amo:lambda, seq:a,b,...")->capture_default_str();
  if (out) sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--x0", c.x0, "first coordinate of the start point")->capture_default_str();
}

Point start_point(const BaseSystem& base, double x0) {
  std::vector<double> cs(static_cast<size_t>(base.dim()), 0.0);
  cs[0] = x0;
  return base.make_point(cs);
}

// Values of the periodic potential along one period starting at x0.
std::vector<double> period_samples(const Potential& v, const BaseSystem& base, double x0) {
  if (!v.sequence.empty()) return v.sequence;
  if (!base.periodic_mode()) throw std::invalid_argument("floquet needs a rational rotation p/q");
  std::vector<double> seq;
  Point x = start_point(base, x0);
  for (std::int64_t k = 0; k < base.period_q(); ++k) {
    seq.push_back(v(x));
    x = base.step(x);
  }
  return seq;
}

// Cocycle descriptors: schrodinger (uses --E and --v), const:a,b,c,d, rot:beta (R(2 pi beta)),
// diag:l, rotshear:beta,amp,delta (R(2 pi beta + amp cos 2 pi x)[[1,delta],[0,1]]), anzai-a0, anzai-a1.
Cocycle make_cocycle(const std::string& spec, const BaseSystem& base, double E, const std::string& vspec) {
  if (spec == "schrodinger") return Cocycle::schrodinger(base, E, parse_potential(vspec, base));
  if (spec == "anzai-a0") return anzai_winding_pair(base.alpha()).a0;
  if (spec == "anzai-a1") return anzai_winding_pair(base.alpha()).a1;
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown cocycle '" + spec + "'");
  std::string kind = spec.substr(0, colon);
  auto a = parse_list(spec.substr(colon + 1));
  if (kind == "const" && a.size() == 4) {
    Mat2 m{a[0], a[1], a[2], a[3]};
    if (std::fabs(m.det() - 1.0) > 1e-12) throw std::invalid_argument("const cocycle must have determinant 1");
    return Cocycle::constant(base, m, spec);
  }
  if (kind == "rot" && a.size() == 1) return Cocycle::constant(base, Mat2::rotation(kTwoPi * a[0]), spec);
  if (kind == "diag" && a.size() == 1) return Cocycle::constant(base, Mat2::diag(a[0]), spec);
  if (kind == "rotshear" && a.size() == 3) {
    double beta = a[0], amp = a[1], delta = a[2];
    return Cocycle(
        base,
        [=](const Point& x) { return Mat2::rotation(kTwoPi * beta + amp * std::cos(kTwoPi * x[0])) * Mat2{1, delta, 0, 1}; },
        spec);
  }
  throw std::invalid_argument("malformed cocycle '" + spec + "'");
}

// "k:a:b,k:a:b" for sum a cos 2 pi k x + b sin 2 pi k x
TrigPolynomial parse_trig(const std::string& spec, double c0) {
  TrigPolynomial p;
  p.c0 = c0;
  for (const auto& term : split(spec, ',')) {
    auto f = split(term, ':');
    if (f.size() < 2 || f.size() > 3) throw std::invalid_argument("trig term must be k:a[:b], got '" + term + "'");
    TrigPolynomial::Term t;
    t.k = std::stoi(f[0]);
    t.a = std::stod(f[1]);
    t.b = f.size() == 3 ? std::stod(f[2]) : 0.0;
    if (t.k < 1) throw std::invalid_argument("trig frequency must be >= 1");
    p.terms.push_back(t);
  }
  return p;
}

SpectralProfile read_ids(const fs::path& file, const std::string& method) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("E,N,err,method", 0) != 0) throw std::invalid_argument(file.string() + ": expected header E,N,err,method");
  SpectralProfile p;
  while (std::getline(in, line)) {
    auto f = split(line, ',');
    if (f.size() != 4) throw std::invalid_argument(file.string() + ": malformed row '" + line + "'");
    if (p.method.empty() && method.empty()) p.method = f[3];
    if (f[3] != (method.empty() ? p.method : method)) continue;
    p.method = f[3];
    p.E.push_back(std::stod(f[0]));
    p.N.push_back(std::stod(f[1]));
    p.err.push_back(std::stod(f[2]));
  }
  if (p.E.size() < 2) throw std::invalid_argument(file.string() + ": fewer than two rows for the method");
  return p;
}

void write_ids(std::ofstream& f, const SpectralProfile& p) {
  for (size_t i = 0; i < p.E.size(); ++i) f << num(p.E[i]) << ',' << num(p.N[i]) << ',' << num(p.err[i]) << ',' << p.method << '\n';
}

json estimate_json(double value, double err, std::int64_t n) { return {{"value", value}, {"stderr", err}, {"n", n}}; }

struct Grid {
  double lo = -3.0, hi = 3.0;
  int steps = 601;
  void add(CLI::App* sub) {
    sub->add_option("--E-lo", lo)->capture_default_str();
    sub->add_option("--E-hi", hi)->capture_default_str();
    sub->add_option("--E-steps", steps)->capture_default_str()->check(CLI::Range(2, 10000000));
  }
  std::vector<double> values() const { return linspace(lo, hi, steps); }
  json describe() const { return {{"E_lo", lo}, {"E_hi", hi}, {"E_steps", steps}}; }
};

// Every option of a subcommand with its resolved value, for the manifest and the hash.
json resolved_config(const CLI::App* sub) {
  json j = json::object();
  for (const CLI::Option* o : sub->get_options()) {
    if (o->get_lnames().empty()) continue;
    const std::string& name = o->get_lnames()[0];
    if (name == "help" || name == "config" || name == "scenario") continue;
    if (o->count() > 0) {
      auto r = o->reduced_results();
      j[name] = r.size() == 1 ? json(r[0]) : json(r);
    } else {
      j[name] = o->get_default_str();
    }
  }
  return j;
}

// JSON object -> "--key=value" tokens.
std::vector<std::string> config_tokens(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw CLI::ValidationError("--config", "cannot read " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CLI::ValidationError("--config", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw CLI::ValidationError("--config", "config must be a JSON object");
  std::vector<std::string> toks;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string v;
    const json& x = it.value();
    if (x.is_string())
      v = x.get<std::string>();
    else if (x.is_array()) {
      for (size_t i = 0; i < x.size(); ++i) v += (i ? "," : "") + (x[i].is_string() ? x[i].get<std::string>() : x[i].dump());
    } else {
      v = x.dump();
    }
    toks.push_back("--" + it.key() + "=" + v);
  }
  return toks;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cocyclelab: Schrodinger cocycles, spectra and their constructive reductions"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", kVersion);

  Common common;
  Grid grid;
  std::string method, cocycle_spec = "schrodinger";
  std::int64_t L = 2000, n = 100000, block = 1000, grid_size = 0, min_n = 5;
  double E = 0.0, eps = 1e-3, h = 0.05;
  int mesh = 1000, min_steps = 3, horizon = 1024, uh_grid = 256;

  // ids
  auto* ids = app.add_subcommand("ids", "integrated density of states on an energy grid -> ids.csv");
  add_common(ids, common);
  grid.add(ids);
  method = "rotation";
  ids->add_option("--method", method, "eigencount | rotation | both | floquet")
      ->check(CLI::IsMember({"eigencount", "rotation", "both", "floquet"}))
      ->capture_default_str();
  ids->add_option("--L", L, "box size for eigencount")->capture_default_str();
  ids->add_option("--n", n, "orbit length for the rotation route")->capture_default_str();

  // spectrum
  std::string spec_method = "uh", alpha_s, lambda_s;
  double edge_tol = 1e-9;
  auto* spectrum = app.add_subcommand("spectrum", "spectrum as bands -> spectrum.csv");
  add_common(spectrum, common);
  grid.add(spectrum);
  spectrum->add_option("--method", spec_method, "uh | floquet")->check(CLI::IsMember({"uh", "floquet"}))->capture_default_str();
  spectrum->add_option("--alpha", alpha_s, "shortcut for --system rotation:<alpha>");
  spectrum->add_option("--lambda", lambda_s, "shortcut for --v amo:<lambda>");
  spectrum->add_option("--edge-tol", edge_tol)->capture_default_str();
  spectrum->add_option("--horizon", horizon)->capture_default_str();
  spectrum->add_option("--grid", uh_grid, "UH test grid")->capture_default_str();

  // gaps
  std::string ids_file, ids_method;
  auto* gaps = app.add_subcommand("gaps", "labelled gaps from ids.csv -> gaps.csv");
  add_common(gaps, common);
  gaps->add_option("--ids", ids_file, "input ids.csv (default <out>/ids.csv)");
  gaps->add_option("--method", ids_method, "rows of ids.csv to use (default: the first method listed)");
  gaps->add_option("--min-steps", min_steps)->capture_default_str();
  gaps->add_option("--n", n, "orbit length for rho at the gap midpoints (needs --v)")->capture_default_str();

  // butterfly
  std::string lambdas_s = "1", alpha_list;
  int den_max = 0;
  auto* butterfly = app.add_subcommand("butterfly", "almost Mathieu spectra over (lambda, alpha, E) -> butterfly.csv");
  butterfly->add_option("--out", common.out)->capture_default_str();
  grid.add(butterfly);
  butterfly->add_option("--lambda", lambdas_s, "comma-separated couplings")->capture_default_str();
  auto* den_opt = butterfly->add_option("--alpha-den-max", den_max, "all p/q in (0,1) with q up to this");
  auto* list_opt = butterfly->add_option("--alpha-list", alpha_list, "comma-separated alphas, e.g. golden,1/3");
  den_opt->excludes(list_opt);
  butterfly->add_option("--horizon", horizon, "UH horizon for irrational alpha")->capture_default_str();
  butterfly->add_option("--grid", uh_grid, "UH test grid for irrational alpha")->capture_default_str();

  // point evaluations
  auto add_point = [&](CLI::App* sub) {
    add_common(sub, common, true, false);
    sub->add_option("--E", E, "energy")->capture_default_str();
    sub->add_option("--cocycle", cocycle_spec,
                    "schrodinger | const:a,b,c,d | rot:beta | diag:l | rotshear:beta,amp,delta | anzai-a0 | anzai-a1")
        ->capture_default_str();
  };
  auto* lyap = app.add_subcommand("lyapunov", "Lyapunov exponent -> JSON");
  add_point(lyap);
  lyap->add_option("--n", n)->capture_default_str();
  lyap->add_option("--block", block)->capture_default_str();
  auto* rho_cmd = app.add_subcommand("rho", "fibered rotation number -> JSON");
  add_point(rho_cmd);
  rho_cmd->add_option("--n", n)->capture_default_str();
  auto* uh = app.add_subcommand("uh", "uniform hyperbolicity test -> JSON");
  add_point(uh);
  uh->add_option("--horizon", horizon)->capture_default_str();
  uh->add_option("--grid", uh_grid)->capture_default_str();
  auto* lock = app.add_subcommand("classify-lock", "locked / semi-locked / unlocked -> JSON");
  add_point(lock);
  lock->add_option("--n", n)->capture_default_str();
  lock->add_option("--offset", h, "rotation offset h")->capture_default_str();
  lock->add_option("--horizon", horizon)->capture_default_str();
  lock->add_option("--grid", uh_grid)->capture_default_str();

  // tower
  std::int64_t tower_n = 13;
  auto* tower = app.add_subcommand("tower", "build and certify a tower -> tower.json");
  add_common(tower, common, false);
  tower->add_option("--n", tower_n, "target height")->capture_default_str();
  tower->add_option("--grid", grid_size, "certification grid, 0 = automatic")->capture_default_str();

  // cobound
  std::string phi_s = "1:1";
  double c0 = 0.0, y_coord = 0.0;
  auto* cob = app.add_subcommand("cobound", "solve phi = psi o f - psi + c -> section.csv");
  add_common(cob, common, false);
  cob->add_option("--phi", phi_s, "trigonometric terms k:a[:b],... in the first coordinate")->capture_default_str();
  cob->add_option("--c0", c0, "constant term")->capture_default_str();
  cob->add_option("--eps", eps)->capture_default_str();
  cob->add_option("--min-n", min_n)->capture_default_str();
  cob->add_option("--mesh", mesh, "rows of section.csv")->capture_default_str();
  cob->add_option("--y", y_coord, "second coordinate of the rows on 2-dimensional bases")->capture_default_str();

  // conj-rot
  std::string conj_spec = "rotshear:0.3,0.2,0.001";
  double conj_eps = 1e-2;
  auto* conj = app.add_subcommand("conj-rot", "perturb to a cocycle conjugate to rotations -> conj_rot.csv");
  add_common(conj, common, false);
  conj->add_option("--cocycle", conj_spec)->capture_default_str();
  conj->add_option("--eps", conj_eps)->capture_default_str();
  conj->add_option("--mesh", mesh, "rows of conj_rot.csv")->capture_default_str();

  // open-gap
  std::string path_s = "amo", tgrid_s = "0,0.1,0.2,0.3", og_method = "rotation";
  double label = std::nan("");
  std::int64_t rho_n = 100000;
  auto* og = app.add_subcommand("open-gap", "track a gap along a potential path -> open_gap.csv");
  add_common(og, common, false);
  grid.add(og);
  og->add_option("--path", path_s, "amo (v_t = amo:t) | periodic:a,b,... (t times the sequence) | scale:<potential>")
      ->capture_default_str();
  og->add_option("--label", label, "target label (default: frac(alpha))");
  og->add_option("--t-grid", tgrid_s)->capture_default_str();
  og->add_option("--method", og_method)->check(CLI::IsMember({"rotation", "eigencount", "floquet"}))->capture_default_str();
  og->add_option("--n", n, "orbit length for the rotation route")->capture_default_str();
  og->add_option("--L", L, "box size for eigencount")->capture_default_str();
  og->add_option("--rho-n", rho_n)->capture_default_str();

  // project
  double k_lo = 0.1, k_len = 0.02, margin = 0.01, size = 1e-4;
  std::string profile = "tent", gen_s = "0,1,0,0";
  auto* proj = app.add_subcommand("project", "conjugate a localized perturbation of S_0 to Schrodinger form -> project.json");
  add_common(proj, common, false);
  proj->add_option("--K-lo", k_lo)->capture_default_str();
  proj->add_option("--K-len", k_len)->capture_default_str();
  proj->add_option("--margin", margin)->capture_default_str();
  proj->add_option("--size", size)->capture_default_str();
  proj->add_option("--profile", profile)->check(CLI::IsMember({"tent", "constant"}))->capture_default_str();
  proj->add_option("--generator", gen_s, "traceless a,b,c,d")->capture_default_str();

  // --config (every subcommand) and --scenario (project): JSON objects of option values; flags win
  std::string config_file;
  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    sub->add_option("--config", config_file, "JSON file of option values");
    if (sub == proj) sub->add_option("--scenario", config_file, "JSON scenario (same as --config)");
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    for (size_t i = 0; i < args.size(); ++i) {
      std::string a = args[i], file;
      for (const char* key : {"--config", "--scenario"}) {
        std::string k = key;
        if (a == k && i + 1 < args.size()) file = args[i + 1];
        if (a.rfind(k + "=", 0) == 0) file = a.substr(k.size() + 1);
      }
      if (!file.empty() && !args.empty()) {
        auto toks = config_tokens(file);
        args.insert(args.begin() + 1, toks.begin(), toks.end());
        break;
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Run run;
  run.command = sub->get_name();
  run.out = common.out;
  run.config = resolved_config(sub);

  try {
    if (sub == spectrum) {
      if (!alpha_s.empty()) common.system = "rotation:" + alpha_s;
      if (!lambda_s.empty()) common.v = "amo:" + lambda_s;
    }
    BaseSystem base = parse_system(common.system);

    if (sub == ids) {
      Potential v = parse_potential(common.v, base);
      Point x0 = start_point(base, common.x0);
      auto Eg = grid.values();
      run.grids["E"] = grid.describe();
      std::vector<SpectralProfile> ps;
      if (method == "eigencount" || method == "both") ps.push_back(ids_by_eigencount(v, base, Eg, L, x0));
      if (method == "rotation" || method == "both") ps.push_back(ids_by_rotation(v, base, Eg, n, x0));
      if (method == "floquet") ps.push_back(ids_floquet(period_samples(v, base, common.x0), Eg));
      auto f = run.open("ids.csv");
      f << "E,N,err,method\n";
      for (const auto& p : ps) write_ids(f, p);
      json s = {{"rows", Eg.size() * ps.size()}, {"method", method}};
      if (ps.size() == 2) {
        double d = 0.0, e = 0.0;
        for (size_t i = 0; i < Eg.size(); ++i) {
          d = std::fmax(d, std::fabs(ps[0].N[i] - ps[1].N[i]));
          e = std::fmax(e, ps[0].err[i] + ps[1].err[i]);
        }
        s["max_route_difference"] = d;
        s["combined_error"] = e;
      }
      print_json(s);
    } else if (sub == spectrum) {
      Potential v = parse_potential(common.v, base);
      auto f = run.open("spectrum.csv");
      f << "band,E_lo,E_hi\n";
      json s = {{"method", spec_method}};
      if (spec_method == "floquet") {
        auto b = periodic_spectrum_exact(period_samples(v, base, common.x0));
        for (size_t i = 0; i < b.bands.size(); ++i) f << i << ',' << num(b.bands[i].first) << ',' << num(b.bands[i].second) << '\n';
        s["bands"] = b.bands.size();
        s["open_gaps"] = b.gaps.size();
      } else {
        UHOptions o;
        o.horizon = horizon;
        o.grid = uh_grid;
        run.grids["E"] = grid.describe();
        auto scan = spectrum_by_uh_scan(v, base, grid.values(), o, edge_tol);
        for (size_t i = 0; i < scan.spectrum.size(); ++i)
          f << i << ',' << num(scan.spectrum[i].first) << ',' << num(scan.spectrum[i].second) << '\n';
        s["bands"] = scan.spectrum.size();
        s["inconclusive"] = scan.inconclusive;
      }
      print_json(s);
    } else if (sub == gaps) {
      fs::path in = ids_file.empty() ? run.out / "ids.csv" : fs::path(ids_file);
      auto p = read_ids(in, ids_method);
      auto gs = detect_and_label_gaps(p, LabelGroup::for_base(base), min_steps);
      bool with_rho = sub->get_option("--v")->count() > 0;
      if (with_rho) attach_rho(gs, parse_potential(common.v, base), base, n, start_point(base, common.x0));
      auto f = run.open("gaps.csv");
      f << "E_lo,E_hi,label,k,m,residual,rho\n";
      for (const auto& g : gs)
        f << num(g.E_lo) << ',' << num(g.E_hi) << ',' << num(g.label) << ',' << g.k << ',' << g.m << ',' << num(g.residual)
          << ',' << (with_rho ? num(g.rho) : "") << '\n';
      print_json({{"gaps", gs.size()}, {"source", in.string()}, {"method", p.method}});
    } else if (sub == butterfly) {
      std::vector<AlphaSpec> alphas;
      if (den_max > 0) {
        for (std::int64_t q = 1; q <= den_max; ++q)
          for (std::int64_t p = 1; p < q; ++p)
            if (std::gcd(p, q) == 1) alphas.push_back(AlphaSpec::parse(std::to_string(p) + "/" + std::to_string(q)));
      } else if (!alpha_list.empty()) {
        for (const auto& a : split(alpha_list, ',')) alphas.push_back(AlphaSpec::parse(a));
      } else {
        throw CLI::ValidationError("butterfly", "give --alpha-den-max or --alpha-list");
      }
      UHOptions o;
      o.horizon = horizon;
      o.grid = uh_grid;
      run.grids["E"] = grid.describe();
      auto cells = butterfly_sweep(parse_list(lambdas_s), alphas, grid.values(), o);
      auto f = run.open("butterfly.csv");
      f << "lambda,alpha,E,inout\n";
      for (const auto& c : cells) f << num(c.lambda) << ',' << num(c.alpha) << ',' << num(c.E) << ',' << c.in << '\n';
      print_json({{"cells", cells.size()}, {"alphas", alphas.size()}});
    } else if (sub == lyap || sub == rho_cmd || sub == uh || sub == lock) {
      Cocycle c = make_cocycle(cocycle_spec, base, E, common.v);
      Point x0 = start_point(base, common.x0);
      UHOptions o;
      o.horizon = horizon;
      o.grid = uh_grid;
      if (sub == lyap) {
        auto e = lyapunov_exponent(c, x0, n, block);
        print_json({{"lyapunov", e.value}, {"stderr", e.stderr_}, {"n", e.n}});
      } else if (sub == rho_cmd) {
        auto r = rho(c, x0, n);
        print_json({{"rho", r.rho}, {"err", r.error}, {"n", r.n}, {"determination", r.determination}});
      } else if (sub == uh) {
        auto r = uh_test(c, o);
        json j = {{"outcome", to_string(r.outcome)}, {"growth", r.growth}, {"reason", r.reason}};
        if (r.outcome == UHOutcome::UH) {
          j["lambda"] = r.cert.lambda;
          j["c"] = r.cert.c;
          j["residual"] = r.cert.residual;
          j["min_angle"] = r.cert.min_angle;
          j["horizon"] = r.cert.horizon;
        }
        print_json(j);
      } else {
        LockingOptions lo;
        lo.h = h;
        lo.n = n;
        lo.uh = o;
        lo.x0 = x0;
        auto e = classify_locking(c, lo);
        print_json({{"verdict", to_string(e.verdict)},
                    {"uh", to_string(e.uh)},
                    {"agrees_with_uh", e.agrees_with_uh},
                    {"rho0", e.rho0},
                    {"err0", e.err0},
                    {"left", e.left},
                    {"right", e.right},
                    {"d_left", e.d_left},
                    {"d_right", e.d_right},
                    {"d_left_fine", e.d_left_fine},
                    {"d_right_fine", e.d_right_fine}});
      }
      return kOk;
    } else if (sub == tower) {
      Tower t;
      CertificationReport rep;
      std::string failure;
      try {
        t = build_rotation_tower(base, tower_n, grid_size);
        rep = certify(base, t, t.grid_size > 0 ? t.grid_size : grid_size);
        if (!rep.pass()) failure = "certification failed";
      } catch (const CertificationError& e) {
        failure = e.what();
        rep = e.report;
      }
      // partial quotients whose convergent denominators stay below 1e8 are reliable in double precision
      std::vector<std::int64_t> cf;
      double q0 = 0.0, q1 = 1.0;
      for (auto a : t.cf_terms) {
        cf.push_back(a);
        double q2 = static_cast<double>(a) * q1 + q0;
        q0 = q1;
        q1 = q2;
        if (q1 > 1e8) break;
      }
      json j = {{"K", {t.lo, t.hi()}}, {"n", t.n},    {"N", t.N},
                {"d", t.d},            {"alpha_cf", cf}, {"certified", failure.empty() && t.certified},
                {"grid_size", rep.grid_size}};
      j["report"] = {{"good", rep.good},         {"spanning", rep.spanning},   {"mild", rep.mild},
                     {"bound_ok", rep.bound_ok}, {"violations", rep.violations}, {"max_boundary_hits", rep.max_boundary_hits}};
      run.open("tower.json") << j.dump(2) << "\n";
      run.manifest();
      print_json(j);
      if (!failure.empty()) {
        std::cerr << "tower: " << failure << "\n";
        return kCertification;
      }
      return kOk;
    } else if (sub == cob) {
      CobOptions o;
      o.eps = eps;
      o.min_n = min_n;
      auto s = solve_cohomological(base, Observable::of(parse_trig(phi_s, c0)), o);
      auto f = run.open("section.csv");
      f << "x,y,invariance_residual\n";
      for (int i = 0; i < mesh; ++i) {
        std::vector<double> cs(static_cast<size_t>(base.dim()), y_coord);
        cs[0] = (i + 0.5) / mesh;
        Point x = base.make_point(cs);
        double psi = s.psi_tilde(x);
        double res = std::fabs(s.phi_tilde(x) - (s.psi_tilde(base.step(x)) - psi + s.c));
        f << num(x[0]) << ',' << num(psi) << ',' << num(res) << '\n';
      }
      print_json({{"c", s.c},
                  {"eps", s.eps},
                  {"n", s.n},
                  {"N", s.N},
                  {"j0", s.j0},
                  {"B", s.B},
                  {"sup_change", s.sup_change},
                  {"residual", s.residual}});
    } else if (sub == conj) {
      Cocycle c = make_cocycle(conj_spec, base, 0.0, "zero");
      auto r = conjugate_to_rotations(c, conj_eps);
      json j = {{"refused", r.refused}, {"C", r.C}, {"gamma", r.gamma}, {"growth", r.growth}};
      if (r.refused) {
        j["reason"] = r.reason;
        print_json(j);
        throw Refusal("conj-rot: " + r.reason);
      }
      auto f = run.open("conj_rot.csv");
      f << "x,a,b,c,d,B_a,B_b,B_c,B_d,z_re,z_im\n";
      for (int i = 0; i < mesh; ++i) {
        std::vector<double> cs(static_cast<size_t>(base.dim()), 0.0);
        cs[0] = (i + 0.5) / mesh;
        Point x = base.make_point(cs);
        Mat2 a = (*r.perturbed)(x), b = r.B(x);
        cplx z = r.z_tilde(x);
        f << num(x[0]) << ',' << num(a.a) << ',' << num(a.b) << ',' << num(a.c) << ',' << num(a.d) << ',' << num(b.a) << ','
          << num(b.b) << ',' << num(b.c) << ',' << num(b.d) << ',' << num(z.real()) << ',' << num(z.imag()) << '\n';
      }
      j.update({{"n0", r.n0},
                {"n", r.n},
                {"N", r.N},
                {"sup_change", r.sup_change},
                {"rotation_residual", r.rotation_residual},
                {"invariance_residual", r.invariance_residual},
                {"max_correction", r.max_correction}});
      print_json(j);
    } else if (sub == og) {
      PotentialPath path;
      if (path_s == "amo") {
        path = [](double t) { return amo_potential(t); };
      } else if (path_s.rfind("periodic:", 0) == 0) {
        auto seq = parse_list(path_s.substr(9));
        if (!base.periodic_mode() || static_cast<std::int64_t>(seq.size()) != base.period_q())
          throw std::invalid_argument("periodic path needs a rotation p/q with q = sequence length");
        std::int64_t p = base.period_p(), q = base.period_q();
        path = [seq, p, q](double t) {
          auto s = seq;
          for (auto& x : s) x *= t;
          return periodic_sampler(s, p, q);
        };
      } else if (path_s.rfind("scale:", 0) == 0) {
        Potential v = parse_potential(path_s.substr(6), base);
        path = [v](double t) {
          Potential w = v;
          w.v = [f = v.v, t](const Point& x) { return t * f(x); };
          for (auto& s : w.sequence) s *= t;
          w.name = "scaled " + v.name;
          return w;
        };
      } else {
        throw std::invalid_argument("unknown path '" + path_s + "'");
      }
      if (std::isnan(label)) label = base.alpha() - std::floor(base.alpha());
      OpenGapOptions o;
      o.E_lo = grid.lo;
      o.E_hi = grid.hi;
      o.E_steps = grid.steps;
      o.method = og_method == "eigencount" ? ProfileMethod::Eigencount
                 : og_method == "floquet"  ? ProfileMethod::Floquet
                                           : ProfileMethod::Rotation;
      o.n = n;
      o.L = L;
      o.rho_n = rho_n;
      o.x0 = start_point(base, common.x0);
      auto ts = parse_list(tgrid_s);
      run.grids["E"] = grid.describe();
      run.grids["t"] = ts;
      auto rep = open_gap_demo(base, path, label, ts, o);
      auto audit = rho_constancy_audit(rep);
      auto f = run.open("open_gap.csv");
      f << "t,E_lo,E_hi,width,label,residual,rho\n";
      json rows = json::array();
      for (size_t k = 0; k < rep.rows.size(); ++k) {
        const auto& r = rep.rows[k];
        if (r.open)
          f << num(r.t) << ',' << num(r.gap.E_lo) << ',' << num(r.gap.E_hi) << ',' << num(r.width) << ','
            << num(r.gap.label) << ',' << num(r.label_residual) << ',' << num(r.rho) << '\n';
        else
          f << num(r.t) << ",,," << num(0.0) << ",,," << '\n';
        std::string name = "ids_t" + std::to_string(k) + ".csv";
        if (!r.profile.E.empty()) {
          auto g = run.open(name);
          g << "E,N,err,method\n";
          write_ids(g, r.profile);
        }
        rows.push_back({{"t", r.t},
                        {"open", r.open},
                        {"width", r.width},
                        {"profile_error", r.profile_error},
                        {"resolution", r.resolution},
                        {"resolution_ok", r.resolution_ok},
                        {"note", r.note},
                        {"ids", r.profile.E.empty() ? "" : name}});
      }
      print_json({{"label", label},
                  {"method", rep.method},
                  {"rows", rows},
                  {"rho_expected", audit.expected},
                  {"rho_spread", audit.spread},
                  {"rho_max_deviation", audit.max_deviation},
                  {"rho_constant", audit.constant},
                  {"complete", audit.complete}});
    } else if (sub == proj) {
      auto g = parse_list(gen_s);
      if (g.size() != 4) throw std::invalid_argument("--generator needs four entries");
      Mat2 G{g[0], g[1], g[2], g[3]};
      auto p = profile == "tent" ? LocalizedPerturbation::tent(base, k_lo, k_len, margin, size, G)
                                 : LocalizedPerturbation::constant_on_K(base, k_lo, k_len, margin, size, G);
      auto r = project_to_schrodinger(p);
      json j = {{"refused", r.refused},
                {"reason", r.reason},
                {"perturbation_size", r.perturbation_size},
                {"E", r.E},
                {"min_denominator", r.min_denominator},
                {"s_form_residual", r.s_form_residual},
                {"conjugation_residual", r.conjugation_residual},
                {"image_distance", r.image_distance},
                {"psi_distance", r.psi_distance},
                {"off_tower_exact", r.off_tower_exact},
                {"mesh", r.mesh_size}};
      run.open("project.json") << j.dump(2) << "\n";
      run.manifest();
      print_json(j);
      if (r.refused) {
        std::cerr << "project: " << r.reason << "\n";
        return kRefusal;
      }
      return kOk;
    }
    run.manifest();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << sub->get_name() << ": " << e.what() << "\n";
    return kUsage;
  } catch (const Refusal& e) {
    std::cerr << e.what() << "\n";
    return kRefusal;
  } catch (const CertificationError& e) {
    std::cerr << sub->get_name() << ": " << e.what() << "\n";
    return kCertification;
  } catch (const std::invalid_argument& e) {
    std::cerr << sub->get_name() << ": " << e.what() << "\n";
    return kUsage;
  } catch (const std::out_of_range& e) {
    std::cerr << sub->get_name() << ": value out of range: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << sub->get_name() << ": refused: " << e.what() << "\n";
    return kRefusal;
  }
}
