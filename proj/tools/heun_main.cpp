// Command-line front end for the Heun monodromy engine.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli_support.hpp"
#include "heun/elliptic.hpp"
#include "heun/monodromy.hpp"
#include "heun/scanner.hpp"

using namespace heun;
using namespace heun::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::shared_ptr<spdlog::logger> logger() {
  static auto log = [] {
    auto l = spdlog::stderr_color_mt("heun");
    const char* env = std::getenv("HEUN_LOG");
    const std::string level = env ? env : "error";
    if (level == "debug") {
      l->set_level(spdlog::level::debug);
    } else if (level == "info") {
      l->set_level(spdlog::level::info);
    } else {
      l->set_level(spdlog::level::err);
      if (level != "error") l->error("HEUN_LOG must be error, info or debug; using error");
    }
    return l;
  }();
  return log;
}

void usage_error(const std::string& msg) { throw HeunError(ErrorKind::invalid_argument, msg); }

// ---------------------------------------------------------------------------
// Shared flag groups

struct LatticeFlags {
  std::string omega1, omega2, tau;

  void add(CLI::App* app) {
    app->add_option("--omega1", omega1, "first period RE,IM");
    app->add_option("--omega2", omega2, "second period RE,IM");
    app->add_option("--tau", tau, "period ratio RE,IM (omega1 = 1)");
  }

  std::pair<Complex, Complex> resolve() const {
    if (!tau.empty()) {
      if (!omega1.empty() || !omega2.empty()) usage_error("use either --tau or --omega1/--omega2");
      return {Complex(1.0, 0.0), parse_complex(tau)};
    }
    if (omega1.empty() || omega2.empty()) usage_error("need --tau or both --omega1 and --omega2");
    return {parse_complex(omega1), parse_complex(omega2)};
  }
};

struct AngleFlags {
  std::string alpha, k;

  void add(CLI::App* app) {
    app->add_option("--alpha", alpha, "angles A0,A1,A2,A3");
    app->add_option("--k", k, "coefficients K0,K1,K2,K3");
  }

  TorusHeun torus(Complex w1, Complex w2) const {
    if (alpha.empty() == k.empty()) usage_error("exactly one of --alpha/--k");
    if (!alpha.empty()) {
      const auto a = parse_reals(alpha, 4);
      return TorusHeun(w1, w2, {a[0], a[1], a[2], a[3]}, 0.0);
    }
    const auto kk = parse_reals(k, 4);
    return TorusHeun::from_k(w1, w2, {kk[0], kk[1], kk[2], kk[3]}, 0.0);
  }
};

json torus_config(const TorusHeun& eq) {
  json alpha = json::array(), k = json::array();
  for (int j = 0; j < 4; ++j) {
    alpha.push_back(eq.alpha()[j]);
    k.push_back(eq.k(j));
  }
  return {{"omega1", to_json(eq.omega1())}, {"omega2", to_json(eq.omega2())},
          {"alpha", alpha}, {"k", k}};
}

std::string check_format(const std::string& f, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (f == a) return f;
  }
  usage_error("unsupported --format " + f);
  return f;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) usage_error("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

json record_header(const std::string& command, const json& config) {
  json r;
  r["schema_version"] = kSchemaVersion;
  r["tool"] = kToolVersion;
  r["command"] = command;
  r["config"] = config;
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// scan-torus

struct ScanTorus {
  LatticeFlags lattice;
  AngleFlags angles;
  std::string region, out, format = "json", cache;
  bool auto_bound = false;
  ScanConfig cfg;
  double dedup = 0.0;

  void add(CLI::App* app) {
    lattice.add(app);
    angles.add(app);
    app->add_option("--region", region, "RE0,RE1,IM0,IM1");
    app->add_flag("--auto-bound", auto_bound, "scan the disc of the certified bound radius");
    app->add_option("--grid", cfg.grid, "grid points per axis")->capture_default_str();
    app->add_option("--ode-tol", cfg.ode_tol)->capture_default_str();
    app->add_option("--cert-tol", cfg.cert_tol)->capture_default_str();
    app->add_option("--dedup-radius", dedup, "absolute dedup radius (default 1e-6*(1+|lambda|))");
    app->add_option("--max-refine-steps", cfg.max_refine_steps)->capture_default_str();
    app->add_option("--seed", cfg.seed)->capture_default_str();
    app->add_option("--threads", cfg.threads)->capture_default_str();
    app->add_option("--bound-margin", cfg.bound_margin)->capture_default_str();
    app->add_option("--seed-threshold", cfg.seed_threshold)->capture_default_str();
    app->add_option("--grid-offset", cfg.grid_offset, "grid shift in cells")->capture_default_str();
    app->add_option("--out", out, "output file (default stdout)");
    app->add_option("--format", format, "json or csv")->capture_default_str();
    app->add_option("--cache", cache, "cache directory for run records");
  }

  int run() {
    check_format(format, {"json", "csv"});
    const auto [w1, w2] = lattice.resolve();
    const TorusHeun eq = angles.torus(w1, w2);
    if (!region.empty() && auto_bound) usage_error("use either --region or --auto-bound");
    if (!region.empty()) {
      const auto r = parse_reals(region, 4);
      cfg.region = Region{r[0], r[1], r[2], r[3]};
    }
    if (dedup != 0.0) cfg.dedup_radius = dedup;
    cfg.validate();

    json config = torus_config(eq);
    config["region"] = cfg.region ? json::array({cfg.region->re0, cfg.region->re1, cfg.region->im0,
                                                 cfg.region->im1})
                                  : json("auto");
    config["grid"] = cfg.grid;
    config["ode_tol"] = cfg.ode_tol;
    config["cert_tol"] = cfg.cert_tol;
    config["dedup_radius"] = cfg.dedup_radius ? json(*cfg.dedup_radius) : json("1e-6*(1+|lambda|)");
    config["max_refine_steps"] = cfg.max_refine_steps;
    config["seed"] = cfg.seed;
    config["bound_margin"] = cfg.bound_margin;
    config["seed_threshold"] = cfg.seed_threshold;
    config["grid_offset"] = cfg.grid_offset;

    json record;
    const std::string key = cache_key("scan-torus", config);
    std::optional<json> cached;
    if (!cache.empty()) cached = cache_load(cache, key);
    if (cached) {
      std::cerr << "cache hit: " << key << " (" << cache << ")\n";
      logger()->info("cache hit {}", key);
      record = *cached;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      logger()->info("scan-torus grid {} threads {}", cfg.grid, cfg.threads);
      const ScanResult res = find_U(eq, cfg);
      record = record_header("scan-torus", config);
      json sols = json::array(), diags = json::array();
      for (const auto& s : res.solutions) sols.push_back(solution_to_json(s));
      for (const auto& d : res.diagnostics) diags.push_back(diagnostic_to_json(d));
      record["solutions"] = sols;
      record["diagnostics"] = diags;
      record["result"] = {{"region", json::array({res.region.re0, res.region.re1, res.region.im0,
                                                  res.region.im1})},
                          {"bound_radius", res.bound ? json(*res.bound) : json(nullptr)},
                          {"seeds", res.seeds},
                          {"evaluations", res.evaluations}};
      record["runtime"] = {{"wall_time_s", seconds_since(t0)}, {"threads", cfg.threads}};
      logger()->info("{} solutions, {} diagnostics", res.solutions.size(), res.diagnostics.size());
      if (!cache.empty()) {
        cache_store(cache, key, record);
        std::cerr << "cache store: " << key << " (" << cache << ")\n";
      }
    }

    Output o(out);
    if (format == "json") {
      o.stream() << record.dump(2) << "\n";
    } else {
      o.stream() << "lambda_re,lambda_im,defect,tr1_re,tr1_im,tr2_re,tr2_im,h11,h12_re,h12_im,h22,"
                    "coaxial\n";
      for (const auto& s : record["solutions"]) {
        const auto& h = s["certificate"]["H"];
        o.stream() << num(s["lambda"][0]) << "," << num(s["lambda"][1]) << "," << num(s["defect"])
                   << "," << num(s["traces"][0][0]) << "," << num(s["traces"][0][1]) << ","
                   << num(s["traces"][1][0]) << "," << num(s["traces"][1][1]) << ","
                   << num(h[0]) << "," << num(h[1]) << "," << num(h[2]) << "," << num(h[3]) << ","
                   << (s["coaxial"].get<bool>() ? "true" : "false") << "\n";
      }
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// hill, wp, verify-asymptotics

struct Hill {
  LatticeFlags lattice;
  AngleFlags angles;
  std::string lambda = "0,0", z0, format = "text", out;
  double ode_tol = 1e-12;

  void add(CLI::App* app) {
    lattice.add(app);
    angles.add(app);
    app->add_option("--lambda", lambda, "accessory parameter RE,IM")->capture_default_str();
    app->add_option("--z0", z0, "basepoint RE,IM (default (omega1+omega2)/4)");
    app->add_option("--ode-tol", ode_tol)->capture_default_str();
    app->add_option("--format", format, "text, csv or json")->capture_default_str();
    app->add_option("--out", out);
  }

  int run() {
    check_format(format, {"text", "csv", "json"});
    const auto [w1, w2] = lattice.resolve();
    const TorusHeun eq = angles.torus(w1, w2).with_lambda(parse_complex(lambda));
    ContinuationOptions opts;
    opts.tol = ode_tol;
    const Complex base = z0.empty() ? admissible_torus_basepoint(eq) : parse_complex(z0);
    std::array<Complex, 2> tr;
    for (int j = 1; j <= 2; ++j) tr[j - 1] = torus_translation(eq, base, j, opts).trace();
    Output o(out);
    if (format == "json") {
      json config = torus_config(eq);
      config["lambda"] = to_json(eq.lambda());
      config["z0"] = to_json(base);
      config["ode_tol"] = ode_tol;
      json r = record_header("hill", config);
      r["traces"] = json::array({to_json(tr[0]), to_json(tr[1])});
      o.stream() << r.dump(2) << "\n";
    } else if (format == "csv") {
      o.stream() << "j,re,im\n";
      for (int j = 0; j < 2; ++j) o.stream() << j + 1 << "," << num(tr[j].real()) << "," << num(tr[j].imag()) << "\n";
    } else {
      for (int j = 0; j < 2; ++j) {
        o.stream() << "tr_T" << j + 1 << " " << num(tr[j].real()) << " " << num(tr[j].imag()) << "\n";
      }
    }
    return kExitOk;
  }
};

struct Wp {
  LatticeFlags lattice;
  std::string z, format = "text", out;

  void add(CLI::App* app) {
    lattice.add(app);
    app->add_option("--z", z, "point RE,IM")->required();
    app->add_option("--format", format, "text, csv or json")->capture_default_str();
    app->add_option("--out", out);
  }

  int run() {
    check_format(format, {"text", "csv", "json"});
    const auto [w1, w2] = lattice.resolve();
    const Lattice lat(w1, w2);
    const Complex zz = parse_complex(z);
    const Complex p = lat.wp(zz), dp = lat.wp_prime(zz);
    Output o(out);
    if (format == "json") {
      json r = record_header("wp", {{"omega1", to_json(lat.omega1())},
                                    {"omega2", to_json(lat.omega2())},
                                    {"z", to_json(zz)}});
      r["wp"] = to_json(p);
      r["wp_prime"] = to_json(dp);
      r["g2"] = to_json(lat.g2());
      r["g3"] = to_json(lat.g3());
      o.stream() << r.dump(2) << "\n";
    } else if (format == "csv") {
      o.stream() << "quantity,re,im\n";
      o.stream() << "wp," << num(p.real()) << "," << num(p.imag()) << "\n";
      o.stream() << "wp_prime," << num(dp.real()) << "," << num(dp.imag()) << "\n";
    } else {
      o.stream() << "wp " << num(p.real()) << " " << num(p.imag()) << "\n";
      o.stream() << "wp_prime " << num(dp.real()) << " " << num(dp.imag()) << "\n";
    }
    return kExitOk;
  }
};

struct VerifyAsymptotics {
  LatticeFlags lattice;
  AngleFlags angles;
  std::string exponents = "2,3,4", format = "text", out;
  double ode_tol = 1e-12;

  void add(CLI::App* app) {
    lattice.add(app);
    angles.add(app);
    app->add_option("--exponents", exponents, "decades d, |lambda| = 10^d")->capture_default_str();
    app->add_option("--ode-tol", ode_tol)->capture_default_str();
    app->add_option("--format", format, "text, csv or json")->capture_default_str();
    app->add_option("--out", out);
  }

  int run() {
    check_format(format, {"text", "csv", "json"});
    const auto [w1, w2] = lattice.resolve();
    const TorusHeun eq = angles.torus(w1, w2);
    std::vector<double> ds;
    {
      std::stringstream ss(exponents);
      std::string item;
      while (std::getline(ss, item, ',')) ds.push_back(parse_reals(item, 1)[0]);
    }
    if (ds.empty()) usage_error("--exponents must list at least one decade");
    ContinuationOptions opts;
    opts.tol = ode_tol;
    struct Row {
      int j;
      double abs_lambda;
      Complex trace, reference;
      double deviation, ratio;
    };
    std::vector<Row> rows;
    for (int j = 1; j <= 2; ++j) {
      const Complex w = eq.period(j);
      double prev = 0.0;
      for (double d : ds) {
        // Along arg(omega_j^2 lambda) = 0: omega_j sqrt(lambda) = 10^(d/2) |omega_j|.
        const double mag = std::pow(10.0, d);
        const Complex lambda = mag * std::conj(w) * std::conj(w) / std::norm(w);
        const Complex tr = hill_trace(eq, j, lambda, opts);
        const Complex ref = 2.0 * std::cosh(w * std::sqrt(lambda));
        const double dev = std::abs(tr / ref - 1.0);
        rows.push_back({j, mag, tr, ref, dev, prev > 0.0 ? prev / dev : 0.0});
        prev = dev;
      }
    }
    Output o(out);
    if (format == "json") {
      json config = torus_config(eq);
      config["exponents"] = ds;
      config["ode_tol"] = ode_tol;
      json r = record_header("verify-asymptotics", config);
      json arr = json::array();
      for (const auto& row : rows) {
        arr.push_back({{"j", row.j}, {"abs_lambda", row.abs_lambda}, {"trace", to_json(row.trace)},
                       {"reference", to_json(row.reference)}, {"deviation", row.deviation},
                       {"ratio_to_previous", row.ratio > 0.0 ? json(row.ratio) : json(nullptr)}});
      }
      r["rows"] = arr;
      o.stream() << r.dump(2) << "\n";
    } else {
      const char* sep = format == "csv" ? "," : " ";
      o.stream() << fmt::format("j{0}abs_lambda{0}deviation{0}ratio_to_previous\n", sep);
      for (const auto& row : rows) {
        o.stream() << row.j << sep << num(row.abs_lambda) << sep << num(row.deviation) << sep
                   << (row.ratio > 0.0 ? num(row.ratio) : std::string("")) << "\n";
      }
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// real-scan, sphere-monodromy

struct RealScan {
  double t = -1.0;
  std::string alpha, q_range = "-50,50", format = "json", out;
  int samples = 256;
  double ode_tol = 1e-12, cert_tol = 1e-7;

  void add(CLI::App* app) {
    app->add_option("--t", t, "third singular point (t < 0)")->capture_default_str();
    app->add_option("--alpha", alpha, "angles A0,A1,A2,A3")->required();
    app->add_option("--q-range", q_range, "QMIN,QMAX")->capture_default_str();
    app->add_option("--samples", samples)->capture_default_str();
    app->add_option("--ode-tol", ode_tol)->capture_default_str();
    app->add_option("--cert-tol", cert_tol)->capture_default_str();
    app->add_option("--format", format, "json, csv or text")->capture_default_str();
    app->add_option("--out", out);
  }

  int run() {
    check_format(format, {"json", "csv", "text"});
    const auto a = parse_reals(alpha, 4);
    const auto qr = parse_reals(q_range, 2);
    const SphereHeun fam({0.0, 1.0, t}, {a[0], a[1], a[2], a[3]}, qr[0]);
    ContinuationOptions opts;
    opts.tol = ode_tol;
    const auto t0 = std::chrono::steady_clock::now();
    const RealScanResult res = real_find(fam, qr[0], qr[1], samples, opts, cert_tol);
    Output o(out);
    if (format == "json") {
      json config = {{"t", t}, {"alpha", a}, {"q_range", qr}, {"samples", samples},
                     {"ode_tol", ode_tol}, {"cert_tol", cert_tol}};
      json r = record_header("real-scan", config);
      json roots = json::array(), diags = json::array();
      for (const auto& x : res.roots) roots.push_back(real_root_to_json(x));
      for (const auto& d : res.diagnostics) diags.push_back(diagnostic_to_json(d));
      r["roots"] = roots;
      r["diagnostics"] = diags;
      r["result"] = {{"brackets", res.brackets}};
      r["runtime"] = {{"wall_time_s", seconds_since(t0)}, {"threads", 1}};
      o.stream() << r.dump(2) << "\n";
    } else {
      const char* sep = format == "csv" ? "," : " ";
      o.stream() << fmt::format("q{0}p_f{0}p_g{0}status\n", sep);
      for (const auto& x : res.roots) {
        o.stream() << num(x.q) << sep << num(x.p_f) << sep << num(x.p_g) << sep
                   << to_string(x.certificate.status) << "\n";
      }
    }
    return kExitOk;
  }
};

struct SphereMono {
  std::string a0 = "0,0", a1 = "1,0", a2, alpha, q = "0,0", basepoint, format = "json", out;
  double t = -1.0;
  double ode_tol = 1e-12, cert_tol = 1e-7;

  void add(CLI::App* app) {
    app->add_option("--a0", a0, "singular point RE,IM")->capture_default_str();
    app->add_option("--a1", a1, "singular point RE,IM")->capture_default_str();
    app->add_option("--a2", a2, "singular point RE,IM (default t,0)");
    app->add_option("--t", t, "shorthand for --a2 t,0")->capture_default_str();
    app->add_option("--alpha", alpha, "angles A0,A1,A2,A3")->required();
    app->add_option("--q", q, "accessory parameter RE,IM")->capture_default_str();
    app->add_option("--basepoint", basepoint, "RE,IM (default below the configuration)");
    app->add_option("--ode-tol", ode_tol)->capture_default_str();
    app->add_option("--cert-tol", cert_tol)->capture_default_str();
    app->add_option("--format", format, "json or text")->capture_default_str();
    app->add_option("--out", out);
  }

  int run() {
    check_format(format, {"json", "text"});
    const auto a = parse_reals(alpha, 4);
    const Complex p2 = a2.empty() ? Complex(t, 0.0) : parse_complex(a2);
    const SphereHeun eq({parse_complex(a0), parse_complex(a1), p2}, {a[0], a[1], a[2], a[3]},
                        parse_complex(q));
    SphereMonodromyOptions mo;
    mo.continuation.tol = ode_tol;
    if (!basepoint.empty()) mo.basepoint = parse_complex(basepoint);
    const MonodromyRep rep = sphere_monodromy(eq, mo);
    const Matrix2 rel = rep.at("Minf") * rep.at("M2") * rep.at("M1") * rep.at("M0");
    const double relation = max_abs(rel - Matrix2::Identity());
    const UnitarizationCertificate cert = unitarizable(rep, cert_tol);
    Output o(out);
    if (format == "json") {
      json config = {{"points", json::array({to_json(eq.points()[0]), to_json(eq.points()[1]),
                                             to_json(eq.points()[2])})},
                     {"alpha", a}, {"q", to_json(eq.q())}, {"basepoint", to_json(rep.basepoint)},
                     {"ode_tol", ode_tol}, {"cert_tol", cert_tol}};
      json r = record_header("sphere-monodromy", config);
      json gens = json::array();
      for (const auto& g : rep.generators) gens.push_back({{"label", g.label}, {"matrix", to_json(g.matrix)}});
      r["generators"] = gens;
      r["relation_residual"] = relation;
      r["certificate"] = certificate_to_json(cert);
      r["coaxial"] = coaxial(rep, cert_tol);
      o.stream() << r.dump(2) << "\n";
    } else {
      for (const auto& g : rep.generators) {
        const Matrix2& m = g.matrix;
        o.stream() << g.label;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) o.stream() << " " << num(m(i, j).real()) << " " << num(m(i, j).imag());
        o.stream() << "\n";
      }
      o.stream() << "relation_residual " << num(relation) << "\n";
      o.stream() << "status " << to_string(cert.status) << "\n";
    }
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);

  CLI::App app{"Heun equation monodromy and unitarizability engine"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  std::string config_file;
  app.add_option("--config", config_file, "flat key = value file; explicit flags win");

  ScanTorus scan;
  Hill hill;
  Wp wp;
  VerifyAsymptotics verify;
  RealScan real;
  SphereMono sphere;
  auto* c_scan = app.add_subcommand("scan-torus", "enumerate unitarizable lambda on a torus");
  auto* c_hill = app.add_subcommand("hill", "traces of the translation monodromies");
  auto* c_wp = app.add_subcommand("wp", "Weierstrass wp and wp'");
  auto* c_verify = app.add_subcommand("verify-asymptotics", "trace versus 2cosh(omega sqrt(lambda))");
  auto* c_real = app.add_subcommand("real-scan", "real accessory parameters with P_f = P_g < 0");
  auto* c_sphere = app.add_subcommand("sphere-monodromy", "generators and certificate on the sphere");
  scan.add(c_scan);
  hill.add(c_hill);
  wp.add(c_wp);
  verify.add(c_verify);
  real.add(c_real);
  sphere.add(c_sphere);
  for (auto* sub : {c_scan, c_hill, c_wp, c_verify, c_real, c_sphere}) {
    sub->add_option("--config", config_file, "flat key = value file; explicit flags win");
  }

  try {
    // Locate --config anywhere on the line and fold its keys in before parsing.
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      if (!path.empty()) {
        args = merge_config_file(path, args);
        break;
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const HeunError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (c_scan->parsed()) return scan.run();
    if (c_hill->parsed()) return hill.run();
    if (c_wp->parsed()) return wp.run();
    if (c_verify->parsed()) return verify.run();
    if (c_real->parsed()) return real.run();
    if (c_sphere->parsed()) return sphere.run();
  } catch (const HeunError& e) {
    std::cerr << "error: " << e.what() << "\n";
    logger()->debug("failure kind {}", to_string(e.kind()));
    return e.kind() == ErrorKind::invalid_argument ? kExitUsage : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
