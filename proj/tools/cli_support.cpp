#include "cli_support.hpp"

#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

namespace heun::cli {

namespace {

double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw HeunError(ErrorKind::invalid_argument, "not a number: '" + s + "'");
  }
  if (used != s.size()) throw HeunError(ErrorKind::invalid_argument, "not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

Complex parse_complex(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.empty() || parts.size() > 2) {
    throw HeunError(ErrorKind::invalid_argument, "expected RE,IM but got '" + text + "'");
  }
  return {parse_real(parts[0]), parts.size() == 2 ? parse_real(parts[1]) : 0.0};
}

std::vector<double> parse_reals(const std::string& text, std::size_t n) {
  const auto parts = split(text, ',');
  if (parts.size() != n) {
    throw HeunError(ErrorKind::invalid_argument,
                    fmt::format("expected {} comma-separated numbers but got '{}'", n, text));
  }
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(parse_real(p));
  return out;
}

json to_json(Complex z) { return json::array({z.real(), z.imag()}); }

Complex complex_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json to_json(const Matrix2& m) {
  return json::array({json::array({to_json(m(0, 0)), to_json(m(0, 1))}),
                      json::array({to_json(m(1, 0)), to_json(m(1, 1))})});
}

json certificate_to_json(const UnitarizationCertificate& c) {
  json j;
  j["status"] = to_string(c.status);
  j["residual"] = c.residual;
  j["margin"] = c.margin;
  j["null_dimension"] = c.null_dimension;
  if (c.H) {
    const Matrix2& h = *c.H;
    j["H"] = json::array({h(0, 0).real(), h(0, 1).real(), h(0, 1).imag(), h(1, 1).real()});
  } else {
    j["H"] = nullptr;
  }
  if (c.trace_criterion) {
    j["trace_criterion"] = *c.trace_criterion;
  } else {
    j["trace_criterion"] = nullptr;
  }
  return j;
}

json solution_to_json(const Solution& s) {
  json j;
  j["lambda"] = to_json(s.lambda);
  j["defect"] = s.defect;
  j["traces"] = json::array({to_json(s.traces[0]), to_json(s.traces[1])});
  j["certificate"] = certificate_to_json(s.certificate);
  j["coaxial"] = s.coaxial;
  j["translations_only"] = to_string(s.translations_only.status);
  return j;
}

json diagnostic_to_json(const Diagnostic& d) {
  return {{"kind", d.kind}, {"at", to_json(d.at)}, {"message", d.message}};
}

json real_root_to_json(const RealRoot& r) {
  return {{"q", r.q}, {"p_f", r.p_f}, {"p_g", r.p_g},
          {"certificate", certificate_to_json(r.certificate)}};
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

std::string cache_key(const std::string& command, const json& config) {
  const std::string text = command + "\n" + config.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::optional<json> cache_load(const std::filesystem::path& dir, const std::string& key) {
  std::ifstream in(dir / (key + ".json"));
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void cache_store(const std::filesystem::path& dir, const std::string& key, const json& record) {
  std::filesystem::create_directories(dir);
  const auto target = dir / (key + ".json");
  const auto tmp = dir / (key + ".json.tmp");
  {
    std::ofstream out(tmp);
    out << record.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, target);
}

std::vector<std::string> merge_config_file(const std::string& path,
                                           const std::vector<std::string>& args) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw HeunError(ErrorKind::invalid_argument, "cannot read config file " + path + ": " + e.what());
  }
  auto present = [&](const std::string& name) {
    const std::string flag = "--" + name;
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> out = args;
  for (const auto& item : items) {
    if (!item.parents.empty()) {
      throw HeunError(ErrorKind::invalid_argument,
                      "config file " + path + " must be flat key = value (no sections)");
    }
    if (item.name.empty() || present(item.name)) continue;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    if (value == "true") {
      out.push_back("--" + item.name);
    } else if (value == "false") {
      continue;
    } else {
      out.push_back("--" + item.name + "=" + value);
    }
  }
  return out;
}

}  // namespace heun::cli
