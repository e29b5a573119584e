#ifndef EVASION_CONFIG_HPP_
#define EVASION_CONFIG_HPP_

// Scenario files: flat `key = value` lines grouped under [scenario],
// [algorithm] and any number of [peak] blocks. `#` starts a comment.
//
//   [scenario]
//   name = fig1
//   x0 = 0.5, 0.45
//   [algorithm]
//   gamma = 0.01
//   [peak]
//   center = 0.05, 0.5
//   amplitude = 30
//   width = 0.25

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "evasion/errors.hpp"
#include "evasion/scenario.hpp"

namespace evasion {
namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_values(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto next = s.find_first_of(", \t", pos);
    const auto tok = s.substr(pos, next == std::string_view::npos ? s.size() - pos : next - pos);
    if (!tok.empty()) out.push_back(tok);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, int line, std::string_view key) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ConfigError(line, "key '" + std::string(key) + "': cannot parse '" +
                                std::string(text) + "' as a number");
  }
  return v;
}

inline std::vector<double> parse_reals(std::string_view text, std::size_t count, int line,
                                       std::string_view key) {
  const auto toks = split_values(text);
  if (toks.size() != count) {
    throw ConfigError(line, "key '" + std::string(key) + "': expected " + std::to_string(count) +
                                " numbers, got " + std::to_string(toks.size()));
  }
  std::vector<double> out;
  for (auto t : toks) out.push_back(parse_number<double>(t, line, key));
  return out;
}

inline bool parse_bool(std::string_view text, int line, std::string_view key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(line, "key '" + std::string(key) + "': expected true or false");
}

inline std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

inline Scenario parse_scenario(std::istream& is) {
  using detail::parse_number;
  using detail::parse_reals;
  Scenario s;
  std::string section;
  std::set<std::string> seen;  // "section.key" outside peak blocks
  std::set<std::string> peak_seen;
  int peak_line = 0;
  std::string raw;
  int line = 0;

  const auto close_peak = [&]() {
    if (section != "peak") return;
    for (const char* k : {"center", "amplitude", "width"}) {
      if (!peak_seen.count(k)) {
        throw ConfigError(peak_line, std::string("[peak] block is missing '") + k + "'");
      }
    }
  };

  while (std::getline(is, raw)) {
    ++line;
    std::string_view text(raw);
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = detail::trim(text);
    if (text.empty()) continue;

    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(line, "unterminated section header");
      close_peak();
      section = std::string(detail::trim(text.substr(1, text.size() - 2)));
      if (section != "scenario" && section != "algorithm" && section != "peak") {
        throw ConfigError(line, "unknown section [" + section + "]");
      }
      if (section == "peak") {
        s.peaks.emplace_back();
        peak_seen.clear();
        peak_line = line;
      }
      continue;
    }

    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line, "expected 'key = value'");
    const std::string key(detail::trim(text.substr(0, eq)));
    const std::string_view value = detail::trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError(line, "empty key");
    if (value.empty()) throw ConfigError(line, "key '" + key + "' has no value");
    if (section.empty()) throw ConfigError(line, "key '" + key + "' outside any section");

    if (section == "peak") {
      if (!peak_seen.insert(key).second) throw ConfigError(line, "duplicate key '" + key + "'");
      ObserverPeak& p = s.peaks.back();
      if (key == "center") {
        const auto c = parse_reals(value, 2, line, key);
        p.center = {c[0], c[1]};
      } else if (key == "amplitude") {
        p.amplitude = parse_number<double>(value, line, key);
      } else if (key == "width") {
        p.width = parse_number<double>(value, line, key);
      } else {
        throw ConfigError(line, "unknown key '" + key + "' in [peak]");
      }
      continue;
    }

    if (!seen.insert(section + "." + key).second) {
      throw ConfigError(line, "duplicate key '" + key + "'");
    }
    if (section == "scenario") {
      if (key == "name") {
        s.name = std::string(value);
      } else if (key == "domain") {
        const auto d = parse_reals(value, 4, line, key);
        try {
          s.domain = Domain({d[0], d[1]}, {d[2], d[3]});
        } catch (const ContractViolation& e) {
          throw ConfigError(line, e.what());
        }
      } else if (key == "obs_grid") {
        s.obs_cells = parse_number<int>(value, line, key);
      } else if (key == "pde_grid") {
        s.pde_nodes = parse_number<int>(value, line, key);
      } else if (key == "x0") {
        const auto c = parse_reals(value, 2, line, key);
        s.start = {c[0], c[1]};
      } else if (key == "background") {
        s.background = parse_number<double>(value, line, key);
      } else if (key == "speed") {
        s.speed = parse_number<double>(value, line, key);
      } else if (key == "episodes") {
        s.episodes = parse_number<long long>(value, line, key);
      } else if (key == "seed") {
        s.seed = parse_number<std::uint64_t>(value, line, key);
      } else {
        throw ConfigError(line, "unknown key '" + key + "' in [scenario]");
      }
    } else {
      if (key == "gamma") {
        s.gamma = parse_number<double>(value, line, key);
      } else if (key == "k_min") {
        s.k_min = parse_number<double>(value, line, key);
      } else if (key == "epsilon") {
        s.epsilon = parse_number<double>(value, line, key);
      } else if (key == "n_min") {
        s.n_min = parse_number<long long>(value, line, key);
      } else if (key == "t_min") {
        s.t_min = parse_number<double>(value, line, key);
      } else if (key == "h_path") {
        s.h_path = parse_number<double>(value, line, key);
      } else if (key == "prior_mean") {
        s.prior_mean = parse_number<double>(value, line, key);
      } else if (key == "alpha") {
        s.alpha = parse_number<double>(value, line, key);
      } else if (key == "beta") {
        s.beta = parse_number<double>(value, line, key);
      } else if (key == "bonus_uses_sqrt") {
        s.bonus_uses_sqrt = detail::parse_bool(value, line, key);
      } else if (key == "tune_every") {
        s.tune_every = parse_number<long long>(value, line, key);
      } else {
        throw ConfigError(line, "unknown key '" + key + "' in [algorithm]");
      }
    }
  }
  close_peak();

  try {
    validate(s);
  } catch (const ContractViolation& e) {
    throw ConfigError(0, e.what());
  }
  return s;
}

inline Scenario parse_scenario(const std::string& text) {
  std::istringstream is(text);
  return parse_scenario(is);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file '" + path + "'");
  return parse_scenario(in);
}

/// Writes every field, optional ones only when set; parse_scenario reads it
/// back to an equal Scenario.
inline void write_scenario(std::ostream& os, const Scenario& s) {
  using detail::format_real;
  os << "[scenario]\n";
  os << "name = " << s.name << '\n';
  os << "domain = " << format_real(s.domain.lower().x) << ", " << format_real(s.domain.lower().y)
     << ", " << format_real(s.domain.upper().x) << ", " << format_real(s.domain.upper().y) << '\n';
  os << "obs_grid = " << s.obs_cells << '\n';
  os << "pde_grid = " << s.pde_nodes << '\n';
  os << "x0 = " << format_real(s.start.x) << ", " << format_real(s.start.y) << '\n';
  os << "background = " << format_real(s.background) << '\n';
  os << "speed = " << format_real(s.speed) << '\n';
  os << "episodes = " << s.episodes << '\n';
  os << "seed = " << s.seed << '\n';
  os << "\n[algorithm]\n";
  os << "gamma = " << format_real(s.gamma) << '\n';
  os << "k_min = " << format_real(s.k_min) << '\n';
  os << "epsilon = " << format_real(s.epsilon) << '\n';
  os << "n_min = " << s.n_min << '\n';
  if (s.t_min) os << "t_min = " << format_real(*s.t_min) << '\n';
  if (s.h_path) os << "h_path = " << format_real(*s.h_path) << '\n';
  os << "prior_mean = " << format_real(s.prior_mean) << '\n';
  os << "alpha = " << format_real(s.alpha) << '\n';
  os << "beta = " << format_real(s.beta) << '\n';
  os << "bonus_uses_sqrt = " << (s.bonus_uses_sqrt ? "true" : "false") << '\n';
  os << "tune_every = " << s.tune_every << '\n';
  for (const ObserverPeak& p : s.peaks) {
    os << "\n[peak]\n";
    os << "center = " << format_real(p.center.x) << ", " << format_real(p.center.y) << '\n';
    os << "amplitude = " << format_real(p.amplitude) << '\n';
    os << "width = " << format_real(p.width) << '\n';
  }
}

inline std::string to_config_string(const Scenario& s) {
  std::ostringstream os;
  write_scenario(os, s);
  return os.str();
}

}  // namespace evasion

#endif  // EVASION_CONFIG_HPP_
