#pragma once

// Shared identifiers, error type and text helpers.

#include <charconv>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace revcal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Opaque string identifier; the tag keeps paper, reviewer and meta-reviewer
/// namespaces apart at compile time.
template <class Tag>
struct Id {
  std::string value;

  Id() = default;
  explicit Id(std::string v) : value(std::move(v)) {}

  bool empty() const { return value.empty(); }
  auto operator<=>(const Id&) const = default;
  bool operator==(const Id&) const = default;
};

using PaperId = Id<struct PaperTag>;
using ReviewerId = Id<struct ReviewerTag>;
using MetaReviewerId = Id<struct MetaReviewerTag>;

/// Collects non-fatal messages (degenerate normalization, defaulted fields).
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string msg) { warnings.push_back(std::move(msg)); }
};

inline void warn(Diagnostics* diag, std::string msg) {
  if (diag != nullptr) diag->warn(std::move(msg));
}

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

/// Shortest round-trip decimal representation; output is byte-stable.
inline std::string format_double(double x) {
  if (x == 0.0) return "0";  // folds -0
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) throw Error("cannot format number");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error("invalid number for " + std::string(what) + ": '" +
                std::string(s) + "'");
  }
  return v;
}

/// splitmix64 finalizer; used to derive independent per-draw seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace revcal

template <class Tag>
struct std::hash<revcal::Id<Tag>> {
  std::size_t operator()(const revcal::Id<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.value);
  }
};
