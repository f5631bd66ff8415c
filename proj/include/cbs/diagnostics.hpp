#ifndef CBS_DIAGNOSTICS_HPP
#define CBS_DIAGNOSTICS_HPP

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cbs {

enum class Severity { error, warning };

inline const char* to_string(Severity s) {
  return s == Severity::error ? "error" : "warning";
}

// One finding about a knowledge-base or config document. `path` is a JSON
// pointer ("" for the document root, "/topics/2/entries/0/id", ...).
struct Diagnostic {
  Severity severity = Severity::error;
  std::string path;
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const Diagnostic& d) {
  return os << (d.path.empty() ? "/" : d.path) << ": " << to_string(d.severity)
            << ": " << d.message;
}

namespace detail {

// Splits a JSON pointer into components for ordering purposes.
inline std::vector<std::string> pointer_components(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '/') ++i;
    std::size_t j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    out.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return c >= '0' && c <= '9'; });
}

} // namespace detail

// Document order: array indices compare numerically so /topics/10 sorts
// after /topics/2. Errors come before warnings at the same location.
inline bool diagnostic_order(const Diagnostic& a, const Diagnostic& b) {
  const auto pa = detail::pointer_components(a.path);
  const auto pb = detail::pointer_components(b.path);
  const std::size_t n = std::min(pa.size(), pb.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (pa[i] == pb[i]) continue;
    if (detail::all_digits(pa[i]) && detail::all_digits(pb[i]))
      return std::stoull(pa[i]) < std::stoull(pb[i]);
    return pa[i] < pb[i];
  }
  if (pa.size() != pb.size()) return pa.size() < pb.size();
  if (a.severity != b.severity) return a.severity == Severity::error;
  return a.message < b.message;
}

inline void sort_diagnostics(std::vector<Diagnostic>& diags) {
  std::stable_sort(diags.begin(), diags.end(), diagnostic_order);
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Severity::error;
  });
}

// Thrown when a document cannot be turned into a usable value.
class KbError : public std::runtime_error {
 public:
  explicit KbError(std::vector<Diagnostic> diags)
      : std::runtime_error(summary(diags)), diagnostics_(std::move(diags)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string summary(const std::vector<Diagnostic>& diags) {
    if (diags.empty()) return "invalid document";
    std::string s = (diags[0].path.empty() ? "/" : diags[0].path) + ": " +
                    diags[0].message;
    if (diags.size() > 1)
      s += " (and " + std::to_string(diags.size() - 1) + " more)";
    return s;
  }

  std::vector<Diagnostic> diagnostics_;
};

} // namespace cbs

#endif // CBS_DIAGNOSTICS_HPP
