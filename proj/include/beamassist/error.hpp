#pragma once

#include <stdexcept>
#include <string>

namespace beamassist {

// Every failure surfaced by the library carries a stable kind string
// (e.g. "DuplicateId", "SimBudgetExceeded") that callers and the REST layer
// can dispatch on without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)), detail_(message) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string kind_;
  std::string detail_;
};

}  // namespace beamassist
