#ifndef G2LAB_ERRORS_HPP
#define G2LAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace g2lab {

/// Parameter outside its mathematical domain (probability > 1, negative rate, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Inputs that are individually valid but inconsistent with each other.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed file contents (bad magic, truncated records, unsorted tags).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Data that the model cannot explain, e.g. an efficiency estimate above one.
class InfeasibleEstimate : public std::runtime_error {
 public:
  explicit InfeasibleEstimate(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Short machine-readable name of an exception's category, used by the CLI.
inline const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
  if (dynamic_cast<const InfeasibleEstimate*>(&e)) return "infeasible";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  return "internal";
}

}  // namespace g2lab

#endif  // G2LAB_ERRORS_HPP
