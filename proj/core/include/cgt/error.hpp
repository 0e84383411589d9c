#pragma once

#include <stdexcept>
#include <string>

namespace cgt {

// code is a stable identifier like "SumNotOne"; kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind { Usage, Domain, Bound };

  Error(Kind kind, std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), kind_(kind), code_(std::move(code)) {}

  Kind kind() const { return kind_; }
  const std::string& code() const { return code_; }

 private:
  Kind kind_;
  std::string code_;
};

inline Error domain_error(std::string code, const std::string& what) {
  return Error(Error::Kind::Domain, std::move(code), what);
}
inline Error bound_error(std::string code, const std::string& what) {
  return Error(Error::Kind::Bound, std::move(code), what);
}
inline Error usage_error(std::string code, const std::string& what) {
  return Error(Error::Kind::Usage, std::move(code), what);
}

}  // namespace cgt
