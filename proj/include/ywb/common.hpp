#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ywb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Thrown for bad configuration detected before any simulation starts
// (dimension mismatches, invalid weights, unparseable files).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a constructed component fails its own admission audit
// (e.g. observer gains with divergent linearized error dynamics).
class AuditError : public std::runtime_error {
 public:
  explicit AuditError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace ywb
