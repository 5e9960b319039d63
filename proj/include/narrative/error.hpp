#pragma once

#include <stdexcept>
#include <string>

namespace narrative {

// Exception families map onto the CLI exit codes (1 usage, 2 data, 3 service).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace narrative
