#pragma once

#include <stdexcept>
#include <string>

namespace delaystab {

/// Coarse failure category; the CLI maps each to its own exit code.
enum class ErrorClass { kModel, kConfig, kSpectral, kDesign, kSimulate };

const char* ToString(ErrorClass c);

class Error : public std::runtime_error {
 public:
  Error(ErrorClass c, const std::string& what)
      : std::runtime_error(what), class_(c) {}

  ErrorClass error_class() const { return class_; }

 private:
  ErrorClass class_;
};

}  // namespace delaystab
