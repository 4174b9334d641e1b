#include "delaystab/error.h"

namespace delaystab {

const char* ToString(ErrorClass c) {
  switch (c) {
    case ErrorClass::kModel:
      return "model";
    case ErrorClass::kConfig:
      return "config";
    case ErrorClass::kSpectral:
      return "spectral";
    case ErrorClass::kDesign:
      return "design";
    case ErrorClass::kSimulate:
      return "simulate";
  }
  return "unknown";
}

}  // namespace delaystab
