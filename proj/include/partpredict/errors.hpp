#ifndef PARTPREDICT_ERRORS_HPP
#define PARTPREDICT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace partpredict {

// Common base so callers can catch everything this library throws.
class Error : public std::runtime_error {
 public:
  Error(const std::string& kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(kind) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define PARTPREDICT_DEFINE_ERROR(Name)                      \
  class Name : public Error {                               \
   public:                                                  \
    explicit Name(const std::string& what)                  \
        : Error(#Name, what) {}                             \
  }

PARTPREDICT_DEFINE_ERROR(InconsistentTreeError);
PARTPREDICT_DEFINE_ERROR(BadDistributionError);
PARTPREDICT_DEFINE_ERROR(BadBlockSizeError);
PARTPREDICT_DEFINE_ERROR(FrameTooSmallError);
PARTPREDICT_DEFINE_ERROR(IoError);
PARTPREDICT_DEFINE_ERROR(EmptyDatasetError);
PARTPREDICT_DEFINE_ERROR(CorruptFileError);
PARTPREDICT_DEFINE_ERROR(RangeError);
PARTPREDICT_DEFINE_ERROR(ShapeMismatchError);
PARTPREDICT_DEFINE_ERROR(BadArchError);
PARTPREDICT_DEFINE_ERROR(ArchMismatchError);
PARTPREDICT_DEFINE_ERROR(NonPositiveBaselineError);
PARTPREDICT_DEFINE_ERROR(InsufficientPointsError);
PARTPREDICT_DEFINE_ERROR(NoOverlapError);
PARTPREDICT_DEFINE_ERROR(InsufficientDataError);
PARTPREDICT_DEFINE_ERROR(ConfigError);

#undef PARTPREDICT_DEFINE_ERROR

}  // namespace partpredict

#endif
