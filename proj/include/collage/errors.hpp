#pragma once

#include <stdexcept>
#include <string>

namespace collage {

// Base of every error the engine raises. `module` is the short tag printed
// by the command-line front end ("vecgeom", "render", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

#define COLLAGE_DEFINE_ERROR(Name, Module)                         \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(Module, what) {} \
  }

COLLAGE_DEFINE_ERROR(DegenerateShape, "vecgeom");
COLLAGE_DEFINE_ERROR(InvalidShape, "vecgeom");
COLLAGE_DEFINE_ERROR(SvgParseError, "vecgeom");
COLLAGE_DEFINE_ERROR(ResolutionMismatch, "losses");
COLLAGE_DEFINE_ERROR(KernelTooLarge, "losses");
COLLAGE_DEFINE_ERROR(NonFiniteGradient, "render");
COLLAGE_DEFINE_ERROR(EmptyContainer, "init");
COLLAGE_DEFINE_ERROR(MultipleComponents, "optimize");
COLLAGE_DEFINE_ERROR(ImageError, "cli");
COLLAGE_DEFINE_ERROR(CheckpointError, "optimize");

#undef COLLAGE_DEFINE_ERROR

// Configuration problems: either the document could not be parsed (line and
// column are 1-based, 0 when unknown) or a value failed validation.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("cli", what) {}
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, int line, int column)
      : ConfigError(what), line_(line), column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class ValidationError : public ConfigError {
 public:
  ValidationError(std::string key, const std::string& what)
      : ConfigError(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace collage
