#include "cbrec/errors.hpp"

namespace cbrec {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::empty_log: return "EmptyLog";
    case Errc::mixed_type: return "MixedType";
    case Errc::missing_field: return "MissingField";
    case Errc::unknown_item: return "UnknownItem";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::empty_buffer: return "EmptyBuffer";
    case Errc::insufficient_items: return "InsufficientItems";
    case Errc::empty_stream: return "EmptyStream";
    case Errc::bad_config: return "ConfigError";
    case Errc::bad_data: return "DataError";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
}

Error::Error(Errc code, const std::string& msg)
    : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

bool is_config_error(Errc c) { return c == Errc::bad_config; }

bool is_data_error(Errc c) {
  switch (c) {
    case Errc::empty_log:
    case Errc::mixed_type:
    case Errc::missing_field:
    case Errc::unknown_item:
    case Errc::empty_stream:
    case Errc::bad_data:
    case Errc::io_error:
      return true;
    default:
      return false;
  }
}

}  // namespace cbrec
