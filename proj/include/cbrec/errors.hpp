#pragma once

#include <stdexcept>
#include <string>

namespace cbrec {

enum class Errc {
  empty_log,
  mixed_type,
  missing_field,
  unknown_item,
  dimension_mismatch,
  length_mismatch,
  empty_buffer,
  insufficient_items,
  empty_stream,
  bad_config,
  bad_data,
  io_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg);
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& msg);

// CLI maps config errors to exit 2 and data errors to exit 3.
bool is_config_error(Errc c);
bool is_data_error(Errc c);

}  // namespace cbrec
