#pragma once

#include <stdexcept>
#include <string>

namespace biliseg {

// Every failure the library reports derives from `error`. The CLI maps the
// concrete type onto its exit-code contract.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct bounds_error : error { using error::error; };
struct geometry_error : error { using error::error; };
struct degenerate_input_error : error { using error::error; };
struct config_error : error { using error::error; };
struct domain_error : error { using error::error; };
struct io_error : error { using error::error; };

struct format_error : error {
  format_error(const std::string& what, std::size_t offset)
      : error(what + " (at byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

}  // namespace biliseg
