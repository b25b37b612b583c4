#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mir {

using i64 = std::int64_t;
using u64 = std::uint64_t;

// Dense row-major extents.
using Shape = std::vector<i64>;

// Invalid shapes, malformed arguments, violated preconditions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad file contents, unreadable artifacts, failed invariants on loaded data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing paths, unknown flags, unusable command lines.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

i64 numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool is_pow2(i64 n);

// printf-style formatting into std::string.
std::string strfmt(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

}  // namespace mir
