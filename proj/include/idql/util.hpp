#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace idql {

// Library errors are thrown as idql::Error with a message that names the
// offending operation and values.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void check(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

std::string shape_str(const std::vector<std::size_t>& shape);

// FNV-1a, used for content hashes in run manifests and config hashing.
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

// Little-endian binary helpers for the checkpoint and dataset formats.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);
std::uint32_t get_u32(const std::uint8_t* p);
std::uint64_t get_u64(const std::uint8_t* p);
double get_f64(const std::uint8_t* p);

void write_file(const std::string& path, const void* data, std::size_t n);
void write_file(const std::string& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::string& path);
std::string read_text_file(const std::string& path);

// Deterministic float formatting for CSV output (round-trips exactly).
std::string fmt_g17(double v);

}  // namespace idql
