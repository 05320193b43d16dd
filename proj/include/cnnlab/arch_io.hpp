#ifndef CNNLAB_ARCH_IO_HPP_
#define CNNLAB_ARCH_IO_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

#include "cnnlab/arch.hpp"

namespace cnnlab {

// Raised by parse_arch on malformed documents; the message names the field
// path of the first violation (e.g. "layers[1].stride").
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Architecture document format:
//   { "input":  {"rows": int, "cols": int, "channels": int},
//     "pool_size": int,
//     "layers": [ {"kernel": int, "stride": int, "out_channels": int,
//                  "b": float, "rank": int}, ... ],
//     "output": {"dim": int, "b": float, "rank": int} }
// parse(serialize(a)) == a; serialization is canonical (fixed key order) so
// equal architectures serialize to identical bytes.
Architecture parse_arch(const std::string& text);
std::string serialize_arch(const Architecture& arch);

// FNV-1a over the canonical serialization; used to tie weight files to the
// architecture they belong to.
std::uint64_t arch_hash(const Architecture& arch);

Architecture load_arch_file(const std::string& path);

}  // namespace cnnlab

#endif  // CNNLAB_ARCH_IO_HPP_
