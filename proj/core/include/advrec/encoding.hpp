#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace advrec {

/// RFC 4648 base64 with padding.
std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);  // ParseError on bad input

/// Little-endian float64 <-> byte packing.
std::vector<std::uint8_t> f64_to_le_bytes(std::span<const double> values);
std::vector<double> f64_from_le_bytes(std::span<const std::uint8_t> bytes);  // ParseError on size

}  // namespace advrec
