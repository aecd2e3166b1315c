#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "dreamloom/model.hpp"

namespace dreamloom {

/// 128-bit random identifier rendered as 32 lowercase hex digits.
std::string new_id();

Timestamp now_utc();

/// "YYYY-MM-DDTHH:MM:SS.mmmZ"
std::string format_timestamp(Timestamp ts);
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
std::optional<std::string> base64_decode(std::string_view text);

std::string_view trim(std::string_view text) noexcept;
std::string to_lower(std::string_view text);

}  // namespace dreamloom
