#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace scenedialog {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Metric tokenization: lowercase, split on runs of non-alphanumeric ASCII.
// Bytes >= 0x80 count as word characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

// Whitespace-delimited word count, used for speaking-time budgets.
int word_count(std::string_view text);

std::vector<std::string> split_lines(std::string_view text);

// First parseable JSON object embedded in free text (handles ``` fences and
// leading prose). Returns nullopt when none parses.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

}  // namespace scenedialog
