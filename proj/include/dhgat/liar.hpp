#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dhgat {

inline constexpr int kNumClasses = 6;

/// Six-point veracity scale, ordered from least to most truthful.
class OrdinalLabel {
 public:
  OrdinalLabel() = default;
  explicit OrdinalLabel(int value);

  int value() const { return value_; }
  std::string_view name() const;

  friend bool operator==(OrdinalLabel, OrdinalLabel) = default;
  friend auto operator<=>(OrdinalLabel, OrdinalLabel) = default;

 private:
  int value_ = 0;
};

/// Canonical label names indexed by ordinal value.
inline constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "pants-fire", "false", "barely-true", "half-true", "mostly-true", "true"};

struct NewsRecord {
  std::string id;
  std::string statement;
  OrdinalLabel label;
  std::string speaker;
  std::set<std::string> subject;
  std::string job_title;
  std::string state;
  std::string party;
  std::string context;
  // barely-true, false, half-true, mostly-true, pants-fire counts in file order.
  std::array<std::int64_t, 5> credit_history{};
};

/// Lowercase, trim, and collapse internal whitespace runs to one space.
std::string normalize_attribute(std::string_view raw);

/// Map a LIAR label string (case-insensitive) onto the ordinal scale.
/// Throws ValidationError for anything outside the six canonical names.
OrdinalLabel remap_label(std::string_view raw);

/// Parse LIAR TSV text (14 columns, no header). `source` names the input in
/// error messages. Row numbers in errors are 1-based.
std::vector<NewsRecord> parse_liar_tsv_text(std::string_view text, std::string_view source = "<memory>");

std::vector<NewsRecord> parse_liar_tsv(const std::filesystem::path& path);

/// Concatenation of several split files in the given order.
std::vector<NewsRecord> parse_liar_files(const std::vector<std::filesystem::path>& paths);

std::vector<OrdinalLabel> labels_of(const std::vector<NewsRecord>& records);

}  // namespace dhgat
