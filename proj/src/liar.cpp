#include "dhgat/liar.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dhgat/errors.hpp"

namespace dhgat {

namespace {

constexpr std::size_t kLiarColumns = 14;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::int64_t parse_count(std::string_view cell, std::size_t row, std::string_view source) {
  auto text = normalize_attribute(cell);
  if (text.empty()) return 0;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ParseError(std::string(source) + ": row " + std::to_string(row) + ": bad credit-history count '" +
                     text + "'");
  }
  if (value < 0 || std::floor(value) != value) {
    throw ValidationError(std::string(source) + ": row " + std::to_string(row) +
                          ": credit-history count must be a non-negative integer, got '" + text + "'");
  }
  return static_cast<std::int64_t>(value);
}

}  // namespace

OrdinalLabel::OrdinalLabel(int value) : value_(value) {
  if (value < 0 || value >= kNumClasses) {
    throw ValidationError("ordinal label out of range: " + std::to_string(value));
  }
}

std::string_view OrdinalLabel::name() const { return kLabelNames[static_cast<std::size_t>(value_)]; }

std::string normalize_attribute(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

OrdinalLabel remap_label(std::string_view raw) {
  auto key = normalize_attribute(raw);
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (key == kLabelNames[i]) return OrdinalLabel(static_cast<int>(i));
  }
  throw ValidationError("unknown label '" + std::string(raw) + "'");
}

std::vector<NewsRecord> parse_liar_tsv_text(std::string_view text, std::string_view source) {
  std::vector<NewsRecord> records;
  std::size_t row = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++row;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    auto cells = split_tabs(line);
    if (cells.size() != kLiarColumns) {
      throw ParseError(std::string(source) + ": row " + std::to_string(row) + ": expected " +
                       std::to_string(kLiarColumns) + " tab-separated columns, got " + std::to_string(cells.size()));
    }

    NewsRecord rec;
    rec.id = std::string(cells[0]);
    try {
      rec.label = remap_label(cells[1]);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(source) + ": row " + std::to_string(row) + ": " + e.what());
    }
    rec.statement = std::string(cells[2]);
    if (normalize_attribute(rec.statement).empty()) {
      throw ValidationError(std::string(source) + ": row " + std::to_string(row) + ": empty statement");
    }
    std::string_view subjects = cells[3];
    while (!subjects.empty()) {
      auto comma = subjects.find(',');
      auto piece = normalize_attribute(subjects.substr(0, comma));
      if (!piece.empty()) rec.subject.insert(std::move(piece));
      if (comma == std::string_view::npos) break;
      subjects.remove_prefix(comma + 1);
    }
    rec.speaker = normalize_attribute(cells[4]);
    rec.job_title = normalize_attribute(cells[5]);
    rec.state = normalize_attribute(cells[6]);
    rec.party = normalize_attribute(cells[7]);
    for (std::size_t k = 0; k < 5; ++k) rec.credit_history[k] = parse_count(cells[8 + k], row, source);
    rec.context = normalize_attribute(cells[13]);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<NewsRecord> parse_liar_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open LIAR file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_liar_tsv_text(buf.str(), path.string());
}

std::vector<NewsRecord> parse_liar_files(const std::vector<std::filesystem::path>& paths) {
  std::vector<NewsRecord> all;
  for (const auto& p : paths) {
    auto part = parse_liar_tsv(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

std::vector<OrdinalLabel> labels_of(const std::vector<NewsRecord>& records) {
  std::vector<OrdinalLabel> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  return labels;
}

}  // namespace dhgat
