#include "cmeta/io.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace cmeta {
namespace {

struct CsvRecord {
  std::vector<std::string> fields;
  std::vector<bool> quoted;
  std::size_t line = 0;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

// RFC 4180 records; quoted fields may span lines.
std::vector<CsvRecord> split_csv(std::string_view text) {
  std::vector<CsvRecord> records;
  CsvRecord cur;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  std::size_t line = 1;
  cur.line = line;

  auto end_field = [&] {
    cur.fields.push_back(field_quoted ? field : trim(field));
    cur.quoted.push_back(field_quoted);
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = cur.fields.size() == 1 && !cur.quoted[0] && cur.fields[0].empty();
    if (!blank) records.push_back(std::move(cur));
    cur = CsvRecord{};
    cur.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!trim(field).empty())
          throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": stray quote inside field");
        field.clear();
        in_quotes = true;
        field_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        cur.line = line;
        break;
      default:
        if (field_quoted && ch != ' ' && ch != '\t')
          throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": text after closing quote");
        if (!field_quoted) field += ch;
    }
  }
  if (in_quotes) throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": unterminated quote");
  end_record();
  return records;
}

Count parse_count(const std::string& s, std::size_t line, std::string_view column) {
  Count v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc{} || ptr != last)
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": column " + std::string(column) +
                                           " must be an integer, got '" + s + "'");
  return v;
}

constexpr std::array<std::string_view, 5> kColumns{"label", "n11", "n10", "n01", "n00"};

bool needs_quotes(const std::string& s) {
  if (s.empty()) return false;
  if (s.front() == ' ' || s.front() == '\t' || s.back() == ' ' || s.back() == '\t') return true;
  return s.find_first_of(",\"\r\n") != std::string::npos;
}

}  // namespace

MetaDataset parse_csv(std::string_view text, std::string name) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  const auto records = split_csv(text);
  if (records.empty()) throw Error(ErrorCode::ParseError, "line 1: missing header");
  const auto& header = records.front();
  if (header.fields.size() != kColumns.size())
    throw Error(ErrorCode::ParseError, "line " + std::to_string(header.line) +
                                           ": header must be label,n11,n10,n01,n00");
  for (std::size_t c = 0; c < kColumns.size(); ++c)
    if (header.fields[c] != kColumns[c])
      throw Error(ErrorCode::ParseError, "line " + std::to_string(header.line) + ": expected column '" +
                                             std::string(kColumns[c]) + "', got '" + header.fields[c] + "'");
  MetaDataset ds;
  ds.name = std::move(name);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != kColumns.size())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(rec.line) + ": expected 5 fields, got " +
                                             std::to_string(rec.fields.size()));
    StudyTable s;
    s.label = rec.fields[0];
    s.n11 = parse_count(rec.fields[1], rec.line, kColumns[1]);
    s.n10 = parse_count(rec.fields[2], rec.line, kColumns[2]);
    s.n01 = parse_count(rec.fields[3], rec.line, kColumns[3]);
    s.n00 = parse_count(rec.fields[4], rec.line, kColumns[4]);
    ds.studies.push_back(std::move(s));
  }
  return ds;
}

std::string to_csv(const MetaDataset& ds) {
  std::ostringstream out;
  out << "label,n11,n10,n01,n00\n";
  for (const auto& s : ds.studies) {
    if (needs_quotes(s.label)) {
      out << '"';
      for (char ch : s.label) {
        if (ch == '"') out << '"';
        out << ch;
      }
      out << '"';
    } else {
      out << s.label;
    }
    out << ',' << s.n11 << ',' << s.n10 << ',' << s.n01 << ',' << s.n00 << '\n';
  }
  return out.str();
}

MetaDataset parse_json(std::string_view text, std::string name) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid JSON: ") + e.what());
  }
  MetaDataset ds;
  ds.name = std::move(name);
  const nlohmann::json* studies = &doc;
  if (doc.is_object()) {
    if (doc.contains("name") && doc["name"].is_string()) ds.name = doc["name"].get<std::string>();
    if (!doc.contains("studies")) throw Error(ErrorCode::ParseError, "JSON object lacks a 'studies' array");
    studies = &doc["studies"];
  }
  if (!studies->is_array()) throw Error(ErrorCode::ParseError, "'studies' must be an array");
  std::size_t index = 0;
  for (const auto& item : *studies) {
    const std::string where = "study #" + std::to_string(index++);
    if (!item.is_object()) throw Error(ErrorCode::ParseError, where + " is not an object");
    for (auto it = item.begin(); it != item.end(); ++it) {
      bool known = false;
      for (auto c : kColumns) known = known || it.key() == c;
      if (!known) throw Error(ErrorCode::ParseError, where + ": unknown field '" + it.key() + "'");
    }
    StudyTable s;
    if (!item.contains("label") || !item["label"].is_string())
      throw Error(ErrorCode::ParseError, where + ": 'label' must be a string");
    s.label = item["label"].get<std::string>();
    auto count = [&](std::string_view key) -> Count {
      const std::string k(key);
      if (!item.contains(k) || !item[k].is_number_integer())
        throw Error(ErrorCode::ParseError, where + ": '" + k + "' must be an integer");
      return item[k].get<Count>();
    };
    s.n11 = count("n11");
    s.n10 = count("n10");
    s.n01 = count("n01");
    s.n00 = count("n00");
    ds.studies.push_back(std::move(s));
  }
  return ds;
}

std::string to_json(const MetaDataset& ds, int indent) {
  nlohmann::json doc;
  doc["name"] = ds.name;
  doc["studies"] = nlohmann::json::array();
  for (const auto& s : ds.studies)
    doc["studies"].push_back({{"label", s.label}, {"n11", s.n11}, {"n10", s.n10}, {"n01", s.n01}, {"n00", s.n00}});
  return doc.dump(indent) + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << content;
}

MetaDataset read_dataset(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const std::string ext = path.extension().string();
  try {
    if (ext == ".json") return parse_json(text, path.stem().string());
    return parse_csv(text, path.stem().string());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

MetaDataset load_dataset(const std::filesystem::path& path) { return validate_dataset(read_dataset(path)); }

}  // namespace cmeta
