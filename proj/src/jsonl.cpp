#include "instructav/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "instructav/error.hpp"
#include "json.hpp"

namespace instructav {

namespace {

using ojson = nlohmann::ordered_json;

std::string dump(const ojson& j) {
  try {
    return j.dump();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("cannot encode record: ") + e.what());
  }
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::kMalformedLine, "malformed JSONL line " + std::to_string(line_no) + ": " + why,
              {{"line", std::to_string(line_no)}});
}

ojson parse_object(std::string_view line, std::size_t line_no) {
  ojson j = ojson::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) malformed(line_no, "invalid JSON");
  if (!j.is_object()) malformed(line_no, "expected a JSON object");
  return j;
}

std::string required_string(const ojson& j, const char* key, std::size_t line_no) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    malformed(line_no, std::string("missing string field \"") + key + "\"");
  }
  return it->get<std::string>();
}

// Decodes every line with `decode`, adding the file path to any error.
template <typename Decode>
auto decode_file(const std::string& path, Decode decode) {
  const auto lines = read_lines(path);
  std::vector<decltype(decode(std::string_view{}, std::size_t{1}))> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.push_back(decode(lines[i], i + 1));
    } catch (const Error& e) {
      auto ctx = e.context();
      ctx["path"] = path;
      throw Error(e.code(), e.what(), ctx);
    }
  }
  return out;
}

}  // namespace

std::string encode_sample(const InstructionSample& s) {
  ojson j;
  j["id"] = s.id;
  j["instruction"] = s.instruction;
  j["text1"] = s.text1;
  j["text2"] = s.text2;
  j["label"] = label_to_wire(s.label);
  if (s.explanation) j["explanation"] = *s.explanation;
  j["setting"] = setting_to_wire(s.setting);
  return dump(j);
}

std::string encode_prediction(const PredictionRecord& r) {
  ojson j;
  j["id"] = r.id;
  j["output_text"] = r.output_text;
  return dump(j);
}

InstructionSample decode_sample(std::string_view line, std::size_t line_no) {
  const ojson j = parse_object(line, line_no);
  InstructionSample s;
  s.id = required_string(j, "id", line_no);
  s.instruction = required_string(j, "instruction", line_no);
  s.text1 = required_string(j, "text1", line_no);
  s.text2 = required_string(j, "text2", line_no);
  const auto label = label_from_wire(required_string(j, "label", line_no));
  if (!label) malformed(line_no, "label must be \"yes\" or \"no\"");
  s.label = *label;
  if (auto it = j.find("explanation"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) malformed(line_no, "explanation must be a string");
    s.explanation = it->get<std::string>();
  }
  const auto setting = setting_from_wire(required_string(j, "setting", line_no));
  if (!setting) malformed(line_no, "setting must be \"cls\" or \"cls-expl\"");
  s.setting = *setting;
  try {
    s.validate();
  } catch (const Error& e) {
    malformed(line_no, e.what());
  }
  return s;
}

PredictionRecord decode_prediction(std::string_view line, std::size_t line_no) {
  const ojson j = parse_object(line, line_no);
  return {required_string(j, "id", line_no), required_string(j, "output_text", line_no)};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open file for reading", {{"path", path}});
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed", {{"path", path}});
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open file for writing", {{"path", path}});
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed", {{"path", path}});
}

std::vector<std::string> read_lines(const std::string& path) {
  const std::string content = read_text_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::string content;
  for (const auto& l : lines) {
    content += l;
    content += '\n';
  }
  write_text_file(path, content);
}

std::vector<InstructionSample> read_samples(const std::string& path) { return decode_file(path, decode_sample); }

std::vector<PredictionRecord> read_predictions(const std::string& path) {
  return decode_file(path, decode_prediction);
}

void write_samples(const std::string& path, const std::vector<InstructionSample>& samples) {
  std::vector<std::string> lines;
  lines.reserve(samples.size());
  for (const auto& s : samples) lines.push_back(encode_sample(s));
  write_lines(path, lines);
}

void write_predictions(const std::string& path, const std::vector<PredictionRecord>& records) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(encode_prediction(r));
  write_lines(path, lines);
}

}  // namespace instructav
