#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "instructav/core.hpp"

namespace instructav {

// One JSON object per line, no trailing newline. Key order is fixed:
//   {"id","instruction","text1","text2","label","explanation"?,"setting"}
std::string encode_sample(const InstructionSample& sample);
//   {"id","output_text"}
std::string encode_prediction(const PredictionRecord& record);

// Throws Error(kMalformedLine) carrying line_no in its context.
InstructionSample decode_sample(std::string_view line, std::size_t line_no);
PredictionRecord decode_prediction(std::string_view line, std::size_t line_no);

std::vector<InstructionSample> read_samples(const std::string& path);
std::vector<PredictionRecord> read_predictions(const std::string& path);
void write_samples(const std::string& path, const std::vector<InstructionSample>& samples);
void write_predictions(const std::string& path, const std::vector<PredictionRecord>& records);

// Splits a JSONL file into lines (1-based numbering is the caller's index + 1).
// A final newline does not produce an extra empty line.
std::vector<std::string> read_lines(const std::string& path);

// Writes each line followed by '\n'. Replaces the file.
void write_lines(const std::string& path, const std::vector<std::string>& lines);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace instructav
