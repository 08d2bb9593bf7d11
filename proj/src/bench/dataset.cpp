#include "semroute/bench/dataset.hpp"

#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace semroute::bench {

namespace {

using nlohmann::json;

std::string line_prefix(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

std::vector<BenchQuery> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DatasetError("cannot open dataset file: " + path.string());
  }
  std::vector<BenchQuery> queries;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(line_prefix(path, line_no) + e.what());
    }
    if (!obj.is_object()) {
      throw DatasetError(line_prefix(path, line_no) + "expected JSON object");
    }
    BenchQuery q;
    for (const char* field : {"id", "category", "prompt"}) {
      if (!obj.contains(field) || !obj[field].is_string() ||
          obj[field].get<std::string>().empty()) {
        throw DatasetError(line_prefix(path, line_no) +
                           "missing or empty string field '" +
                           std::string(field) + "'");
      }
    }
    q.id = obj["id"].get<std::string>();
    q.category = obj["category"].get<std::string>();
    q.prompt = obj["prompt"].get<std::string>();
    const auto [it, inserted] = seen.emplace(q.id, line_no);
    if (!inserted) {
      throw DatasetError(line_prefix(path, line_no) + "duplicate id '" +
                         q.id + "' (first seen on line " +
                         std::to_string(it->second) + ")");
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

std::size_t convert_mmlupro(const std::filesystem::path& input,
                            const std::filesystem::path& output) {
  std::ifstream in(input);
  if (!in) {
    throw DatasetError("cannot open input file: " + input.string());
  }
  std::ofstream out(output);
  if (!out) {
    throw DatasetError("cannot open output file: " + output.string());
  }
  std::string line;
  std::size_t line_no = 0;
  std::size_t written = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(line_prefix(input, line_no) + e.what());
    }
    if (!obj.contains("question") || !obj["question"].is_string() ||
        !obj.contains("category") || !obj["category"].is_string()) {
      throw DatasetError(line_prefix(input, line_no) +
                         "expected 'question' and 'category' string fields");
    }
    std::string id;
    if (obj.contains("question_id")) {
      const json& qid = obj["question_id"];
      id = qid.is_string() ? qid.get<std::string>()
                           : std::to_string(qid.get<long long>());
    } else {
      id = "q" + std::to_string(line_no);
    }
    std::string prompt = obj["question"].get<std::string>();
    if (obj.contains("options") && obj["options"].is_array() &&
        !obj["options"].empty()) {
      prompt += "\nOptions:";
      char letter = 'A';
      for (const json& opt : obj["options"]) {
        if (!opt.is_string()) continue;
        prompt += "\n(";
        prompt += letter++;
        prompt += ") " + opt.get<std::string>();
      }
    }
    std::string category = obj["category"].get<std::string>();
    for (char& c : category) {
      if (c == ' ') c = '_';
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    const json out_obj = {{"id", id}, {"category", category}, {"prompt", prompt}};
    out << out_obj.dump() << "\n";
    ++written;
  }
  return written;
}

}  // namespace semroute::bench
