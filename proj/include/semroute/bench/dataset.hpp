#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace semroute::bench {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One evaluation unit: a labeled prompt.
struct BenchQuery {
  std::string id;
  std::string category;
  std::string prompt;
};

/// Reads a JSON-lines dataset, one {id, category, prompt} object per line.
/// Blank lines are skipped. Missing fields and duplicate ids raise
/// DatasetError naming the line. An empty file is an empty dataset.
std::vector<BenchQuery> load_dataset(const std::filesystem::path& path);

/// Converts an externally obtained MMLU-Pro-style JSONL export into this
/// dataset format. Accepts objects with question/category and an optional
/// question_id and options array. Returns the number of queries written.
std::size_t convert_mmlupro(const std::filesystem::path& input,
                            const std::filesystem::path& output);

}  // namespace semroute::bench
