#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "advrec/tensor.hpp"

namespace advrec {

/// Dense embedding store. Indices are the working ids (0..n-1 per class);
/// the *_ids vectors keep the original file ids for loaded tables.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<Tensor> users;
  std::vector<Tensor> items;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
};

/// TSV format: optional header `#dim <d>`, then `u <id> <d floats>` and
/// `i <id> <d floats>`, tab-separated. The dimension comes from the header
/// when present, otherwise from the first data row.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

}  // namespace advrec
