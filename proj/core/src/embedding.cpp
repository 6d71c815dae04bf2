#include "advrec/embedding.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "advrec/errors.hpp"

namespace advrec {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double parse_double(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": non-numeric field '" +
                     std::string(field) + "'");
  }
  return v;
}

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");

  EmbeddingTable table;
  std::set<std::string, std::less<>> seen_users, seen_items;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream hdr(line);
      std::string tag;
      hdr >> tag;
      if (tag == "#dim") {
        std::size_t d = 0;
        if (!(hdr >> d) || d == 0) {
          throw ParseError("line " + std::to_string(line_no) + ": malformed #dim header");
        }
        if (table.dim != 0 && table.dim != d) {
          throw ParseError("line " + std::to_string(line_no) + ": #dim " + std::to_string(d) +
                           " conflicts with earlier dimension " + std::to_string(table.dim));
        }
        table.dim = d;
      }
      continue;
    }

    std::vector<std::string_view> fields = split_tabs(line);
    if (fields.size() < 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected `u|i <id> <floats>`");
    }
    std::string_view kind = fields[0];
    if (kind != "u" && kind != "i") {
      throw ParseError("line " + std::to_string(line_no) + ": unknown record type '" +
                       std::string(kind) + "'");
    }
    std::string id(fields[1]);
    if (id.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty id");

    std::size_t n_values = fields.size() - 2;
    if (table.dim == 0) table.dim = n_values;
    if (n_values != table.dim) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.dim) + " values, got " + std::to_string(n_values));
    }
    Tensor vec({table.dim});
    for (std::size_t i = 0; i < n_values; ++i) vec[i] = parse_double(fields[i + 2], line_no);
    if (!vec.all_finite()) {
      throw ParseError("line " + std::to_string(line_no) + ": non-finite value");
    }

    if (kind == "u") {
      if (!seen_users.insert(id).second) {
        throw ParseError("line " + std::to_string(line_no) + ": duplicate user id '" + id + "'");
      }
      table.user_ids.push_back(std::move(id));
      table.users.push_back(std::move(vec));
    } else {
      if (!seen_items.insert(id).second) {
        throw ParseError("line " + std::to_string(line_no) + ": duplicate item id '" + id + "'");
      }
      table.item_ids.push_back(std::move(id));
      table.items.push_back(std::move(vec));
    }
  }

  if (table.items.empty()) throw ParseError("'" + path.string() + "': no items");
  if (table.users.empty()) throw ParseError("'" + path.string() + "': no users");
  return table;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw StateError("cannot write '" + path.string() + "'");
  out << "#dim " << table.dim << '\n';
  out.precision(17);
  auto write = [&](char kind, const std::vector<Tensor>& vecs,
                   const std::vector<std::string>& ids) {
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      out << kind << '\t' << (i < ids.size() ? ids[i] : std::to_string(i));
      for (std::size_t j = 0; j < vecs[i].size(); ++j) out << '\t' << vecs[i][j];
      out << '\n';
    }
  };
  write('u', table.users, table.user_ids);
  write('i', table.items, table.item_ids);
  if (!out) throw StateError("write failed for '" + path.string() + "'");
}

}  // namespace advrec
