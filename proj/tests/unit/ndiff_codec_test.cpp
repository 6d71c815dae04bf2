#include <bit>
#include <cstdint>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "advrec/checkpoint.hpp"
#include "advrec/encoding.hpp"
#include "advrec/errors.hpp"
#include "advrec/rng.hpp"

using namespace advrec;

namespace {

std::string b64(std::string_view s) {
  return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("ndiff") {

TEST_CASE("base64: RFC 4648 vectors round-trip") {
  CHECK(b64("") == "");
  CHECK(b64("f") == "Zg==");
  CHECK(b64("fo") == "Zm8=");
  CHECK(b64("foo") == "Zm9v");
  CHECK(b64("foob") == "Zm9vYg==");
  CHECK(b64("fooba") == "Zm9vYmE=");
  CHECK(b64("foobar") == "Zm9vYmFy");

  std::vector<std::uint8_t> back = base64_decode("Zm9vYmE=");
  CHECK(std::string(back.begin(), back.end()) == "fooba");
  CHECK_THROWS_AS(base64_decode("abc"), ParseError);
  CHECK_THROWS_AS(base64_decode("ab=c"), ParseError);
  CHECK_THROWS_AS(base64_decode("a#=="), ParseError);
}

TEST_CASE("float64 little-endian packing round-trips exactly") {
  std::vector<double> values = {0.0, -0.0, 1.0, -1.5, 1e-300, 1e300, 3.141592653589793};
  std::vector<std::uint8_t> bytes = f64_to_le_bytes(values);
  CHECK(bytes.size() == values.size() * 8);
  CHECK(bytes[0 * 8 + 7] == 0x00);  // +0.0
  CHECK(bytes[2 * 8 + 7] == 0x3f);  // 1.0 = 0x3ff00...
  CHECK(bytes[2 * 8 + 6] == 0xf0);
  std::vector<double> back = f64_from_le_bytes(bytes);
  for (std::size_t i = 0; i < values.size(); ++i) {
    CHECK(std::bit_cast<std::uint64_t>(back[i]) == std::bit_cast<std::uint64_t>(values[i]));
  }
  CHECK_THROWS_AS(f64_from_le_bytes(std::vector<std::uint8_t>(7)), ParseError);
}

TEST_CASE("checkpoint: save/load round-trips params, kind, config, order") {
  Checkpoint ck;
  ck.kind = "agent";
  ck.config_json = R"({"n_items":5,"algo":"actor_critic"})";
  ck.params.add("z.w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  ck.params.add("a.b", Tensor::vec({-0.25, 1e-17}));

  auto path = temp_file("advrec_ck_test.json");
  save_checkpoint(path, ck);
  Checkpoint back = load_checkpoint(path, "agent");
  CHECK(back.kind == "agent");
  CHECK(back.params.names() == std::vector<std::string>{"z.w", "a.b"});
  CHECK(back.params.at("z.w") == ck.params.at("z.w"));
  CHECK(back.params.at("a.b") == ck.params.at("a.b"));
  CHECK(back.config_json.find("\"n_items\":5") != std::string::npos);

  CHECK_THROWS_AS(load_checkpoint(path, "detector"), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: rewriting the same content is byte-identical") {
  Checkpoint ck;
  ck.kind = "agent";
  Rng rng(8);
  Tensor w({4, 4});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal();
  ck.params.add("w", w);

  auto p1 = temp_file("advrec_ck_a.json");
  auto p2 = temp_file("advrec_ck_b.json");
  save_checkpoint(p1, ck);
  save_checkpoint(p2, ck);
  std::ifstream f1(p1), f2(p2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  CHECK(!s1.str().empty());
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("checkpoint: malformed files raise parse errors") {
  auto path = temp_file("advrec_ck_bad.json");
  auto write = [&](const std::string& text) {
    std::ofstream out(path);
    out << text;
  };

  CHECK_THROWS_AS(load_checkpoint(temp_file("advrec_ck_missing.json")), ParseError);

  write("not json");
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);

  write(R"({"kind":"agent","params":{}})");
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);  // no format_version

  write(R"({"format_version":99,"kind":"agent","params":{}})");
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);

  write(R"({"format_version":1,"kind":"agent","params":{"w":{"shape":[2],"data":"AAA="}}})");
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);  // 2 bytes, not 16

  std::filesystem::remove(path);
}

}
