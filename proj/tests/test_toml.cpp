#include <doctest.h>

#include "leakprobe/toml.hpp"
#include "leakprobe/util.hpp"

using namespace leakprobe;

TEST_CASE("toml: scalars, arrays, inline tables") {
  auto doc = toml::parse(R"(
# comment
name = "vault"
count = 40
ratio = 0.65
flag = true
neg = -7
tags = ["a", "b", "c"]
retry = { max_attempts = 3, base_backoff_ms = 500 }
)");
  CHECK(doc.at("name").as_string() == "vault");
  CHECK(doc.at("count").as_integer() == 40);
  CHECK(doc.at("ratio").as_float() == doctest::Approx(0.65));
  CHECK(doc.at("flag").as_boolean());
  CHECK(doc.at("neg").as_integer() == -7);
  REQUIRE(doc.at("tags").as_array().size() == 3);
  CHECK(doc.at("tags").as_array()[1].as_string() == "b");
  CHECK(doc.at("retry").at("max_attempts").as_integer() == 3);
  CHECK(doc.get_integer("absent", 9) == 9);
}

TEST_CASE("toml: string flavors and escapes") {
  auto doc = toml::parse(R"toml(
basic = "line\nbreak \"quoted\" tab\t"
literal = 'no \n escapes'
multi = """
first line
second line"""
multiline_literal = '''
kept \raw
'''
uni = "\u0041\u00e9"
)toml");
  CHECK(doc.at("basic").as_string() == "line\nbreak \"quoted\" tab\t");
  CHECK(doc.at("literal").as_string() == "no \\n escapes");
  CHECK(doc.at("multi").as_string() == "first line\nsecond line");
  CHECK(doc.at("multiline_literal").as_string() == "kept \\raw\n");
  CHECK(doc.at("uni").as_string() == "A\xc3\xa9");
}

TEST_CASE("toml: tables, array-of-tables, dotted keys") {
  auto doc = toml::parse(R"(
server.port = 8080

[profiles.tested]
kind = "scripted"
script = "oracle.toml"

[profiles.judge]
kind = "live_http"
endpoint_url = "https://example.test/v1"

[[substitutions]]
secret = "Europe"
substitute = "USA"

[[substitutions]]
secret = "Croatia"
substitute = "Texas"
)");
  CHECK(doc.at("profiles").at("tested").at("kind").as_string() == "scripted");
  CHECK(doc.at("profiles").at("judge").at("endpoint_url").as_string() ==
        "https://example.test/v1");
  const auto& subs = doc.at("substitutions").as_array();
  REQUIRE(subs.size() == 2);
  CHECK(subs[0].at("secret").as_string() == "Europe");
  CHECK(subs[1].at("substitute").as_string() == "Texas");
  CHECK(doc.at("server").at("port").as_integer() == 8080);
}

TEST_CASE("toml: multiline arrays with trailing comma") {
  auto doc = toml::parse(R"(
choose = [
  { weight = 0.3, text = "leak" },
  { weight = 0.7, text = "clean" },
]
)");
  const auto& arr = doc.at("choose").as_array();
  REQUIRE(arr.size() == 2);
  CHECK(arr[0].at("weight").as_float() == doctest::Approx(0.3));
  CHECK(arr[1].at("text").as_string() == "clean");
}

TEST_CASE("toml: parse errors carry line numbers") {
  bool threw = false;
  try {
    toml::parse("ok = 1\nx = \"unterminated");
  } catch (const Error& e) {
    threw = true;
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.kind()) == errkind::toml_parse);
  }
  CHECK(threw);
  CHECK_THROWS_AS(toml::parse("a = 1\na = 2\n"), Error);        // duplicate key
  CHECK_THROWS_AS(toml::parse("= 3\n"), Error);                 // missing key
  CHECK_THROWS_AS(toml::parse("d = 1979-05-27\n"), Error);      // dates unsupported
  CHECK_THROWS_AS(toml::parse("b = tru\n"), Error);
}

TEST_CASE("toml: type mismatches throw") {
  auto doc = toml::parse("x = \"s\"\n");
  CHECK_THROWS_AS(doc.at("x").as_integer(), Error);
  CHECK_THROWS_AS(doc.at("missing"), Error);
  CHECK(doc.at("x").as_string() == "s");
}
