#include <doctest.h>

#include <cstring>
#include <fstream>

#include "fixtures.hpp"
#include "oclb/scene_data.hpp"
#include "oclb/synthgen.hpp"

using namespace oclb;

TEST_SUITE("scene-data") {

TEST_CASE("tensor header bytes are fixed") {
  fixtures::TempDir dir;
  Tensor<float> t({2, 3}, std::vector<float>{0, 1, 2, 3, 4, 5});
  write_tensor(dir / "t.ocbt", t);
  const auto bytes = fixtures::read_bytes(dir / "t.ocbt");
  REQUIRE(bytes.size() == 8 + 2 * 8 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "OCBT");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 1);  // f32
  CHECK(bytes[6] == 2);  // ndim
  CHECK(bytes[7] == 0);
  CHECK(static_cast<unsigned char>(bytes[8]) == 2);
  CHECK(static_cast<unsigned char>(bytes[16]) == 3);
  float one = 0;
  std::memcpy(&one, bytes.data() + 24 + 4, 4);
  CHECK(one == 1.0f);
}

TEST_CASE("tensor round trip is bit exact for every dtype") {
  fixtures::TempDir dir;
  Tensor<float> f({3}, std::vector<float>{-0.0f, 1e-38f, 3.5f});
  Tensor<double> d({2, 1}, std::vector<double>{1.0 / 3.0, -2e300});
  Tensor<std::uint8_t> u({4}, std::vector<std::uint8_t>{0, 1, 254, 255});
  Tensor<std::int64_t> i({2}, std::vector<std::int64_t>{-1, 1LL << 62});
  write_tensor(dir / "f", f);
  write_tensor(dir / "d", d);
  write_tensor(dir / "u", u);
  write_tensor(dir / "i", i);
  CHECK(read_tensor<float>(dir / "f") == f);
  CHECK(std::signbit(read_tensor<float>(dir / "f").data[0]));
  CHECK(read_tensor<double>(dir / "d") == d);
  CHECK(read_tensor<std::uint8_t>(dir / "u") == u);
  CHECK(read_tensor<std::int64_t>(dir / "i") == i);
  CHECK(read_tensor_header(dir / "i").dtype == DType::I64);
}

TEST_CASE("malformed tensor files raise FormatError") {
  fixtures::TempDir dir;
  Tensor<float> t({2}, std::vector<float>{1, 2});
  write_tensor(dir / "t", t);
  auto bytes = fixtures::read_bytes(dir / "t");
  auto write = [&](const std::string& b) {
    std::ofstream out(dir / "bad", std::ios::binary);
    out << b;
  };
  SUBCASE("magic") {
    auto b = bytes;
    b[0] = 'X';
    write(b);
    CHECK_THROWS_AS(read_tensor<float>(dir / "bad"), FormatError);
  }
  SUBCASE("version") {
    auto b = bytes;
    b[4] = 2;
    write(b);
    CHECK_THROWS_AS(read_tensor<float>(dir / "bad"), FormatError);
  }
  SUBCASE("dtype") {
    auto b = bytes;
    b[5] = 9;
    write(b);
    CHECK_THROWS_AS(read_tensor<float>(dir / "bad"), FormatError);
  }
  SUBCASE("dtype mismatch") { CHECK_THROWS_AS(read_tensor<double>(dir / "t"), FormatError); }
  SUBCASE("truncated") {
    write(bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(read_tensor<float>(dir / "bad"), FormatError);
  }
  SUBCASE("missing") { CHECK_THROWS_AS(read_tensor<float>(dir / "absent"), FormatError); }
}

TEST_CASE("schema widths and presets") {
  const auto clevr = schema_preset("clevr");
  CHECK(clevr.total_width() == 8 + 2 + 3 + 2 + 1 + 1);
  CHECK(clevr.names() == std::vector<std::string>{"color", "material", "shape", "size", "x", "y"});
  CHECK(clevr.excluded_for_shift("object_color") == std::vector<std::string>{"color", "material"});
  CHECK(clevr.excluded_for_shift("object_shape") == std::vector<std::string>{"shape"});
  CHECK(schema_preset("objects_room").empty());
  CHECK(schema_from_json(schema_to_json(clevr)) == clevr);
  CHECK(schema_from_json("multi_dsprites") == schema_preset("multi_dsprites"));
  CHECK_THROWS_AS(schema_preset("nope"), ConfigError);
  CHECK_THROWS_AS(PropertySchema({{"a", PropertyKind::Categorical, 1, {}}}), ConfigError);
  CHECK_THROWS_AS(PropertySchema({{"a", PropertyKind::Numeric, 1, {}}, {"a", PropertyKind::Numeric, 1, {}}}),
                  ConfigError);
}

TEST_CASE("encoded targets follow declaration order") {
  const PropertySchema schema({{"shape", PropertyKind::Categorical, 3, {}}, {"x", PropertyKind::Numeric, 1, {}}});
  auto s = fixtures::scene_from_labels(1, 2, {0, 1}, 2, schema);
  s.properties[0].data[1 * 3 + 2] = 1.0f;
  s.properties[1].data[1] = 0.25f;
  const auto b = assemble_batch(schema, {s}, 1, 1, 2, 3);
  CHECK(b.target(0, 1) == std::vector<double>{0, 0, 1, 0.25});
  const auto empty = assemble_batch(PropertySchema{}, {fixtures::scene_from_labels(1, 2, {0, 1}, 2, PropertySchema{})}, 1, 1, 2, 3);
  CHECK(empty.target(0, 1).empty());
}

TEST_CASE("dataset round trip and validation") {
  fixtures::TempDir dir;
  SynthConfig sc;
  sc.num_scenes = 4;
  sc.height = sc.width = 16;
  sc.seed = 3;
  const auto batch = generate_scenes(sc);
  save_dataset(batch, dir / "a");
  const auto loaded = load_dataset(dir / "a");
  CHECK(loaded.batch == batch);
  CHECK(loaded.manifest.num_scenes == 4);

  save_dataset(batch, dir / "b");
  CHECK(fixtures::same_tree(dir / "a", dir / "b"));

  SUBCASE("missing masks file") {
    std::filesystem::remove(dir / "a" / "gt_masks.ocbt");
    CHECK_THROWS_AS(load_dataset(dir / "a"), FormatError);
  }
  SUBCASE("pixel covered twice names the scene") {
    auto masks = batch.gt_masks;
    // Add a second owner to the first pixel of scene 0.
    masks.data[1 * 16 * 16] = 1;
    masks.data[0] = 1;
    write_tensor(dir / "a" / "gt_masks.ocbt", masks);
    try {
      load_dataset(dir / "a");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.scene() == 0);
    }
  }
}

TEST_CASE("empty batch round trip") {
  fixtures::TempDir dir;
  const auto empty = make_empty_batch(schema_preset("synthetic"), 8, 8, 3, 1);
  save_dataset(empty, dir / "e");
  CHECK(load_dataset(dir / "e").batch.size() == 0);
}

TEST_CASE("unwritable path raises IoError") {
  fixtures::TempDir dir;
  std::ofstream(dir / "file") << "x";
  const auto empty = make_empty_batch(schema_preset("synthetic"), 8, 8, 3, 1);
  CHECK_THROWS_AS(save_dataset(empty, dir / "file" / "sub"), IoError);
}

TEST_CASE("splits") {
  const auto full = make_splits(13000, SplitSizes{}, 5);
  CHECK(full.train.size() == 10000);
  CHECK(full.val.size() == 1000);
  CHECK(full.test.size() == 2000);
  std::vector<bool> seen(13000, false);
  for (const auto* part : {&full.train, &full.val, &full.test}) {
    for (auto i : *part) {
      CHECK_FALSE(seen[i]);
      seen[i] = true;
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  CHECK(make_splits(13000, SplitSizes{}, 5) == full);
  CHECK_FALSE(make_splits(13000, SplitSizes{}, 6) == full);
  CHECK_THROWS_AS(make_splits(10, SplitSizes{5, 3, 3}, 0), ConfigError);
}

TEST_CASE("slot batches round trip and reject non-normalized masks") {
  fixtures::TempDir dir;
  SlotBatch s;
  s.slots = Tensor<float>({1, 2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  s.pred_masks = Tensor<float>({1, 2, 1, 2}, std::vector<float>{0.25f, 1.0f, 0.75f, 0.0f});
  save_slots(s, dir / "s");
  CHECK(load_slots(dir / "s") == s);
  s.pred_masks.data[0] = 0.5f;
  CHECK_THROWS(validate_slots(s));
}

}  // TEST_SUITE
