#include "oclb/scene_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "oclb/rng.hpp"

namespace oclb {

using nlohmann::json;

// ---------------------------------------------------------------------------
// PropertySchema

PropertySchema::PropertySchema(std::vector<PropertyEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string> seen;
  offsets_.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.name.empty()) throw ConfigError("property name must not be empty");
    if (!seen.insert(e.name).second) throw ConfigError("duplicate property name '" + e.name + "'");
    if (e.categorical() && e.size < 2) {
      throw ConfigError("categorical property '" + e.name + "' needs at least 2 classes");
    }
    if (!e.categorical() && e.size < 1) {
      throw ConfigError("numeric property '" + e.name + "' needs at least 1 dimension");
    }
    offsets_.push_back(total_width_);
    total_width_ += e.width();
  }
}

std::optional<std::size_t> PropertySchema::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> PropertySchema::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::vector<std::string> PropertySchema::excluded_for_shift(const std::string& shift_kind) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (std::find(e.excluded_under.begin(), e.excluded_under.end(), shift_kind) !=
        e.excluded_under.end()) {
      out.push_back(e.name);
    }
  }
  return out;
}

bool PropertySchema::operator==(const PropertySchema& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.kind != b.kind || a.size != b.size ||
        a.excluded_under != b.excluded_under) {
      return false;
    }
  }
  return true;
}

namespace {

PropertyEntry categorical(std::string name, std::size_t classes,
                          std::vector<std::string> excluded = {}) {
  return {std::move(name), PropertyKind::Categorical, classes, std::move(excluded)};
}

PropertyEntry numeric(std::string name, std::size_t dims, std::vector<std::string> excluded = {}) {
  return {std::move(name), PropertyKind::Numeric, dims, std::move(excluded)};
}

}  // namespace

PropertySchema schema_preset(const std::string& name) {
  if (name == "clevr") {
    return PropertySchema({categorical("color", 8, {"object_color"}),
                           categorical("material", 2, {"object_color"}),
                           categorical("shape", 3, {"object_shape"}), categorical("size", 2),
                           numeric("x", 1), numeric("y", 1)});
  }
  if (name == "multi_dsprites") {
    return PropertySchema({numeric("color", 3, {"object_color"}), numeric("scale", 1),
                           categorical("shape", 3, {"object_shape"}), numeric("x", 1),
                           numeric("y", 1)});
  }
  if (name == "tetrominoes") {
    return PropertySchema({categorical("shape", 19, {"object_shape"}),
                           categorical("color", 6, {"object_color"}), numeric("x", 1),
                           numeric("y", 1)});
  }
  if (name == "shapestacks") {
    return PropertySchema(
        {categorical("shape", 3, {"object_shape"}), categorical("color", 6, {"object_color"})});
  }
  if (name == "objects_room") {
    return PropertySchema();
  }
  if (name == "synthetic") {
    return PropertySchema({numeric("color", 3, {"object_color"}),
                           categorical("shape", 3, {"object_shape"}), numeric("scale", 1),
                           numeric("x", 1), numeric("y", 1)});
  }
  throw ConfigError("unknown schema preset '" + name + "'");
}

json schema_to_json(const PropertySchema& schema) {
  json out = json::array();
  for (const auto& e : schema.entries()) {
    json entry = {{"name", e.name}};
    if (e.categorical()) {
      entry["kind"] = "categorical";
      entry["num_classes"] = e.size;
    } else {
      entry["kind"] = "numeric";
      entry["dims"] = e.size;
    }
    entry["excluded_under"] = e.excluded_under;
    out.push_back(std::move(entry));
  }
  return out;
}

PropertySchema schema_from_json(const json& j) {
  if (j.is_string()) return schema_preset(j.get<std::string>());
  if (!j.is_array()) throw FormatError("schema must be an array or a preset name");
  std::vector<PropertyEntry> entries;
  for (const auto& item : j) {
    PropertyEntry e;
    e.name = item.at("name").get<std::string>();
    const auto kind = item.at("kind").get<std::string>();
    if (kind == "categorical") {
      e.kind = PropertyKind::Categorical;
      e.size = item.at("num_classes").get<std::size_t>();
    } else if (kind == "numeric") {
      e.kind = PropertyKind::Numeric;
      e.size = item.at("dims").get<std::size_t>();
    } else {
      throw FormatError("unknown property kind '" + kind + "'");
    }
    if (item.contains("excluded_under")) {
      e.excluded_under = item.at("excluded_under").get<std::vector<std::string>>();
    }
    entries.push_back(std::move(e));
  }
  return PropertySchema(std::move(entries));
}

// ---------------------------------------------------------------------------
// Scene and SceneBatch

std::vector<int> Scene::labels() const {
  const std::size_t n = pixels();
  std::vector<int> out(n, -1);
  for (std::size_t m = 0; m < num_objects(); ++m) {
    const auto mask = masks.slice(m);
    for (std::size_t p = 0; p < n; ++p) {
      if (mask[p]) out[p] = static_cast<int>(m);
    }
  }
  return out;
}

std::size_t Scene::mask_area(std::size_t object) const {
  const auto mask = masks.slice(object);
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Scene SceneBatch::scene(std::size_t i) const {
  Scene s;
  s.height = height();
  s.width = width();
  s.channels = channels();
  const auto img = images.slice(i);
  s.image.assign(img.begin(), img.end());
  const auto m = static_cast<std::size_t>(num_objects.at(i));
  const std::size_t hw = s.height * s.width;
  s.masks = Tensor<std::uint8_t>({m, s.height, s.width});
  const auto all = gt_masks.slice(i);
  std::copy(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m * hw), s.masks.data.begin());
  for (std::size_t e = 0; e < schema.size(); ++e) {
    const std::size_t w = schema[e].width();
    Tensor<float> p({m, w});
    const auto src = properties[e].slice(i);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(m * w), p.data.begin());
    s.properties.push_back(std::move(p));
  }
  const auto flags = ood_flags.slice(i);
  s.ood_flags.assign(flags.begin(), flags.begin() + static_cast<std::ptrdiff_t>(m));
  return s;
}

std::size_t SceneBatch::mask_area(std::size_t scene, std::size_t object) const {
  const std::size_t hw = height() * width();
  const auto all = gt_masks.slice(scene);
  const auto begin = all.begin() + static_cast<std::ptrdiff_t>(object * hw);
  return static_cast<std::size_t>(std::count(begin, begin + static_cast<std::ptrdiff_t>(hw),
                                             std::uint8_t{1}));
}

std::vector<std::size_t> SceneBatch::visible_foreground(std::size_t scene) const {
  std::vector<std::size_t> out;
  const auto m = static_cast<std::size_t>(num_objects.at(scene));
  for (std::size_t o = background_count; o < m; ++o) {
    if (mask_area(scene, o) > 0) out.push_back(o);
  }
  return out;
}

std::vector<double> SceneBatch::target(std::size_t scene, std::size_t object) const {
  std::vector<double> out(schema.total_width());
  for (std::size_t e = 0; e < schema.size(); ++e) {
    const std::size_t w = schema[e].width();
    const auto src = properties[e].slice(scene);
    for (std::size_t k = 0; k < w; ++k) {
      out[schema.offset(e) + k] = src[object * w + k];
    }
  }
  return out;
}

bool SceneBatch::is_ood(std::size_t scene, std::size_t object) const {
  return ood_flags.slice(scene)[object] != 0;
}

SceneBatch make_empty_batch(const PropertySchema& schema, std::size_t height, std::size_t width,
                            std::size_t channels, std::size_t background_count) {
  return assemble_batch(schema, {}, background_count, height, width, channels,
                        background_count);
}

SceneBatch assemble_batch(const PropertySchema& schema, const std::vector<Scene>& scenes,
                          std::size_t background_count, std::size_t height, std::size_t width,
                          std::size_t channels, std::size_t min_max_objects) {
  std::size_t mmax = min_max_objects;
  for (const auto& s : scenes) mmax = std::max(mmax, s.num_objects());
  const std::size_t n = scenes.size();
  SceneBatch b;
  b.schema = schema;
  b.background_count = background_count;
  b.images = Tensor<float>({n, height, width, channels});
  b.gt_masks = Tensor<std::uint8_t>({n, mmax, height, width});
  b.num_objects.assign(n, 0);
  for (const auto& e : schema.entries()) b.properties.emplace_back(Shape{n, mmax, e.width()});
  b.ood_flags = Tensor<std::uint8_t>({n, mmax});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = scenes[i];
    if (s.height != height || s.width != width || s.channels != channels) {
      throw ShapeError("scene " + std::to_string(i) + " geometry differs from the batch");
    }
    if (s.properties.size() != schema.size()) {
      throw ShapeError("scene " + std::to_string(i) + " property count differs from schema");
    }
    std::copy(s.image.begin(), s.image.end(), b.images.slice(i).begin());
    const std::size_t m = s.num_objects();
    b.num_objects[i] = static_cast<std::int64_t>(m);
    std::copy(s.masks.data.begin(), s.masks.data.end(), b.gt_masks.slice(i).begin());
    for (std::size_t e = 0; e < schema.size(); ++e) {
      std::copy(s.properties[e].data.begin(), s.properties[e].data.end(),
                b.properties[e].slice(i).begin());
    }
    std::copy(s.ood_flags.begin(), s.ood_flags.end(), b.ood_flags.slice(i).begin());
  }
  return b;
}

namespace {

void check_property_rows(const PropertyEntry& entry, std::span<const float> rows, std::size_t m,
                         std::size_t mmax, std::ptrdiff_t scene) {
  const std::size_t w = entry.width();
  for (std::size_t o = 0; o < mmax; ++o) {
    const auto row = rows.subspan(o * w, w);
    if (o >= m) {
      if (std::any_of(row.begin(), row.end(), [](float v) { return v != 0.0f; })) {
        throw ValidationError("property '" + entry.name + "' of padded object " +
                                  std::to_string(o) + " is not zero",
                              scene);
      }
      continue;
    }
    if (entry.categorical()) {
      // One-hot, or all zero for unlabeled rows such as background objects.
      std::size_t ones = 0;
      for (float v : row) {
        if (v == 1.0f) {
          ++ones;
        } else if (v != 0.0f) {
          throw ValidationError("categorical property '" + entry.name + "' of object " +
                                    std::to_string(o) + " is not one-hot",
                                scene);
        }
      }
      if (ones > 1) {
        throw ValidationError("categorical property '" + entry.name + "' of object " +
                                  std::to_string(o) + " has several hot entries",
                              scene);
      }
    } else if (std::any_of(row.begin(), row.end(), [](float v) { return !std::isfinite(v); })) {
      throw ValidationError("numeric property '" + entry.name + "' is not finite", scene);
    }
  }
}

void check_mask_partition(std::span<const std::uint8_t> masks, std::size_t m, std::size_t mmax,
                          std::size_t hw, std::ptrdiff_t scene) {
  for (std::size_t o = 0; o < mmax; ++o) {
    for (std::size_t p = 0; p < hw; ++p) {
      const auto v = masks[o * hw + p];
      if (v > 1) throw ValidationError("mask values must be 0 or 1", scene);
      if (o >= m && v != 0) {
        throw ValidationError("padded mask " + std::to_string(o) + " is not empty", scene);
      }
    }
  }
  for (std::size_t p = 0; p < hw; ++p) {
    unsigned sum = 0;
    for (std::size_t o = 0; o < m; ++o) sum += masks[o * hw + p];
    if (sum != 1) {
      throw ValidationError("masks do not partition pixel " + std::to_string(p) + " (sum " +
                                std::to_string(sum) + ")",
                            scene);
    }
  }
}

void check_image(std::span<const float> image, std::ptrdiff_t scene) {
  for (float v : image) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("image value outside [0,1]", scene);
  }
}

}  // namespace

void validate_scene(const Scene& s, const PropertySchema& schema, std::ptrdiff_t index) {
  const std::size_t hw = s.pixels();
  if (s.image.size() != hw * s.channels) throw ShapeError("scene image size mismatch");
  if (s.masks.ndim() != 3 || s.masks.dim(1) != s.height || s.masks.dim(2) != s.width) {
    throw ShapeError("scene mask shape mismatch");
  }
  const std::size_t m = s.num_objects();
  check_image(s.image, index);
  check_mask_partition(s.masks.data, m, m, hw, index);
  if (s.properties.size() != schema.size()) throw ShapeError("scene property count mismatch");
  for (std::size_t e = 0; e < schema.size(); ++e) {
    if (s.properties[e].shape != Shape{m, schema[e].width()}) {
      throw ShapeError("scene property '" + schema[e].name + "' shape mismatch");
    }
    check_property_rows(schema[e], s.properties[e].data, m, m, index);
  }
  if (s.ood_flags.size() != m) throw ShapeError("scene ood flag count mismatch");
}

void validate_batch(const SceneBatch& b) {
  if (b.images.ndim() != 4) throw ShapeError("images must be N x H x W x C");
  const std::size_t n = b.images.dim(0), h = b.images.dim(1), w = b.images.dim(2);
  if (b.gt_masks.ndim() != 4 || b.gt_masks.dim(0) != n || b.gt_masks.dim(2) != h ||
      b.gt_masks.dim(3) != w) {
    throw ValidationError("gt_masks shape " + shape_string(b.gt_masks.shape) +
                          " inconsistent with images " + shape_string(b.images.shape));
  }
  const std::size_t mmax = b.gt_masks.dim(1);
  if (b.num_objects.size() != n) throw ValidationError("num_objects length differs from N");
  if (b.ood_flags.shape != Shape{n, mmax}) {
    throw ValidationError("ood_flags shape " + shape_string(b.ood_flags.shape) +
                          " inconsistent with masks");
  }
  if (b.properties.size() != b.schema.size()) {
    throw ValidationError("property tensor count differs from schema");
  }
  for (std::size_t e = 0; e < b.schema.size(); ++e) {
    if (b.properties[e].shape != Shape{n, mmax, b.schema[e].width()}) {
      throw ValidationError("property '" + b.schema[e].name + "' has shape " +
                            shape_string(b.properties[e].shape));
    }
  }
  for (const auto& name : b.excluded_properties) {
    if (!b.schema.find(name)) throw ValidationError("excluded property '" + name + "' not in schema");
  }
  const std::size_t hw = h * w;
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::ptrdiff_t>(i);
    const auto m64 = b.num_objects[i];
    if (m64 < 0 || static_cast<std::size_t>(m64) > mmax) {
      throw ValidationError("num_objects " + std::to_string(m64) + " outside [0, Mmax]", idx);
    }
    const auto m = static_cast<std::size_t>(m64);
    if (m < b.background_count && hw > 0) {
      throw ValidationError("fewer masks than background objects", idx);
    }
    check_image(b.images.slice(i), idx);
    check_mask_partition(b.gt_masks.slice(i), m, mmax, hw, idx);
    for (std::size_t e = 0; e < b.schema.size(); ++e) {
      check_property_rows(b.schema[e], b.properties[e].slice(i), m, mmax, idx);
    }
    const auto flags = b.ood_flags.slice(i);
    for (std::size_t o = 0; o < mmax; ++o) {
      if (flags[o] > 1 || (o >= m && flags[o] != 0)) {
        throw ValidationError("invalid ood flag for object " + std::to_string(o), idx);
      }
    }
  }
}

void validate_slots(const SlotBatch& s) {
  if (s.slots.ndim() != 3) throw ShapeError("slots must be N x K x d");
  const std::size_t n = s.slots.dim(0), k = s.slots.dim(1);
  if (k < 1) throw ShapeError("slot batch needs K >= 1");
  if (s.pred_masks.ndim() != 4 || s.pred_masks.dim(0) != n || s.pred_masks.dim(1) != k) {
    throw ShapeError("pred_masks shape " + shape_string(s.pred_masks.shape) +
                     " inconsistent with slots " + shape_string(s.slots.shape));
  }
  if (s.distributed && (k != 1 || s.virtual_slots < 1)) {
    throw ShapeError("distributed representations need K = 1 and virtual_slots >= 1");
  }
  if (s.recon) {
    if (s.recon->ndim() != 4 || s.recon->dim(0) != n || s.recon->dim(1) != s.pred_masks.dim(2) ||
        s.recon->dim(2) != s.pred_masks.dim(3)) {
      throw ShapeError("recon shape " + shape_string(s.recon->shape) + " inconsistent");
    }
  }
  const std::size_t hw = s.pred_masks.dim(2) * s.pred_masks.dim(3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto masks = s.pred_masks.slice(i);
    for (std::size_t p = 0; p < hw; ++p) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const float v = masks[j * hw + p];
        if (!(v >= 0.0f && v <= 1.0f)) {
          throw ValidationError("predicted mask value outside [0,1]", static_cast<std::ptrdiff_t>(i));
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-4) {
        throw ValidationError("predicted masks do not sum to 1 at pixel " + std::to_string(p),
                              static_cast<std::ptrdiff_t>(i));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Manifest and container directories

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["name"] = m.name;
  j["num_scenes"] = m.num_scenes;
  j["files"] = m.files;
  j["schema"] = schema_to_json(m.schema);
  j["background_count"] = m.background_count;
  if (m.splits) {
    j["splits"] = {{"train", m.splits->train}, {"val", m.splits->val}, {"test", m.splits->test}};
  }
  if (m.shift) {
    j["shift"] = {{"kind", m.shift->kind},
                  {"ood_object_index", m.shift->ood_object_index},
                  {"excluded_properties", m.shift->excluded_properties}};
  }
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.num_scenes = j.at("num_scenes").get<std::size_t>();
    m.files = j.at("files").get<std::map<std::string, std::string>>();
    m.schema = schema_from_json(j.at("schema"));
    m.background_count = j.value("background_count", std::size_t{1});
    if (j.contains("splits")) {
      const auto& s = j.at("splits");
      m.splits = SplitDefinition{s.at("train").get<std::vector<std::size_t>>(),
                                 s.at("val").get<std::vector<std::size_t>>(),
                                 s.at("test").get<std::vector<std::size_t>>()};
    }
    if (j.contains("shift")) {
      const auto& s = j.at("shift");
      m.shift = ShiftMetadata{s.at("kind").get<std::string>(),
                              s.at("ood_object_index").get<std::vector<std::int64_t>>(),
                              s.at("excluded_properties").get<std::vector<std::string>>()};
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed manifest schema: ") + e.what());
  }
  return m;
}

namespace {

constexpr const char* kManifestFile = "manifest.json";

std::string property_role(const std::string& name) { return "property:" + name; }

const std::string& file_for(const DatasetManifest& m, const std::string& role) {
  const auto it = m.files.find(role);
  if (it == m.files.end()) throw FormatError("manifest has no file for '" + role + "'");
  return it->second;
}

void check_split_indices(const SplitDefinition& s, std::size_t n) {
  std::set<std::size_t> seen;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (auto i : *part) {
      if (i >= n) throw ValidationError("split index " + std::to_string(i) + " out of range");
      if (!seen.insert(i).second) {
        throw ValidationError("split index " + std::to_string(i) + " appears twice");
      }
    }
  }
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create directory " + dir.string());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.manifest = manifest_from_json(read_json(dir / kManifestFile));
  const auto& m = d.manifest;
  auto& b = d.batch;
  b.schema = m.schema;
  b.background_count = m.background_count;
  b.images = read_tensor<float>(dir / file_for(m, "images"));
  b.gt_masks = read_tensor<std::uint8_t>(dir / file_for(m, "gt_masks"));
  b.num_objects = read_tensor<std::int64_t>(dir / file_for(m, "num_objects")).data;
  b.ood_flags = read_tensor<std::uint8_t>(dir / file_for(m, "ood_flags"));
  for (const auto& e : m.schema.entries()) {
    b.properties.push_back(read_tensor<float>(dir / file_for(m, property_role(e.name))));
  }
  if (m.shift) b.excluded_properties = m.shift->excluded_properties;
  if (b.size() != m.num_scenes) {
    throw ValidationError("manifest declares " + std::to_string(m.num_scenes) +
                          " scenes, images hold " + std::to_string(b.size()));
  }
  validate_batch(b);
  if (m.splits) check_split_indices(*m.splits, m.num_scenes);
  if (m.shift && m.shift->ood_object_index.size() != m.num_scenes) {
    throw ValidationError("shift metadata has wrong number of scenes");
  }
  return d;
}

void save_dataset(const SceneBatch& batch, const std::filesystem::path& dir,
                  const DatasetManifest& manifest) {
  validate_batch(batch);
  ensure_directory(dir);
  DatasetManifest m = manifest;
  m.num_scenes = batch.size();
  m.schema = batch.schema;
  m.background_count = batch.background_count;
  m.files = {{"images", "images.ocbt"},
             {"gt_masks", "gt_masks.ocbt"},
             {"num_objects", "num_objects.ocbt"},
             {"ood_flags", "ood_flags.ocbt"}};
  for (const auto& e : batch.schema.entries()) {
    m.files[property_role(e.name)] = "prop_" + e.name + ".ocbt";
  }
  if (!batch.excluded_properties.empty() && !m.shift) {
    m.shift = ShiftMetadata{"custom", {}, batch.excluded_properties};
  }
  if (m.shift) {
    m.shift->excluded_properties = batch.excluded_properties;
    m.shift->ood_object_index.assign(batch.size(), -1);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto flags = batch.ood_flags.slice(i);
      for (std::size_t o = 0; o < flags.size(); ++o) {
        if (flags[o]) {
          m.shift->ood_object_index[i] = static_cast<std::int64_t>(o);
          break;
        }
      }
    }
  }
  if (m.splits) check_split_indices(*m.splits, m.num_scenes);
  write_tensor(dir / m.files["images"], batch.images);
  write_tensor(dir / m.files["gt_masks"], batch.gt_masks);
  write_tensor(dir / m.files["num_objects"],
               Tensor<std::int64_t>({batch.num_objects.size()}, batch.num_objects));
  write_tensor(dir / m.files["ood_flags"], batch.ood_flags);
  for (std::size_t e = 0; e < batch.schema.size(); ++e) {
    write_tensor(dir / m.files[property_role(batch.schema[e].name)], batch.properties[e]);
  }
  write_json(dir / kManifestFile, manifest_to_json(m));
}

void save_dataset(const SceneBatch& batch, const std::filesystem::path& dir) {
  save_dataset(batch, dir, DatasetManifest{});
}

SplitDefinition make_splits(std::size_t num_scenes, SplitSizes sizes, std::uint64_t seed) {
  const std::size_t need = sizes.train + sizes.val + sizes.test;
  if (need > num_scenes) {
    throw ConfigError("splits need " + std::to_string(need) + " scenes, dataset has " +
                      std::to_string(num_scenes));
  }
  std::vector<std::size_t> order(num_scenes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, 0, 0x5911);
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = num_scenes; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  SplitDefinition s;
  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                  order.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::sort(part.begin(), part.end());
    return part;
  };
  s.train = take(0, sizes.train);
  s.val = take(sizes.train, sizes.val);
  s.test = take(sizes.train + sizes.val, sizes.test);
  return s;
}

SplitDefinition make_splits(const DatasetManifest& manifest, SplitSizes sizes, std::uint64_t seed) {
  return make_splits(manifest.num_scenes, sizes, seed);
}

void save_slots(const SlotBatch& slots, const std::filesystem::path& dir) {
  validate_slots(slots);
  ensure_directory(dir);
  write_tensor(dir / "slots.ocbt", slots.slots);
  write_tensor(dir / "pred_masks.ocbt", slots.pred_masks);
  if (slots.recon) write_tensor(dir / "recon.ocbt", *slots.recon);
  json meta = {{"num_scenes", slots.size()},
               {"distributed", slots.distributed},
               {"virtual_slots", slots.virtual_slots},
               {"files",
                {{"slots", "slots.ocbt"},
                 {"pred_masks", "pred_masks.ocbt"}}}};
  if (slots.recon) meta["files"]["recon"] = "recon.ocbt";
  write_json(dir / "slots.json", meta);
}

SlotBatch load_slots(const std::filesystem::path& dir) {
  const auto meta = read_json(dir / "slots.json");
  SlotBatch s;
  try {
    const auto& files = meta.at("files");
    s.slots = read_tensor<float>(dir / files.at("slots").get<std::string>());
    s.pred_masks = read_tensor<float>(dir / files.at("pred_masks").get<std::string>());
    if (files.contains("recon")) {
      s.recon = read_tensor<float>(dir / files.at("recon").get<std::string>());
    }
    s.distributed = meta.at("distributed").get<bool>();
    s.virtual_slots = meta.at("virtual_slots").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed slots.json: ") + e.what());
  }
  validate_slots(s);
  return s;
}

}  // namespace oclb
