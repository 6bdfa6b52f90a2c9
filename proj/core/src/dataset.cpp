#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "vagan/errors.hpp"
#include "vagan/npy.hpp"
#include "vagan/synthgen.hpp"

namespace vagan::synthgen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json spec_to_json(const DatasetSpec& s) {
  return json{{"num_images", s.num_images},
              {"image_size", s.image_size},
              {"noise_std", s.noise_std},
              {"blur_sigma", s.blur_sigma},
              {"effect_amplitude", s.effect_amplitude},
              {"square_size", s.square_size},
              {"max_offset", s.max_offset},
              {"subtype_ratio", s.subtype_ratio},
              {"split_fractions",
               {{"train", s.split_fractions.train},
                {"validation", s.split_fractions.validation},
                {"test", s.split_fractions.test}}},
              {"seed", s.seed}};
}

DatasetSpec spec_from_json(const json& j) {
  DatasetSpec s;
  s.num_images = j.at("num_images").get<int>();
  s.image_size = j.at("image_size").get<int>();
  s.noise_std = j.at("noise_std").get<double>();
  s.blur_sigma = j.at("blur_sigma").get<double>();
  s.effect_amplitude = j.at("effect_amplitude").get<double>();
  s.square_size = j.at("square_size").get<int>();
  s.max_offset = j.at("max_offset").get<int>();
  s.subtype_ratio = j.at("subtype_ratio").get<double>();
  s.split_fractions.train = j.at("split_fractions").at("train").get<double>();
  s.split_fractions.validation = j.at("split_fractions").at("validation").get<double>();
  s.split_fractions.test = j.at("split_fractions").at("test").get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  return s;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  const int n = ds.size(), hw = ds.image_size();
  npy::Array imgs = npy::from_f32(ds.images.vec(), {size_t(n), size_t(hw), size_t(hw)});
  npy::Array maps = npy::from_f32(ds.gtmaps.vec(), {size_t(n), size_t(hw), size_t(hw)});
  npy::save(dir + "/images.npy", imgs);
  npy::save(dir + "/gtmaps.npy", maps);

  json m;
  m["format_version"] = 1;
  m["spec"] = spec_to_json(ds.manifest.spec);
  m["digest"] = ds.manifest.digest;
  m["files"] = {{"images", "images.npy"}, {"gtmaps", "gtmaps.npy"}};
  m["labels"] = ds.manifest.labels;
  {
    std::vector<std::string> subs;
    subs.reserve(ds.manifest.subtypes.size());
    for (auto s : ds.manifest.subtypes) subs.push_back(subtype_name(s));
    m["subtypes"] = subs;
  }
  m["splits"] = {{"train", ds.manifest.train_ids},
                 {"validation", ds.manifest.validation_ids},
                 {"test", ds.manifest.test_ids}};
  json counts;
  for (auto split : {Split::train, Split::validation, Split::test}) {
    json c;
    c["total"] = ds.manifest.ids_of(split).size();
    for (int label = 0; label < 2; ++label)
      c["label" + std::to_string(label)] = ds.manifest.class_ids(split, label).size();
    int a = 0, b = 0;
    for (int id : ds.manifest.ids_of(split)) {
      if (ds.manifest.subtypes[size_t(id)] == Subtype::A) ++a;
      if (ds.manifest.subtypes[size_t(id)] == Subtype::B) ++b;
    }
    c["subtype_A"] = a;
    c["subtype_B"] = b;
    counts[split_name(split)] = c;
  }
  m["counts"] = counts;

  std::ofstream f(dir + "/manifest.json");
  if (!f) throw std::runtime_error("cannot write manifest: " + dir);
  f << m.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream f(dir + "/manifest.json");
  if (!f) throw ValidationError("no dataset manifest at " + dir + " (run gen-data first)");
  json m = json::parse(f);
  Dataset ds;
  ds.manifest.spec = spec_from_json(m.at("spec"));
  ds.manifest.digest = m.at("digest").get<std::string>();
  ds.manifest.labels = m.at("labels").get<std::vector<int>>();
  for (const auto& s : m.at("subtypes"))
    ds.manifest.subtypes.push_back(subtype_from_name(s.get<std::string>()));
  ds.manifest.train_ids = m.at("splits").at("train").get<std::vector<int>>();
  ds.manifest.validation_ids = m.at("splits").at("validation").get<std::vector<int>>();
  ds.manifest.test_ids = m.at("splits").at("test").get<std::vector<int>>();

  const int n = ds.manifest.spec.num_images;
  ds.manifest.split_of.assign(size_t(n), Split::train);
  for (int id : ds.manifest.validation_ids) ds.manifest.split_of[size_t(id)] = Split::validation;
  for (int id : ds.manifest.test_ids) ds.manifest.split_of[size_t(id)] = Split::test;

  npy::Array imgs = npy::load(dir + "/images.npy");
  npy::Array maps = npy::load(dir + "/gtmaps.npy");
  if (imgs.dtype != "<f4" || maps.dtype != "<f4")
    throw ValidationError("dataset arrays must be float32");
  const int hw = ds.manifest.spec.image_size;
  if (imgs.shape != std::vector<size_t>{size_t(n), size_t(hw), size_t(hw)})
    throw ValidationError("images.npy shape does not match the manifest spec");
  ds.images = Tensor<float>(n, 1, hw, hw);
  std::copy(imgs.as_f32(), imgs.as_f32() + ds.images.size(), ds.images.data());
  ds.gtmaps = Tensor<float>(n, 1, hw, hw);
  std::copy(maps.as_f32(), maps.as_f32() + ds.gtmaps.size(), ds.gtmaps.data());

  if (dataset_digest(ds.images, ds.gtmaps) != ds.manifest.digest)
    throw std::runtime_error("dataset digest mismatch: files were modified after generation");
  return ds;
}

}  // namespace vagan::synthgen
