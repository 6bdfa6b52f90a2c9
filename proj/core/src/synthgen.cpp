#include "vagan/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vagan/digest.hpp"
#include "vagan/errors.hpp"

namespace vagan::synthgen {

namespace {

constexpr uint64_t kSubtypeStream = 0x5a5a0001;
constexpr uint64_t kSplitStream0 = 0x5a5a0010;

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ValidationError("DatasetSpec." + field + ": " + why);
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (sigma < 1e-12) return {1.0};  // unit impulse
  const int r = int(std::ceil(3.0 * sigma));
  std::vector<double> k(size_t(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    double v = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
    k[size_t(i + r)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Circular 1D convolution along rows, then columns (kernel is separable).
void blur_circular(std::vector<double>& img, int hw, const std::vector<double>& k) {
  if (k.size() == 1) return;
  const int r = int(k.size() / 2);
  std::vector<double> tmp(static_cast<size_t>(hw));
  // rows
  for (int y = 0; y < hw; ++y) {
    const double* row = img.data() + size_t(y) * hw;
    for (int x = 0; x < hw; ++x) {
      double acc = 0;
      for (int t = -r; t <= r; ++t) {
        int xx = x - t;
        xx %= hw;
        if (xx < 0) xx += hw;
        acc += k[size_t(t + r)] * row[xx];
      }
      tmp[size_t(x)] = acc;
    }
    std::copy(tmp.begin(), tmp.end(), img.begin() + size_t(y) * hw);
  }
  // columns
  std::vector<double> colbuf(static_cast<size_t>(hw));
  for (int x = 0; x < hw; ++x) {
    for (int y = 0; y < hw; ++y) {
      double acc = 0;
      for (int t = -r; t <= r; ++t) {
        int yy = y - t;
        yy %= hw;
        if (yy < 0) yy += hw;
        acc += k[size_t(t + r)] * img[size_t(yy) * hw + x];
      }
      colbuf[size_t(y)] = acc;
    }
    for (int y = 0; y < hw; ++y) img[size_t(y) * hw + x] = colbuf[size_t(y)];
  }
}

void paint_square(Tensor<float>& map, int top, int left, int side, float amplitude) {
  for (int y = top; y < top + side; ++y)
    for (int x = left; x < left + side; ++x) map.at(0, 0, y, x) = amplitude;
}

}  // namespace

void DatasetSpec::validate() const {
  require(num_images > 0, "num_images", "must be positive");
  require(num_images % 2 == 0, "num_images", "must be even for equal class counts");
  require(image_size > 0, "image_size", "must be positive");
  require(noise_std > 0, "noise_std", "must be positive");
  require(blur_sigma >= 0, "blur_sigma", "must be nonnegative");
  require(effect_amplitude >= 0, "effect_amplitude", "must be nonnegative");
  require(square_size > 0, "square_size", "must be positive");
  require(max_offset >= 0, "max_offset", "must be nonnegative");
  require(max_offset <= kPeripheralMargin, "max_offset",
          "must be at most the peripheral margin (" + std::to_string(kPeripheralMargin) + ")");
  require(image_size >= 2 * square_size + 2 * max_offset, "image_size",
          "must be at least 2*square_size + 2*max_offset");
  require(subtype_ratio >= 0 && subtype_ratio <= 1, "subtype_ratio", "must be in [0,1]");
  const double s =
      split_fractions.train + split_fractions.validation + split_fractions.test;
  require(std::abs(s - 1.0) < 1e-9, "split_fractions", "must sum to 1");
  require(split_fractions.train >= 0 && split_fractions.validation >= 0 &&
              split_fractions.test >= 0,
          "split_fractions", "must be nonnegative");
}

std::string subtype_name(Subtype s) {
  switch (s) {
    case Subtype::none: return "none";
    case Subtype::A: return "A";
    case Subtype::B: return "B";
  }
  return "?";
}

Subtype subtype_from_name(const std::string& s) {
  if (s == "none") return Subtype::none;
  if (s == "A") return Subtype::A;
  if (s == "B") return Subtype::B;
  throw ValidationError("unknown subtype: " + s);
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<int> DatasetManifest::class_ids(Split s, int label) const {
  std::vector<int> out;
  for (int id : ids_of(s))
    if (labels[size_t(id)] == label) out.push_back(id);
  return out;
}

Tensor<float> Dataset::image(int sample_id) const {
  Tensor<float> out(1, 1, images.h(), images.w());
  std::copy(images.sample(sample_id), images.sample(sample_id) + images.sample_size(), out.data());
  return out;
}

Tensor<float> Dataset::gtmap(int sample_id) const {
  Tensor<float> out(1, 1, gtmaps.h(), gtmaps.w());
  std::copy(gtmaps.sample(sample_id), gtmaps.sample(sample_id) + gtmaps.sample_size(), out.data());
  return out;
}

Tensor<float> make_background(const DatasetSpec& spec, Rng& rng) {
  spec.validate();
  const int hw = spec.image_size;
  std::vector<double> field(size_t(hw) * hw);
  for (auto& v : field) v = rng.normal() * spec.noise_std;
  blur_circular(field, hw, gaussian_kernel_1d(spec.blur_sigma));
  Tensor<float> out(1, 1, hw, hw);
  for (size_t i = 0; i < field.size(); ++i) out[i] = float(field[i]);
  return out;
}

GroundTruthEffectMap make_effect_map(Subtype subtype, const DatasetSpec& spec, Rng& rng) {
  if (subtype == Subtype::none) throw UsageError("make_effect_map requires subtype A or B");
  spec.validate();
  const int hw = spec.image_size, s = spec.square_size;
  GroundTruthEffectMap gt;
  gt.subtype = subtype;
  gt.values = Tensor<float>(1, 1, hw, hw);
  gt.offset_y = int(rng.uniform_int(-spec.max_offset, spec.max_offset));
  gt.offset_x = int(rng.uniform_int(-spec.max_offset, spec.max_offset));

  const int center = (hw - s) / 2;
  paint_square(gt.values, center, center, s, float(spec.effect_amplitude));
  const int anchor =
      subtype == Subtype::A ? hw - kPeripheralMargin - s : kPeripheralMargin;
  paint_square(gt.values, anchor + gt.offset_y, anchor + gt.offset_x, s,
               float(spec.effect_amplitude));
  return gt;
}

void assign_splits(DatasetManifest& manifest) {
  const auto& spec = manifest.spec;
  const int n = spec.num_images;
  manifest.split_of.assign(size_t(n), Split::train);
  manifest.train_ids.clear();
  manifest.validation_ids.clear();
  manifest.test_ids.clear();

  const double fracs[3] = {spec.split_fractions.train, spec.split_fractions.validation,
                           spec.split_fractions.test};
  for (int label = 0; label < 2; ++label) {
    std::vector<int> ids;
    for (int id = 0; id < n; ++id)
      if (manifest.labels[size_t(id)] == label) ids.push_back(id);
    Rng rng = Rng::stream(spec.seed, kSplitStream0 + uint64_t(label));
    rng.shuffle(ids);

    // Largest-remainder allocation keeps per-class totals exact.
    const size_t total = ids.size();
    size_t counts[3];
    double rema[3];
    size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      double want = fracs[k] * double(total);
      counts[k] = size_t(std::floor(want));
      rema[k] = want - double(counts[k]);
      assigned += counts[k];
    }
    while (assigned < total) {
      int best = 0;
      for (int k = 1; k < 3; ++k)
        if (rema[k] > rema[best]) best = k;
      ++counts[best];
      rema[best] = -1;
      ++assigned;
    }
    size_t pos = 0;
    const Split order[3] = {Split::train, Split::validation, Split::test};
    for (int k = 0; k < 3; ++k) {
      for (size_t j = 0; j < counts[k]; ++j, ++pos) manifest.split_of[size_t(ids[pos])] = order[k];
    }
  }
  for (int id = 0; id < n; ++id) {
    switch (manifest.split_of[size_t(id)]) {
      case Split::train: manifest.train_ids.push_back(id); break;
      case Split::validation: manifest.validation_ids.push_back(id); break;
      case Split::test: manifest.test_ids.push_back(id); break;
    }
  }
}

std::string dataset_digest(const Tensor<float>& images, const Tensor<float>& gtmaps) {
  Sha256 h;
  h.update(images.data(), images.size() * sizeof(float));
  h.update(gtmaps.data(), gtmaps.size() * sizeof(float));
  return h.hex();
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  const int n = spec.num_images, hw = spec.image_size;
  Dataset ds;
  ds.manifest.spec = spec;
  ds.images = Tensor<float>(n, 1, hw, hw);
  ds.gtmaps = Tensor<float>(n, 1, hw, hw);
  ds.manifest.labels.assign(size_t(n), 0);
  ds.manifest.subtypes.assign(size_t(n), Subtype::none);

  // First half class 0, second half class 1; subtype A for the first
  // round(n1 * ratio) of a seeded shuffle of the class-1 ids.
  const int n1 = n / 2;
  for (int id = n1; id < n; ++id) ds.manifest.labels[size_t(id)] = 1;
  std::vector<int> ones(static_cast<size_t>(n1));
  std::iota(ones.begin(), ones.end(), n1);
  Rng subrng = Rng::stream(spec.seed, kSubtypeStream);
  subrng.shuffle(ones);
  const int n_a = int(std::llround(spec.subtype_ratio * double(n1)));
  for (int i = 0; i < n1; ++i)
    ds.manifest.subtypes[size_t(ones[size_t(i)])] = i < n_a ? Subtype::A : Subtype::B;

  for (int id = 0; id < n; ++id) {
    Rng rng = Rng::stream(spec.seed, uint64_t(id));
    Tensor<float> bg = make_background(spec, rng);
    float* dst = ds.images.sample(id);
    std::copy(bg.data(), bg.data() + bg.size(), dst);
    if (ds.manifest.labels[size_t(id)] == 1) {
      GroundTruthEffectMap gt = make_effect_map(ds.manifest.subtypes[size_t(id)], spec, rng);
      float* gdst = ds.gtmaps.sample(id);
      std::copy(gt.values.data(), gt.values.data() + gt.values.size(), gdst);
      for (size_t i = 0; i < bg.size(); ++i) dst[i] += gdst[i];  // additive, no clipping
    }
  }

  assign_splits(ds.manifest);
  ds.manifest.digest = dataset_digest(ds.images, ds.gtmaps);
  return ds;
}

}  // namespace vagan::synthgen
