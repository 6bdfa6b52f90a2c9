#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vagan/rng.hpp"
#include "vagan/tensor.hpp"

namespace vagan::synthgen {

struct SplitFractions {
  double train = 0.64;
  double validation = 0.16;
  double test = 0.20;
};

// All knobs of the two-class benchmark. Class-1 images carry two additive
// squares: one centered, one peripheral (lower-right for subtype A,
// upper-left for subtype B), offset by at most max_offset per axis.
struct DatasetSpec {
  int num_images = 10000;
  int image_size = 112;
  double noise_std = 1.0;
  double blur_sigma = 2.5;
  double effect_amplitude = 0.6;
  int square_size = 20;
  int max_offset = 5;
  double subtype_ratio = 0.5;  // fraction of class-1 images with subtype A
  SplitFractions split_fractions;
  uint64_t seed = 42;

  void validate() const;  // throws ValidationError naming the offending field
};

// Distance of the peripheral anchors from the image border; max_offset must
// stay within it so offsets never push a square out of bounds.
inline constexpr int kPeripheralMargin = 8;

enum class Subtype { none, A, B };
enum class Split { train, validation, test };

std::string subtype_name(Subtype s);
Subtype subtype_from_name(const std::string& s);
std::string split_name(Split s);

struct GroundTruthEffectMap {
  Tensor<float> values;  // (1,1,H,W), nonzero entries all equal effect_amplitude
  Subtype subtype = Subtype::none;
  int offset_y = 0, offset_x = 0;
};

struct DatasetManifest {
  DatasetSpec spec;
  std::vector<int> labels;        // per sample_id
  std::vector<Subtype> subtypes;  // per sample_id
  std::vector<Split> split_of;    // per sample_id
  std::vector<int> train_ids, validation_ids, test_ids;
  std::string digest;

  const std::vector<int>& ids_of(Split s) const {
    return s == Split::train ? train_ids : s == Split::validation ? validation_ids : test_ids;
  }
  std::vector<int> class_ids(Split s, int label) const;
};

struct Dataset {
  DatasetManifest manifest;
  Tensor<float> images;  // (N,1,H,W)
  Tensor<float> gtmaps;  // (N,1,H,W); zero map where no ground truth exists

  int size() const { return images.n(); }
  int image_size() const { return images.h(); }
  // One-sample views (copies) for attribution/eval call sites.
  Tensor<float> image(int sample_id) const;
  Tensor<float> gtmap(int sample_id) const;
};

// Blurred iid Gaussian noise; circular separable convolution so the
// post-blur variance law holds exactly at every pixel. blur_sigma -> 0
// degenerates to the raw noise field.
Tensor<float> make_background(const DatasetSpec& spec, Rng& rng);

GroundTruthEffectMap make_effect_map(Subtype subtype, const DatasetSpec& spec, Rng& rng);

// Deterministic in spec.seed: per-sample RNG streams are derived from
// (seed, sample_id), so generation order is immaterial.
Dataset generate_dataset(const DatasetSpec& spec);

// Stratified split assignment (exact per-class counts, largest remainder).
// Fills split_of and the id lists; deterministic in spec.seed.
void assign_splits(DatasetManifest& manifest);

std::string dataset_digest(const Tensor<float>& images, const Tensor<float>& gtmaps);

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace vagan::synthgen
