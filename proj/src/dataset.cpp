#include "dnfer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "dnfer/error.hpp"
#include "dnfer/rng.hpp"

namespace dnfer {

namespace {

// Deterministic class-mean layout, independent of the data seed so datasets
// drawn with different seeds share their geometry. When C <= dim each class
// mean lies on its own orthonormal direction (fixed-seed Gram-Schmidt, so the
// class signal is spread over all coordinates rather than pinned to an axis):
// even-indexed classes at radius separation/sqrt(2), odd-indexed at twice
// that. Even-even pairs then sit at distance exactly `separation` (the
// confusable pairs threshold dynamics get exercised on) and every other pair
// farther. Larger C falls back to a circle in the first two coordinates with
// chord length separation.
std::vector<std::vector<double>> class_means(int num_classes, std::size_t dim,
                                             double separation) {
  std::vector<std::vector<double>> means(static_cast<std::size_t>(num_classes),
                                         std::vector<double>(dim, 0.0));
  if (dim == 1) {
    for (int c = 0; c < num_classes; ++c) means[c][0] = separation * c;
    return means;
  }
  if (static_cast<std::size_t>(num_classes) <= dim) {
    Rng rng(0x6D65616E73ULL);  // fixed: geometry never depends on the data seed
    std::vector<std::vector<double>> dirs;  // orthonormal, one per class
    for (int c = 0; c < num_classes; ++c) {
      std::vector<double> dir(dim);
      for (;;) {
        for (std::size_t k = 0; k < dim; ++k) dir[k] = rng.normal();
        for (const auto& prev : dirs) {
          double dot = 0.0;
          for (std::size_t k = 0; k < dim; ++k) dot += dir[k] * prev[k];
          for (std::size_t k = 0; k < dim; ++k) dir[k] -= dot * prev[k];
        }
        double norm = 0.0;
        for (double v : dir) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 1e-6) {
          for (std::size_t k = 0; k < dim; ++k) dir[k] /= norm;
          break;
        }
      }
      const double radius =
          (c % 2 == 0) ? separation / std::sqrt(2.0) : separation * std::sqrt(2.0);
      for (std::size_t k = 0; k < dim; ++k)
        means[static_cast<std::size_t>(c)][k] = radius * dir[k];
      dirs.push_back(std::move(dir));
    }
    return means;
  }
  const double pi = 3.14159265358979323846;
  const double radius = separation / (2.0 * std::sin(pi / num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const double angle = 2.0 * pi * c / num_classes;
    means[c][0] = radius * std::cos(angle);
    means[c][1] = radius * std::sin(angle);
  }
  return means;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path,
                          std::size_t offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw ParseError(path + ": truncated header at byte offset " + std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

void Dataset::validate() const {
  if (samples.empty()) throw InputError("dataset is empty");
  if (num_classes < 2) throw InputError("dataset needs at least 2 classes");
  const std::size_t dim = samples.front().features.size();
  std::unordered_set<std::uint64_t> ids;
  ids.reserve(samples.size());
  for (const LabeledSample& s : samples) {
    if (s.features.size() != dim) throw InputError("inhomogeneous feature dimensions");
    for (double v : s.features)
      if (!std::isfinite(v)) throw InputError("non-finite feature value");
    if (s.observed_label < 0 || s.observed_label >= num_classes)
      throw InputError("observed label out of range");
    if (s.true_label && (*s.true_label < 0 || *s.true_label >= num_classes))
      throw InputError("true label out of range");
    if (!ids.insert(s.sample_id).second) throw InputError("duplicate sample_id");
  }
}

double Dataset::feature_std() const {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (const LabeledSample& s : samples)
    for (double v : s.features) {
      sum += v;
      sum_sq += v * v;
      ++n;
    }
  if (n == 0) return 0.0;
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
  return std::sqrt(var);
}

Dataset generate_blobs(int num_classes, const std::vector<std::size_t>& samples_per_class,
                       std::size_t dim, double separation, std::uint64_t seed,
                       Split split) {
  if (num_classes < 2) throw ConfigError("generate_blobs: need at least 2 classes");
  if (dim < 1) throw ConfigError("generate_blobs: dim must be >= 1");
  if (samples_per_class.size() != static_cast<std::size_t>(num_classes))
    throw ConfigError("generate_blobs: one count per class required");
  for (std::size_t n : samples_per_class)
    if (n == 0) throw ConfigError("generate_blobs: every class needs >= 1 sample");

  const auto means = class_means(num_classes, dim, separation);
  Rng rng(seed);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  ds.modality = Modality::kVector;
  std::uint64_t next_id = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < samples_per_class[static_cast<std::size_t>(c)]; ++i) {
      LabeledSample s;
      s.features.resize(dim);
      for (std::size_t k = 0; k < dim; ++k)
        s.features[k] = means[static_cast<std::size_t>(c)][k] + rng.normal();
      s.observed_label = c;
      s.true_label = c;
      s.sample_id = next_id++;
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

Dataset load_csv(const std::string& path, int num_classes_override) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file (missing header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_line(line);
  bool has_true_label = false;
  std::size_t dim = 0;
  if (header.size() >= 2 && header.back() == "true_label" &&
      header[header.size() - 2] == "label") {
    has_true_label = true;
    dim = header.size() - 2;
  } else if (!header.empty() && header.back() == "label") {
    dim = header.size() - 1;
  } else {
    throw ParseError(path + ": line 1: header must end with 'label' or 'label,true_label'");
  }
  if (dim == 0) throw ParseError(path + ": line 1: no feature columns");
  for (std::size_t i = 0; i < dim; ++i)
    if (header[i] != "feature_" + std::to_string(i))
      throw ParseError(path + ": line 1: expected column 'feature_" + std::to_string(i) +
                       "', got '" + header[i] + "'");

  Dataset ds;
  ds.modality = Modality::kVector;
  std::uint64_t id = 0;
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size())
      throw ParseError(path + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    LabeledSample s;
    s.features.resize(dim);
    try {
      for (std::size_t i = 0; i < dim; ++i) s.features[i] = std::stod(fields[i]);
      s.observed_label = std::stoi(fields[dim]);
      if (has_true_label) s.true_label = std::stoi(fields[dim + 1]);
    } catch (const std::exception&) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": unparsable number");
    }
    if (s.observed_label < 0)
      throw ParseError(path + ": line " + std::to_string(line_no) + ": negative label");
    max_label = std::max(max_label, s.observed_label);
    if (s.true_label) max_label = std::max(max_label, *s.true_label);
    s.sample_id = id++;
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw ParseError(path + ": no data rows");
  ds.num_classes = num_classes_override > 0 ? num_classes_override : max_label + 1;
  if (max_label >= ds.num_classes)
    throw ParseError(path + ": label " + std::to_string(max_label) +
                     " >= configured class count " + std::to_string(ds.num_classes));
  ds.validate();
  return ds;
}

Dataset load_idx(const std::string& image_path, const std::string& label_path,
                 int num_classes_override) {
  std::ifstream images(image_path, std::ios::binary);
  if (!images) throw InputError("cannot open " + image_path);
  std::ifstream labels(label_path, std::ios::binary);
  if (!labels) throw InputError("cannot open " + label_path);

  const std::uint32_t img_magic = read_be_u32(images, image_path, 0);
  if (img_magic != 0x00000803u)
    throw ParseError(image_path + ": bad magic at byte offset 0: expected 0x00000803, got 0x" +
                     [&] { std::ostringstream o; o << std::hex << img_magic; return o.str(); }());
  const std::uint32_t img_count = read_be_u32(images, image_path, 4);
  const std::uint32_t rows = read_be_u32(images, image_path, 8);
  const std::uint32_t cols = read_be_u32(images, image_path, 12);

  const std::uint32_t lbl_magic = read_be_u32(labels, label_path, 0);
  if (lbl_magic != 0x00000801u)
    throw ParseError(label_path + ": bad magic at byte offset 0: expected 0x00000801, got 0x" +
                     [&] { std::ostringstream o; o << std::hex << lbl_magic; return o.str(); }());
  const std::uint32_t lbl_count = read_be_u32(labels, label_path, 4);
  if (img_count != lbl_count)
    throw ParseError(image_path + ": image count " + std::to_string(img_count) +
                     " != label count " + std::to_string(lbl_count));

  Dataset ds;
  ds.modality = Modality::kImage;
  ds.image_height = rows;
  ds.image_width = cols;
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> pixel_buf(pixels);
  int max_label = -1;
  for (std::uint32_t i = 0; i < img_count; ++i) {
    images.read(reinterpret_cast<char*>(pixel_buf.data()),
                static_cast<std::streamsize>(pixels));
    if (!images)
      throw ParseError(image_path + ": truncated pixel data at byte offset " +
                       std::to_string(16 + static_cast<std::size_t>(i) * pixels));
    int lbl = labels.get();
    if (lbl == EOF)
      throw ParseError(label_path + ": truncated labels at byte offset " +
                       std::to_string(8 + i));
    LabeledSample s;
    s.features.resize(pixels);
    for (std::size_t p = 0; p < pixels; ++p) s.features[p] = pixel_buf[p] / 255.0;
    s.observed_label = lbl;
    s.sample_id = i;
    max_label = std::max(max_label, lbl);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw ParseError(image_path + ": zero images");
  ds.num_classes = num_classes_override > 0 ? num_classes_override : max_label + 1;
  if (max_label >= ds.num_classes)
    throw ParseError(label_path + ": label " + std::to_string(max_label) +
                     " >= configured class count " + std::to_string(ds.num_classes));
  ds.validate();
  return ds;
}

NoiseResult inject_noise(const Dataset& dataset, const NoiseSpec& spec) {
  dataset.validate();
  if (dataset.split != Split::kTrain)
    throw InputError("inject_noise: only train splits are corrupted");
  if (spec.rate < 0.0 || spec.rate > 1.0)
    throw ConfigError("inject_noise: rate must lie in [0,1]");

  NoiseResult result;
  result.dataset = dataset;
  result.flipped.assign(dataset.size(), 0);
  for (LabeledSample& s : result.dataset.samples)
    if (!s.true_label) s.true_label = s.observed_label;

  const auto n_flips = static_cast<std::size_t>(
      std::llround(spec.rate * static_cast<double>(dataset.size())));
  if (n_flips == 0) return result;

  Rng rng(spec.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const int c = result.dataset.num_classes;
  for (std::size_t k = 0; k < n_flips; ++k) {
    LabeledSample& s = result.dataset.samples[order[k]];
    // uniform over the C-1 classes != true label
    int draw = static_cast<int>(rng.below(static_cast<std::uint64_t>(c - 1)));
    if (draw >= *s.true_label) ++draw;
    s.observed_label = draw;
    result.flipped[order[k]] = 1;
  }
  return result;
}

std::string noise_mask_csv(const Dataset& dataset,
                           const std::vector<std::uint8_t>& flipped) {
  if (flipped.size() != dataset.size())
    throw InputError("noise_mask_csv: flag vector length mismatch");
  std::string out = "sample_id,flipped\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out += std::to_string(dataset.samples[i].sample_id);
    out += flipped[i] ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace dnfer
