#include "dnfer/augment.hpp"

#include <algorithm>
#include <cmath>

#include "dnfer/error.hpp"

namespace dnfer {

namespace {

const std::vector<std::string> kVectorPool = {"jitter", "dropout", "scale", "rotate"};
const std::vector<std::string> kImagePool = {"invert", "rotate", "translate", "contrast"};

bool known_transform(const std::string& name) {
  for (const auto& n : kVectorPool)
    if (n == name) return true;
  for (const auto& n : kImagePool)
    if (n == name) return true;
  return false;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// --- vector transforms ---

void vec_jitter(std::vector<double>& x, double magnitude, Rng& rng) {
  for (double& v : x) v += rng.normal(0.0, magnitude);
}

void vec_dropout(std::vector<double>& x, double magnitude, Rng& rng) {
  for (double& v : x)
    if (rng.bernoulli(magnitude)) v = 0.0;
}

void vec_scale(std::vector<double>& x, double magnitude, Rng& rng) {
  const double s = 1.0 + magnitude * rng.uniform(-1.0, 1.0);
  for (double& v : x) v *= s;
}

void vec_rotate(std::vector<double>& x, double magnitude, Rng& rng) {
  if (x.size() < 2) return;  // no 2-plane to rotate in
  const std::size_t i = static_cast<std::size_t>(rng.below(x.size()));
  std::size_t j = static_cast<std::size_t>(rng.below(x.size() - 1));
  if (j >= i) ++j;
  const double theta = magnitude * 1.57079632679489662 * rng.uniform(-1.0, 1.0);
  const double c = std::cos(theta), s = std::sin(theta);
  const double xi = x[i], xj = x[j];
  x[i] = c * xi - s * xj;
  x[j] = s * xi + c * xj;
}

// --- image transforms (row-major h*w, values in [0,1]) ---

void img_hflip(std::vector<double>& x, std::size_t h, std::size_t w) {
  for (std::size_t r = 0; r < h; ++r)
    std::reverse(x.begin() + static_cast<std::ptrdiff_t>(r * w),
                 x.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
}

void img_shift(std::vector<double>& x, std::size_t h, std::size_t w, int dr, int dc) {
  if (dr == 0 && dc == 0) return;
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const long long sr = static_cast<long long>(r) - dr;
    if (sr < 0 || sr >= static_cast<long long>(h)) continue;
    for (std::size_t c = 0; c < w; ++c) {
      const long long sc = static_cast<long long>(c) - dc;
      if (sc < 0 || sc >= static_cast<long long>(w)) continue;
      out[r * w + c] = x[static_cast<std::size_t>(sr) * w + static_cast<std::size_t>(sc)];
    }
  }
  x = std::move(out);
}

void img_invert(std::vector<double>& x, double magnitude) {
  for (double& v : x) v = (1.0 - magnitude) * v + magnitude * (1.0 - v);
}

void img_rotate(std::vector<double>& x, std::size_t h, std::size_t w,
                double magnitude, Rng& rng) {
  const double theta = magnitude * 0.523598775598299 * rng.uniform(-1.0, 1.0);  // up to 30 deg
  const double c = std::cos(theta), s = std::sin(theta);
  const double cr = (static_cast<double>(h) - 1.0) / 2.0;
  const double cc = (static_cast<double>(w) - 1.0) / 2.0;
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t col = 0; col < w; ++col) {
      // inverse map, nearest neighbour
      const double dy = static_cast<double>(r) - cr;
      const double dx = static_cast<double>(col) - cc;
      const long long sr = std::llround(cr + c * dy + s * dx);
      const long long sc = std::llround(cc - s * dy + c * dx);
      if (sr < 0 || sr >= static_cast<long long>(h) || sc < 0 ||
          sc >= static_cast<long long>(w))
        continue;
      out[r * w + col] = x[static_cast<std::size_t>(sr) * w + static_cast<std::size_t>(sc)];
    }
  }
  x = std::move(out);
}

void img_translate(std::vector<double>& x, std::size_t h, std::size_t w,
                   double magnitude, Rng& rng) {
  const auto span = [&](std::size_t extent) {
    return std::max(1LL, std::llround(magnitude * 0.3 * static_cast<double>(extent)));
  };
  const long long mr = span(h), mc = span(w);
  const int dr = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * mr + 1))) -
                 static_cast<int>(mr);
  const int dc = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * mc + 1))) -
                 static_cast<int>(mc);
  img_shift(x, h, w, dr, dc);
}

void img_contrast(std::vector<double>& x, double magnitude, Rng& rng) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  const double factor = 1.0 + 0.8 * magnitude * rng.uniform(-1.0, 1.0);
  for (double& v : x) v = clamp01(mean + factor * (v - mean));
}

void apply_strong(const std::string& name, std::vector<double>& x,
                  const SampleShape& shape, double magnitude, Rng& rng) {
  if (shape.modality == Modality::kVector) {
    if (name == "jitter") return vec_jitter(x, magnitude, rng);
    if (name == "dropout") return vec_dropout(x, magnitude, rng);
    if (name == "scale") return vec_scale(x, magnitude, rng);
    if (name == "rotate") return vec_rotate(x, magnitude, rng);
  } else {
    if (name == "invert") return img_invert(x, magnitude);
    if (name == "rotate") return img_rotate(x, shape.height, shape.width, magnitude, rng);
    if (name == "translate") return img_translate(x, shape.height, shape.width, magnitude, rng);
    if (name == "contrast") return img_contrast(x, magnitude, rng);
  }
  throw ConfigError("unknown transform '" + name + "' for this modality");
}

}  // namespace

void AugmentationPolicy::validate() const {
  if (strong.transform_pool.empty())
    throw ConfigError("augmentation: empty strong transform pool");
  if (strong.picks_per_sample < 1 ||
      static_cast<std::size_t>(strong.picks_per_sample) > strong.transform_pool.size())
    throw ConfigError("augmentation: picks_per_sample must lie in [1, pool size]");
  if (strong.magnitude <= 0.0 || strong.magnitude > 1.0)
    throw ConfigError("augmentation: magnitude must lie in (0,1]");
  if (weak.jitter_sigma < 0.0 || weak.shift_max < 0 || weak.flip_prob < 0.0 ||
      weak.flip_prob > 1.0)
    throw ConfigError("augmentation: bad weak parameters");
  for (const std::string& name : strong.transform_pool)
    if (!known_transform(name))
      throw ConfigError("augmentation: unknown transform '" + name + "'");
}

AugmentationPolicy AugmentationPolicy::defaults_for(const Dataset& dataset) {
  AugmentationPolicy policy;
  if (dataset.modality == Modality::kVector) {
    policy.weak.jitter_sigma = 0.05 * dataset.feature_std();
    policy.strong.transform_pool = kVectorPool;
  } else {
    policy.weak.flip_prob = 0.5;
    const double scale = static_cast<double>(std::min(dataset.image_height,
                                                      dataset.image_width));
    policy.weak.shift_max = std::max(1, static_cast<int>(std::lround(4.0 * scale / 28.0)));
    policy.strong.transform_pool = kImagePool;
  }
  policy.strong.picks_per_sample = 2;
  policy.strong.magnitude = 0.1;
  return policy;
}

std::vector<double> augment(const LabeledSample& sample, const SampleShape& shape,
                            const AugmentationPolicy& policy, View view, Rng& rng) {
  policy.validate();
  std::vector<double> x = sample.features;
  if (view == View::kWeak) {
    if (shape.modality == Modality::kVector) {
      if (policy.weak.jitter_sigma > 0.0)
        for (double& v : x) v += rng.normal(0.0, policy.weak.jitter_sigma);
    } else {
      if (policy.weak.flip_prob > 0.0 && rng.bernoulli(policy.weak.flip_prob))
        img_hflip(x, shape.height, shape.width);
      if (policy.weak.shift_max > 0) {
        const std::uint64_t range = 2ULL * policy.weak.shift_max + 1;
        const int dr = static_cast<int>(rng.below(range)) - policy.weak.shift_max;
        const int dc = static_cast<int>(rng.below(range)) - policy.weak.shift_max;
        img_shift(x, shape.height, shape.width, dr, dc);
      }
    }
    return x;
  }

  // strong view: compose picks_per_sample transforms drawn without replacement
  std::vector<std::size_t> order(policy.strong.transform_pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int k = 0; k < policy.strong.picks_per_sample; ++k) {
    const std::size_t j =
        static_cast<std::size_t>(k) +
        static_cast<std::size_t>(rng.below(order.size() - static_cast<std::size_t>(k)));
    std::swap(order[static_cast<std::size_t>(k)], order[j]);
    apply_strong(policy.strong.transform_pool[order[static_cast<std::size_t>(k)]], x,
                 shape, policy.strong.magnitude, rng);
  }
  return x;
}

}  // namespace dnfer
